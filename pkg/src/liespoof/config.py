"""Scenario files: JSON with units spelled out in every field name."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .dynamics import Segment, generator, inputs_from_segments, simulate
from .lie_core import SE2, get_group
from .observer import DetectorConfig, get_suite

SIGNAL_KINDS = ("none", "constant", "along_track")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrajectorySpec:
    x0: tuple  # (x_m, y_m, theta_rad)
    segments: tuple

    def build(self, dt: float, duration: float):
        inputs = inputs_from_segments(self.segments, dt, duration)
        return simulate(SE2.from_pose(*self.x0), inputs, dt)


@dataclass(frozen=True)
class AttackSpec:
    onset_s: float
    kind: str = "none"
    xi: tuple = (0.0, 0.0, 0.0)
    alpha_s: float = 0.0
    ramp_s: float = 0.0
    epsilon_residual: float = 0.0
    residual_direction: tuple = (0.0, 1.0, 0.0)
    experiments: int = 1
    noise_std: float = 0.0
    victim_onset_s: Optional[float] = None
    heading_source: str = "measured"

    def ramp(self, t: float) -> float:
        if t < self.onset_s - 1e-9:
            return 0.0
        if self.ramp_s <= 0:
            return 1.0
        return min(1.0, (t - self.onset_s) / self.ramp_s)

    def residual(self) -> np.ndarray:
        d = np.asarray(self.residual_direction, dtype=float)
        n = np.linalg.norm(d)
        return np.zeros(3) if n == 0 else self.epsilon_residual * d / n

    def ideal(self, f_e: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.asarray(self.xi, dtype=float)
        if self.kind == "along_track":
            return self.alpha_s * f_e
        return np.zeros(3)

    def signals(self, trajectory) -> np.ndarray:
        """Per-state displacement xi_k = ramp(t_k) (ideal_k + residual)."""
        out = np.zeros((len(trajectory.states), 3))
        if self.kind == "none" and self.epsilon_residual == 0:
            return out
        times = trajectory.times()
        for k in range(len(trajectory.states)):
            u = trajectory.inputs[max(k - 1, 0)] if trajectory.inputs else None
            f_e = generator(u) if u is not None else np.zeros(3)
            out[k] = self.ramp(times[k]) * (self.ideal(f_e) + self.residual())
        return out


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    dt: float
    duration: float
    nominal: TrajectorySpec
    victim: TrajectorySpec
    attack: AttackSpec
    detector: DetectorConfig
    group: str = "SE2"
    suite: str = "se2_mixed"
    seed: int = 0
    output_dir: str = "out"
    source: Optional[str] = field(default=None, compare=False)

    def with_overrides(self, seed: Optional[int] = None, output_dir: Optional[str] = None) -> "ScenarioConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if output_dir is not None:
            cfg = replace(cfg, output_dir=output_dir)
        return cfg

    def onset_index(self, trajectory, onset_s: float) -> int:
        times = trajectory.times()
        idx = np.nonzero(times >= onset_s - 1e-9)[0]
        return int(idx[0]) if idx.size else len(times)


def _req(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing '{key}' in {where}")
    return d[key]


def _num(d: dict, key: str, where: str, default=None) -> float:
    value = d.get(key, default) if default is not None else _req(d, key, where)
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{key}' in {where} must be a number") from None
    if not math.isfinite(value):
        raise ConfigError(f"'{key}' in {where} must be finite")
    return value


def _trajectory(d: dict, where: str) -> TrajectorySpec:
    x0 = d.get("x0", {})
    pose = (_num(x0, "x_m", where, 0.0), _num(x0, "y_m", where, 0.0), _num(x0, "theta_rad", where, 0.0))
    raw = _req(d, "inputs", where)
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"'inputs' in {where} must be a non-empty list")
    segs = tuple(
        Segment(_num(s, "t_s", f"{where}.inputs"), _num(s, "v_mps", f"{where}.inputs"), _num(s, "omega_radps", f"{where}.inputs"))
        for s in raw
    )
    return TrajectorySpec(pose, segs)


def _vector(value, where: str) -> tuple:
    try:
        vec = tuple(float(c) for c in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must be a list of numbers") from None
    if len(vec) != 3:
        raise ConfigError(f"{where} must have 3 components (f, l, theta)")
    return vec


def parse_config(data: dict, source: Optional[str] = None) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a JSON object")
    dt = _num(data, "dt_s", "scenario")
    duration = _num(data, "duration_s", "scenario")
    if dt <= 0:
        raise ConfigError("dt_s must be positive")
    if duration <= 0:
        raise ConfigError("duration_s must be positive")
    nominal = _trajectory(_req(data, "nominal", "scenario"), "nominal")
    victim = _trajectory(data["victim"], "victim") if "victim" in data else nominal

    a = data.get("attack", {"onset_s": 0.0})
    sig = a.get("signal", {"kind": "none"})
    kind = sig.get("kind", "none")
    if kind not in SIGNAL_KINDS:
        raise ConfigError(f"attack.signal.kind must be one of {SIGNAL_KINDS}")
    attack = AttackSpec(
        onset_s=_num(a, "onset_s", "attack"),
        kind=kind,
        xi=_vector(sig.get("xi", (0.0, 0.0, 0.0)), "attack.signal.xi"),
        alpha_s=_num(sig, "alpha_s", "attack.signal", 0.0),
        ramp_s=_num(a, "ramp_s", "attack", 0.0),
        epsilon_residual=_num(a, "epsilon_residual_m", "attack", 0.0),
        residual_direction=_vector(a.get("residual_direction", (0.0, 1.0, 0.0)), "attack.residual_direction"),
        experiments=int(_num(a, "experiments", "attack", 1)),
        noise_std=_num(a, "noise_std_m", "attack", 0.0),
        victim_onset_s=_num(a, "victim_onset_s", "attack") if "victim_onset_s" in a else None,
        heading_source=str(a.get("heading_source", "measured")),
    )
    if kind == "constant" and "xi" not in sig:
        raise ConfigError("constant attack signal needs 'xi'")
    for label, t in (("onset_s", attack.onset_s), ("victim_onset_s", attack.victim_onset_s)):
        if t is not None and not 0 <= t <= duration:
            raise ConfigError(f"attack.{label} must lie within the scenario duration")
    if attack.experiments < 1:
        raise ConfigError("attack.experiments must be at least 1")
    if attack.ramp_s < 0 or attack.noise_std < 0 or attack.epsilon_residual < 0:
        raise ConfigError("ramp, noise and residual sizes must be non-negative")
    if attack.heading_source not in ("measured", "truth"):
        raise ConfigError("attack.heading_source must be 'measured' or 'truth'")

    det = data.get("detector", {})
    try:
        detector = DetectorConfig(
            tau=_num(det, "tau_m", "detector", 5.0),
            gain=_num(det, "kappa", "detector", 0.35),
            gain_mode=str(det.get("gain_mode", "chart")),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"detector: {exc}") from None

    group = str(data.get("group", "SE2"))
    suite = str(data.get("suite", "se2_mixed"))
    try:
        grp = get_group(group)
        get_suite(suite)
    except (ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from None
    if grp.name != "SE2":
        raise ConfigError("scenarios currently run on SE2 only; other groups are library-level")

    cfg = ScenarioConfig(
        name=str(data.get("name", "scenario")),
        dt=dt,
        duration=duration,
        nominal=nominal,
        victim=victim,
        attack=attack,
        detector=detector,
        group=group,
        suite=suite,
        seed=int(_num(data, "seed", "scenario", 0)),
        output_dir=str(data.get("output_dir", "out")),
        source=source,
    )
    try:
        nominal.build(dt, duration)
        victim.build(dt, duration)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    return parse_config(data, str(path))


def builtin_scenario(name: str) -> ScenarioConfig:
    """Load one of the shipped scenario fixtures by stem name."""
    ref = resources.files("liespoof").joinpath("scenarios", f"{name}.json")
    if not ref.is_file():
        raise ConfigError(f"no built-in scenario named {name!r}")
    return parse_config(json.loads(ref.read_text()), f"builtin:{name}")


def builtin_scenario_names() -> list[str]:
    folder = resources.files("liespoof").joinpath("scenarios")
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))
