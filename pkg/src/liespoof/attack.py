"""Attacker pipeline: collect spoofing data, learn displacements, transfer.

Also houses the deviation identities for imperfect attacks: the dynamical
impact ``exp(xi + Ad rho)`` with its ``||rho|| ||Ad||`` bound, and the realized
invariant error ``exp(-(eta + Ad rho_eta)) exp(xi + rho_xi)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .centralizer import SubspaceBasis, commuting_subspace, decompose
from .dynamics import Trajectory, fmt, generator
from .lie_core import SE2, CutLocusError, LieGroupSpec
from .observer import (
    CHART_TOL,
    ChartInversionError,
    DetectorConfig,
    ObservationSuite,
    StepFault,
    initial_state,
    observer_step,
)


@dataclass(frozen=True)
class AttackDataset:
    """M experiments of N (nominal, attacked) measurement pairs."""

    nominal: np.ndarray  # (M, N, m)
    attacked: np.ndarray  # (M, N, m)
    x0_label: str = ""
    dt: float = 0.0

    def __post_init__(self):
        if self.nominal.shape != self.attacked.shape or self.nominal.ndim != 3:
            raise ValueError("nominal and attacked measurements must both be (M, N, m)")

    @property
    def experiments(self) -> int:
        return self.nominal.shape[0]

    @property
    def steps(self) -> int:
        return self.nominal.shape[1]


@dataclass(frozen=True)
class LearnedAttack:
    displacements: np.ndarray  # (N, n)
    residual_bound: float
    subspace: SubspaceBasis

    def to_json(self) -> str:
        return json.dumps(
            {"displacements": [[float(c) for c in xi] for xi in self.displacements], "epsilon": self.residual_bound}
        )

    @classmethod
    def from_json(cls, text: str, subspace: SubspaceBasis) -> "LearnedAttack":
        data = json.loads(text)
        return cls(np.array(data["displacements"], dtype=float), float(data["epsilon"]), subspace)


@dataclass(frozen=True)
class RichnessReport:
    rich: bool
    spans: bool
    span_rank: int
    subspace_dim: int
    max_residual: float
    epsilon: float
    failures: tuple = ()

    def __bool__(self) -> bool:
        return self.rich


def generate_dataset(
    nominal: Trajectory,
    attack_signals: Sequence[Sequence],
    suite: ObservationSuite,
    sensor_noise_std: float = 0.0,
    seed: int = 0,
    x0_label: str = "",
) -> AttackDataset:
    """Record h(x_k) against h(x_k exp(xi_k)) for every experiment."""
    group = suite.group
    rng = np.random.default_rng(seed)
    N = len(nominal.states)
    nom_rows, att_rows = [], []
    for i, signals in enumerate(attack_signals):
        if len(signals) != N:
            raise ValueError(f"experiment {i} has {len(signals)} signals for {N} trajectory states")
        z_nom = np.array([suite.measure(x) for x in nominal.states])
        z_att = np.array([suite.measure(group.compose(x, group.exp(xi))) for x, xi in zip(nominal.states, signals)])
        if sensor_noise_std > 0:
            z_att = z_att + rng.normal(0.0, sensor_noise_std, z_att.shape)
        nom_rows.append(z_nom)
        att_rows.append(z_att)
    return AttackDataset(np.array(nom_rows), np.array(att_rows), x0_label, nominal.dt)


def learn_displacements(
    ds: AttackDataset,
    suite: ObservationSuite,
    subspace: SubspaceBasis,
    chart_tol: float = CHART_TOL,
) -> LearnedAttack:
    """Recover xi_k = log(x_D^-1 x_a) per step; average over experiments.

    ``subspace`` is the analyst's true commuting subspace, used only to size
    the residual bound.
    """
    group = suite.group
    M, N, _ = ds.nominal.shape
    logs = np.zeros((M, N, group.dim_algebra))
    for i in range(M):
        for k in range(N):
            try:
                x_d = suite.chart_inverse(ds.nominal[i, k], None, chart_tol)
                x_a = suite.chart_inverse(ds.attacked[i, k], x_d, chart_tol)
                logs[i, k] = group.log(group.compose(group.inverse(x_d), x_a))
            except (ChartInversionError, CutLocusError) as exc:
                raise StepFault(k, exc) from exc
    eps = max(float(np.linalg.norm(decompose(xi, subspace).residual)) for xi in logs.reshape(-1, group.dim_algebra))
    return LearnedAttack(logs.mean(axis=0), eps, subspace)


def epsilon_richness(learned: LearnedAttack, subspace: SubspaceBasis, epsilon: float, tol: float = 1e-9) -> RichnessReport:
    ideals, worst = [], 0.0
    for xi in learned.displacements:
        d = decompose(xi, subspace)
        ideals.append(subspace.basis.T @ d.ideal)
        worst = max(worst, float(np.linalg.norm(d.residual)))
    dim = subspace.dim
    if dim == 0:
        rank = 0
    else:
        S = np.array(ideals).reshape(-1, dim)
        sv = np.linalg.svd(S, compute_uv=False)
        rank = int(np.sum(sv > tol * max(1.0, sv[0] if sv.size else 0.0))) if sv.size else 0
    spans = rank == dim
    bounded = worst <= epsilon
    failures = []
    if not spans:
        failures.append(f"ideal components span {rank} of {dim} subspace directions")
    if not bounded:
        failures.append(f"residual {worst:.6g} exceeds epsilon {epsilon:.6g}")
    return RichnessReport(spans and bounded, spans, rank, dim, worst, epsilon, tuple(failures))


def coordinated_lateral_offset(c: float, heading: float) -> np.ndarray:
    """Sensor offset realizing a body-lateral shift of ``c`` at ``heading``."""
    return np.array([-c * math.sin(heading), c * math.cos(heading), 0.0, c])


def spoof_measurement(
    true_meas,
    xi,
    suite: ObservationSuite,
    heading_estimate: Optional[float] = None,
    chart_tol: float = CHART_TOL,
) -> np.ndarray:
    """Shift a sensor tuple by the observation action of ``exp(xi)``.

    The attacker rebuilds the pose from the stream (heading from
    ``heading_estimate`` when given) and adds ``h(x exp(xi)) - h(x)``.
    """
    group = suite.group
    true_meas = np.asarray(true_meas, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if not np.any(xi):
        return true_meas.copy()
    if suite.name == "se2_mixed" and xi[0] == 0.0 and xi[2] == 0.0 and heading_estimate is not None:
        return true_meas + coordinated_lateral_offset(xi[1], heading_estimate)
    x = suite.chart_inverse(true_meas, None, chart_tol)
    if heading_estimate is not None and group.name == "SE2":
        px, py, _ = SE2.to_pose(x)
        x = SE2.from_pose(px, py, heading_estimate)
    return true_meas + suite.measure(group.compose(x, group.exp(xi))) - suite.measure(x)


def dynamical_impact(xi, g, group: LieGroupSpec = SE2) -> np.ndarray:
    """Conjugated displacement ``g exp(xi) g^-1`` (= exp(Ad_g xi))."""
    return group.conjugate(g, group.exp(xi))


def impact_bound(rho, g, group: LieGroupSpec = SE2) -> tuple[np.ndarray, float]:
    rho = np.asarray(rho, dtype=float)
    deviation = group.adjoint_right(g) @ rho
    return deviation, float(np.linalg.norm(rho)) * group.adjoint_operator_norm(g)


def realized_error(eta, rho_eta, xi, rho_xi, g, group: LieGroupSpec = SE2) -> np.ndarray:
    Ad = group.adjoint_right(g)
    eta = np.asarray(eta, dtype=float)
    drift = eta + Ad @ np.asarray(rho_eta, dtype=float)
    return group.compose(group.exp(-drift), group.exp(np.asarray(xi, dtype=float) + rho_xi))


@dataclass(frozen=True)
class ImpactRecord:
    t: float
    impact: np.ndarray  # d_k
    deviation: np.ndarray  # Ad rho
    bound: float  # eps * ||Ad||
    total_bound: float  # ||ideal|| + eps * ||Ad||
    error: np.ndarray  # E_k
    innovation_norm: float
    alarm: bool
    impact_norm: float
    drift: np.ndarray


@dataclass(frozen=True)
class ImpactReport:
    records: tuple
    tau: float = field(default=math.inf)

    @property
    def stealthy(self) -> bool:
        return not any(r.alarm for r in self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def deviation_norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(r.deviation) for r in self.records])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "impact_norm", "deviation_norm", "bound", "innov_norm", "alarm"])
            for r in self.records:
                w.writerow(
                    [
                        fmt(r.t),
                        fmt(r.impact_norm),
                        fmt(np.linalg.norm(r.deviation)),
                        fmt(r.bound),
                        fmt(r.innovation_norm),
                        int(r.alarm),
                    ]
                )


def run_transfer(
    victim: Trajectory,
    learned: LearnedAttack,
    suite: ObservationSuite,
    config: DetectorConfig,
    heading_source: str = "measured",
    estimate0=None,
    chart_tol: float = CHART_TOL,
) -> ImpactReport:
    """Replay learned displacements on a victim's sensors through the observer.

    ``learned.displacements[k]`` spoofs the measurement of victim state ``k``;
    the report has one record per step (states 1..N).
    """
    if heading_source not in ("measured", "truth"):
        raise ValueError(f"unknown heading source {heading_source!r}")
    group = suite.group
    if len(learned.displacements) != len(victim.states):
        raise ValueError("learned attack and victim trajectory differ in length")
    eps = learned.residual_bound
    state = initial_state(victim.states[0] if estimate0 is None else estimate0, group=group)
    times = victim.times()
    records = []
    for k in range(1, len(victim.states)):
        x = victim.states[k]
        u = victim.inputs[k - 1]
        xi_hat = learned.displacements[k]
        z = suite.measure(x)
        try:
            heading = None
            if group.name == "SE2":
                src = x if heading_source == "truth" else suite.chart_inverse(z, state.estimate, chart_tol)
                heading = SE2.to_pose(src)[2]
            z_spoof = spoof_measurement(z, xi_hat, suite, heading, chart_tol)
            state, I, alarm = observer_step(state, u, victim.dt, z_spoof, suite, config, chart_tol)
        except (ChartInversionError, CutLocusError) as exc:
            raise StepFault(k, exc) from exc

        g = victim.flow(k - 1)
        split = decompose(xi_hat, commuting_subspace(generator(u), group=group))
        deviation, _ = impact_bound(split.residual, g, group)
        ad_norm = group.adjoint_operator_norm(g)
        impact = dynamical_impact(xi_hat, g, group)
        active = bool(np.any(xi_hat))
        records.append(
            ImpactRecord(
                t=float(times[k]),
                impact=impact,
                deviation=deviation,
                bound=eps * ad_norm if active else 0.0,
                total_bound=float(np.linalg.norm(split.ideal)) + eps * ad_norm if active else 0.0,
                error=state.error,
                innovation_norm=float(np.linalg.norm(I)),
                alarm=alarm,
                impact_norm=float(np.linalg.norm(group.adjoint_right(g) @ xi_hat)),
                drift=state.drift,
            )
        )
    return ImpactReport(tuple(records), config.tau)


def hold_schedule(displacement, n_states: int, onset_index: int) -> np.ndarray:
    """Zero before ``onset_index``, then ``displacement`` held to the end."""
    displacement = np.asarray(displacement, dtype=float)
    out = np.zeros((n_states, displacement.size))
    out[onset_index:] = displacement
    return out


def write_learned(path, learned: LearnedAttack) -> None:
    Path(path).write_text(learned.to_json() + "\n")
