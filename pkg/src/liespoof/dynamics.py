"""Zero-order-hold motion on a Lie group, x_{k+1} = x_k exp(f_e(u_k) dt)."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .lie_core import SE2, LieGroupSpec


@dataclass(frozen=True)
class ControlInput:
    """Dubins unicycle input: forward speed (m/s) and turn rate (rad/s)."""

    v: float
    omega: float

    def __post_init__(self):
        if not (math.isfinite(self.v) and math.isfinite(self.omega)):
            raise ValueError("control input must be finite")


Input = Union[ControlInput, np.ndarray, Sequence[float]]


def generator(u: Input) -> np.ndarray:
    """Body-frame velocity in (f, l, theta) coordinates.

    Generic groups pass the algebra vector directly.
    """
    if isinstance(u, ControlInput):
        return np.array([u.v, 0.0, u.omega])
    return np.asarray(u, dtype=float)


def zoh_step(x, u: Input, dt: float, group: LieGroupSpec = SE2) -> np.ndarray:
    if not dt > 0:
        raise ValueError("dt must be positive")
    return group.compose(x, group.exp(generator(u) * dt))


@dataclass(frozen=True)
class Trajectory:
    states: tuple
    inputs: tuple
    dt: float
    t0: float = 0.0
    group: LieGroupSpec = field(default=SE2, repr=False)

    def __post_init__(self):
        if len(self.states) != len(self.inputs) + 1:
            raise ValueError("a trajectory needs exactly one more state than inputs")

    def __len__(self) -> int:
        return len(self.states)

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.states))

    def flow(self, k: int) -> np.ndarray:
        """Group increment applied between state k and k+1."""
        return self.group.exp(generator(self.inputs[k]) * self.dt)

    def write_csv(self, path) -> None:
        """Columns t, x, y, theta, v, omega; the last row repeats no input (blank)."""
        if self.group.name != "SE2":
            raise ValueError("trajectory CSV export is defined for SE2 only")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x", "y", "theta", "v", "omega"])
            for k, (t, g) in enumerate(zip(self.times(), self.states)):
                x, y, th = SE2.to_pose(g)
                if k < len(self.inputs):
                    u = generator(self.inputs[k])
                    v, om = fmt(u[0]), fmt(u[2])
                else:
                    v = om = ""
                w.writerow([fmt(t), fmt(x), fmt(y), fmt(th), v, om])


def simulate(x0, inputs: Sequence[Input], dt: float, t0: float = 0.0, group: LieGroupSpec = SE2) -> Trajectory:
    if not dt > 0:
        raise ValueError("dt must be positive")
    states = [np.asarray(x0, dtype=float)]
    for u in inputs:
        states.append(zoh_step(states[-1], u, dt, group))
    return Trajectory(tuple(states), tuple(inputs), dt, t0, group)


@dataclass(frozen=True)
class Segment:
    """Input held constant from ``t_start`` until the next segment begins."""

    t_start: float
    v: float
    omega: float


def inputs_from_segments(segments: Sequence[Segment], dt: float, duration: float) -> list[ControlInput]:
    """Expand piecewise-constant segments onto the sample grid.

    Segment switches must fall on sample instants; inputs that change between
    samples would break the exact exponential step and are rejected.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not segments:
        raise ValueError("at least one input segment is required")
    n = round(duration / dt)
    if abs(n * dt - duration) > 1e-9 * max(1.0, duration):
        raise ValueError(f"duration {duration} is not a multiple of dt {dt}")
    segs = sorted(segments, key=lambda s: s.t_start)
    if abs(segs[0].t_start) > 1e-9:
        raise ValueError("the first input segment must start at t=0")
    starts = []
    for s in segs:
        k = round(s.t_start / dt)
        if abs(k * dt - s.t_start) > 1e-9 * max(1.0, s.t_start):
            raise ValueError(f"input switch at t={s.t_start} falls between samples (dt={dt})")
        starts.append(k)
    out = []
    j = 0
    for k in range(n):
        while j + 1 < len(segs) and starts[j + 1] <= k:
            j += 1
        out.append(ControlInput(segs[j].v, segs[j].omega))
    return out


def fmt(value: float) -> str:
    """Shortest round-tripping float text, so reruns are byte-identical."""
    return repr(float(value))
