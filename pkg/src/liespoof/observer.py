"""Equivariant detector: invariant error, innovation, drift update, tau test."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .dynamics import Input, fmt, generator
from .lie_core import SE2, CutLocusError, LieGroupSpec

CHART_TOL = 1e-6
# below this position norm the heading is unobservable from the mixed suite
HEADING_OBSERVABLE = 1e-12


class ChartInversionError(ValueError):
    """Sensor tuple does not correspond to any group element (data fault)."""


class StepFault(RuntimeError):
    """A data fault (chart inversion, cut locus) raised while stepping."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause


@dataclass(frozen=True, eq=False)
class ObservationSuite:
    """Deterministic measurement map with a chart back onto the group.

    ``chart_inverse(z, hint, tol)`` returns the group element whose
    measurement is ``z``; ``hint`` resolves directions the sensors cannot see
    at that point.
    """

    name: str
    dim_meas: int
    measure: Callable[[np.ndarray], np.ndarray]
    chart_inverse: Callable[..., np.ndarray]
    group: LieGroupSpec = field(default=SE2, repr=False)
    jacobian: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def reference(self) -> np.ndarray:
        return self.measure(self.group.identity())

    def differential(self, step: float = 1e-6) -> np.ndarray:
        """Differential of ``measure`` at identity (central differences unless given)."""
        if self.jacobian is not None:
            return self.jacobian
        n = self.group.dim_algebra
        cols = []
        for j in range(n):
            e = np.zeros(n)
            e[j] = step
            cols.append((self.measure(self.group.exp(e)) - self.measure(self.group.exp(-e))) / (2 * step))
        return np.column_stack(cols)

    def pseudo_inverse(self) -> np.ndarray:
        return np.linalg.pinv(self.differential())


def observe_se2_mixed(g) -> np.ndarray:
    """GPS position plus body-frame position: [x, y, f_s, l_s]."""
    g = np.asarray(g, dtype=float)
    p = g[:2, 2]
    R = g[:2, :2]
    return np.concatenate([p, R.T @ p])


def chart_se2_mixed(z, hint=None, tol: float = CHART_TOL) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (4,) or not np.all(np.isfinite(z)):
        raise ChartInversionError(f"expected 4 finite sensor values, got {z!r}")
    p, q = z[:2], z[2:]
    np_, nq = math.hypot(*p), math.hypot(*q)
    if abs(np_ - nq) > tol * max(1.0, np_):
        raise ChartInversionError(
            f"GPS and odometry ranges disagree by {abs(np_ - nq):.3g} m (tolerance {tol:g})"
        )
    if np_ <= HEADING_OBSERVABLE:
        theta = SE2.to_pose(hint)[2] if hint is not None else 0.0
    else:
        theta = math.atan2(p[1], p[0]) - math.atan2(q[1], q[0])
        theta = math.atan2(math.sin(theta), math.cos(theta))
    return SE2.from_pose(p[0], p[1], theta)


def se2_mixed_suite() -> ObservationSuite:
    D = np.array([[1.0, 0, 0], [0, 1.0, 0], [1.0, 0, 0], [0, 1.0, 0]])
    return ObservationSuite("se2_mixed", 4, observe_se2_mixed, chart_se2_mixed, SE2, D)


SUITES = {"se2_mixed": se2_mixed_suite}


def get_suite(name: str) -> ObservationSuite:
    try:
        return SUITES[name]()
    except KeyError:
        raise ValueError(f"unknown sensor suite {name!r}") from None


@dataclass(frozen=True)
class DetectorConfig:
    tau: float
    gain: float = 0.35
    # "chart": K(I) = gain * log(chart(h(e) + I)); "linear": K(I) = gain * pinv(dh) I
    gain_mode: str = "chart"

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0 < self.gain <= 1:
            raise ValueError("gain must lie in (0, 1]")
        if self.gain_mode not in ("chart", "linear"):
            raise ValueError(f"unknown gain mode {self.gain_mode!r}")


@dataclass(frozen=True)
class ObserverState:
    drift: np.ndarray
    estimate: np.ndarray
    predicted: Optional[np.ndarray] = None
    error: Optional[np.ndarray] = None


class ObserverStep(NamedTuple):
    state: ObserverState
    innovation: np.ndarray
    alarm: bool


def initial_state(estimate, drift=None, group: LieGroupSpec = SE2) -> ObserverState:
    drift = np.zeros(group.dim_algebra) if drift is None else np.asarray(drift, dtype=float)
    return ObserverState(drift=drift, estimate=np.asarray(estimate, dtype=float))


def invariant_error(predicted, attacked_state, group: LieGroupSpec = SE2) -> np.ndarray:
    return group.compose(group.inverse(predicted), attacked_state)


def innovation(E, suite: ObservationSuite) -> np.ndarray:
    return suite.measure(E) - suite.reference


def detect(I, config: DetectorConfig) -> bool:
    """Alarm iff ||I|| > tau; the boundary itself is still stealthy."""
    return bool(np.linalg.norm(I) > config.tau)


def correction(I, suite: ObservationSuite, config: DetectorConfig) -> np.ndarray:
    """Algebra correction K(I) pulling the estimate toward the measurement."""
    I = np.asarray(I, dtype=float)
    if config.gain_mode == "linear":
        return config.gain * (suite.pseudo_inverse() @ I)
    E = suite.chart_inverse(suite.reference + I, suite.group.identity(), math.inf)
    return config.gain * suite.group.log(E)


def observer_step(
    state: ObserverState,
    u: Input,
    dt: float,
    measurement,
    suite: ObservationSuite,
    config: DetectorConfig,
    chart_tol: float = CHART_TOL,
) -> ObserverStep:
    group = suite.group
    step = group.exp(generator(u) * dt)
    predicted = group.compose(state.estimate, step)
    measured = suite.chart_inverse(np.asarray(measurement, dtype=float), predicted, chart_tol)
    E = invariant_error(predicted, measured, group)
    I = innovation(E, suite)
    K = correction(I, suite, config)
    # drift rides along with the step; with x_hat = x exp(eta) that is Ad(step^-1) eta
    carried = group.adjoint_right(group.inverse(step)) @ state.drift
    drift = group.log(group.compose(group.exp(carried), group.exp(K)))
    estimate = group.compose(predicted, group.exp(K))
    new = ObserverState(drift=drift, estimate=estimate, predicted=predicted, error=E)
    return ObserverStep(new, I, detect(I, config))


@dataclass(frozen=True)
class ObserverTrace:
    times: np.ndarray
    drifts: np.ndarray
    innovations: np.ndarray
    alarms: np.ndarray

    @property
    def innovation_norms(self) -> np.ndarray:
        return np.linalg.norm(self.innovations, axis=1)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "eta_f", "eta_l", "eta_theta", "innov_norm", "alarm"])
            for t, eta, n, a in zip(self.times, self.drifts, self.innovation_norms, self.alarms):
                w.writerow([fmt(t), fmt(eta[0]), fmt(eta[1]), fmt(eta[2]), fmt(n), int(a)])


def run_observer(
    trajectory,
    measurements: Sequence,
    suite: ObservationSuite,
    config: DetectorConfig,
    estimate0=None,
    chart_tol: float = CHART_TOL,
) -> ObserverTrace:
    """Feed measurements for states 1..N through the observer.

    ``measurements[k]`` is the (possibly spoofed) tuple for state ``k + 1``.
    """
    if len(measurements) != len(trajectory.inputs):
        raise ValueError("need one measurement per trajectory step")
    est0 = trajectory.states[0] if estimate0 is None else estimate0
    state = initial_state(est0, group=suite.group)
    drifts, innovs, alarms = [], [], []
    for k, (u, z) in enumerate(zip(trajectory.inputs, measurements), start=1):
        try:
            state, I, alarm = observer_step(state, u, trajectory.dt, z, suite, config, chart_tol)
        except (ChartInversionError, CutLocusError) as exc:
            raise StepFault(k, exc) from exc
        drifts.append(state.drift)
        innovs.append(I)
        alarms.append(alarm)
    n = suite.group.dim_algebra
    return ObserverTrace(
        times=trajectory.times()[1:],
        drifts=np.array(drifts).reshape(-1, n),
        innovations=np.array(innovs).reshape(-1, suite.dim_meas),
        alarms=np.array(alarms, dtype=bool),
    )
