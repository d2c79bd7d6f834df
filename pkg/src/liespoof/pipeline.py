"""End-to-end scenario runs shared by the CLI and the test suite."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import attack as atk
from .centralizer import commuting_subspace, jacobi_closure_check
from .config import ScenarioConfig
from .dynamics import ControlInput, Trajectory, generator
from .lie_core import SE2
from .observer import ObserverTrace, get_suite, run_observer

# The reported local flow and attack of the Dubins case study.
CASE_FLOW = (3.316, -0.408, -0.245)
CASE_IDEAL = np.array([3.350, 0.0, -0.245])
CASE_EPSILON = 0.44


def chart_tolerance(noise_std: float) -> float:
    """Range-consistency slack for noisy sensor tuples (12 sigma on the range gap)."""
    return max(1e-6, 12 * noise_std)


@dataclass(frozen=True)
class SimulationResult:
    trajectory: Trajectory
    signals: np.ndarray
    measurements: np.ndarray
    trace: ObserverTrace


def run_simulation(cfg: ScenarioConfig) -> SimulationResult:
    """Drive the nominal trajectory with its attack applied to the sensors."""
    suite = get_suite(cfg.suite)
    traj = cfg.nominal.build(cfg.dt, cfg.duration)
    signals = cfg.attack.signals(traj)
    rng = np.random.default_rng(cfg.seed)
    meas = []
    for k in range(1, len(traj.states)):
        x = traj.states[k]
        z = suite.measure(SE2.compose(x, SE2.exp(signals[k])))
        meas.append(z)
    meas = np.array(meas)
    if cfg.attack.noise_std > 0:
        meas = meas + rng.normal(0.0, cfg.attack.noise_std, meas.shape)
    trace = run_observer(traj, list(meas), suite, cfg.detector, None, chart_tolerance(cfg.attack.noise_std))
    return SimulationResult(traj, signals, meas, trace)


@dataclass(frozen=True)
class TransferResult:
    nominal: Trajectory
    victim: Trajectory
    dataset: atk.AttackDataset
    learned: atk.LearnedAttack
    deployed: atk.LearnedAttack
    training: atk.ImpactReport
    transfer: atk.ImpactReport
    richness: atk.RichnessReport

    @property
    def stealthy(self) -> bool:
        return self.transfer.stealthy

    def verdict(self) -> dict:
        tr, tf = self.training, self.transfer
        alarms = [float(r.t) for r in tf.records if r.alarm]
        return {
            "stealthy": bool(tf.stealthy),
            "max_innovation": _max(tf.column("innovation_norm")),
            "max_bound": _max(tf.column("total_bound")),
            "max_impact": _max(tf.column("impact_norm")),
            "max_deviation": _max(tf.deviation_norms),
            "max_deviation_bound": _max(tf.column("bound")),
            "epsilon": float(self.learned.residual_bound),
            "epsilon_rich": bool(self.richness.rich),
            "training_stealthy": bool(tr.stealthy),
            "training_excess": phase_excess(tr),
            "transfer_excess": phase_excess(tf),
            "alarm_times": alarms,
            "tau": float(tf.tau),
        }


def _max(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(values.max()) if values.size else 0.0


def phase_excess(report: atk.ImpactReport) -> float:
    """Peak innovation minus peak impact over one phase (meters)."""
    return _max(report.column("innovation_norm")) - _max(report.column("impact_norm"))


def run_transfer_pipeline(cfg: ScenarioConfig) -> TransferResult:
    """Collect data on the nominal run, learn, and deploy on the victim.

    The learned steady-state displacement (mean over steps after the ramp)
    is deployed as a step from the victim onset.
    """
    suite = get_suite(cfg.suite)
    a = cfg.attack
    nominal = cfg.nominal.build(cfg.dt, cfg.duration)
    victim = cfg.victim.build(cfg.dt, cfg.duration)
    base = a.signals(nominal)
    ds = atk.generate_dataset(nominal, [base] * a.experiments, suite, a.noise_std, cfg.seed, "nominal")

    victim_onset = cfg.onset_index(victim, a.onset_s if a.victim_onset_s is None else a.victim_onset_s)
    deploy_u = victim.inputs[min(max(victim_onset - 1, 0), len(victim.inputs) - 1)]
    subspace = commuting_subspace(generator(deploy_u))
    chart_tol = chart_tolerance(a.noise_std)
    learned = atk.learn_displacements(ds, suite, subspace, chart_tol)
    richness = atk.epsilon_richness(learned, subspace, max(learned.residual_bound, 0.0))

    training = atk.run_transfer(nominal, learned, suite, cfg.detector, a.heading_source, None, chart_tol)

    full = cfg.onset_index(nominal, a.onset_s + a.ramp_s)
    window = learned.displacements[full:]
    steady = window.mean(axis=0) if len(window) else np.zeros(3)
    deployed = atk.LearnedAttack(
        atk.hold_schedule(steady, len(victim.states), victim_onset), learned.residual_bound, subspace
    )
    transfer = atk.run_transfer(victim, deployed, suite, cfg.detector, a.heading_source, None, chart_tol)
    return TransferResult(nominal, victim, ds, learned, deployed, training, transfer, richness)


def centralizer_rows(inputs) -> list[dict]:
    rows = []
    for i, u in enumerate(inputs):
        f_e = generator(u)
        sub = commuting_subspace(f_e)
        rows.append(
            {
                "segment": i,
                "v_mps": float(f_e[0]),
                "omega_radps": float(f_e[2]),
                "dim": sub.dim,
                "basis": [[float(c) + 0.0 for c in col] for col in sub.basis.T],
                "closed": jacobi_closure_check(sub),
            }
        )
    return rows


def centralizer_rows_for(cfg: ScenarioConfig) -> list[dict]:
    seen = []
    for spec in (cfg.nominal, cfg.victim):
        for s in spec.segments:
            u = ControlInput(s.v, s.omega)
            if u not in seen:
                seen.append(u)
    return centralizer_rows(seen)


@dataclass(frozen=True)
class ReportedRow:
    quantity: str
    reported: float
    computed: float
    tol: float

    @property
    def diff(self) -> float:
        return abs(self.reported - self.computed)

    @property
    def ok(self) -> bool:
        return self.diff <= self.tol


def reproduce_rows() -> list[ReportedRow]:
    """Case-study quantities at the reported local flow, against reported values."""
    g = SE2.from_pose(*CASE_FLOW)
    rho = np.array([0.0, CASE_EPSILON, 0.0])
    ad_norm = SE2.adjoint_operator_norm(g)
    deviation, bound = atk.impact_bound(rho, g)
    xi_eff = SE2.log(atk.dynamical_impact(CASE_IDEAL + rho, g))
    r = math.hypot(CASE_FLOW[0], CASE_FLOW[1])
    rows = [
        ReportedRow("adjoint_norm", 3.618, ad_norm, 1e-3),
        ReportedRow("adjoint_norm_closed_form", 0.5 * (r + math.sqrt(r * r + 4)), float(np.linalg.svd(SE2.adjoint_right(g), compute_uv=False)[0]), 1e-9),
        ReportedRow("rotated_residual_f", 0.107, deviation[0], 1e-3),
        ReportedRow("rotated_residual_l", 0.427, deviation[1], 1e-3),
        ReportedRow("deviation_norm", 0.44, float(np.linalg.norm(deviation)), 1e-12),
        ReportedRow("bound", 1.59, bound, 5e-3),
        ReportedRow("xi_eff_f", 3.457, xi_eff[0], 2e-3),
        ReportedRow("xi_eff_l", 0.427, xi_eff[1], 2e-3),
        ReportedRow("xi_eff_theta", -0.245, xi_eff[2], 2e-3),
    ]
    return rows
