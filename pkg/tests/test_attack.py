import csv
import json
import math

import numpy as np
import pytest
from scipy.linalg import expm, logm

from liespoof.attack import (
    AttackDataset,
    LearnedAttack,
    coordinated_lateral_offset,
    dynamical_impact,
    epsilon_richness,
    generate_dataset,
    hold_schedule,
    impact_bound,
    learn_displacements,
    realized_error,
    run_transfer,
    spoof_measurement,
)
from liespoof.centralizer import commuting_subspace, decompose, is_transferable
from liespoof.dynamics import ControlInput, simulate
from liespoof.lie_core import SE2
from liespoof.observer import DetectorConfig, StepFault, detect, get_suite, innovation, observe_se2_mixed

from conftest import random_pose

SUITE = get_suite("se2_mixed")
CFG = DetectorConfig(tau=5.0, gain=0.35)
STRAIGHT = commuting_subspace([13.96, 0, 0])
CURVED = commuting_subspace([13.96, 0, -1.02])


def straight_run(n=300, dt=0.24):
    return simulate(np.eye(3), [ControlInput(13.96, 0.0)] * n, dt)


def step_signal(traj, xi, onset_s):
    return np.array([xi if t >= onset_s - 1e-9 else np.zeros(3) for t in traj.times()], dtype=float)


def test_generate_dataset_zero_signals():
    tr = straight_run(20)
    ds = generate_dataset(tr, [np.zeros((21, 3))] * 2, SUITE)
    assert ds.nominal.shape == (2, 21, 4)
    np.testing.assert_array_equal(ds.nominal, ds.attacked)


def test_generate_dataset_lateral_training_signal():
    tr = straight_run(300)
    ds = generate_dataset(tr, [step_signal(tr, [0, 10, 0], 60.0)], SUITE)
    onset = int(round(60.0 / 0.24))
    diff = ds.attacked[0] - ds.nominal[0]
    np.testing.assert_allclose(diff[onset:], np.tile([0, 10, 0, 10], (301 - onset, 1)), atol=1e-9)
    np.testing.assert_array_equal(diff[:onset], 0)


def test_generate_dataset_single_step():
    tr = simulate(np.eye(3), [], 0.1)
    ds = generate_dataset(tr, [np.array([[1.0, 0, 0]])], SUITE)
    np.testing.assert_allclose(ds.attacked[0, 0] - ds.nominal[0, 0], [1, 0, 1, 0])


def test_generate_dataset_noise_is_seeded():
    tr = straight_run(10)
    sig = [np.zeros((11, 3))]
    a = generate_dataset(tr, sig, SUITE, 0.1, seed=3)
    b = generate_dataset(tr, sig, SUITE, 0.1, seed=3)
    c = generate_dataset(tr, sig, SUITE, 0.1, seed=4)
    np.testing.assert_array_equal(a.attacked, b.attacked)
    assert not np.array_equal(a.attacked, c.attacked)
    assert np.std(a.attacked - a.nominal) == pytest.approx(0.1, rel=0.5)


def test_generate_dataset_length_mismatch():
    with pytest.raises(ValueError):
        generate_dataset(straight_run(5), [np.zeros((3, 3))], SUITE)


def test_dataset_shape_check():
    with pytest.raises(ValueError):
        AttackDataset(np.zeros((1, 2, 4)), np.zeros((1, 3, 4)))


def test_learn_constant_displacement(rng):
    tr = simulate(random_pose(rng), [ControlInput(13.96, -1.02)] * 40, 0.24)
    xi = np.array([0.7, -1.2, 0.08])
    ds = generate_dataset(tr, [np.tile(xi, (41, 1))] * 3, SUITE)
    learned = learn_displacements(ds, SUITE, CURVED)
    np.testing.assert_allclose(learned.displacements, np.tile(xi, (41, 1)), atol=1e-9)


def test_learn_lateral_training():
    tr = straight_run(300)
    ds = generate_dataset(tr, [step_signal(tr, [0, 10, 0], 60.0)], SUITE)
    learned = learn_displacements(ds, SUITE, STRAIGHT)
    onset = int(round(60.0 / 0.24))
    np.testing.assert_allclose(learned.displacements[onset:], np.tile([0, 10, 0], (301 - onset, 1)), atol=1e-9)
    assert learned.residual_bound < 1e-9


def test_learn_recovers_injected_residual():
    tr = simulate(SE2.from_pose(1, 2, 0.3), [ControlInput(13.96, -1.02)] * 30, 0.24)
    ideal = 0.24 * np.array([13.96, 0, -1.02])
    sig = np.tile(ideal + [0, 0.44, 0], (31, 1))
    learned = learn_displacements(generate_dataset(tr, [sig], SUITE), SUITE, CURVED)
    assert learned.residual_bound == pytest.approx(0.44, abs=1e-6)
    assert all(np.linalg.norm(decompose(x, CURVED).residual) <= learned.residual_bound + 1e-12 for x in learned.displacements)


def test_learn_reports_faulty_step():
    tr = straight_run(6)
    ds = generate_dataset(tr, [np.zeros((7, 3))], SUITE)
    bad = ds.attacked.copy()
    bad[0, 4, 2] += 3.0
    with pytest.raises(StepFault) as exc:
        learn_displacements(AttackDataset(ds.nominal, bad), SUITE, STRAIGHT)
    assert exc.value.step == 4


def test_epsilon_richness_examples():
    one_dir = LearnedAttack(np.tile([1.0, 0, 0], (5, 1)), 0.0, STRAIGHT)
    rep = epsilon_richness(one_dir, STRAIGHT, 0.1)
    assert not rep and not rep.spans and rep.span_rank == 1
    ideal = 0.24 * np.array([13.96, 0, -1.02])
    fixture = LearnedAttack(np.array([s * ideal + [0, 0.44, 0] for s in np.linspace(0.2, 1, 6)]), 0.44, CURVED)
    assert epsilon_richness(fixture, CURVED, 0.44)
    # the lateral residual is not exactly orthogonal to the along-track axis, so build one that is
    perp = np.array([0, 0.45, 0]) - decompose([0, 0.45, 0], CURVED).ideal
    big = LearnedAttack(np.array([ideal + 0.45 * perp / np.linalg.norm(perp)]), 0.45, CURVED)
    rep = epsilon_richness(big, CURVED, 0.44)
    assert not rep and rep.spans and "exceeds" in rep.failures[0]


def test_spoof_examples(rng):
    z = observe_se2_mixed(random_pose(rng))
    np.testing.assert_array_equal(spoof_measurement(z, np.zeros(3), SUITE, 0.3), z)
    np.testing.assert_allclose(spoof_measurement(z, [0, 10, 0], SUITE, 0.0) - z, [0, 10, 0, 10], atol=1e-12)
    np.testing.assert_allclose(spoof_measurement(z, [0, 10, 0], SUITE, math.pi / 2) - z, [-10, 0, 0, 10], atol=1e-12)
    np.testing.assert_allclose(coordinated_lateral_offset(2.0, 0.0), [0, 2, 0, 2])


def test_spoof_additive_matches_general_path(rng):
    for _ in range(200):
        x = random_pose(rng)
        th = SE2.to_pose(x)[2]
        z = observe_se2_mixed(x)
        c = rng.uniform(-10, 10)
        additive = spoof_measurement(z, [0, c, 0], SUITE, th)
        general = observe_se2_mixed(x @ SE2.exp([0, c, 0]))
        np.testing.assert_allclose(additive, general, atol=1e-9)
        xi = rng.normal(size=3)
        np.testing.assert_allclose(spoof_measurement(z, xi, SUITE), observe_se2_mixed(x @ SE2.exp(xi)), atol=1e-9)


def test_dynamical_impact_examples(rng):
    xi = rng.normal(size=3)
    np.testing.assert_allclose(dynamical_impact(xi, np.eye(3)), SE2.exp(xi), atol=1e-12)
    f = np.array([13.96, 0, -1.02])
    along = 0.3 * f
    np.testing.assert_allclose(dynamical_impact(along, SE2.exp(0.24 * f)), SE2.exp(along), atol=1e-9)
    g = SE2.from_pose(3.316, -0.408, -0.245)
    d = dynamical_impact(np.array([3.350, 0, -0.245]) + [0, 0.44, 0], g)
    np.testing.assert_allclose(SE2.log(d), [3.457, 0.427, -0.245], atol=2e-3)
    for _ in range(200):
        g = random_pose(rng)
        xi = rng.normal(size=3)
        np.testing.assert_allclose(dynamical_impact(xi, g), SE2.exp(SE2.adjoint_right(g) @ xi), atol=1e-9)


def test_impact_bound_examples(rng):
    dev, b = impact_bound(np.zeros(3), random_pose(rng))
    assert b == 0 and not dev.any()
    dev, b = impact_bound([0, 0.44, 0], SE2.from_pose(3.316, -0.408, -0.245))
    assert np.linalg.norm(dev) == pytest.approx(0.44, abs=1e-12)
    assert b == pytest.approx(1.59, abs=5e-3)
    for _ in range(1000):
        eps = rng.uniform(0, 5)
        dev, _ = impact_bound([0, eps, 0], random_pose(rng, 100))
        assert abs(np.linalg.norm(dev) - eps) < 1e-12


def test_bound_soundness(rng):
    for _ in range(10_000):
        g = random_pose(rng, 50)
        rho = rng.normal(size=3) * rng.choice([1e-3, 1, 10])
        dev, b = impact_bound(rho, g)
        assert np.linalg.norm(dev) <= b + 1e-9
    # equality at the top singular vector
    g = random_pose(rng)
    _, _, vt = np.linalg.svd(SE2.adjoint_right(g))
    dev, b = impact_bound(vt[0], g)
    assert np.linalg.norm(dev) == pytest.approx(b, abs=1e-12)


def direct_error(eta, rho_eta, xi, rho_xi, g, x):
    """inv(predicted) @ attacked from raw matrices; the residual drift is conjugated by g."""
    rotated = np.real(logm(g @ expm(SE2.hat(rho_eta)) @ np.linalg.inv(g)))
    predicted = x @ expm(SE2.hat(eta) + rotated)
    attacked = x @ expm(SE2.hat(np.add(xi, rho_xi)))
    return np.linalg.inv(predicted) @ attacked


def test_realized_error_examples(rng):
    np.testing.assert_allclose(realized_error(np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3), np.eye(3)), np.eye(3))
    eta, xi = rng.normal(size=(2, 3))
    for _ in range(5):
        g = random_pose(rng)
        np.testing.assert_allclose(
            realized_error(eta, np.zeros(3), xi, np.zeros(3), g), SE2.exp(-eta) @ SE2.exp(xi), atol=1e-12
        )


def test_realized_error_matches_direct_products(rng):
    for _ in range(1000):
        eta, xi, rho_xi = rng.normal(size=(3, 3))
        rho_eta = rng.normal(size=3) * 0.3
        g, x = random_pose(rng), random_pose(rng)
        np.testing.assert_allclose(
            realized_error(eta, rho_eta, xi, rho_xi, g), direct_error(eta, rho_eta, xi, rho_xi, g, x), atol=1e-9
        )


def test_decomposition_consistency(rng):
    """exp(xi + Ad rho) equals the impact of xi + rho when xi commutes with log g."""
    for _ in range(300):
        f = rng.uniform(-10, 10, 3) * [1, 0, 0.2]
        sub = commuting_subspace(f)
        xi = sub.basis @ rng.normal(size=sub.dim)
        rho = rng.normal(size=3) * 0.5
        rho = decompose(rho, sub).residual
        g = SE2.exp(f * rng.uniform(0.05, 1.0))
        # only the rho part is bent by g; xi passes through unchanged
        lhs = SE2.exp(xi + SE2.adjoint_right(g) @ rho)
        np.testing.assert_allclose(lhs, dynamical_impact(xi + rho, g), atol=1e-9)


def test_transferability_matches_adjoint_invariance(rng):
    for trial in range(400):
        f = rng.uniform(-10, 10, 3) * [1, 0, 0.3]
        sub = commuting_subspace(f)
        xi = sub.basis @ rng.normal(size=sub.dim) if trial % 2 else rng.normal(size=3)
        scales = rng.uniform(0.05, 2.0, 50)
        moved = max(np.linalg.norm(SE2.adjoint_right(SE2.exp(s * f)) @ xi - xi) for s in scales)
        assert bool(is_transferable(xi, f)) == (moved < 1e-7)


def test_stealth_loophole_witness():
    # pure rotations have identical sensor tuples, so the detector cannot tell them apart
    E1, E2 = SE2.from_pose(0, 0, 0.2), SE2.from_pose(0, 0, -1.4)
    assert not np.allclose(E1, E2)
    I1, I2 = innovation(E1, SUITE), innovation(E2, SUITE)
    np.testing.assert_array_equal(I1, I2)
    for tau in (1e-9, 1.0, 5.0):
        cfg = DetectorConfig(tau=tau)
        assert detect(I1, cfg) == detect(I2, cfg)


def test_run_transfer_zero_attack(rng):
    tr = simulate(random_pose(rng), [ControlInput(13.96, -1.02)] * 30, 0.24)
    report = run_transfer(tr, LearnedAttack(np.zeros((31, 3)), 0.0, CURVED), SUITE, CFG)
    assert report.stealthy
    assert len(report.records) == 30
    for col in ("innovation_norm", "impact_norm", "bound", "total_bound"):
        assert np.abs(report.column(col)).max() < 1e-9


def test_run_transfer_deviation_within_bound(rng):
    tr = simulate(random_pose(rng), [ControlInput(13.96, -1.02)] * 60, 0.24)
    learned = LearnedAttack(
        hold_schedule(0.24 * np.array([13.96, 0, -1.02]) + [0, 0.44, 0], 61, 10), 0.44, CURVED
    )
    report = run_transfer(tr, learned, SUITE, CFG, heading_source="truth")
    for r in report.records:
        assert np.linalg.norm(r.deviation) <= r.bound + 1e-9


def test_run_transfer_argument_checks():
    tr = straight_run(5)
    with pytest.raises(ValueError):
        run_transfer(tr, LearnedAttack(np.zeros((3, 3)), 0.0, STRAIGHT), SUITE, CFG)
    with pytest.raises(ValueError):
        run_transfer(tr, LearnedAttack(np.zeros((6, 3)), 0.0, STRAIGHT), SUITE, CFG, heading_source="guess")


def test_learned_attack_json_roundtrip():
    la = LearnedAttack(np.array([[0.1, 0.2, 0.3], [1, 2, 3.0]]), 0.44, STRAIGHT)
    data = json.loads(la.to_json())
    assert set(data) == {"displacements", "epsilon"}
    back = LearnedAttack.from_json(la.to_json(), STRAIGHT)
    np.testing.assert_array_equal(back.displacements, la.displacements)
    assert back.residual_bound == 0.44


def test_impact_csv(tmp_path):
    tr = straight_run(8)
    report = run_transfer(tr, LearnedAttack(hold_schedule([0, 1.0, 0], 9, 3), 0.0, STRAIGHT), SUITE, CFG)
    path = tmp_path / "impact.csv"
    report.write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "impact_norm", "deviation_norm", "bound", "innov_norm", "alarm"]
    assert len(rows) == 1 + 8


def test_hold_schedule():
    s = hold_schedule([1.0, 2.0, 3.0], 5, 2)
    np.testing.assert_array_equal(s[:2], 0)
    np.testing.assert_array_equal(s[2:], np.tile([1, 2, 3.0], (3, 1)))
