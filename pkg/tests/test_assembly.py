import numpy as np
import pytest

from fsqsim.assembly import (
    AffineMap,
    EqualizationResult,
    affine_fit,
    equalize_depths,
    pair_grid_geometry,
    plan_rearrangement,
    replay_plan,
    simulate_assembly,
)


@pytest.fixture(scope="module")
def geometry():
    return pair_grid_geometry()


@pytest.fixture(scope="module")
def target(geometry):
    t = np.zeros(geometry.n_sites, dtype=bool)
    t[[0, 1, 2, 3, 4, 5, 6, 7]] = True  # 2x4 block of pair columns
    return t


def test_affine_identity():
    pts = np.array([[0.0, 0], [1, 0], [0, 1], [2, 3]])
    m = affine_fit(pts, pts)
    assert np.max(np.abs(m.linear - np.eye(2))) < 1e-12
    assert np.max(np.abs(m.translation)) < 1e-12


def test_affine_recovery_rotation_scale_shear():
    rng = np.random.default_rng(1)
    th = np.deg2rad(17.0)
    lin = 1.3 * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    lin = lin @ np.array([[1.0, 0.2], [0.0, 1.0]])
    tr = np.array([3.7, -1.2])
    src = rng.uniform(-10, 10, size=(9, 2))
    dst = src @ lin.T + tr
    m = affine_fit(src, dst)
    assert np.max(np.abs(m.linear - lin)) < 1e-10
    assert np.max(np.abs(m.translation - tr)) < 1e-10
    assert np.max(np.abs(m.apply(src) - dst)) < 1e-10


def test_affine_rejects_collinear():
    pts = np.array([[0.0, 0], [1, 1], [2, 2]])
    with pytest.raises(ValueError, match="collinear"):
        affine_fit(pts, pts)


def test_affine_rejects_singular_map():
    with pytest.raises(ValueError):
        AffineMap(linear=np.zeros((2, 2)), translation=np.zeros(2))


def test_plan_empty_when_already_assembled(geometry, target):
    plan = plan_rearrangement(target.copy(), target, geometry)
    assert len(plan) == 0


def test_plan_single_atom_single_move(geometry):
    occ = np.zeros(geometry.n_sites, dtype=bool)
    occ[31] = True
    tgt = np.zeros(geometry.n_sites, dtype=bool)
    tgt[0] = True
    plan = plan_rearrangement(occ, tgt, geometry)
    assert len(plan) == 1
    move = plan.moves[0]
    assert (move.source, move.destination) == (31, 0)
    assert 2 <= len(move.path) <= 4  # at most three straight segments


def test_plan_replay_invariant(geometry, target):
    rng = np.random.default_rng(7)
    for _ in range(150):
        occ = rng.random(geometry.n_sites) < 0.5
        plan = plan_rearrangement(occ, target, geometry)
        final = replay_plan(plan, occ, geometry)
        if occ.sum() >= target.sum():
            assert not plan.unplaced_targets
            assert np.all(final[target])
        assert not np.any(final & ~target)  # surplus cleared


def test_plan_reports_shortfall(geometry, target):
    occ = np.zeros(geometry.n_sites, dtype=bool)
    occ[20] = occ[22] = True
    plan = plan_rearrangement(occ, target, geometry)
    assert len(plan.unplaced_targets) == 6
    final = replay_plan(plan, occ, geometry)
    assert final[target].sum() == 2


def test_plan_beats_greedy_baseline(geometry, target):
    # optimal assignment is never longer than nearest-first greedy
    rng = np.random.default_rng(3)

    def greedy_length(occ):
        sites = geometry.sites
        free = [i for i in np.nonzero(occ & ~target)[0]]
        total = 0.0
        for tgt_i in np.nonzero(target & ~occ)[0]:
            dists = [np.hypot(*(sites[tgt_i] - sites[s])) for s in free]
            k = int(np.argmin(dists))
            total += dists[k]
            free.pop(k)
        return total

    for _ in range(40):
        occ = rng.random(geometry.n_sites) < 0.5
        if occ.sum() < 8 or np.all(occ[target]):
            continue
        plan = plan_rearrangement(occ, target, geometry)
        fill_moves = [m for m in plan.moves
                      if m.destination >= 0 and m.source >= 0]
        fill_length = sum(
            np.hypot(m.path[-1][0] - m.path[0][0], m.path[-1][1] - m.path[0][1])
            for m in fill_moves
        )
        assert fill_length <= greedy_length(occ) + 1e-9


def test_assembly_perfect_components(geometry, target):
    p, _ = simulate_assembly(geometry, target, loading_probability=0.95,
                             per_move_success=1.0, imaging_survival=1.0,
                             n_trials=300, seed=3)
    assert p == 1.0


def test_assembly_zero_move_success(geometry, target):
    # only trials whose targets came pre-filled can succeed
    p, _ = simulate_assembly(geometry, target, loading_probability=0.5,
                             per_move_success=0.0, imaging_survival=1.0,
                             n_trials=4000, seed=5)
    assert p == pytest.approx(0.5 ** 8, abs=0.004)


def test_assembly_monotone_in_move_success(geometry, target):
    probs = []
    for s in (0.90, 0.94, 0.97, 0.99, 1.0):
        p, err = simulate_assembly(geometry, target, per_move_success=s,
                                   n_trials=1500, seed=11)
        probs.append((p, err))
    for (p0, e0), (p1, e1) in zip(probs, probs[1:]):
        assert p1 - p0 > -3 * np.hypot(e0, e1)


def test_assembly_reproduces_target_rate(geometry, target):
    p, err = simulate_assembly(geometry, target, n_trials=6000, seed=11)
    assert p == pytest.approx(0.955, abs=0.01)


def test_equalize_noiseless_contraction_factor():
    rng = np.random.default_rng(5)
    gains = 1 + 0.05 * rng.standard_normal(32)
    res = equalize_depths(gains, noiseless=True, gain=0.5, iterations=6)
    spreads = np.array(res.spread_history)
    ratios = spreads[1:] / spreads[:-1]
    assert np.allclose(ratios, 0.5, atol=0.02)


def test_equalize_noiseless_reaches_1e4_in_five_iterations():
    rng = np.random.default_rng(8)
    gains = 1 + 0.05 * rng.standard_normal(32)
    res = equalize_depths(gains, noiseless=True, gain=0.8, iterations=5)
    assert res.spread_history[5] <= 1e-4


def test_equalize_uniform_input_unchanged():
    gains = np.ones(32)
    res = equalize_depths(gains, seed=3)
    assert res.final_spread < 0.005  # stays at the measurement noise floor
    assert np.max(np.abs(res.weights - 1.0)) < 0.02


def test_equalize_default_noise_reaches_three_permille():
    rng = np.random.default_rng(5)
    gains = 1 + 0.05 * rng.standard_normal(32)
    res = equalize_depths(gains, iterations=8, seed=2)
    assert res.converged
    assert res.final_spread <= 0.003


def test_equalize_divergence_flagged():
    rng = np.random.default_rng(5)
    gains = 1 + 0.05 * rng.standard_normal(32)
    res = equalize_depths(gains, gain=2.5, iterations=8, seed=2)
    assert isinstance(res, EqualizationResult)
    assert not res.converged
