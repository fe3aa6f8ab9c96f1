import itertools

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from flowseg import solver
from flowseg.data_term import CostVolume
from flowseg.errors import DivergenceError
from oracles import binary_energy, minimize_binary_energy


def plain_volume(costs):
    return CostVolume.from_costs(np.asarray(costs, dtype=np.float64))


def random_binary_instance(rng, side=32, cost_scale=6.0):
    h0 = gaussian_filter(rng.normal(0, 1, (side, side)), 3.0)
    h1 = gaussian_filter(rng.normal(0, 1, (side, side)), 3.0)
    costs = np.stack([cost_scale * (h0 - h0.min()), cost_scale * (h1 - h1.min())], -1)
    weight = np.clip(0.3 + 0.7 * gaussian_filter(rng.uniform(0, 1, (side, side)), 2.0), 0.05, 1.0)
    lam = float(rng.integers(5, 31))
    return costs, weight, lam


class TestProjectSimplex:
    def test_symmetric_point(self):
        assert np.allclose(solver.project_simplex([0.5, 0.5, 0.5]), [1 / 3] * 3)

    def test_feasible_point_unchanged(self):
        assert np.allclose(solver.project_simplex([0.2, 0.8]), [0.2, 0.8])

    def test_vertex_projection(self):
        assert np.allclose(solver.project_simplex([2.0, 0.0, 0.0]), [1.0, 0.0, 0.0])

    def test_random_properties(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            v = rng.normal(0, 3, rng.integers(2, 8))
            w = solver.project_simplex(v)
            assert w.min() >= 0.0
            assert w.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.allclose(solver.project_simplex(w), w, atol=1e-12)

    def test_projection_is_closest_feasible_point(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            v = rng.normal(0, 2, 3)
            w = solver.project_simplex(v)
            # cannot beat it with random feasible candidates
            for _ in range(100):
                c = rng.dirichlet(np.ones(3))
                assert np.sum((v - w) ** 2) <= np.sum((v - c) ** 2) + 1e-9


class TestOperators:
    def test_gradient_divergence_adjoint(self):
        rng = np.random.default_rng(2)
        u = rng.normal(0, 1, (7, 9, 3))
        p = rng.normal(0, 1, (7, 9, 3, 2))
        lhs = np.sum(solver._gradient(u) * p)
        rhs = -np.sum(u * solver._divergence(p))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_objective_matches_direct_binary_energy(self):
        rng = np.random.default_rng(3)
        costs = rng.uniform(0, 10, (6, 8, 2))
        weight = rng.uniform(0.1, 1.0, (6, 8))
        mask = rng.integers(0, 2, (6, 8)).astype(np.int32)
        lam = 7.0
        u = solver.one_hot(mask, 2)
        assert solver.objective(u, costs, weight, lam) == pytest.approx(
            binary_energy(mask, costs, weight, lam), rel=1e-12
        )

    def test_checkerboard_objective(self):
        side = 6
        mask = np.indices((side, side)).sum(axis=0) % 2
        u = solver.one_hot(mask.astype(np.int32), 2)
        costs = np.zeros((side, side, 2))
        weight = np.ones((side, side))
        lam = 4.0
        # oracle: direct summation of the forward-difference field
        expected = binary_energy(mask.astype(np.int32), costs, weight, lam)
        got = solver.objective(u, costs, weight, lam)
        assert got == pytest.approx(expected, rel=1e-12)
        assert solver.objective(u, costs, weight, 2 * lam) == pytest.approx(
            2 * got, rel=1e-12
        )

    def test_constant_one_hot_zero_objective(self):
        u = solver.one_hot(np.zeros((5, 5), dtype=np.int32), 2)
        costs = np.zeros((5, 5, 2))
        costs[:, :, 1] = 3.0
        assert solver.objective(u, costs, np.ones((5, 5)), 9.0) == 0.0


class TestSolve:
    def test_uniform_dominant_cost(self):
        costs = np.zeros((10, 10, 2))
        costs[:, :, 1] = 10.0
        mask, report = solver.solve(plain_volume(costs), np.ones((10, 10)), 30.0)
        assert (mask == 0).all()
        assert report.termination == "small_decrease"

    def test_half_split_recovered_exactly(self):
        costs = np.zeros((64, 64, 2))
        costs[:, :32, 1] = 10.0
        costs[:, 32:, 0] = 10.0
        mask, _ = solver.solve(plain_volume(costs), np.ones((64, 64)), 5.0)
        expected = np.zeros((64, 64), dtype=np.int32)
        expected[:, 32:] = 1
        assert np.array_equal(mask, expected)

    def test_matches_min_cut_oracle_on_random_instances(self):
        rng = np.random.default_rng(7)
        limits = solver.SolverLimits(max_iters=2000, min_decrease=-np.inf)
        for _ in range(3):
            costs, weight, lam = random_binary_instance(rng)
            mask, _ = solver.solve(plain_volume(costs), weight, lam, limits)
            achieved = binary_energy(mask, costs, weight, lam)
            _, optimal = minimize_binary_energy(costs, weight, lam)
            assert achieved <= 1.01 * optimal
            assert achieved >= optimal - 1e-6

    def test_oracle_agrees_with_exhaustive_search(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            h, w = rng.integers(2, 4, 2)
            costs = rng.uniform(0, 8, (h, w, 2))
            weight = rng.uniform(0.2, 1.0, (h, w))
            lam = float(rng.uniform(1, 6))
            best = min(
                binary_energy(np.array(bits, dtype=np.int32).reshape(h, w), costs, weight, lam)
                for bits in itertools.product([0, 1], repeat=h * w)
            )
            omask, ovalue = minimize_binary_energy(costs, weight, lam)
            assert ovalue == pytest.approx(best, abs=1e-5)
            assert binary_energy(omask, costs, weight, lam) == pytest.approx(best, abs=1e-5)

    def test_rounded_result_no_worse_than_initialization(self):
        rng = np.random.default_rng(13)
        limits = solver.SolverLimits(max_iters=500, min_decrease=-np.inf)
        for _ in range(3):
            costs, weight, lam = random_binary_instance(rng, side=16)
            volume = plain_volume(costs)
            mask, _ = solver.solve(volume, weight, lam, limits)
            init = np.argmin(costs, axis=2).astype(np.int32)
            e_mask = solver.objective(solver.one_hot(mask, 2), costs, weight, lam)
            e_init = solver.objective(solver.one_hot(init, 2), costs, weight, lam)
            assert e_mask <= e_init + 1e-9

    def test_clamped_pixel_wins_against_costs(self):
        costs = np.zeros((5, 5, 2))
        costs[:, :, 0] = 100.0  # label 0 hopeless except where clamped
        volume = plain_volume(costs)
        volume.clamp[2, 2] = 0
        volume.costs[2, 2] = [0.0, 1e4]
        mask, _ = solver.solve(volume, np.ones((5, 5)), 10.0)
        assert mask[2, 2] == 0
        assert mask[0, 0] == 1

    def test_deterministic_across_runs(self):
        rng = np.random.default_rng(21)
        costs, weight, lam = random_binary_instance(rng, side=12)
        limits = solver.SolverLimits(max_iters=200, min_decrease=-np.inf)
        mask1, rep1 = solver.solve(plain_volume(costs), weight, lam, limits)
        mask2, rep2 = solver.solve(plain_volume(costs), weight, lam, limits)
        assert np.array_equal(mask1, mask2)
        assert rep1.final_objective == rep2.final_objective
        assert rep1.trace == rep2.trace

    def test_argmax_tie_breaks_to_lowest_label(self):
        costs = np.zeros((2, 2, 3))  # fully symmetric: u stays uniform-ish
        mask, _ = solver.solve(plain_volume(costs), np.ones((2, 2)), 5.0)
        assert (mask == 0).all()

    def test_small_decrease_stops_immediately_when_fully_clamped(self):
        rng = np.random.default_rng(5)
        warped = rng.integers(0, 2, (8, 8)).astype(np.int32)
        costs = np.zeros((8, 8, 2))
        volume = plain_volume(costs)
        volume.clamp[:] = warped
        rows, cols = np.mgrid[0:8, 0:8]
        volume.costs[:] = 1e4
        volume.costs[rows, cols, warped] = 0.0
        mask, report = solver.solve(volume, np.ones((8, 8)), 5.0)
        assert np.array_equal(mask, warped)
        assert report.termination == "small_decrease"
        assert report.iterations <= 5

    def test_iteration_cap_extends_on_high_objective(self):
        costs = np.full((6, 6, 2), 1e5)  # objective stays above threshold
        costs[:, :, 1] += 5.0
        limits = solver.SolverLimits(
            max_iters=5,
            extended_iters=9,
            extend_objective_threshold=1e5,
            min_decrease=-np.inf,
        )
        _, report = solver.solve(plain_volume(costs), np.ones((6, 6)), 5.0, limits)
        assert report.iterations == 9
        assert report.termination == "max_iters"

    def test_iteration_cap_not_extended_below_threshold(self):
        costs = np.zeros((6, 6, 2))
        costs[:, :, 1] = 5.0
        limits = solver.SolverLimits(
            max_iters=5,
            extended_iters=9,
            extend_objective_threshold=1e5,
            min_decrease=-np.inf,
        )
        _, report = solver.solve(plain_volume(costs), np.ones((6, 6)), 5.0, limits)
        assert report.iterations == 5

    def test_nonfinite_costs_rejected(self):
        costs = np.zeros((3, 3, 2))
        costs[1, 1, 0] = np.nan
        with pytest.raises(DivergenceError):
            solver.solve(plain_volume(costs), np.ones((3, 3)), 5.0)

    def test_invalid_lambda(self):
        with pytest.raises(ValueError):
            solver.solve(plain_volume(np.zeros((2, 2, 2))), np.ones((2, 2)), 0.0)

    def test_invariants_hold_after_every_iteration(self):
        rng = np.random.default_rng(17)
        costs = rng.uniform(0, 10, (16, 16, 3))
        weight = np.clip(rng.uniform(0.2, 1.0, (16, 16)), 0.01, 1.0)
        lam = 12.0
        radius = 0.5 * lam * weight
        checked = []

        def check(iteration, u, p):
            assert u.min() >= 0.0
            assert np.abs(u.sum(axis=2) - 1.0).max() <= 1e-12
            norms = np.linalg.norm(p, axis=-1)
            assert (norms <= radius[:, :, None] + 1e-12).all()
            checked.append(iteration)

        limits = solver.SolverLimits(max_iters=60, min_decrease=-np.inf)
        solver.solve(plain_volume(costs), weight, lam, limits, callback=check)
        assert checked == list(range(1, 61))
