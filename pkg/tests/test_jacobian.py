# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""一维求根、免调参Jacobian、自助密度与核基准"""


from __future__ import annotations

import numpy as np
import pytest

from ivqrlab.errors import (
    BandwidthError,
    ConfigError,
    DegenerateSampleError,
    JacobianMatrixError,
    WindowError,
    ZeroDenominatorError,
)
from ivqrlab.estimation import (
    JacobianEstimate,
    JacobianMatrix,
    MultiplierScheme,
    ScalarRootProblem,
    bootstrap_density,
    default_draws,
    estimate_entry,
    estimate_jacobian,
    kernel_jacobian_baseline,
    reduce_entry_to_scalar,
    scalar_transform,
    solve_scalar_root,
    solve_scalar_root_detailed,
)
from ivqrlab.model import Dataset, MomentModel
from ivqrlab.simlab import DerivativeDgpSpec, generate_derivative_dgp, true_gamma


def _root_problem(ytilde, c, center, half_width, wtilde=None):
    ytilde = np.asarray(ytilde, dtype=float)
    wtilde = np.ones_like(ytilde) if wtilde is None else np.asarray(wtilde, dtype=float)
    return ScalarRootProblem(ytilde=ytilde, wtilde=wtilde, c=c, center=center, half_width=half_width)


def _binary_instrument_dataset(n, seed):
    """X = (1, x1)，Z = (1, 0/1 工具)，τ=0.5 时各累积和均为 0.5 的整数倍"""
    rng = np.random.default_rng(seed)
    x1 = rng.normal(size=n)
    z1 = (x1 + rng.normal(size=n) > 0).astype(float)
    y = 0.5 * x1 + rng.normal(size=n)
    return Dataset(y=y, x=np.column_stack([np.ones(n), x1]), z=np.column_stack([np.ones(n), z1]))


class TestMultipliers:

    def test_default_draws(self):
        assert default_draws(100) == 200
        assert default_draws(250_000) == 500

    def test_bernoulli_values(self):
        panel = MultiplierScheme(kind="bernoulli", seed=1, draws=50).draw_panel(40)
        assert panel.shape == (50, 40)
        assert set(np.unique(panel)) <= {0.0, 2.0}

    def test_multinomial_counts_sum_to_n(self):
        panel = MultiplierScheme(kind="multinomial", seed=1, draws=10).draw_panel(30)
        assert np.all(panel.sum(axis=1) == 30)

    def test_unit_scheme(self):
        assert np.all(MultiplierScheme(kind="unit", draws=3).draw_panel(5) == 1.0)

    def test_same_seed_same_panel(self):
        a = MultiplierScheme(kind="gaussian", seed=9, draws=4).draw_panel(10)
        b = MultiplierScheme(kind="gaussian", seed=9, draws=4).draw_panel(10)
        np.testing.assert_array_equal(a, b)

    def test_mean_one(self):
        panel = MultiplierScheme(kind="gaussian", seed=2, draws=200).draw_panel(500)
        assert panel.mean() == pytest.approx(1.0, abs=0.02)


class TestScalarRoot:

    def test_sign_transform_identity(self):
        r, x, w = np.array([1.0, -2.0]), np.array([2.0, -1.0]), np.array([1.0, 1.0])
        ytilde, wtilde, shift = scalar_transform(r, x, w)
        np.testing.assert_allclose(ytilde, [0.5, 2.0])
        np.testing.assert_allclose(wtilde, [1.0, -1.0])
        assert shift == -1.0
        b = 1.0
        direct = np.sum(w * (r <= x * b))
        assert direct == np.sum(wtilde * (ytilde <= b)) - shift

    def test_sign_transform_rejects_zero(self):
        with pytest.raises(ConfigError):
            scalar_transform(np.ones(2), np.array([1.0, 0.0]), np.ones(2))

    def test_sign_transform_property(self):
        rng = np.random.default_rng(20)
        for _ in range(1000):
            size = int(rng.integers(1, 12))
            r = rng.normal(size=size)
            x = rng.normal(size=size)
            x[x == 0] = 1.0
            w = rng.integers(-3, 4, size=size).astype(float)
            ytilde, wtilde, shift = scalar_transform(r, x, w)
            for b in rng.normal(scale=3.0, size=20):
                direct = np.sum(w * (r <= x * b))
                transformed = np.sum(wtilde * (ytilde <= b)) - shift
                assert direct == transformed

    def test_exact_root_between_points(self):
        solution = solve_scalar_root_detailed(_root_problem([1.0, 2.0, 3.0], 2.0, 0.0, 10.0))
        assert solution.b == pytest.approx(2.5)
        assert solution.residual == 0.0
        assert not solution.at_boundary

    def test_expansion_point_kept_when_exact(self):
        # b0 = 2 处累积和已等于 c
        solution = solve_scalar_root_detailed(_root_problem([1.0, 2.0, 3.0], 2.0, 2.0, 10.0))
        assert solution.b == 2.0
        assert solution.residual == 0.0

    def test_step_between_points(self):
        # 累积和 (1,2,3,4)，j* 落在 ỹ=2，η 为最小间隔的一半
        solution = solve_scalar_root_detailed(_root_problem([1.0, 2.0, 3.0, 4.0], 2.0, 2.5, 10.0))
        assert solution.b == 2.5
        assert solution.residual == 0.0

    def test_empty_indicator_solution(self):
        ytilde = [0.5, 1.5, 4.0]
        solution = solve_scalar_root_detailed(
            _root_problem(ytilde, 0.0, -1.0, 10.0, wtilde=[1.0, 2.0, 3.0]))
        assert solution.b == 0.0
        assert solution.residual == 0.0

    @pytest.mark.parametrize("center", [0.0, 1.0, 1.4])
    def test_cancelling_weights_pick_later_step(self, center):
        # 累积和 (1,0)，j*=2 处恰好为零
        solution = solve_scalar_root_detailed(
            _root_problem([1.0, 2.0], 0.0, center, 10.0, wtilde=[1.0, -1.0]))
        assert solution.b == 2.5
        assert solution.residual == 0.0

    def test_residual_not_beaten_by_any_candidate(self):
        rng = np.random.default_rng(21)
        for _ in range(300):
            size = int(rng.integers(1, 9))
            ytilde = np.round(rng.normal(size=size), 1)
            wtilde = rng.choice([-3.0, -2.0, -1.0, 1.0, 2.0, 3.0], size=size)
            c = float(rng.integers(-6, 7)) / 2
            center = float(np.round(rng.normal(), 2))
            solution = solve_scalar_root_detailed(_root_problem(ytilde, c, center, 50.0, wtilde))
            assert solution.residual == abs(np.sum(wtilde[ytilde <= solution.b]) - c)
            # ỹ_i + η 处取 <=，ỹ_i - η 处取 <
            sums = [np.sum(wtilde[ytilde <= v]) for v in ytilde]
            sums += [np.sum(wtilde[ytilde < v]) for v in ytilde]
            assert solution.residual <= min(abs(s - c) for s in sums)

    def test_window_limits_candidates(self):
        solution = solve_scalar_root_detailed(_root_problem([1.0, 2.0, 3.0], 3.0, 0.0, 2.9))
        assert solution.b == pytest.approx(2.5)
        assert solution.residual == 1.0
        assert solution.at_boundary

    def test_empty_window(self):
        with pytest.raises(WindowError):
            solve_scalar_root(_root_problem([10.0], 1.0, 0.0, 1.0))

    def test_negative_weights(self):
        b = solve_scalar_root(_root_problem([1.0, 2.0], -1.0, 1.5, 5.0, wtilde=[1.0, -2.0]))
        # 1{1<=b} - 2·1{2<=b} = -1 要求 b >= 2
        assert b >= 2.0

    def test_half_width_must_be_positive(self):
        with pytest.raises(ValueError):
            _root_problem([1.0], 1.0, 0.0, 0.0)


class TestReduction:

    def test_unit_multipliers_solved_by_expansion_point(self, jtpa_small):
        ds, truth = jtpa_small
        model = MomentModel(ds, 0.5)
        b0 = truth(0.5)
        problem = reduce_entry_to_scalar(model, b0, (0, 2), np.ones(ds.n))
        assert problem.center == b0[2]
        assert problem.half_width > 0
        realized = np.sum(problem.wtilde[problem.ytilde <= problem.center])
        assert realized == pytest.approx(problem.c)

    def test_unit_multipliers_zero_denominator(self, jtpa_small):
        ds, truth = jtpa_small
        model = MomentModel(ds, 0.5)
        with pytest.raises(ZeroDenominatorError):
            estimate_entry(model, truth(0.5), (0, 0), MultiplierScheme(kind="unit", draws=5))


class TestJacobian:

    def test_derivative_slope_close_to_truth(self):
        ds = generate_derivative_dgp(DerivativeDgpSpec(lam=1 / 3, n=1600, seed=1))
        model = MomentModel(ds, 0.5, family="derivative")
        scheme = MultiplierScheme(kind="bernoulli", seed=4, draws=400)
        gamma, draws = estimate_entry(model, np.array([1.5]), (0, 0), scheme)
        assert draws.count == 400
        assert gamma == pytest.approx(true_gamma(1 / 3, 1.5), abs=0.06)

    def test_panel_shape_checked(self):
        ds = generate_derivative_dgp(DerivativeDgpSpec(lam=1.0, n=50, seed=1))
        model = MomentModel(ds, 0.5, family="derivative")
        with pytest.raises(ConfigError):
            estimate_entry(model, np.array([1.5]), (0, 0), panel=np.ones((1, 50)))

    def test_matrix_shape_and_diagnostics(self, jtpa_small):
        ds, truth = jtpa_small
        model = MomentModel(ds, 0.5)
        scheme = MultiplierScheme(kind="bernoulli", seed=0, draws=100)
        est = estimate_jacobian(model, truth(0.5), scheme)
        assert est.shape == (ds.L, ds.p)
        assert len(est.diagnostics) == ds.L * ds.p
        assert [(d.j, d.k) for d in est.diagnostics][:2] == [(0, 0), (0, 1)]
        assert np.all(np.isfinite(est.gamma))
        # 截距位置的元素是 f·E[1]，必为正
        assert est.gamma[0, 0] > 0

    def test_parallel_matches_serial(self, jtpa_small):
        ds, truth = jtpa_small
        model = MomentModel(ds, 0.5)
        scheme = MultiplierScheme(kind="bernoulli", seed=0, draws=50)
        serial = estimate_jacobian(model, truth(0.5), scheme, n_jobs=1)
        parallel = estimate_jacobian(model, truth(0.5), scheme, n_jobs=2)
        np.testing.assert_array_equal(serial.gamma, parallel.gamma)

    def test_zero_regressor_column(self):
        rng = np.random.default_rng(3)
        n = 80
        ds = Dataset(y=rng.normal(size=n), x=np.column_stack([np.ones(n), np.zeros(n)]),
                     z=np.column_stack([np.ones(n), rng.normal(size=n)]))
        model = MomentModel(ds, 0.5)
        scheme = MultiplierScheme(kind="bernoulli", seed=0, draws=20)
        with pytest.raises(JacobianMatrixError) as info:
            estimate_jacobian(model, np.zeros(2), scheme)
        assert [0, 1] in info.value.details['entries']

        est = estimate_jacobian(model, np.zeros(2), scheme, permissive=True)
        assert np.all(est.gamma[:, 1] == 0)
        assert "jacobian-zero-filled(0,1)" in est.flags()
        assert "jacobian-zero-filled(1,1)" in est.flags()

    def test_estimate_constructed_directly(self):
        est = JacobianEstimate(gamma=np.eye(2))
        assert est.shape == (2, 2)
        assert est.flags() == []
        plain = est.to_matrix()
        assert type(plain) is JacobianMatrix
        np.testing.assert_array_equal(plain.gamma, np.eye(2))

    def test_estimate_round_trips_to_matrix(self, jtpa_small):
        ds, truth = jtpa_small
        model = MomentModel(ds, 0.5)
        est = estimate_jacobian(model, truth(0.5), MultiplierScheme(kind="bernoulli", seed=3, draws=30))
        assert isinstance(est, JacobianEstimate)
        np.testing.assert_array_equal(est.to_matrix().gamma, est.gamma)

    def test_row_permutation_invariance(self):
        ds = _binary_instrument_dataset(120, 11)
        panel = MultiplierScheme(kind="bernoulli", seed=5, draws=80).draw_panel(ds.n)
        b0 = np.array([0.1, 0.2])
        perm = np.random.default_rng(12).permutation(ds.n)
        shuffled = Dataset(y=ds.y[perm], x=ds.x[perm], z=ds.z[perm])
        base = estimate_jacobian(MomentModel(ds, 0.5), b0, panel=panel, n_jobs=1)
        moved = estimate_jacobian(MomentModel(shuffled, 0.5), b0, panel=panel[:, perm], n_jobs=1)
        np.testing.assert_allclose(moved.gamma, base.gamma, rtol=1e-10, atol=0)

    def test_instrument_scale_equivariance(self):
        ds = _binary_instrument_dataset(120, 13)
        panel = MultiplierScheme(kind="bernoulli", seed=6, draws=80).draw_panel(ds.n)
        b0 = np.array([0.1, 0.2])
        z = ds.z.copy()
        z[:, 1] *= 4.0
        base = estimate_jacobian(MomentModel(ds, 0.5), b0, panel=panel, n_jobs=1)
        scaled = estimate_jacobian(MomentModel(Dataset(y=ds.y, x=ds.x, z=z), 0.5), b0,
                                   panel=panel, n_jobs=1)
        np.testing.assert_array_equal(scaled.gamma[0], base.gamma[0])
        np.testing.assert_array_equal(scaled.gamma[1], 4.0 * base.gamma[1])

    def test_duplicated_instrument_gives_equal_rows(self):
        ds = _binary_instrument_dataset(120, 14)
        z = np.column_stack([ds.z, ds.z[:, 1]])
        panel = MultiplierScheme(kind="bernoulli", seed=7, draws=80).draw_panel(ds.n)
        est = estimate_jacobian(MomentModel(Dataset(y=ds.y, x=ds.x, z=z), 0.5),
                                np.array([0.1, 0.2]), panel=panel, n_jobs=1)
        assert est.shape == (3, 2)
        np.testing.assert_array_equal(est.gamma[1], est.gamma[2])

    def test_custom_family_not_supported(self, iv_dataset):
        model = MomentModel(iv_dataset, 0.5, family="custom",
                            contribution_fn=lambda b: iv_dataset.z * 0.0)
        with pytest.raises(ConfigError):
            estimate_jacobian(model, np.zeros(2), MultiplierScheme(draws=10))


class TestDensity:

    def test_standard_normal_median(self):
        y = np.random.default_rng(8).standard_normal(2000)
        scheme = MultiplierScheme(kind="bernoulli", seed=1, draws=500)
        density = bootstrap_density(y, 0.5, scheme)
        assert density == pytest.approx(1 / np.sqrt(2 * np.pi), rel=0.25)

    @pytest.mark.slow
    def test_standard_normal_median_replicated(self):
        estimates = []
        for rep in range(50):
            y = np.random.default_rng(100 + rep).standard_normal(2000)
            scheme = MultiplierScheme(kind="bernoulli", seed=rep, draws=500)
            estimates.append(bootstrap_density(y, 0.5, scheme))
        assert 0.32 <= np.mean(estimates) <= 0.48

    def test_constant_sample(self):
        with pytest.raises(DegenerateSampleError):
            bootstrap_density(np.ones(10), 0.5)

    def test_single_observation(self):
        with pytest.raises(DegenerateSampleError):
            bootstrap_density([1.0], 0.5)


class TestKernelBaseline:

    def test_positive_for_derivative_design(self):
        ds = generate_derivative_dgp(DerivativeDgpSpec(lam=10.0, n=1000, seed=2))
        model = MomentModel(ds, 0.5, family="derivative")
        gamma = kernel_jacobian_baseline(model, np.array([3.0]))
        assert gamma.shape == (1, 1)
        assert gamma.gamma[0, 0] > 0

    def test_zero_spread_residuals(self):
        x = np.arange(1.0, 6.0)
        model = MomentModel(Dataset(y=x, x=x, z=x), 0.5)
        with pytest.raises(BandwidthError):
            kernel_jacobian_baseline(model, np.array([1.0]))
