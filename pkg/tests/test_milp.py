# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""MILP 形式、LP求解、分支定界、Q* 与 LP 文件"""


from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from scipy import stats

from ivqrlab.errors import (
    BigMError,
    ConfigError,
    DataError,
    DuplicateNameError,
    LpCertificationError,
    SubsampleError,
)
from ivqrlab.milp import (
    ParameterBox,
    ProblemBuilder,
    SearchLimits,
    audit_big_m,
    branch_and_bound,
    build_censored_ivqr_milp,
    build_censored_milp,
    build_hd_ivqr_milp,
    build_ivqr_milp,
    build_problem,
    choose_big_m,
    complete_assignment,
    compute_qstar,
    export_lp_file,
    format_lp,
    make_completion,
    parse_lp,
    problems_equal,
    quantile_regression_pilot,
    read_lp_file,
    solve_ivqr_initial,
    solve_lp,
    subsample_rows,
)
from ivqrlab.milp import simplex
from ivqrlab.model import Dataset, MomentModel


def _scalar_dataset(y) -> Dataset:
    y = np.asarray(y, dtype=float)
    ones = np.ones((y.size, 1))
    return Dataset(y=y, x=ones, z=ones)


def _small_lp() -> ProblemBuilder:
    """max x + y s.t. x + 2y <= 4, 3x + y <= 6"""
    builder = ProblemBuilder()
    x = builder.add_variable("x", obj=-1.0)
    y = builder.add_variable("y", obj=-1.0)
    builder.add_constraint("c1", {x: 1.0, y: 2.0}, "<=", 4.0)
    builder.add_constraint("c2", {x: 3.0, y: 1.0}, "<=", 6.0)
    return builder


def _knapsack():
    """max 5a + 4b + 3c，三条容量约束，最优为 a = b = 1"""
    builder = ProblemBuilder()
    a, b, c = (builder.add_variable(name, obj=-v, binary=True) for name, v in (("a", 5), ("b", 4), ("c", 3)))
    builder.add_constraint("k1", {a: 2, b: 3, c: 1}, "<=", 5)
    builder.add_constraint("k2", {a: 4, b: 1, c: 2}, "<=", 11)
    builder.add_constraint("k3", {a: 3, b: 4, c: 2}, "<=", 8)
    return builder.build()


class TestBuilder:

    def test_duplicate_variable(self):
        builder = ProblemBuilder()
        builder.add_variable("x")
        with pytest.raises(DuplicateNameError):
            builder.add_variable("x")

    def test_duplicate_constraint(self):
        builder = _small_lp()
        with pytest.raises(DuplicateNameError):
            builder.add_constraint("c1", {0: 1.0}, "<=", 1.0)

    def test_unknown_sense(self):
        with pytest.raises(ConfigError):
            ProblemBuilder().add_constraint("c", {}, "<", 1.0)

    def test_binary_bounds(self):
        builder = ProblemBuilder()
        builder.add_variable("b", lb=-5, ub=5, binary=True)
        problem = builder.build()
        assert problem.lb.tolist() == [0.0]
        assert problem.ub.tolist() == [1.0]
        assert problem.summary() == {'variables': 1, 'binaries': 1, 'constraints': 0}


class TestLp:

    @pytest.mark.parametrize("backend", ["simplex", "highs"])
    def test_small_lp(self, backend):
        res = solve_lp(_small_lp().build(), backend=backend)
        assert res.is_optimal
        assert res.objective == pytest.approx(-2.8)
        np.testing.assert_allclose(res.x, [1.6, 1.2], atol=1e-9)

    @pytest.mark.parametrize("backend", ["simplex", "highs"])
    def test_upper_bounds_and_equality(self, backend):
        builder = ProblemBuilder()
        x = builder.add_variable("x", 0.0, 1.5, obj=-1.0)
        y = builder.add_variable("y", 0.0, 2.0, obj=-1.0)
        builder.add_constraint("sum", {x: 1.0, y: 1.0}, "=", 3.0)
        res = solve_lp(builder.build(), backend=backend)
        assert res.is_optimal
        assert res.objective == pytest.approx(-3.0)

    def test_free_variable(self):
        builder = ProblemBuilder()
        x = builder.add_variable("x", -math.inf, math.inf, obj=1.0)
        builder.add_constraint("floor", {x: 1.0}, ">=", -5.0)
        res = solve_lp(builder.build())
        assert res.objective == pytest.approx(-5.0)

    def test_infeasible(self):
        builder = ProblemBuilder()
        x = builder.add_variable("x")
        builder.add_constraint("lo", {x: 1.0}, ">=", 2.0)
        builder.add_constraint("hi", {x: 1.0}, "<=", 1.0)
        assert solve_lp(builder.build()).status == "infeasible"

    def test_unbounded(self):
        builder = ProblemBuilder()
        x = builder.add_variable("x", obj=-1.0)
        y = builder.add_variable("y")
        builder.add_constraint("gap", {x: 1.0, y: -1.0}, "<=", 1.0)
        assert solve_lp(builder.build()).status == "unbounded"

    def test_certificate_recorded(self):
        res = solve_lp(_small_lp().build(), backend="simplex")
        assert res.dual_residual <= 1e-8

    def test_uncertified_optimum_raises(self, monkeypatch):
        monkeypatch.setattr(simplex._Tableau, "dual_residual", lambda self, cost: 1.0)
        with pytest.raises(LpCertificationError) as info:
            solve_lp(_small_lp().build(), backend="simplex")
        assert info.value.details['dual_residual'] == 1.0
        with pytest.raises(LpCertificationError):
            branch_and_bound(_knapsack(), limits=SearchLimits())

    def test_crossed_bounds(self):
        problem = _small_lp().build()
        assert solve_lp(problem, lb=np.array([2.0, 0.0]), ub=np.array([1.0, 1.0])).status == "infeasible"

    def test_quantile_regression_pilot_is_sample_median(self):
        beta = quantile_regression_pilot(_scalar_dataset([1.0, 2.0, 3.0, 4.0, 10.0]), 0.5)
        assert beta[0] == pytest.approx(3.0)


class TestBranchAndBound:

    def test_knapsack_optimum(self):
        solution = branch_and_bound(_knapsack(), limits=SearchLimits())
        assert solution.termination == "optimal"
        assert solution.objective == pytest.approx(-9.0)
        np.testing.assert_allclose(solution.assignment, [1.0, 1.0, 0.0])
        assert solution.gap == pytest.approx(0.0)

    def test_node_limit(self):
        solution = branch_and_bound(_knapsack(), limits=SearchLimits(node_limit=1))
        assert solution.termination == "node-limit"
        assert solution.nodes == 1

    def test_infeasible_problem(self):
        builder = ProblemBuilder()
        b = builder.add_variable("b", binary=True)
        builder.add_constraint("c", {b: 1.0}, ">=", 2.0)
        assert branch_and_bound(builder.build(), limits=SearchLimits()).termination == "infeasible"

    def test_ivqr_median(self):
        y = np.random.default_rng(4).normal(size=12)
        data = _scalar_dataset(y)
        box = ParameterBox.symmetric([10.0])
        problem = build_ivqr_milp(data, 0.5, choose_big_m(data, box), box)
        solution = branch_and_bound(problem, limits=SearchLimits(node_limit=2000),
                                    completion=make_completion(problem, data))
        assert solution.termination == "optimal"
        assert solution.objective == pytest.approx(0.0, abs=1e-9)
        ys = np.sort(y)
        assert ys[5] - 1e-6 <= solution.beta[0] <= ys[6] + 1e-6


class TestBigM:

    def test_choose_big_m(self):
        data = _scalar_dataset([1.0, -2.0])
        assert choose_big_m(data, ParameterBox.symmetric([1.0])) == pytest.approx(6.0)

    def test_audit_rejects_small_m(self):
        data = _scalar_dataset([1.0, -2.0])
        box = ParameterBox.symmetric([1.0])
        audit_big_m(data, box, 3.0)
        with pytest.raises(BigMError):
            audit_big_m(data, box, 2.0)

    def test_unbounded_box(self):
        with pytest.raises(BigMError):
            choose_big_m(_scalar_dataset([1.0]), ParameterBox(lower=[-math.inf], upper=[math.inf]))

    def test_box_dimension_checked(self):
        with pytest.raises(ConfigError):
            choose_big_m(_scalar_dataset([1.0]), ParameterBox.symmetric([1.0, 1.0]))


class TestCompletion:

    def test_inside_wedge_has_no_completion(self):
        data = _scalar_dataset([0.5])
        problem = build_ivqr_milp(data, 0.5, 10.0, ParameterBox.symmetric([10.0]), wedge=0.1)
        assert complete_assignment(problem, data, np.array([0.45])) is None

    def test_consistent_assignment(self):
        data = _scalar_dataset([0.5])
        problem = build_ivqr_milp(data, 0.5, 10.0, ParameterBox.symmetric([10.0]), wedge=0.1)
        x = complete_assignment(problem, data, np.array([0.6]))
        assert x[problem.index_of("xi_0000")] == 1.0
        assert x[problem.index_of("t")] == pytest.approx(0.5)
        assert problem.max_violation(x) == 0.0

    def test_objective_is_moment_sup_norm(self, jtpa_small):
        ds, truth = jtpa_small
        data = ds.take(range(30))
        box = ParameterBox.symmetric(np.full(data.p, 5.0))
        problem = build_ivqr_milp(data, 0.5, choose_big_m(data, box), box)
        beta = truth(0.5)
        x = complete_assignment(problem, data, beta)
        assert problem.objective(x) == pytest.approx(MomentModel(data, 0.5).sup_norm(beta))


class TestFormulations:

    def test_golden_lp_file(self, fixtures_dir):
        data = _scalar_dataset([0.5])
        problem = build_ivqr_milp(data, 0.5, 10.0, ParameterBox.symmetric([10.0]), wedge=0.0)
        expected = (fixtures_dir / "ivqr_n1.lp").read_text(encoding="utf-8")
        assert format_lp(problem) == expected

    def test_round_trip(self, jtpa_small, tmp_path):
        ds, _ = jtpa_small
        data = ds.take(range(15))
        box = ParameterBox.symmetric(np.full(data.p, 4.0))
        problem = build_ivqr_milp(data, 0.3, choose_big_m(data, box), box)
        path = export_lp_file(problem, tmp_path / "p.lp")
        back = read_lp_file(path)
        assert problems_equal(back, problem)
        assert parse_lp(format_lp(back)).names == problem.names

    def test_hd_ivqr_rows(self):
        data = _scalar_dataset([0.0, 1.0, 2.0, 3.0])
        problem = build_hd_ivqr_milp(data, 0.5, 0.1, 10.0, ParameterBox.symmetric([10.0]))
        text = format_lp(problem)
        assert "betap_0" in text and "betam_0" in text
        up = problem.row_names.index("mom_up_0")
        lo = problem.row_names.index("mom_lo_0")
        assert problem.rhs[up] == pytest.approx(0.6)
        assert problem.rhs[lo] == pytest.approx(0.4)
        assert problem.metadata['lam'] == 0.1

    def test_censored_powell_median(self):
        # 0 处删失：θ >= 0 时目标为 ρ_τ(y - θ) 的均值，中位数 2 处取 4/6
        data = _scalar_dataset([-1.0, 2.0, 3.0])
        problem = build_censored_milp(data, 0.5, 0.0, 10.0, ParameterBox.symmetric([10.0]))
        solution = branch_and_bound(problem, limits=SearchLimits())
        assert problem.kind == "censored"
        assert solution.termination == "optimal"
        assert solution.objective == pytest.approx(2.0 / 3.0)
        assert solution.beta[0] == pytest.approx(2.0)

    def test_censored_ivqr_needs_censoring(self):
        with pytest.raises(DataError):
            build_censored_ivqr_milp(_scalar_dataset([1.0, 2.0]), 0.5, 10.0)

    def test_build_problem_dispatch(self):
        data = _scalar_dataset([1.0, 2.0])
        assert build_problem("ivqr", data, 0.5, 10.0).kind == "ivqr"
        assert build_problem("hd-ivqr", data, 0.5, 10.0, lam=0.2).kind == "hd-ivqr"

    def test_tau_checked(self):
        with pytest.raises(ConfigError):
            build_ivqr_milp(_scalar_dataset([1.0]), 1.0, 10.0)


class TestQStar:

    def test_formula(self):
        rule = compute_qstar(_scalar_dataset([1.0, 2.0, 3.0, 4.0]))
        assert rule.q_star == pytest.approx(stats.norm.isf(1 / 16) * 2 / 4)
        assert rule.enabled

    def test_requires_two_observations(self):
        with pytest.raises(ConfigError):
            compute_qstar(_scalar_dataset([1.0]))


class TestSubsample:

    def test_full_sample_is_identity(self):
        assert subsample_rows(5, 5, 0).tolist() == [0, 1, 2, 3, 4]

    def test_sorted_and_reproducible(self):
        rows = subsample_rows(100, 10, 3)
        assert rows.tolist() == sorted(rows.tolist())
        assert len(set(rows.tolist())) == 10
        np.testing.assert_array_equal(rows, subsample_rows(100, 10, 3))

    @pytest.mark.parametrize("m", [0, 101])
    def test_out_of_range(self, m):
        with pytest.raises(SubsampleError):
            subsample_rows(100, m, 0)


class TestInitial:

    def test_subsample_solution(self, jtpa_small):
        ds, _ = jtpa_small
        limits = SearchLimits(node_limit=30)
        first = solve_ivqr_initial(ds, 0.5, seed=1, subsample_size=40, limits=limits)
        second = solve_ivqr_initial(ds, 0.5, seed=1, subsample_size=40, limits=limits)
        assert first.beta is not None
        assert len(first.beta) == ds.p
        assert first.beta == second.beta
        assert first.metadata['subsample_size'] == 40
        assert first.metadata['q_star'] > 0
        assert first.termination in ("optimal", "early-stop-qstar", "node-limit")

    def test_early_stop_reached_on_easy_problem(self):
        y = np.random.default_rng(0).normal(size=40)
        solution = solve_ivqr_initial(_scalar_dataset(y), 0.5, subsample_size=40,
                                      limits=SearchLimits(node_limit=50))
        assert solution.termination == "early-stop-qstar"
        assert solution.objective <= solution.metadata['q_star']


def _random_instance(rng: np.random.Generator, n: int) -> Dataset:
    p = int(rng.integers(1, 3))
    n_inst = int(rng.integers(p, 4))
    regressors = rng.normal(size=(n, p - 1))
    instruments = rng.normal(size=(n, n_inst - 1))
    x = np.column_stack([np.ones(n), regressors])
    z = np.column_stack([np.ones(n), instruments])
    y = x @ rng.uniform(-1, 1, size=p) + rng.normal(size=n)
    return Dataset(y=y, x=x, z=z)


def _enumerate_optimum(problem) -> float:
    """逐个固定 ξ ∈ {0,1}^n 求LP，取最小目标"""
    best = math.inf
    for pattern in itertools.product((0.0, 1.0), repeat=len(problem.binaries)):
        lb, ub = problem.lb.copy(), problem.ub.copy()
        lb[problem.binaries] = pattern
        ub[problem.binaries] = pattern
        result = solve_lp(problem, lb, ub, backend="highs")
        if result.is_optimal:
            best = min(best, result.objective)
    return best


class TestBruteForceOracle:

    def _check(self, seed: int, n: int):
        rng = np.random.default_rng(seed)
        data = _random_instance(rng, n)
        tau = float(rng.choice([0.25, 0.5, 0.75]))
        box = ParameterBox.symmetric(np.full(data.p, 5.0))
        problem = build_ivqr_milp(data, tau, choose_big_m(data, box), box)
        solution = branch_and_bound(problem, limits=SearchLimits())
        assert solution.termination == "optimal"
        assert solution.objective == pytest.approx(_enumerate_optimum(problem), abs=1e-7)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_enumeration(self, seed):
        self._check(seed, n=6 + seed % 3)

    @pytest.mark.slow
    def test_matches_enumeration_desk_scale(self):
        for seed in range(100, 150):
            self._check(seed, n=12)
