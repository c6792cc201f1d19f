# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
有界变量原始单纯形法

稠密单纯形表实现，两阶段法，进基与出基均采用Bland规则防止循环。
变量先平移/拆分为 0 <= s <= U 的标准形式，非基变量取下界或上界。
每隔固定步数由基矩阵重新计算单纯形表，结束时用对偶残差验证最优性。
"""


from __future__ import annotations

import logging
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel
from scipy import optimize

from ..errors import ConfigError, LpCertificationError, LpCyclingError, NumericalError
from ..utils.config import config
from .problem import MilpProblem

logger = logging.getLogger(__name__)

_FEAS_TOL = 1e-9
_OPT_TOL = 1e-9
_PIVOT_TOL = 1e-11
_CERT_TOL = 1e-8
_REFACTOR_EVERY = 50

LpStatus = Literal["optimal", "infeasible", "unbounded"]


class LpResult(BaseModel):
    """LP求解结果"""
    status: LpStatus
    x: Optional[np.ndarray] = None
    objective: float = float("inf")
    iterations: int = 0
    dual_residual: float = 0.0

    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


class _StandardForm:
    """min c's  s.t. M s = b, 0 <= s <= U

    原变量 x = offset + 映射(s)：下界有限时 x = l + s；仅上界有限时 x = u - s；
    自由变量 x = s1 - s2。
    """

    def __init__(self, problem: MilpProblem, lb: np.ndarray, ub: np.ndarray):
        n_orig = problem.num_vars
        cols: List[np.ndarray] = []
        costs: List[float] = []
        upper: List[float] = []
        self.maps: List[tuple] = []
        offset = np.zeros(n_orig)
        a = problem.a
        for j in range(n_orig):
            lo, hi = lb[j], ub[j]
            if np.isfinite(lo):
                offset[j] = lo
                self.maps.append((len(cols), 1.0, None))
                cols.append(a[:, j])
                costs.append(problem.c[j])
                upper.append(hi - lo)
            elif np.isfinite(hi):
                offset[j] = hi
                self.maps.append((len(cols), -1.0, None))
                cols.append(-a[:, j])
                costs.append(-problem.c[j])
                upper.append(np.inf)
            else:
                self.maps.append((len(cols), 1.0, len(cols) + 1))
                cols.extend([a[:, j], -a[:, j]])
                costs.extend([problem.c[j], -problem.c[j]])
                upper.extend([np.inf, np.inf])
        self.offset = offset
        self.n_struct = len(cols)
        m = problem.num_rows
        struct = np.column_stack(cols) if cols else np.zeros((m, 0))
        rhs = problem.rhs - (a @ offset if n_orig else 0.0)

        slack_cols = []
        slack_sign = np.zeros(m)
        for i, sense in enumerate(problem.senses):
            if sense == "=":
                continue
            col = np.zeros(m)
            col[i] = 1.0 if sense == "<=" else -1.0
            slack_sign[i] = col[i]
            slack_cols.append(col)
        slack = np.column_stack(slack_cols) if slack_cols else np.zeros((m, 0))
        flip = np.where(rhs < 0, -1.0, 1.0)
        struct = struct * flip[:, None]
        slack = slack * flip[:, None]
        self.b = rhs * flip

        # 松弛系数为 +1 的行以松弛变量为初始基，其余行加人工变量
        basis = np.full(m, -1)
        slack_rows = np.flatnonzero(slack_sign != 0)
        for s, i in enumerate(slack_rows):
            if slack_sign[i] * flip[i] > 0:
                basis[i] = self.n_struct + s
        need = np.flatnonzero(basis < 0)
        art = np.zeros((m, need.size))
        art[need, np.arange(need.size)] = 1.0
        self.n_slack = slack.shape[1]
        self.art_start = self.n_struct + self.n_slack
        basis[need] = self.art_start + np.arange(need.size)

        self.matrix = np.hstack([struct, slack, art])
        self.cost = np.concatenate([costs, np.zeros(self.n_slack + need.size)])
        self.upper = np.concatenate([upper, np.full(self.n_slack + need.size, np.inf)])
        self.basis = basis
        self.m = m

    def recover(self, values: np.ndarray) -> np.ndarray:
        x = self.offset.copy()
        for j, (col, sign, neg) in enumerate(self.maps):
            x[j] += sign * values[col]
            if neg is not None:
                x[j] -= values[neg]
        return x


class _Tableau:
    """单纯形表状态与迭代"""

    def __init__(self, form: _StandardForm, max_iter: int):
        self.form = form
        self.matrix = form.matrix
        self.upper = form.upper.copy()
        self.basis = form.basis.copy()
        self.at_upper = np.zeros(self.matrix.shape[1], dtype=bool)
        self.iterations = 0
        self.max_iter = max_iter
        self.refactor()

    def refactor(self) -> None:
        b_mat = self.matrix[:, self.basis]
        rhs = self.form.b.copy()
        fixed = np.flatnonzero(self.at_upper)
        if fixed.size:
            rhs -= self.matrix[:, fixed] @ self.upper[fixed]
        try:
            self.table = np.linalg.solve(b_mat, self.matrix)
            self.x_basic = np.linalg.solve(b_mat, rhs)
        except np.linalg.LinAlgError:
            raise NumericalError("单纯形基矩阵奇异")
        self.since_refactor = 0

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        return cost - cost[self.basis] @ self.table

    def _eligible(self, d: np.ndarray) -> np.ndarray:
        nonbasic = np.ones(d.size, dtype=bool)
        nonbasic[self.basis] = False
        movable = self.upper > 0
        tol = _OPT_TOL
        return nonbasic & movable & ((~self.at_upper & (d < -tol)) | (self.at_upper & (d > tol)))

    def _pivot(self, r: int, j: int) -> None:
        row = self.table[r] / self.table[r, j]
        col = self.table[:, j].copy()
        col[r] = 0.0
        self.table -= np.outer(col, row)
        self.table[r] = row

    def run(self, cost: np.ndarray) -> str:
        """迭代至最优或无界"""
        while True:
            if self.iterations >= self.max_iter:
                raise LpCyclingError(f"单纯形迭代超过上限 {self.max_iter}", iterations=self.iterations)
            if self.since_refactor >= _REFACTOR_EVERY:
                self.refactor()
            d = self.reduced_costs(cost)
            eligible = np.flatnonzero(self._eligible(d))
            if eligible.size == 0:
                return "optimal"
            j = int(eligible[0])
            direction = -1.0 if self.at_upper[j] else 1.0
            col = self.table[:, j]
            alpha = direction * col
            u_basic = self.upper[self.basis]
            ratios = np.full(self.form.m, np.inf)
            dec = alpha > _PIVOT_TOL
            ratios[dec] = np.maximum(self.x_basic[dec], 0.0) / alpha[dec]
            inc = (alpha < -_PIVOT_TOL) & np.isfinite(u_basic)
            ratios[inc] = np.maximum(u_basic[inc] - self.x_basic[inc], 0.0) / -alpha[inc]
            theta_row = float(ratios.min()) if ratios.size else np.inf
            theta_flip = float(self.upper[j])
            self.iterations += 1
            self.since_refactor += 1

            if not np.isfinite(theta_row) and not np.isfinite(theta_flip):
                return "unbounded"
            if theta_flip <= theta_row:
                self.x_basic -= alpha * theta_flip
                self.at_upper[j] = not self.at_upper[j]
                continue

            ties = np.flatnonzero(ratios <= theta_row)
            r = int(ties[np.argmin(self.basis[ties])])
            start = self.upper[j] if self.at_upper[j] else 0.0
            self.x_basic -= alpha * theta_row
            leaving = self.basis[r]
            self.at_upper[leaving] = alpha[r] < 0
            self._pivot(r, j)
            self.x_basic[r] = start + direction * theta_row
            self.basis[r] = j
            self.at_upper[j] = False

    def values(self) -> np.ndarray:
        v = np.where(self.at_upper, self.upper, 0.0)
        v[self.basis] = self.x_basic
        return np.clip(v, 0.0, self.upper)

    def dual_residual(self, cost: np.ndarray) -> float:
        b_mat = self.matrix[:, self.basis]
        y = np.linalg.solve(b_mat.T, cost[self.basis])
        d = cost - self.matrix.T @ y
        nonbasic = np.ones(d.size, dtype=bool)
        nonbasic[self.basis] = False
        movable = nonbasic & (self.upper > 0)
        bad = np.where(self.at_upper, np.maximum(d, 0.0), np.maximum(-d, 0.0))
        worst = float(np.max(bad[movable], initial=0.0))
        return max(worst, float(np.max(np.abs(d[self.basis]), initial=0.0)))


def _solve_simplex(problem: MilpProblem, lb: np.ndarray, ub: np.ndarray) -> LpResult:
    form = _StandardForm(problem, lb, ub)
    max_iter = 50 * (form.matrix.shape[0] + form.matrix.shape[1]) + 1000
    tab = _Tableau(form, max_iter)

    n_art = form.matrix.shape[1] - form.art_start
    if n_art:
        phase_one = np.zeros(form.matrix.shape[1])
        phase_one[form.art_start:] = 1.0
        tab.run(phase_one)
        tab.refactor()
        infeasibility = float(np.sum(tab.values()[form.art_start:]))
        if infeasibility > _FEAS_TOL * (1.0 + float(np.max(np.abs(form.b), initial=0.0))):
            return LpResult(status="infeasible", iterations=tab.iterations)
        tab.upper[form.art_start:] = 0.0
        tab.at_upper[form.art_start:] = False
        tab.refactor()

    scale = 1.0 + float(np.max(np.abs(form.cost), initial=0.0))
    residual = np.inf
    for _ in range(3):
        if tab.run(form.cost) == "unbounded":
            return LpResult(status="unbounded", iterations=tab.iterations)
        tab.refactor()
        residual = tab.dual_residual(form.cost)
        if residual <= _CERT_TOL * scale:
            break
        logger.debug(f"对偶残差 {residual:.3e} 超出容差，重新分解后继续迭代")
    else:
        # 未经验证的界不能用于剪枝
        raise LpCertificationError(f"LP最优性验证未通过，对偶残差 {residual:.3e}",
                                   dual_residual=residual, iterations=tab.iterations)

    x = form.recover(tab.values())
    return LpResult(status="optimal", x=x, objective=problem.objective(x),
                    iterations=tab.iterations, dual_residual=residual)


def _solve_highs(problem: MilpProblem, lb: np.ndarray, ub: np.ndarray) -> LpResult:
    senses = np.asarray(problem.senses)
    le = senses == "<="
    ge = senses == ">="
    eq = senses == "="
    a_ub = np.vstack([problem.a[le], -problem.a[ge]])
    b_ub = np.concatenate([problem.rhs[le], -problem.rhs[ge]])
    bounds = [(None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
              for lo, hi in zip(lb, ub)]
    res = optimize.linprog(problem.c, A_ub=a_ub if a_ub.size else None, b_ub=b_ub if a_ub.size else None,
                           A_eq=problem.a[eq] if eq.any() else None, b_eq=problem.rhs[eq] if eq.any() else None,
                           bounds=bounds, method='highs')
    if res.status == 2:
        return LpResult(status="infeasible", iterations=int(res.nit))
    if res.status == 3:
        return LpResult(status="unbounded", iterations=int(res.nit))
    if res.status != 0:
        raise NumericalError(f"HiGHS求解失败: {res.message}")
    x = np.asarray(res.x, dtype=float)
    return LpResult(status="optimal", x=x, objective=problem.objective(x), iterations=int(res.nit))


def solve_lp(problem: MilpProblem, lb: Optional[np.ndarray] = None, ub: Optional[np.ndarray] = None,
             backend: Optional[str] = None) -> LpResult:
    """求解LP松弛（二元变量放松到其界内）

    Args:
        problem: MILP问题
        lb: 覆盖的变量下界（分支定界中用于固定二元变量）
        ub: 覆盖的变量上界
        backend: "simplex" 或 "highs"，默认按配置

    Returns:
        LpResult
    """
    lb = problem.lb.copy() if lb is None else np.asarray(lb, dtype=float)
    ub = problem.ub.copy() if ub is None else np.asarray(ub, dtype=float)
    if lb.shape != (problem.num_vars,) or ub.shape != (problem.num_vars,):
        raise ConfigError("覆盖的变量界维度不一致")
    if np.any(lb > ub):
        return LpResult(status="infeasible")
    backend = backend or config.solver.lp_backend
    if backend == "highs":
        return _solve_highs(problem, lb, ub)
    if backend != "simplex":
        raise ConfigError(f"未知LP后端: {backend}")
    return _solve_simplex(problem, lb, ub)
