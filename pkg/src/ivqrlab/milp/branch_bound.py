# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
分支定界与 Q* 提前终止

最优界优先搜索，对最不整的二元变量分支（并列取最小下标），先0后1。
节点之间检查时间与节点上限，到达上限时返回当前最好解而不是报错。
对以矩范数为目标的问题，当前最好解的目标值不超过 Q* 时立即停止。
"""


from __future__ import annotations

import heapq
import logging
import math
import time
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy import stats

from ..errors import ConfigError
from ..model.dataset import Dataset
from ..utils.config import config
from .problem import MilpProblem
from .simplex import LpResult, solve_lp

logger = logging.getLogger(__name__)

Termination = Literal["optimal", "early-stop-qstar", "time-limit", "node-limit", "infeasible"]
Completion = Callable[[np.ndarray], Optional[np.ndarray]]

_SUP_NORM_KINDS = ("ivqr", "censored-ivqr")


class EarlyStopRule(BaseModel):
    """Q* 提前终止规则"""
    q_star: float = Field(ge=0, description="阈值 Q*")
    enabled: bool = Field(default=True, description="是否启用")

    model_config = {"frozen": True}


class SearchLimits(BaseModel):
    """搜索上限，None 表示不限"""
    time_limit_ms: Optional[int] = Field(default=None, ge=0)
    node_limit: Optional[int] = Field(default=None, ge=1)

    model_config = {"frozen": True}

    @classmethod
    def from_config(cls) -> "SearchLimits":
        return cls(time_limit_ms=config.solver.time_limit_ms, node_limit=config.solver.node_limit)


class MilpSolution(BaseModel):
    """分支定界结果"""
    assignment: Optional[List[float]] = None
    beta: Optional[List[float]] = None
    objective: float = math.inf
    best_bound: float = -math.inf
    gap: float = math.inf
    termination: Termination
    nodes: int = 0
    wall_time: float = 0.0
    incumbent_source: Optional[str] = None
    metadata: dict = Field(default_factory=dict)

    model_config = {"frozen": True}


def compute_qstar(dataset: Dataset) -> EarlyStopRule:
    """Q* = Φ^{-1}(1 - n^{-2}) · n^{-1} · sqrt(max_j Σ_i Z_ij²)

    Args:
        dataset: 用于MILP的数据集（通常为子样本）

    Returns:
        EarlyStopRule
    """
    n = dataset.n
    if n < 2:
        raise ConfigError("Q* 要求 n >= 2")
    col_norm = np.sqrt(np.max(np.sum(dataset.z * dataset.z, axis=0)))
    q_star = float(stats.norm.isf(1.0 / n ** 2) * col_norm / n)
    return EarlyStopRule(q_star=q_star, enabled=config.solver.early_stop)


class _Search:
    """一次分支定界搜索的可变状态"""

    def __init__(self, problem: MilpProblem, rule: Optional[EarlyStopRule], limits: SearchLimits,
                 completion: Optional[Completion], backend: Optional[str]):
        self.problem = problem
        self.rule = rule if (rule is not None and rule.enabled and problem.kind in _SUP_NORM_KINDS) else None
        self.limits = limits
        self.completion = completion
        self.backend = backend
        self.tol = config.solver.integrality_tol
        self.start = time.perf_counter()
        self.incumbent: Optional[np.ndarray] = None
        self.incumbent_value = math.inf
        self.incumbent_source: Optional[str] = None
        self.nodes = 0
        self.heap: List[Tuple[float, int, np.ndarray, np.ndarray, LpResult]] = []
        self.counter = 0

    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    def out_of_time(self) -> bool:
        limit = self.limits.time_limit_ms
        return limit is not None and self.elapsed() * 1000 >= limit

    def out_of_nodes(self) -> bool:
        limit = self.limits.node_limit
        return limit is not None and self.nodes >= limit

    def early_stop(self) -> bool:
        return self.rule is not None and self.incumbent_value <= self.rule.q_star

    def offer(self, x: np.ndarray, source: str) -> None:
        """尝试以 x 更新当前最好解"""
        x = np.asarray(x, dtype=float)
        value = self.problem.objective(x)
        if value < self.incumbent_value - 1e-12 * (1 + abs(value)):
            self.incumbent = x
            self.incumbent_value = value
            self.incumbent_source = source
            logger.debug(f"更新最好解: {value:.6g}（来源 {source}）")

    def complete(self, beta: np.ndarray, source: str) -> None:
        if self.completion is None:
            return
        x = self.completion(np.asarray(beta, dtype=float))
        if x is not None:
            self.offer(x, source)

    def solve_node(self, lb: np.ndarray, ub: np.ndarray) -> Optional[LpResult]:
        self.nodes += 1
        res = solve_lp(self.problem, lb, ub, backend=self.backend)
        if not res.is_optimal:
            return None
        if self.problem.is_integral(res.x, self.tol):
            x = res.x.copy()
            x[self.problem.binaries] = np.round(x[self.problem.binaries])
            if self.problem.max_violation(x) <= 1e-7 * (1 + float(self.problem.metadata.get('big_m', 1.0))):
                self.offer(x, "lp-integral")
        if self.problem.beta_index:
            self.complete(self.problem.extract_beta(res.x), "node-lp")
        return res

    def push(self, lb: np.ndarray, ub: np.ndarray, res: LpResult) -> None:
        heapq.heappush(self.heap, (res.objective, self.counter, lb, ub, res))
        self.counter += 1

    def branch_index(self, x: np.ndarray) -> Optional[int]:
        bins = np.asarray(self.problem.binaries)
        frac = np.minimum(x[bins] - np.floor(x[bins]), np.ceil(x[bins]) - x[bins])
        if frac.size == 0 or frac.max() <= self.tol:
            return None
        return int(bins[int(np.argmax(frac))])


def branch_and_bound(problem: MilpProblem, rule: Optional[EarlyStopRule] = None,
                     limits: Optional[SearchLimits] = None, warm_start: Optional[np.ndarray] = None,
                     completion: Optional[Completion] = None,
                     heuristics: Sequence[Tuple[str, np.ndarray]] = (),
                     backend: Optional[str] = None) -> MilpSolution:
    """分支定界求解MILP

    Args:
        problem: MILP问题
        rule: Q* 提前终止规则（仅对以矩范数为目标的问题生效）
        limits: 时间与节点上限
        warm_start: 热启动参数 β，经 completion 补全为整数可行解
        completion: 由 β 构造整数可行解的函数
        heuristics: 首次时间检查之后尝试的 (名称, β) 列表
        backend: LP后端

    Returns:
        MilpSolution
    """
    limits = limits or SearchLimits.from_config()
    search = _Search(problem, rule, limits, completion, backend)

    def finish(termination: Termination) -> MilpSolution:
        if search.incumbent is None and termination == "optimal":
            termination = "infeasible"
        open_bounds = [entry[0] for entry in search.heap]
        if termination == "optimal":
            best_bound = search.incumbent_value
        else:
            best_bound = min(open_bounds + [search.incumbent_value]) if open_bounds else search.incumbent_value
            if search.incumbent is None and not open_bounds:
                best_bound = -math.inf
        gap = max(search.incumbent_value - best_bound, 0.0) if search.incumbent is not None else math.inf
        beta = None
        if search.incumbent is not None and problem.beta_index:
            beta = problem.extract_beta(search.incumbent).tolist()
        elapsed = search.elapsed()
        logger.info(f"分支定界结束: {termination}, 目标 {search.incumbent_value:.6g}, "
                    f"节点 {search.nodes}, 耗时 {elapsed:.2f}秒")
        return MilpSolution(
            assignment=None if search.incumbent is None else search.incumbent.tolist(),
            beta=beta,
            objective=search.incumbent_value,
            best_bound=best_bound,
            gap=gap,
            termination=termination,
            nodes=search.nodes,
            wall_time=elapsed,
            incumbent_source=search.incumbent_source,
        )

    if warm_start is not None:
        search.complete(warm_start, "warm-start")
        if search.early_stop():
            return finish("early-stop-qstar")
    if search.out_of_time():
        return finish("time-limit")
    for name, beta in heuristics:
        search.complete(beta, name)
        if search.early_stop():
            return finish("early-stop-qstar")

    root = search.solve_node(problem.lb.copy(), problem.ub.copy())
    if search.early_stop():
        return finish("early-stop-qstar")
    if root is None:
        return finish("infeasible" if search.incumbent is None else "optimal")
    search.push(problem.lb.copy(), problem.ub.copy(), root)

    while search.heap:
        bound, _, lb, ub, res = heapq.heappop(search.heap)
        if bound >= search.incumbent_value - 1e-9 * (1 + abs(search.incumbent_value)):
            search.heap.clear()
            break
        j = search.branch_index(res.x)
        if j is None:
            continue
        for value in (0.0, 1.0):
            if search.out_of_time():
                search.push(lb, ub, res)
                return finish("time-limit")
            if search.out_of_nodes():
                search.push(lb, ub, res)
                return finish("node-limit")
            child_lb, child_ub = lb.copy(), ub.copy()
            child_lb[j] = child_ub[j] = value
            child = search.solve_node(child_lb, child_ub)
            if search.early_stop():
                return finish("early-stop-qstar")
            if child is not None and child.objective < search.incumbent_value:
                search.push(child_lb, child_ub, child)

    return finish("optimal")
