# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
模拟实验驱动

- 覆盖率实验：子样本MILP初值 → k步修正 → 推断，统计真值被置信集覆盖的频率
- RMSE实验：免调参Jacobian与高斯核估计的均方根误差对比
- 提前终止实验：MILP在节点/时间上限下达到 ‖G_n(β̂)‖∞ <= Q* 的频率

每次重复使用 derive_seed(seed, 标签, r) 派生的独立随机流，并行与串行结果一致；
单次重复失败只记录并计数，不中断实验。
"""


from __future__ import annotations

import logging
import math
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator
from tqdm import tqdm

from ..errors import IvqrlabError, NumericalError
from ..estimation.inference import rectangle_test, wald_test
from ..estimation.jacobian import estimate_entry, kernel_jacobian_baseline
from ..estimation.kstep import run_pipeline
from ..estimation.multipliers import MultiplierScheme
from ..milp.branch_bound import SearchLimits
from ..milp.initial import solve_ivqr_initial
from ..model.moments import MomentFamily, MomentModel
from ..utils.config import config
from ..utils.performance_config import resolve_n_jobs, run_ordered
from ..utils.rng import derive_seed
from .dgp import (
    DerivativeDgpSpec,
    InstrumentVariant,
    JtpaDgpSpec,
    generate_derivative_dgp,
    generate_heteroskedastic_dgp,
    generate_jtpa_like,
    true_gamma,
)

logger = logging.getLogger(__name__)

TargetKind = Literal["ci", "ellipsoid", "rectangle"]


def _map_replications(func: Callable[..., Any], tasks: List[tuple],
                      n_jobs: Optional[int], desc: str) -> List[Any]:
    """串行时显示进度条，并行时交给 joblib，结果按提交顺序返回"""
    if resolve_n_jobs(n_jobs) == 1:
        disable = not config.performance.show_progress
        return [func(*args) for args in tqdm(tasks, desc=desc, ncols=80, ascii=True, disable=disable)]
    return run_ordered(func, tasks, n_jobs)


# ==================== 覆盖率实验 ====================

class CoverageTarget(BaseModel):
    """一个覆盖率统计对象：单坐标区间、子向量椭球或矩形"""
    name: str
    kind: TargetKind
    indices: Tuple[int, ...]

    model_config = {"frozen": True}


def coverage_targets(q: int) -> List[CoverageTarget]:
    """JTPA型设计的标准统计对象（名称中的下标从1开始）

    单坐标 β_2、β_3、β_{3+q}；全向量、β_{3:2+q}、β_{3+q:p} 的椭球与矩形。
    """
    p = 2 * q + 2
    targets = [
        CoverageTarget(name="beta_2", kind="ci", indices=(1,)),
        CoverageTarget(name="beta_3", kind="ci", indices=(2,)),
        CoverageTarget(name=f"beta_{3 + q}", kind="ci", indices=(2 + q,)),
    ]
    blocks = [
        ("beta", tuple(range(p))),
        (f"beta_3:{2 + q}", tuple(range(2, 2 + q))),
        (f"beta_{3 + q}:{p}", tuple(range(2 + q, p))),
    ]
    for name, indices in blocks:
        targets.append(CoverageTarget(name=name, kind="ellipsoid", indices=indices))
        targets.append(CoverageTarget(name=name, kind="rectangle", indices=indices))
    return targets


class CoverageConfig(BaseModel):
    """覆盖率实验配置（默认值为桌面规模）"""
    q: int = Field(default=3, ge=1)
    n: int = Field(default=2000, ge=2)
    replications: int = Field(default=400, ge=1)
    taus: Tuple[float, ...] = (0.5,)
    alphas: Tuple[float, ...] = (0.05, 0.10)
    subsample_size: Optional[int] = Field(default=None, ge=1)
    node_limit: Optional[int] = Field(default=None, ge=1)
    scheme: Optional[str] = None
    draws: Optional[int] = Field(default=None, ge=2)
    rectangle_draws: int = Field(default=10_000, ge=1000)
    seed: int = Field(default=0, ge=0)

    model_config = {"frozen": True}

    @field_validator('taus', 'alphas')
    @classmethod
    def validate_levels(cls, v):
        if not v or any(not 0 < x < 1 for x in v):
            raise ValueError(f"取值必须在 (0,1) 内且非空: {v}")
        return tuple(v)


class ReplicationRecord(BaseModel):
    """单次重复的结果，covered 的键为 '{tau}|{alpha}|{目标名}|{类型}'"""
    replication: int
    seed: int
    status: Literal["ok", "failed"]
    error: Optional[str] = None
    covered: Dict[str, bool] = Field(default_factory=dict)

    model_config = {"frozen": True}


class CoverageEntry(BaseModel):
    tau: float
    alpha: float
    target: str
    kind: TargetKind
    passes: int
    coverage: float

    model_config = {"frozen": True}


class CoverageReport(BaseModel):
    """覆盖率实验报告，coverage = passes / 完成的重复次数"""
    replications: int = Field(description="完成的重复次数 R")
    failures: int = Field(default=0, description="失败的重复次数")
    entries: List[CoverageEntry] = Field(default_factory=list)
    log: List[ReplicationRecord] = Field(default_factory=list)
    config: Dict[str, Any] = Field(default_factory=dict)

    model_config = {"frozen": True}

    def coverage(self, tau: float, alpha: float, target: str, kind: TargetKind = "ci") -> float:
        """查询单个对象的覆盖率"""
        for e in self.entries:
            if e.tau == tau and e.alpha == alpha and e.target == target and e.kind == kind:
                return e.coverage
        raise KeyError(f"{tau}|{alpha}|{target}|{kind}")

    def to_frame(self) -> pd.DataFrame:
        """行为 (τ, 目标, 类型)，列为置信水平 1-α"""
        if not self.entries:
            return pd.DataFrame()
        frame = pd.DataFrame([e.model_dump() for e in self.entries])
        frame['level'] = 1.0 - frame['alpha']
        table = frame.pivot_table(index=['tau', 'target', 'kind'], columns='level',
                                  values='coverage', sort=False)
        table.columns = [f"{level:.0%}" for level in table.columns]
        return table


def _coverage_key(tau: float, alpha: float, target: CoverageTarget) -> str:
    return f"{tau}|{alpha}|{target.name}|{target.kind}"


def _covers(target: CoverageTarget, report, truth: np.ndarray, alpha: float,
            seed: int, draws: int) -> bool:
    beta = np.asarray(report.beta_tilde)
    v = report.covariance.v
    n = report.n
    idx = list(target.indices)
    if target.kind == "ci":
        k = idx[0]
        s = next(s for s in report.interval_sets if s.alpha == alpha)
        return bool(s.lower[k] <= truth[k] <= s.upper[k])
    if target.kind == "ellipsoid":
        try:
            return not wald_test(beta, truth, v, n, alpha, indices=idx).reject
        except NumericalError:
            return False
    if len(idx) == report.p:
        s = next(s for s in report.interval_sets if s.alpha == alpha)
        return not rectangle_test(beta, truth, v, n, alpha, critical_value=s.rectangle_critical_value).reject
    return not rectangle_test(beta, truth, v, n, alpha, seed=seed, indices=idx,
                              draws=draws).reject


def _coverage_replication(cfg: CoverageConfig, targets: List[CoverageTarget], r: int) -> ReplicationRecord:
    seed = derive_seed(cfg.seed, "replication", r)
    covered: Dict[str, bool] = {}
    try:
        dataset, truth_fn = generate_jtpa_like(JtpaDgpSpec(q=cfg.q, n=cfg.n, seed=seed))
        for tau in cfg.taus:
            truth = truth_fn(tau)
            initial = solve_ivqr_initial(dataset, tau, seed=seed, subsample_size=cfg.subsample_size,
                                         limits=SearchLimits(node_limit=cfg.node_limit or config.solver.node_limit))
            if initial.beta is None:
                raise NumericalError("MILP 未找到可行初值", termination=initial.termination)
            report = run_pipeline(dataset, tau, np.asarray(initial.beta), seed=seed,
                                  scheme_kind=cfg.scheme, draws=cfg.draws, alphas=cfg.alphas,
                                  rectangle_draws=cfg.rectangle_draws, beta_null=truth,
                                  n_jobs=1, record_timings=False)
            for alpha in cfg.alphas:
                for t in targets:
                    rect_seed = derive_seed(seed, "rectangle-subvector", *t.indices)
                    covered[_coverage_key(tau, alpha, t)] = _covers(
                        t, report, truth, alpha, rect_seed, cfg.rectangle_draws)
    except IvqrlabError as e:
        logger.warning(f"第 {r} 次重复失败: {e.message}")
        return ReplicationRecord(replication=r, seed=seed, status="failed", error=e.message)
    return ReplicationRecord(replication=r, seed=seed, status="ok", covered=covered)


def run_coverage_experiment(cfg: Optional[CoverageConfig] = None,
                            targets: Optional[Sequence[CoverageTarget]] = None,
                            n_jobs: Optional[int] = None) -> CoverageReport:
    """JTPA型设计的覆盖率实验

    Args:
        cfg: 实验配置
        targets: 统计对象，默认 coverage_targets(q)
        n_jobs: 并行worker数量

    Returns:
        CoverageReport
    """
    cfg = cfg or CoverageConfig()
    targets = list(targets or coverage_targets(cfg.q))
    logger.info(f"覆盖率实验: q={cfg.q}, n={cfg.n}, R={cfg.replications}, τ={list(cfg.taus)}")
    records = _map_replications(_coverage_replication,
                                [(cfg, targets, r) for r in range(cfg.replications)],
                                n_jobs, "覆盖率")

    completed = [rec for rec in records if rec.status == "ok"]
    failures = len(records) - len(completed)
    if failures:
        logger.warning(f"{failures}/{len(records)} 次重复失败，已从覆盖率分母中剔除")
    entries = []
    for tau in cfg.taus:
        for alpha in cfg.alphas:
            for t in targets:
                key = _coverage_key(tau, alpha, t)
                passes = sum(rec.covered[key] for rec in completed)
                entries.append(CoverageEntry(
                    tau=tau, alpha=alpha, target=t.name, kind=t.kind, passes=passes,
                    coverage=passes / len(completed) if completed else math.nan,
                ))
    return CoverageReport(replications=len(completed), failures=failures, entries=entries,
                          log=records, config=cfg.model_dump())


# ==================== RMSE实验 ====================

class RmseCell(BaseModel):
    """导数设计中的一个 (λ, β, n) 组合"""
    lam: float = Field(gt=0)
    beta: float = Field(gt=1)
    n: int = Field(ge=2)

    model_config = {"frozen": True}


DEFAULT_RMSE_GRID: Tuple[RmseCell, ...] = tuple(
    RmseCell(lam=lam, beta=beta, n=n)
    for lam in (10.0, 1.0 / 3.0)
    for beta in (1.5, 3.0)
    for n in (400, 700, 1000, 1300, 1600)
)


def _rmse_replication(cell: RmseCell, cell_index: int, r: int, seed: int) -> Dict[str, Any]:
    rep_seed = derive_seed(seed, "rmse", cell_index, r)
    dataset = generate_derivative_dgp(DerivativeDgpSpec(lam=cell.lam, n=cell.n, seed=rep_seed))
    model = MomentModel(dataset, 0.5, family=MomentFamily.DERIVATIVE)
    b0 = np.array([cell.beta])
    truth = true_gamma(cell.lam, cell.beta)
    row = {'lam': cell.lam, 'beta': cell.beta, 'n': cell.n, 'replication': r}
    scheme = MultiplierScheme(kind=config.bootstrap.scheme, seed=derive_seed(rep_seed, "jacobian"),
                              draws=max(2, math.ceil(math.sqrt(cell.n))))
    try:
        gamma, _ = estimate_entry(model, b0, (0, 0), scheme)
        row['tuning_free_error'] = gamma - truth
    except IvqrlabError as e:
        logger.debug(f"免调参估计失败 {cell}: {e.message}")
        row['tuning_free_error'] = math.nan
    try:
        row['kernel_error'] = float(kernel_jacobian_baseline(model, b0).gamma[0, 0]) - truth
    except IvqrlabError as e:
        logger.debug(f"核估计失败 {cell}: {e.message}")
        row['kernel_error'] = math.nan
    return row


def summarize_rmse(errors: pd.DataFrame, scale: float = 100.0) -> pd.DataFrame:
    """按 (λ, β, n) 汇总RMSE

    Args:
        errors: 每次重复一行，含 tuning_free_error 与 kernel_error 列
        scale: 输出乘数，默认以 10^-2 为单位

    Returns:
        列为 tuning_free、kernel、failures 的表
    """
    def _rmse(s: pd.Series) -> float:
        s = s.dropna()
        return float(np.sqrt(np.mean(np.square(s)))) * scale if len(s) else math.nan

    grouped = errors.groupby(['lam', 'beta', 'n'], sort=False)
    table = pd.DataFrame({
        'tuning_free': grouped['tuning_free_error'].apply(_rmse),
        'kernel': grouped['kernel_error'].apply(_rmse),
        'failures': grouped['tuning_free_error'].apply(lambda s: int(s.isna().sum())),
    })
    return table


def run_rmse_experiment(cells: Sequence[RmseCell] = DEFAULT_RMSE_GRID, replications: int = 200,
                        seed: int = 0, n_jobs: Optional[int] = None,
                        return_errors: bool = False):
    """免调参Jacobian与核估计的RMSE对比（√n 次自助抽样，Silverman带宽）

    Args:
        cells: (λ, β, n) 组合
        replications: 每个组合的重复次数
        seed: 主种子
        n_jobs: 并行worker数量
        return_errors: 同时返回逐次误差

    Returns:
        RMSE表（单位 10^-2），return_errors 时为 (表, 误差明细)
    """
    if replications < 1:
        raise ValueError("重复次数必须>=1")
    tasks = [(cell, c, r, seed) for c, cell in enumerate(cells) for r in range(replications)]
    logger.info(f"RMSE实验: {len(cells)} 个组合 × {replications} 次重复")
    errors = pd.DataFrame(_map_replications(_rmse_replication, tasks, n_jobs, "RMSE"))
    table = summarize_rmse(errors)
    return (table, errors) if return_errors else table


# ==================== 提前终止实验 ====================

class EarlyStopRecord(BaseModel):
    """单次重复：终止状态、‖G_n(β̂)‖∞ 与 Q*"""
    replication: int
    termination: str
    sup_norm: Optional[float] = None
    q_star: Optional[float] = None
    hit: bool

    model_config = {"frozen": True}


class EarlyStopReport(BaseModel):
    """‖G_n(β̂)‖∞ <= Q* 的频率"""
    frequency: float
    replications: int
    hits: int
    instruments: str
    n: int
    p: int
    tau: float
    terminations: Dict[str, int] = Field(default_factory=dict)
    log: List[EarlyStopRecord] = Field(default_factory=list)
    config: Dict[str, Any] = Field(default_factory=dict)

    model_config = {"frozen": True}


def _early_stop_replication(n: int, p: int, tau: float, instruments: str, seed: int, r: int,
                            limits: SearchLimits) -> EarlyStopRecord:
    rep_seed = derive_seed(seed, "replication", r)
    dataset, _, _ = generate_heteroskedastic_dgp(n, p, rep_seed, instruments)
    try:
        solution = solve_ivqr_initial(dataset, tau, seed=rep_seed, subsample_size=n, limits=limits,
                                      early_stop=True)
    except NumericalError as e:
        logger.warning(f"第 {r} 次重复失败: {e.message}")
        return EarlyStopRecord(replication=r, termination="failed", hit=False)
    q_star = float(solution.metadata['q_star'])
    if solution.beta is None:
        return EarlyStopRecord(replication=r, termination=solution.termination, q_star=q_star, hit=False)
    sup_norm = float(MomentModel(dataset, tau).sup_norm(np.asarray(solution.beta)))
    return EarlyStopRecord(replication=r, termination=solution.termination, sup_norm=sup_norm,
                           q_star=q_star, hit=sup_norm <= q_star)


def run_early_stop_experiment(n: int = 100, p: int = 5, replications: int = 200, *,
                              tau: float = 0.7,
                              instruments: InstrumentVariant = "x",
                              node_limit: Optional[int] = None,
                              time_limit_ms: Optional[int] = None,
                              seed: int = 0,
                              n_jobs: Optional[int] = None) -> EarlyStopReport:
    """MILP提前终止实验：Y = X'θ + (X'γ)U，起点取自 N(0, I_p)

    Args:
        n: 样本量（MILP在全样本上求解）
        p: 回归变量个数
        replications: 重复次数，θ、γ 每次重新抽取
        tau: 分位数
        instruments: 工具变量类型
        node_limit: 节点上限
        time_limit_ms: 时间上限，0 表示只评估热启动解
        seed: 主种子
        n_jobs: 并行worker数量

    Returns:
        EarlyStopReport
    """
    if replications < 1:
        raise ValueError("重复次数必须>=1")
    limits = SearchLimits(node_limit=node_limit or config.solver.node_limit, time_limit_ms=time_limit_ms)
    tasks = [(n, p, tau, instruments, seed, r, limits) for r in range(replications)]
    logger.info(f"提前终止实验: n={n}, p={p}, Z={instruments}, R={replications}")
    records = _map_replications(_early_stop_replication, tasks, n_jobs, "提前终止")
    hits = sum(rec.hit for rec in records)
    terminations: Dict[str, int] = {}
    for rec in records:
        terminations[rec.termination] = terminations.get(rec.termination, 0) + 1
    return EarlyStopReport(
        frequency=hits / replications, replications=replications, hits=hits,
        instruments=instruments, n=n, p=p, tau=tau, terminations=terminations, log=records,
        config={'node_limit': limits.node_limit, 'time_limit_ms': time_limit_ms, 'seed': seed},
    )
