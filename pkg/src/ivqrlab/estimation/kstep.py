# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
k步修正估计

一步修正算子 A(v,Q) = v - (Q'Q)^{-1}Q'G_n(v)，其K次迭代，
以及从粗糙初值到最终估计与推断的完整流程。
"""


from __future__ import annotations

import logging
import math
import time
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator
from scipy import linalg

from ..errors import ConfigError, NumericalError, SingularJacobianError
from ..model.dataset import Dataset
from ..model.moments import MomentFamily, MomentModel
from ..utils.config import config
from ..utils.perf import timed
from ..utils.rng import derive_seed

logger = logging.getLogger(__name__)


class JacobianMatrix(BaseModel):
    """L×p Jacobian 矩阵（Γ*, Γ̂, Γ̃）

    Γ'Γ 是否可逆不在构造时检查，而在使用处检查。
    """
    gamma: np.ndarray

    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    @field_validator('gamma', mode='before')
    @classmethod
    def as_matrix(cls, v):
        """转换为只读二维浮点矩阵"""
        arr = np.array(v, dtype=float, copy=True)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise ValueError(f"Jacobian必须是二维矩阵，得到形状 {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("Jacobian含有非有限值")
        arr.flags.writeable = False
        return arr

    @property
    def shape(self):
        return self.gamma.shape


def default_k(n: int) -> int:
    """默认迭代次数 K = 1 + ceil(2 ln n)"""
    return 1 + math.ceil(2 * math.log(max(n, 1)))


class KStepConfig(BaseModel):
    """k步迭代配置"""
    k_iterations: int = Field(ge=1, description="迭代次数K")
    trace_enabled: bool = Field(default=True, description="是否记录迭代轨迹")

    model_config = {"frozen": True}

    @classmethod
    def for_sample_size(cls, n: int, trace_enabled: bool = True) -> "KStepConfig":
        """按样本量取默认K"""
        return cls(k_iterations=default_k(n), trace_enabled=trace_enabled)


class IterationTrace(BaseModel):
    """迭代轨迹：起点与每步迭代值及其矩范数，长度 K+1"""
    iterates: List[List[float]]
    sup_norms: List[float]
    stationary_from: Optional[int] = Field(default=None, description="迭代值开始精确重复的步数")

    model_config = {"frozen": True}

    @model_validator(mode='after')
    def check_lengths(self):
        if len(self.iterates) != len(self.sup_norms):
            raise ValueError("迭代值与矩范数长度不一致")
        return self

    def __len__(self) -> int:
        return len(self.iterates)

    def errors_to(self, target: np.ndarray) -> np.ndarray:
        """各步迭代值到 target 的欧氏距离"""
        arr = np.asarray(self.iterates, dtype=float)
        return np.linalg.norm(arr - np.asarray(target, dtype=float), axis=1)


def _as_gamma(q: Union[JacobianMatrix, np.ndarray]) -> np.ndarray:
    return q.gamma if isinstance(q, JacobianMatrix) else np.asarray(q, dtype=float)


class CorrectionOperator:
    """一步修正算子，缓存 Q 的QR分解

    (Q'Q)^{-1}Q'g 通过 R^{-1}(Q_r'g) 计算，不显式求逆。
    """

    def __init__(self, q: Union[JacobianMatrix, np.ndarray], singular_tol: Optional[float] = None):
        gamma = _as_gamma(q)
        if gamma.ndim != 2 or gamma.shape[0] < gamma.shape[1]:
            raise ConfigError(f"Q 应为 L×p 且 L >= p，得到形状 {gamma.shape}")
        tol = config.inference.singular_tol if singular_tol is None else singular_tol
        eig = np.linalg.eigvalsh(gamma.T @ gamma)
        if eig[-1] <= 0 or eig[0] <= tol * eig[-1]:
            raise SingularJacobianError(
                f"Q'Q 近奇异，最小特征值 {eig[0]:.3e}（最大 {eig[-1]:.3e}）",
                smallest_eigenvalue=float(eig[0]),
            )
        self.gamma = gamma
        self.smallest_eigenvalue = float(eig[0])
        self._q, self._r = linalg.qr(gamma, mode='economic')

    def direction(self, g: np.ndarray) -> np.ndarray:
        """(Q'Q)^{-1}Q'g"""
        if not np.any(np.einsum('ij,i->j', self.gamma, g, optimize=False)):
            return np.zeros(self.gamma.shape[1])
        return linalg.solve_triangular(self._r, self._q.T @ g)

    def apply(self, v: np.ndarray, model: MomentModel) -> np.ndarray:
        """A(v,Q)"""
        v = np.asarray(v, dtype=float)
        step = self.direction(model.sample_moment(v))
        if not step.any():
            return v.copy()
        return v - step


def one_step(v: np.ndarray, q: Union[JacobianMatrix, np.ndarray], model: MomentModel) -> np.ndarray:
    """一步修正 A(v,Q) = v - (Q'Q)^{-1}Q'G_n(v)

    Args:
        v: 当前参数，长度 p
        q: Jacobian矩阵 L×p
        model: 矩模型

    Returns:
        修正后的参数
    """
    return CorrectionOperator(q).apply(v, model)


def iterate(v0: np.ndarray, q: Union[JacobianMatrix, np.ndarray], model: MomentModel,
            k_config: Optional[KStepConfig] = None):
    """K次迭代一步修正算子

    G_n 分段常数，迭代值一旦精确重复即停止并补齐轨迹。

    Args:
        v0: 起点
        q: Jacobian矩阵
        model: 矩模型
        k_config: 迭代配置，默认按样本量确定K

    Returns:
        (v_K, IterationTrace 或 None)
    """
    k_config = k_config or KStepConfig.for_sample_size(model.n)
    try:
        operator = CorrectionOperator(q)
    except SingularJacobianError as e:
        raise SingularJacobianError(e.message, smallest_eigenvalue=e.smallest_eigenvalue, iteration=1)

    v = np.array(v0, dtype=float, copy=True)
    if v.shape != (model.p,) or not np.all(np.isfinite(v)):
        raise ConfigError(f"起点应为长度 {model.p} 的有限向量")

    iterates = [v.tolist()]
    norms: List[float] = []
    stationary_from = None
    for k in range(1, k_config.k_iterations + 1):
        g = model.sample_moment(v)
        norms.append(float(np.max(np.abs(g))))
        step = operator.direction(g)
        new = v - step if step.any() else v
        if not np.all(np.isfinite(new)):
            raise NumericalError(f"第{k}步迭代出现非有限值", iteration=k)
        if np.array_equal(new, v):
            stationary_from = k
            break
        v = new
        iterates.append(v.tolist())

    trace = None
    if k_config.trace_enabled:
        last = norms[-1] if stationary_from is not None else model.sup_norm(v)
        norms = norms[:len(iterates) - 1] + [last]
        while len(iterates) < k_config.k_iterations + 1:
            iterates.append(v.tolist())
            norms.append(last)
        trace = IterationTrace(iterates=iterates, sup_norms=norms, stationary_from=stationary_from)
    if stationary_from is not None:
        logger.debug(f"迭代在第{stationary_from}步达到精确不动点")
    return v, trace


def run_pipeline(dataset: Dataset, tau: float, initial_beta: np.ndarray,
                 initial_gamma: Optional[Union[JacobianMatrix, np.ndarray]] = None,
                 k_config: Optional[KStepConfig] = None, *,
                 seed: int = 0,
                 family: Union[MomentFamily, str] = MomentFamily.IVQR,
                 scheme_kind: Optional[str] = None,
                 draws: Optional[int] = None,
                 window: Optional[float] = None,
                 permissive_jacobian: bool = False,
                 alphas: Optional[Sequence[float]] = None,
                 rectangle_draws: Optional[int] = None,
                 beta_null: Optional[np.ndarray] = None,
                 n_jobs: Optional[int] = None,
                 record_timings: bool = True):
    """非光滑GMM的估计与推断流程

    β̂ = A_K(β̄, Γ̂) → 在 β̂ 处重估 Γ̃ → β̃ = A_K(β̂, Γ̃) → Ω̂, V̂ → 置信区间与检验。
    初值不必相合。

    Args:
        dataset: 数据集
        tau: 分位数
        initial_beta: 初始估计 β̄
        initial_gamma: 初始Jacobian Γ̂，None 时在 β̄ 处用免调参法估计
        k_config: 迭代配置
        seed: 主种子，各组件种子按标签派生
        family: 矩函数族
        scheme_kind: 乘子分布
        draws: 自助抽样次数
        window: 求根窗口半宽
        permissive_jacobian: 不可估计元素置零而非报错
        alphas: 显著性水平
        rectangle_draws: 矩形临界值模拟次数
        beta_null: 检验的原假设，默认零向量
        n_jobs: 并行worker数量
        record_timings: 是否在报告中记录耗时

    Returns:
        InferenceReport
    """
    from .inference import (
        InferenceReport,
        asymptotic_variance,
        build_interval_sets,
        estimate_omega,
        rectangle_test,
        wald_test,
    )
    from .jacobian import estimate_jacobian
    from .multipliers import MultiplierScheme, default_draws

    model = MomentModel(dataset, tau, family=family)
    k_config = k_config or KStepConfig.for_sample_size(dataset.n)
    alphas = tuple(alphas or config.inference.alphas)
    rectangle_draws = rectangle_draws or config.inference.rectangle_draws
    scheme_kind = scheme_kind or config.bootstrap.scheme
    draws = draws or default_draws(dataset.n)
    beta_null = np.zeros(dataset.p) if beta_null is None else np.asarray(beta_null, dtype=float)
    timings: Dict[str, float] = {}
    seeds = {
        'master': int(seed),
        'jacobian-initial': derive_seed(seed, 'jacobian-initial'),
        'jacobian-refresh': derive_seed(seed, 'jacobian-refresh'),
        'rectangle': derive_seed(seed, 'rectangle'),
    }
    flags: List[str] = []
    initial_beta = np.asarray(initial_beta, dtype=float)

    def _scheme(label: str) -> MultiplierScheme:
        return MultiplierScheme(kind=scheme_kind, seed=seeds[label], draws=draws)

    start = time.perf_counter()
    if initial_gamma is None:
        with timed("初始Jacobian", sink=timings):
            initial_estimate = estimate_jacobian(model, initial_beta, _scheme('jacobian-initial'),
                                                 window=window, permissive=permissive_jacobian,
                                                 n_jobs=n_jobs)
        initial_gamma = initial_estimate.to_matrix()
        flags.extend(f"initial-{f}" for f in initial_estimate.flags())
    elif not isinstance(initial_gamma, JacobianMatrix):
        initial_gamma = JacobianMatrix(gamma=initial_gamma)

    with timed("第一轮k步", sink=timings):
        beta_hat, trace_first = iterate(initial_beta, initial_gamma, model, k_config)

    with timed("重估Jacobian", sink=timings):
        refreshed = estimate_jacobian(model, beta_hat, _scheme('jacobian-refresh'),
                                      window=window, permissive=permissive_jacobian, n_jobs=n_jobs)
    flags.extend(refreshed.flags())

    with timed("第二轮k步", sink=timings):
        beta_tilde, trace_second = iterate(beta_hat, refreshed.to_matrix(), model, k_config)

    with timed("推断", sink=timings):
        omega = estimate_omega(model, beta_tilde)
        variance = asymptotic_variance(refreshed.to_matrix(), omega)
        interval_sets = build_interval_sets(beta_tilde, variance.v, dataset.n, alphas,
                                            rectangle_draws, seeds['rectangle'])
        rectangle_results = [
            rectangle_test(beta_tilde, beta_null, variance.v, dataset.n, s.alpha,
                           critical_value=s.rectangle_critical_value)
            for s in interval_sets
        ]
        wald_results = []
        try:
            wald_results = [wald_test(beta_tilde, beta_null, variance.v, dataset.n, a) for a in alphas]
        except NumericalError as e:
            logger.warning(f"V̂ 奇异，仅报告矩形推断: {e.message}")
            flags.append("wald-unavailable-singular-variance")
    timings['总计'] = time.perf_counter() - start

    logger.info(f"τ={tau} 估计完成: K={k_config.k_iterations}, ‖G_n(β̃)‖∞={model.sup_norm(beta_tilde):.3e}")
    return InferenceReport(
        tau=tau,
        n=dataset.n,
        p=dataset.p,
        L=dataset.L,
        k_iterations=k_config.k_iterations,
        initial_beta=initial_beta.tolist(),
        beta_hat=beta_hat.tolist(),
        beta_tilde=beta_tilde.tolist(),
        initial_gamma=initial_gamma.gamma.tolist(),
        covariance=variance,
        moment_sup_norm=model.sup_norm(beta_tilde),
        interval_sets=interval_sets,
        wald=wald_results,
        rectangle=rectangle_results,
        beta_null=beta_null.tolist(),
        trace_first=trace_first,
        trace_second=trace_second,
        jacobian_diagnostics=refreshed.diagnostics,
        seeds=seeds,
        flags=flags,
        timings=timings if record_timings else None,
    )
