# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
渐近推断

夹心方差 V̂ = (Γ'Γ)^{-1}Γ'Ω̂Γ(Γ'Γ)^{-1}、Wald检验、基于 ‖·‖∞ 的矩形检验与置信集、
逐坐标置信区间，以及汇总全部结果的 InferenceReport。
"""


from __future__ import annotations

import logging
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, field_validator
from scipy import linalg, stats

from ..errors import ConfigError, InvalidVarianceError, SingularJacobianError, SingularVarianceError
from ..model.moments import MomentModel
from ..utils.config import config
from ..utils.rng import stream_rng
from .jacobian import EntryDiagnostics
from .kstep import IterationTrace, JacobianMatrix

logger = logging.getLogger(__name__)

_PSD_TOL = 1e-8
_SIM_CHUNK = 10000


def _frozen_matrix(v) -> np.ndarray:
    arr = np.array(v, dtype=float, copy=True)
    if arr.ndim != 2:
        raise ValueError(f"应为二维矩阵，得到形状 {arr.shape}")
    arr.flags.writeable = False
    return arr


class CovarianceEstimate(BaseModel):
    """Ω̂、V̂ 及所用的 Γ"""
    omega: np.ndarray
    v: np.ndarray
    gamma: np.ndarray

    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    @field_validator('omega', 'v', 'gamma', mode='before')
    @classmethod
    def as_matrix(cls, value):
        return _frozen_matrix(value)

    @property
    def standard_errors(self) -> np.ndarray:
        """sqrt(diag V̂)，未除以 sqrt(n)"""
        return np.sqrt(np.clip(np.diag(self.v), 0.0, None))

    def to_dict(self) -> dict:
        return {'omega': self.omega.tolist(), 'v': self.v.tolist(), 'gamma': self.gamma.tolist()}


class TestResult(BaseModel):
    """检验结果，reject ⇔ statistic > critical_value"""
    kind: Literal["wald", "rectangle", "t"]
    statistic: float
    critical_value: float
    alpha: float = Field(gt=0, lt=1)
    reject: bool
    df: Optional[int] = Field(default=None, description="Wald检验自由度")
    indices: Optional[List[int]] = Field(default=None, description="被检验的坐标，None表示全部")

    model_config = {"frozen": True}

    # 防止pytest把该类当作测试类收集
    __test__ = False


class IntervalSet(BaseModel):
    """某一显著性水平下的逐坐标区间与矩形置信集"""
    alpha: float
    lower: List[float]
    upper: List[float]
    rectangle_critical_value: float
    rect_lower: List[float]
    rect_upper: List[float]

    model_config = {"frozen": True}


class InferenceReport(BaseModel):
    """单个分位数的完整估计与推断结果"""
    tau: float
    n: int
    p: int
    L: int
    k_iterations: int
    initial_beta: List[float]
    beta_hat: List[float]
    beta_tilde: List[float]
    initial_gamma: List[List[float]]
    covariance: CovarianceEstimate
    moment_sup_norm: float
    interval_sets: List[IntervalSet]
    wald: List[TestResult]
    rectangle: List[TestResult]
    beta_null: List[float]
    trace_first: Optional[IterationTrace] = None
    trace_second: Optional[IterationTrace] = None
    jacobian_diagnostics: List[EntryDiagnostics] = Field(default_factory=list)
    seeds: Dict[str, int] = Field(default_factory=dict)
    flags: List[str] = Field(default_factory=list)
    timings: Optional[Dict[str, float]] = None

    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    def to_dict(self) -> dict:
        """转换为JSON友好的字典"""
        out = self.model_dump(exclude={'covariance'})
        out['covariance'] = self.covariance.to_dict()
        out['standard_errors'] = (self.covariance.standard_errors / np.sqrt(self.n)).tolist()
        if self.timings is None:
            out.pop('timings')
        return out


# ==================== 方差 ====================

def estimate_omega(model: MomentModel, beta: np.ndarray) -> np.ndarray:
    """Ω̂ = n^{-1} Σ g_i g_i'"""
    g = model.contributions(np.asarray(beta, dtype=float))
    omega = np.einsum('ij,ik->jk', g, g, optimize=False) / model.n
    return (omega + omega.T) / 2


def asymptotic_variance(gamma, omega: np.ndarray,
                        singular_tol: Optional[float] = None) -> CovarianceEstimate:
    """夹心方差 V̂ = (Γ'Γ)^{-1}Γ'ΩΓ(Γ'Γ)^{-1}

    通过 Γ 的QR分解计算 A = R^{-1}Q'，V̂ = AΩA'，最后对称化。

    Args:
        gamma: L×p Jacobian
        omega: L×L 矩方差
        singular_tol: 相对奇异阈值

    Returns:
        CovarianceEstimate
    """
    g = gamma.gamma if isinstance(gamma, JacobianMatrix) else np.asarray(gamma, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if g.ndim != 2 or omega.shape != (g.shape[0], g.shape[0]):
        raise ConfigError(f"Γ 形状 {g.shape} 与 Ω 形状 {omega.shape} 不匹配")
    tol = config.inference.singular_tol if singular_tol is None else singular_tol
    eig = np.linalg.eigvalsh(g.T @ g)
    if eig[-1] <= 0 or eig[0] <= tol * eig[-1]:
        raise SingularJacobianError(f"Γ'Γ 近奇异，最小特征值 {eig[0]:.3e}",
                                    smallest_eigenvalue=float(eig[0]))
    q, r = linalg.qr(g, mode='economic')
    a = linalg.solve_triangular(r, q.T)
    v = a @ omega @ a.T
    return CovarianceEstimate(omega=omega, v=(v + v.T) / 2, gamma=g)


def _subvector(beta, null, v, indices):
    beta = np.asarray(beta, dtype=float)
    null = np.asarray(null, dtype=float)
    v = np.asarray(v, dtype=float)
    if beta.shape != null.shape or v.shape != (beta.size, beta.size):
        raise ConfigError("β、β0 与 V 的维度不一致")
    if indices is None:
        return beta - null, v, None
    idx = [int(i) for i in indices]
    if not idx or min(idx) < 0 or max(idx) >= beta.size:
        raise ConfigError(f"坐标下标越界: {idx}")
    return (beta - null)[idx], v[np.ix_(idx, idx)], idx


# ==================== 检验 ====================

def wald_test(beta_tilde, beta_null, v, n: int, alpha: float,
              indices: Optional[Sequence[int]] = None) -> TestResult:
    """Wald检验 n(β̃-β0)'V̂^{-1}(β̃-β0)，临界值为 χ²(df) 上α分位数

    Args:
        beta_tilde: 估计值
        beta_null: 原假设
        v: V̂
        n: 样本量
        alpha: 显著性水平
        indices: 只检验部分坐标

    Returns:
        TestResult
    """
    diff, sub, idx = _subvector(beta_tilde, beta_null, v, indices)
    eig = np.linalg.eigvalsh((sub + sub.T) / 2)
    if eig[-1] <= 0 or eig[0] <= config.inference.singular_tol * eig[-1]:
        raise SingularVarianceError(
            f"V̂ 奇异（最小特征值 {eig[0]:.3e}），Wald检验不可用，请改用矩形检验",
            smallest_eigenvalue=float(eig[0]),
        )
    statistic = float(n * diff @ linalg.solve(sub, diff, assume_a='sym'))
    df = diff.size
    critical = float(stats.chi2.isf(alpha, df))
    return TestResult(kind="wald", statistic=statistic, critical_value=critical, alpha=alpha,
                      reject=statistic > critical, df=df, indices=idx)


def t_test(beta_tilde, beta_null, v, n: int, alpha: float, index: int) -> TestResult:
    """单坐标双侧t检验 |√n(β̃_k-β0_k)|/sqrt(V̂_kk)"""
    diff, sub, idx = _subvector(beta_tilde, beta_null, v, [index])
    var = float(sub[0, 0])
    if var < 0:
        raise InvalidVarianceError(f"V̂ 第{index}个对角元为负: {var:.3e}")
    if var == 0:
        raise SingularVarianceError(f"V̂ 第{index}个对角元为零，t检验不可用")
    statistic = float(abs(np.sqrt(n) * diff[0]) / np.sqrt(var))
    critical = float(stats.norm.isf(alpha / 2))
    return TestResult(kind="t", statistic=statistic, critical_value=critical, alpha=alpha,
                      reject=statistic > critical, indices=idx)


def _psd_sqrt(v: np.ndarray) -> np.ndarray:
    v = (v + v.T) / 2
    eig, vec = np.linalg.eigh(v)
    top = max(float(np.max(np.abs(eig))), 0.0)
    if eig[0] < -_PSD_TOL * max(top, 1.0):
        raise InvalidVarianceError(f"V̂ 非半正定，最小特征值 {eig[0]:.3e}",
                                   smallest_eigenvalue=float(eig[0]))
    root = (vec * np.sqrt(np.clip(eig, 0.0, None))) @ vec.T
    return (root + root.T) / 2


def rectangle_critical_value(v, alpha: float, draws: Optional[int] = None, seed: int = 0,
                             indices: Optional[Sequence[int]] = None) -> float:
    """模拟 ‖V̂^{1/2}ξ‖∞ 的上α分位数 Φ_α(V̂^{1/2})

    Args:
        v: V̂（半正定）
        alpha: 显著性水平
        draws: 模拟次数S，默认按配置
        seed: 种子
        indices: 只针对部分坐标

    Returns:
        临界值
    """
    if not 0 < alpha < 1:
        raise ConfigError(f"显著性水平必须在(0,1)内，得到: {alpha}")
    draws = draws or config.inference.rectangle_draws
    if draws < 1000:
        raise ConfigError(f"矩形临界值模拟次数至少为1000，得到: {draws}")
    v = np.asarray(v, dtype=float)
    if indices is not None:
        idx = [int(i) for i in indices]
        v = v[np.ix_(idx, idx)]
    root = _psd_sqrt(v)
    if not root.any():
        return 0.0
    maxima = []
    for c, start in enumerate(range(0, draws, _SIM_CHUNK)):
        size = min(_SIM_CHUNK, draws - start)
        xi = stream_rng(seed, c).standard_normal((size, root.shape[0]))
        maxima.append(np.max(np.abs(xi @ root), axis=1))
    return float(np.quantile(np.concatenate(maxima), 1 - alpha))


def rectangle_test(beta_tilde, beta_null, v, n: int, alpha: float,
                   critical_value: Optional[float] = None, draws: Optional[int] = None,
                   seed: int = 0, indices: Optional[Sequence[int]] = None) -> TestResult:
    """矩形检验 √n‖β̃-β0‖∞ 与 Φ_α(V̂^{1/2}) 比较"""
    diff, sub, idx = _subvector(beta_tilde, beta_null, v, indices)
    if critical_value is None:
        critical_value = rectangle_critical_value(sub, alpha, draws, seed)
    statistic = float(np.sqrt(n) * np.max(np.abs(diff)))
    return TestResult(kind="rectangle", statistic=statistic, critical_value=float(critical_value),
                      alpha=alpha, reject=statistic > critical_value, indices=idx)


# ==================== 置信集 ====================

def confidence_intervals(beta_tilde, v, n: int, alpha: float):
    """逐坐标区间 β̃_k ± Φ^{-1}(1-α/2) sqrt(V̂_kk/n)

    Returns:
        (lower, upper) 两个数组
    """
    beta = np.asarray(beta_tilde, dtype=float)
    diag = np.diag(np.asarray(v, dtype=float))
    if np.any(diag < 0):
        bad = np.flatnonzero(diag < 0).tolist()
        raise InvalidVarianceError(f"V̂ 对角元为负，方差估计无效: 坐标 {bad}", coordinates=bad)
    half = stats.norm.isf(alpha / 2) * np.sqrt(diag / n)
    return beta - half, beta + half


def rectangle_confidence_set(beta_tilde, v, n: int, alpha: float, draws: Optional[int] = None,
                             seed: int = 0):
    """矩形置信集 β̃ ± Φ_α(V̂^{1/2})/√n（各坐标同宽）

    Returns:
        (lower, upper, 临界值)
    """
    beta = np.asarray(beta_tilde, dtype=float)
    crit = rectangle_critical_value(v, alpha, draws, seed)
    half = crit / np.sqrt(n)
    return beta - half, beta + half, crit


def build_interval_sets(beta_tilde, v, n: int, alphas: Sequence[float],
                        rectangle_draws: Optional[int] = None, seed: int = 0) -> List[IntervalSet]:
    """为每个显著性水平构造逐坐标区间与矩形置信集"""
    beta = np.asarray(beta_tilde, dtype=float)
    out = []
    for alpha in alphas:
        lower, upper = confidence_intervals(beta, v, n, alpha)
        rect_lower, rect_upper, crit = rectangle_confidence_set(beta, v, n, alpha, rectangle_draws, seed)
        out.append(IntervalSet(alpha=alpha, lower=lower.tolist(), upper=upper.tolist(),
                               rectangle_critical_value=crit,
                               rect_lower=rect_lower.tolist(), rect_upper=rect_upper.tolist()))
    return out
