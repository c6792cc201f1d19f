# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
免调参Jacobian估计

对每个元素 (j,k)：固定其余坐标于 b0，用乘子自助法扰动矩，求一维加权阶梯方程的根 b*，
再对 (δ = b* - b0_k, 响应 = -(G_n*(b*) - G_n(b*))_j) 做过原点回归得到 Γ̂_jk。

一维方程经符号变换化为按 ỹ 排序后的累积和搜索，所有抽样一次性向量化求解。
另含自助分位数密度估计与高斯核基准估计。
"""


from __future__ import annotations

import logging
from typing import List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy import stats

from ..errors import (
    BandwidthError,
    ConfigError,
    DegenerateEntryError,
    DegenerateSampleError,
    JacobianMatrixError,
    NumericalError,
    WindowError,
    ZeroDenominatorError,
)
from ..model.dataset import Dataset
from ..model.moments import MomentFamily, MomentModel, linear_index
from ..utils.config import config
from ..utils.performance_config import run_ordered
from .kstep import JacobianMatrix
from .multipliers import MultiplierScheme, default_draws

logger = logging.getLogger(__name__)

_ETA_FLOOR = 2.0 ** -40
_MAD_SCALE = 1.4826
_CHUNK = 256

SlopeMethod = Literal["ols", "root-ratio"]


# ==================== 数据类型 ====================

class ScalarRootProblem(BaseModel):
    """一维加权阶梯方程 Σ w̃_i 1{ỹ_i <= b} = c，在 [b0 - C̄, b0 + C̄] 内求解"""
    ytilde: np.ndarray
    wtilde: np.ndarray
    c: float
    half_width: float = Field(gt=0)
    center: float

    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    @model_validator(mode='after')
    def check_vectors(self):
        if self.ytilde.shape != self.wtilde.shape or self.ytilde.ndim != 1:
            raise ValueError("ytilde 与 wtilde 必须是等长一维向量")
        if not (np.all(np.isfinite(self.ytilde)) and np.all(np.isfinite(self.wtilde))
                and np.isfinite(self.c) and np.isfinite(self.center)):
            raise ValueError("求根问题含有非有限值")
        return self


class RootSolution(NamedTuple):
    """求根结果：根、实现残差 |Σ - c|、是否触及窗口边界"""
    b: float
    residual: float
    at_boundary: bool


class EntryDraws(BaseModel):
    """单个元素的逐次抽样记录"""
    deltas: List[float]
    responses: List[float]
    residuals: List[float]
    boundary_hits: List[bool]
    half_width: float

    model_config = {"frozen": True}

    @model_validator(mode='after')
    def check_draws(self):
        if not (len(self.deltas) == len(self.responses) == len(self.residuals) == len(self.boundary_hits)):
            raise ValueError("抽样记录长度不一致")
        d = np.asarray(self.deltas)
        if not np.all(np.isfinite(d)) or not np.all(np.isfinite(self.responses)):
            raise ValueError("抽样记录含有非有限值")
        if np.any(np.abs(d) > self.half_width * (1 + 1e-12)):
            raise ValueError("|δ| 超出窗口半宽")
        return self

    @property
    def count(self) -> int:
        return len(self.deltas)

    @property
    def denominator(self) -> float:
        """E(δ²)"""
        d = np.asarray(self.deltas)
        return float(np.sum(d * d) / d.size)

    @property
    def numerator(self) -> float:
        """E(响应·δ)"""
        d = np.asarray(self.deltas)
        return float(np.sum(np.asarray(self.responses) * d) / d.size)

    @property
    def boundary_share(self) -> float:
        return float(np.mean(self.boundary_hits)) if self.boundary_hits else 0.0


class EntryDiagnostics(BaseModel):
    """Jacobian 单元素诊断信息"""
    j: int
    k: int
    status: Literal["ok", "zero-filled"] = "ok"
    gamma: float = 0.0
    draws: int = 0
    denominator: float = 0.0
    numerator: float = 0.0
    slope_se: Optional[float] = None
    half_width: Optional[float] = None
    boundary_share: float = 0.0
    mean_residual: float = 0.0
    message: Optional[str] = None

    model_config = {"frozen": True}


class JacobianEstimate(JacobianMatrix):
    """Jacobian 估计值与逐元素诊断"""
    diagnostics: List[EntryDiagnostics] = Field(default_factory=list)

    def to_matrix(self) -> JacobianMatrix:
        return JacobianMatrix(gamma=self.gamma)

    def flags(self) -> List[str]:
        """需要在报告中提示的情况"""
        out = []
        share = config.bootstrap.boundary_warning_share
        for d in self.diagnostics:
            if d.status == "zero-filled":
                out.append(f"jacobian-zero-filled({d.j},{d.k})")
            elif d.boundary_share > share:
                out.append(f"jacobian-window-boundary({d.j},{d.k})")
        return out


# ==================== 一维求根 ====================

def scalar_transform(r: np.ndarray, x: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    """符号变换：Σ w_i 1{r_i <= x_i b} = Σ w̃_i 1{ỹ_i <= b} - Σ_{x_i<0} w̃_i

    Args:
        r: 阈值
        x: 非零系数
        w: 权重

    Returns:
        (ỹ, w̃, Σ_{x<0} w̃)
    """
    r, x, w = (np.asarray(a, dtype=float) for a in (r, x, w))
    if np.any(x == 0):
        raise ConfigError("符号变换要求 x 全部非零")
    ytilde = r / x
    wtilde = np.where(x > 0, w, -w)
    shift = float(np.sum(np.where(x < 0, wtilde, 0.0)))
    return ytilde, wtilde, shift


def _solve_sorted(ys: np.ndarray, ws: np.ndarray, c: np.ndarray,
                  center: float, half_width: float):
    """对 B 个目标同时求根

    Args:
        ys: 升序排列的 ỹ（长度 N）
        ws: B×N 权重（与 ys 同序，零权重视为缺席）
        c: 长度 B 的目标
        center: 窗口中心 b0
        half_width: 窗口半宽 C̄

    Returns:
        (b*, 实现残差, 是否触及边界)，均为长度 B
    """
    n_draws = ws.shape[0]
    u, starts = np.unique(ys, return_index=True)
    m = u.size
    ends = np.r_[starts[1:], ys.size] - 1
    cums = np.cumsum(ws, axis=1)
    upper_sum = cums[:, ends]
    lower_sum = np.hstack([np.zeros((n_draws, 1)), upper_sum[:, :-1]])
    present = np.add.reduceat((ws != 0).astype(np.int64), starts, axis=1) > 0

    # 各抽样在场取值之间的最小间隔
    pos = np.where(present, np.arange(m)[None, :], -1)
    prev = np.maximum.accumulate(np.hstack([np.full((n_draws, 1), -1), pos[:, :-1]]), axis=1)
    gaps = np.where(present & (prev >= 0), u[None, :] - u[np.maximum(prev, 0)], np.inf)
    half_gap = gaps.min(axis=1) / 2
    half_gap = np.where(np.isfinite(half_gap), half_gap, 0.0)
    eta = np.maximum(half_gap[:, None], _ETA_FLOOR * (1 + np.abs(u))[None, :])

    low, high = center - half_width, center + half_width
    in_window = (u >= low) & (u <= high)
    eligible = present & in_window[None, :]
    if not eligible.any(axis=1).all():
        raise WindowError(
            f"窗口 [{low:.6g}, {high:.6g}] 内没有候选点，请增大窗口半宽",
            center=center, half_width=half_width,
        )

    # 先在 S_1..S_N 中取 |S_j - c| 最小的阶梯点 j*，并列取离 b0 最近者，再并列取较大者
    rows = np.arange(n_draws)
    step_residual = np.where(eligible, np.abs(upper_sum - c[:, None]), np.inf)
    tie = step_residual == step_residual.min(axis=1)[:, None]
    dist = np.where(tie, np.abs(u[None, :] - center), np.inf)
    tie &= dist == dist.min(axis=1)[:, None]
    jstar = m - 1 - np.argmax(tie[:, ::-1], axis=1)

    r_plus = np.abs(upper_sum[rows, jstar] - c)
    r_minus = np.abs(lower_sum[rows, jstar] - c)

    # 空前缀 S_0 仅在严格更优时启用：改取首个候选点的 -η 一侧
    first = np.argmax(eligible, axis=1)
    last = m - 1 - np.argmax(eligible[:, ::-1], axis=1)
    r_empty = np.abs(lower_sum[rows, first] - c)
    fallback = r_empty < np.minimum(r_plus, r_minus)
    jstar = np.where(fallback, first, jstar)
    uj = u[jstar]
    etaj = eta[rows, jstar]
    plus, minus = uj + etaj, uj - etaj
    r_minus = np.where(fallback, r_empty, r_minus)

    # 再按实现残差选 ỹ_j* ± η 的一侧，并列取离 b0 近的一侧，再并列取 +η
    use_minus = fallback | (r_minus < r_plus) | ((r_minus == r_plus)
                                                 & (np.abs(minus - center) < np.abs(plus - center)))
    raw = np.where(use_minus, minus, plus)
    b = np.clip(raw, low, high)

    full = np.hstack([np.zeros((n_draws, 1)), upper_sum])
    realized = full[rows, np.searchsorted(u, b, side='right')]
    realized_residual = np.abs(realized - c)

    at_boundary = (b != raw)
    at_boundary |= (jstar == first) & use_minus & (u[0] < low)
    at_boundary |= (jstar == last) & ~use_minus & (u[-1] > high)

    # b0 左侧至少有一个在场点且 b0 本身已达到最小实现残差时，取 b* = b0
    m0 = int(np.searchsorted(u, center, side='right'))
    has_below = np.hstack([np.zeros((n_draws, 1), dtype=np.int64),
                           np.cumsum(present, axis=1)])[:, m0] > 0
    center_residual = np.abs(full[:, m0] - c)
    prefer = has_below & (center_residual <= realized_residual)
    b = np.where(prefer, center, b)
    realized_residual = np.where(prefer, center_residual, realized_residual)
    at_boundary &= ~prefer
    return b, realized_residual, at_boundary


def solve_scalar_root_detailed(problem: ScalarRootProblem) -> RootSolution:
    """求根并返回实现残差与边界标记"""
    order = np.argsort(problem.ytilde, kind='stable')
    b, res, edge = _solve_sorted(problem.ytilde[order], problem.wtilde[order][None, :],
                                 np.array([problem.c]), problem.center, problem.half_width)
    return RootSolution(float(b[0]), float(res[0]), bool(edge[0]))


def solve_scalar_root(problem: ScalarRootProblem) -> float:
    """求解 Σ w̃_i 1{ỹ_i <= b} ≈ c

    先在累积和 S_1..S_N 中取 |S_j - c| 最小的 j*（并列取 ỹ 离 b0 最近者），再按实现残差
    在 ỹ_j* ± η 中选一侧；空前缀 S_0 严格更优时取首个候选点减 η。结果截断到窗口内。
    b0 左侧有在场点且 b0 本身已达到最小实现残差时返回 b0，此时 δ = 0。

    Args:
        problem: 一维求根问题

    Returns:
        根 b*
    """
    return solve_scalar_root_detailed(problem).b


# ==================== 元素约化 ====================

class _EntryLayout:
    """第 k 列的静态结构：与乘子无关的阈值、排序与常数行"""

    def __init__(self, model: MomentModel, b0: np.ndarray, k: int):
        ds = model.dataset
        if model.family is MomentFamily.CUSTOM:
            raise ConfigError("自定义矩函数族不支持免调参Jacobian估计")
        xk = ds.x[:, k]
        if not xk.any():
            raise DegenerateEntryError(f"X 第{k}列全为零，该列元素不可估计", k=k)
        x_minus = np.array(ds.x, copy=True)
        x_minus[:, k] = 0.0
        self.r = ds.y - linear_index(x_minus, b0)
        self.xk = xk
        self.center = float(b0[k])
        self.tau_offset = model.tau_offset
        self.n = ds.n
        self.base_indicator = model.indicators(b0).astype(float)
        if model.family is MomentFamily.CENSORED_IVQR:
            self.always = ds.y <= ds.censoring
        else:
            self.always = np.zeros(ds.n, dtype=bool)
        active = (xk != 0) & ~self.always
        zero_x = (xk == 0) & ~self.always
        self.const_mask = ((zero_x & (self.r <= 0)) | self.always).astype(float)
        self.neg_mask = (active & (xk < 0)).astype(float)
        rows = np.flatnonzero(active)
        ytilde = self.r[rows] / xk[rows]
        order = np.argsort(ytilde, kind='stable')
        self.sorted_rows = rows[order]
        self.ys = ytilde[order]
        self.sign = np.sign(xk[self.sorted_rows])

    def default_window(self, zj: np.ndarray) -> float:
        """默认窗口半宽：window_multiplier × 1.4826 × MAD(ỹ - b0)"""
        used = zj[self.sorted_rows] != 0
        if not used.any():
            raise DegenerateEntryError("该工具变量在有效行上全为零，元素不可估计")
        dev = np.abs(self.ys[used] - self.center)
        scale = _MAD_SCALE * float(np.median(dev))
        if scale > 0:
            return config.bootstrap.window_multiplier * scale
        widest = float(dev.max())
        return widest if widest > 0 else 1.0

    def targets(self, zj: np.ndarray, xi: np.ndarray):
        """返回 (B×n 权重 ξ_i Z_ij, 目标 c)"""
        w = xi * zj[None, :]
        d = np.sum(zj[None, :] * (self.base_indicator[None, :] + (xi - 1.0) * self.tau_offset), axis=1)
        const = np.sum(w * self.const_mask[None, :], axis=1)
        neg = np.sum(w * self.neg_mask[None, :], axis=1)
        return w, d - const - neg

    def responses(self, zj: np.ndarray, xi: np.ndarray, b: np.ndarray) -> np.ndarray:
        """-(G_n*(b*) - G_n(b*))_j = -n^{-1} Σ (ξ_i - 1) g_ij(b*)"""
        ind = (self.r[None, :] <= self.xk[None, :] * b[:, None]) | self.always[None, :]
        g = zj[None, :] * (ind.astype(float) - self.tau_offset)
        return -np.sum((xi - 1.0) * g, axis=1) / self.n

    def solve(self, zj: np.ndarray, xi: np.ndarray, half_width: float):
        """向量化求解一组抽样，返回 (δ, 响应, 残差, 边界)"""
        w, c = self.targets(zj, xi)
        ws = w[:, self.sorted_rows] * self.sign[None, :]
        b, residual, edge = _solve_sorted(self.ys, ws, c, self.center, half_width)
        return b - self.center, self.responses(zj, xi, b), residual, edge


def reduce_entry_to_scalar(model: MomentModel, b0: np.ndarray, entry: Tuple[int, int],
                           xi: np.ndarray, window: Optional[float] = None) -> ScalarRootProblem:
    """把元素 (j,k) 的扰动矩方程约化为一维求根问题

    X_ik = 0 的行与删失恒成立的行并入常数；ξ_i Z_ij = 0 的行被丢弃；
    X_ik < 0 的行按符号变换翻转权重并把其权重并入 c。

    Args:
        model: 矩模型
        b0: 展开点，长度 p
        entry: (j, k)
        xi: 乘子向量，长度 n
        window: 窗口半宽，None 表示默认值

    Returns:
        ScalarRootProblem
    """
    j, k = entry
    b0 = np.asarray(b0, dtype=float)
    layout = _EntryLayout(model, b0, k)
    zj = model.dataset.z[:, j]
    xi = np.asarray(xi, dtype=float)[None, :]
    w, c = layout.targets(zj, xi)
    ws = w[0, layout.sorted_rows] * layout.sign
    keep = ws != 0
    half_width = layout.default_window(zj) if window is None else float(window)
    return ScalarRootProblem(ytilde=layout.ys[keep], wtilde=ws[keep], c=float(c[0]),
                             half_width=half_width, center=layout.center)


# ==================== 元素与矩阵估计 ====================

def _slope(draws: EntryDraws, method: SlopeMethod, center: float = 0.0) -> float:
    den = draws.denominator
    # δ 全部落在 η 下限量级以内视为零
    if den <= (_ETA_FLOOR * (1 + abs(center))) ** 2:
        raise ZeroDenominatorError("所有抽样的 δ 均为零，回归分母为零")
    if method == "root-ratio":
        resp = np.asarray(draws.responses)
        return float(np.sqrt(np.sum(resp * resp) / resp.size / den))
    return draws.numerator / den


def _slope_se(draws: EntryDraws, gamma: float) -> Optional[float]:
    d = np.asarray(draws.deltas)
    resid = np.asarray(draws.responses) - gamma * d
    dd = float(np.sum(d * d))
    if dd <= 0:
        return None
    return float(np.sqrt(np.sum(resid * resid * d * d)) / dd)


def _entry_from_layout(layout: _EntryLayout, zj: np.ndarray, panel: np.ndarray,
                       window: Optional[float]) -> EntryDraws:
    half_width = layout.default_window(zj) if window is None else float(window)
    parts = [layout.solve(zj, panel[s:s + _CHUNK], half_width)
             for s in range(0, panel.shape[0], _CHUNK)]
    deltas, responses, residuals, edges = (np.concatenate(col) for col in zip(*parts))
    return EntryDraws(deltas=deltas.tolist(), responses=responses.tolist(),
                      residuals=residuals.tolist(), boundary_hits=edges.tolist(),
                      half_width=half_width)


def estimate_entry(model: MomentModel, b0: np.ndarray, entry: Tuple[int, int],
                   scheme: Optional[MultiplierScheme] = None, window: Optional[float] = None,
                   panel: Optional[np.ndarray] = None,
                   slope: SlopeMethod = "ols") -> Tuple[float, EntryDraws]:
    """估计单个元素 Γ_jk

    Args:
        model: 矩模型
        b0: 展开点
        entry: (j, k)
        scheme: 乘子分布，默认按配置
        window: 窗口半宽
        panel: 可选的 B×n 乘子面板（覆盖 scheme）
        slope: "ols" 为过原点回归斜率，"root-ratio" 为 sqrt(E响应²/Eδ²)

    Returns:
        (Γ̂_jk, EntryDraws)
    """
    j, k = entry
    b0 = np.asarray(b0, dtype=float)
    if panel is None:
        scheme = scheme or MultiplierScheme(kind=config.bootstrap.scheme,
                                            draws=default_draws(model.n))
        panel = scheme.draw_panel(model.n)
    panel = np.asarray(panel, dtype=float)
    if panel.ndim != 2 or panel.shape[1] != model.n or panel.shape[0] < 2:
        raise ConfigError(f"乘子面板形状应为 B×{model.n} 且 B>=2，得到 {panel.shape}")
    layout = _EntryLayout(model, b0, k)
    draws = _entry_from_layout(layout, model.dataset.z[:, j], panel, window)
    if draws.boundary_share > config.bootstrap.boundary_warning_share:
        logger.warning(f"元素({j},{k}) 有 {draws.boundary_share:.1%} 的抽样触及窗口边界，建议增大窗口")
    return _slope(draws, slope, layout.center), draws


def _column_task(model: MomentModel, b0: np.ndarray, k: int, panel: np.ndarray,
                 window: Optional[float], slope: SlopeMethod):
    """第 k 列全部元素；失败的元素以异常对象返回"""
    try:
        layout = _EntryLayout(model, b0, k)
    except NumericalError as e:
        return [e] * model.L
    out = []
    for j in range(model.L):
        try:
            draws = _entry_from_layout(layout, model.dataset.z[:, j], panel, window)
            gamma = _slope(draws, slope, layout.center)
            out.append((gamma, draws))
        except NumericalError as e:
            out.append(e)
    return out


def estimate_jacobian(model: MomentModel, b0: np.ndarray, scheme: Optional[MultiplierScheme] = None,
                      window: Optional[float] = None, permissive: bool = False,
                      panel: Optional[np.ndarray] = None, n_jobs: Optional[int] = None,
                      slope: SlopeMethod = "ols") -> JacobianEstimate:
    """逐元素估计 L×p Jacobian，全部元素共用同一乘子面板

    Args:
        model: 矩模型
        b0: 展开点
        scheme: 乘子分布
        window: 统一窗口半宽，None 表示逐元素默认
        permissive: 不可估计元素置零并告警，而非报错
        panel: 可选的乘子面板
        n_jobs: 按列并行的worker数量
        slope: 斜率估计方法

    Returns:
        JacobianEstimate
    """
    b0 = np.asarray(b0, dtype=float)
    if panel is None:
        scheme = scheme or MultiplierScheme(kind=config.bootstrap.scheme,
                                            draws=default_draws(model.n))
        panel = scheme.draw_panel(model.n)
    panel = np.asarray(panel, dtype=float)

    columns = run_ordered(_column_task,
                          [(model, b0, k, panel, window, slope) for k in range(model.p)],
                          n_jobs=n_jobs)

    gamma = np.zeros((model.L, model.p))
    diagnostics: List[EntryDiagnostics] = []
    failures: List[Tuple[int, int, str]] = []
    for k, column in enumerate(columns):
        for j, result in enumerate(column):
            if isinstance(result, Exception):
                message = getattr(result, 'message', str(result))
                failures.append((j, k, message))
                diagnostics.append(EntryDiagnostics(j=j, k=k, status="zero-filled", message=message))
                continue
            value, draws = result
            gamma[j, k] = value
            diagnostics.append(EntryDiagnostics(
                j=j, k=k, gamma=value, draws=draws.count,
                denominator=draws.denominator, numerator=draws.numerator,
                slope_se=_slope_se(draws, value), half_width=draws.half_width,
                boundary_share=draws.boundary_share,
                mean_residual=float(np.mean(draws.residuals)),
            ))

    if failures:
        listing = ", ".join(f"({j},{k})" for j, k, _ in failures)
        if not permissive:
            raise JacobianMatrixError(f"以下Jacobian元素不可估计: {listing}",
                                      entries=[[j, k] for j, k, _ in failures],
                                      reasons=[m for _, _, m in failures])
        logger.warning(f"以下Jacobian元素不可估计，已置零: {listing}")

    for d in diagnostics:
        if d.status == "ok" and d.boundary_share > config.bootstrap.boundary_warning_share:
            logger.warning(f"元素({d.j},{d.k}) 有 {d.boundary_share:.1%} 的抽样触及窗口边界，建议增大窗口")
    diagnostics.sort(key=lambda d: (d.j, d.k))
    return JacobianEstimate(gamma=gamma, diagnostics=diagnostics)


# ==================== 密度估计与核基准 ====================

def bootstrap_density(y: Sequence[float], tau: float, scheme: Optional[MultiplierScheme] = None,
                      window: Optional[float] = None) -> float:
    """自助分位数密度估计 f̂ = sqrt(τ(1-τ) / E[n(b* - b0)²])

    Args:
        y: 样本
        tau: 分位数
        scheme: 乘子分布
        window: 窗口半宽

    Returns:
        τ分位点处的密度估计
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < 2:
        raise DegenerateSampleError("密度估计至少需要2个观测")
    if np.unique(y).size < 2:
        raise DegenerateSampleError("样本为常数，自助分位数方差为零")
    ones = np.ones((n, 1))
    model = MomentModel(Dataset(y=y, x=ones, z=ones), tau)
    b0 = np.array([np.quantile(y, tau, method='inverted_cdf')])
    try:
        _, draws = estimate_entry(model, b0, (0, 0), scheme, window)
    except ZeroDenominatorError:
        raise DegenerateSampleError("自助分位数方差为零")
    variance = n * draws.denominator
    if variance <= 0:
        raise DegenerateSampleError("自助分位数方差为零")
    return float(np.sqrt(tau * (1 - tau) / variance))


def kernel_jacobian_baseline(model: MomentModel, b0: np.ndarray) -> JacobianMatrix:
    """高斯核基准：Γ̂_jk = n^{-1} Σ K_h(Y_i - X_i'b0) Z_ij X_ik，h = 1.06 σ̂ n^{-1/5}

    Args:
        model: 矩模型
        b0: 展开点

    Returns:
        JacobianMatrix
    """
    if model.family is MomentFamily.CUSTOM:
        raise ConfigError("自定义矩函数族不支持核估计")
    ds = model.dataset
    if ds.n < 2:
        raise BandwidthError("核估计至少需要2个观测")
    resid = ds.y - linear_index(ds.x, np.asarray(b0, dtype=float))
    sigma = float(np.std(resid, ddof=1))
    if not sigma > 0:
        raise BandwidthError("残差无离散度，无法确定带宽")
    h = 1.06 * sigma * ds.n ** (-0.2)
    weight = stats.norm.pdf(resid / h) / h
    gamma = np.einsum('i,ij,ik->jk', weight, ds.z, ds.x, optimize=False) / ds.n
    return JacobianMatrix(gamma=gamma)
