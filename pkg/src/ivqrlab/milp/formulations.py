# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
四种MILP形式的构造

- ivqr: min t，big-M 把 ξ_i 绑定为 1{Y_i - X_i'β <= 0}，矩约束 |E_n Z(ξ-τ)| <= t
- hd-ivqr: min Σβ⁺+Σβ⁻，矩约束 |E_n Z(ξ-τ)| <= λ
- censored: Powell删失分位数回归（可带 ℓ1 惩罚）
- censored-ivqr: 1{Y <= max(X'β, C)} 的矩条件

另含 big-M 的确定与校验、默认参数盒、2SLS与线性分位数回归初值，
以及把任意 β 补全为整数可行解的函数。
"""


from __future__ import annotations

import logging
from typing import Literal, Optional

import numpy as np
from scipy import linalg

from ..errors import BigMError, ConfigError, DataError
from ..model.dataset import Dataset
from ..model.moments import linear_index
from ..utils.config import config
from .problem import MilpProblem, ParameterBox, ProblemBuilder
from .simplex import solve_lp

logger = logging.getLogger(__name__)

FormulationKind = Literal["ivqr", "hd-ivqr", "censored", "censored-ivqr"]


def _check_tau(tau: float) -> None:
    if not 0 < tau < 1:
        raise ConfigError(f"τ 必须在(0,1)内，得到: {tau}")


def _check_box(dataset: Dataset, box: ParameterBox) -> None:
    if box.dim != dataset.p:
        raise ConfigError(f"参数盒维度 {box.dim} 与 p={dataset.p} 不一致")


def _censoring(dataset: Dataset) -> np.ndarray:
    if dataset.censoring is None:
        raise DataError("censored-ivqr 形式需要删失点列")
    return dataset.censoring


# ==================== big-M 与参数盒 ====================

def _index_bound(dataset: Dataset, box: ParameterBox) -> np.ndarray:
    """max_{β∈box} |X_i'(β - center)| 的上界"""
    return np.abs(dataset.x) @ box.radius


def _certified_bound(dataset: Dataset, box: ParameterBox, kind: FormulationKind) -> float:
    center = box.center
    spread = _index_bound(dataset, box)
    index = linear_index(dataset.x, center)
    if kind in ("ivqr", "hd-ivqr"):
        bound = np.abs(dataset.y - index) + spread
    elif kind == "censored":
        bound = np.abs(index) + spread
    else:
        c = _censoring(dataset)
        bound = np.abs(dataset.y - c) + np.abs(index - c) + spread
    return float(np.max(bound))


def choose_big_m(dataset: Dataset, box: ParameterBox, kind: FormulationKind = "ivqr") -> float:
    """M = 2 · max_i (|Y_i - X_i'center| + Σ_k |X_ik| · radius_k)

    删失形式使用各自需要覆盖的量。

    Args:
        dataset: 数据集
        box: 参数盒（必须有界）
        kind: 形式

    Returns:
        big-M
    """
    if dataset.n < 1:
        raise DataError("数据集为空")
    _check_box(dataset, box)
    if not box.is_bounded:
        raise BigMError("参数盒无界，需要显式给出 M")
    m = 2.0 * _certified_bound(dataset, box, kind)
    return m if m > 0 else 1.0


def audit_big_m(dataset: Dataset, box: ParameterBox, big_m: float, kind: FormulationKind = "ivqr") -> None:
    """校验用户给出的 M 是否覆盖参数盒上的全部残差"""
    if not big_m > 0:
        raise BigMError(f"M 必须为正，得到: {big_m}")
    _check_box(dataset, box)
    if not box.is_bounded:
        raise BigMError("参数盒无界，无法校验 M")
    needed = _certified_bound(dataset, box, kind)
    if big_m < needed:
        raise BigMError(f"M={big_m:.6g} 过小，参数盒上残差可达 {needed:.6g}",
                        big_m=big_m, required=needed)


def two_stage_least_squares(dataset: Dataset) -> np.ndarray:
    """2SLS 初值 β = (X̂'X̂)^{-1}X̂'Y，X̂ = Z(Z'Z)^{-1}Z'X"""
    coef, *_ = linalg.lstsq(dataset.z, dataset.x)
    x_hat = dataset.z @ coef
    beta, *_ = linalg.lstsq(x_hat, dataset.y)
    return np.asarray(beta, dtype=float)


def default_parameter_box(dataset: Dataset, multiplier: Optional[float] = None) -> ParameterBox:
    """默认参数盒 [-m·scale_k, m·scale_k]，scale_k = max(1, |β2SLS_k|)"""
    multiplier = multiplier or config.solver.box_multiplier
    try:
        pilot = two_stage_least_squares(dataset)
    except (linalg.LinAlgError, ValueError):
        pilot = np.zeros(dataset.p)
    if not np.all(np.isfinite(pilot)):
        pilot = np.zeros(dataset.p)
    scale = np.maximum(1.0, np.abs(pilot))
    return ParameterBox.symmetric(multiplier * scale)


def quantile_regression_pilot(dataset: Dataset, tau: float) -> np.ndarray:
    """线性分位数回归 min Σ ρ_τ(Y - X'β)，以同一单纯形求解"""
    _check_tau(tau)
    builder = ProblemBuilder("lp")
    n, p = dataset.n, dataset.p
    beta = [builder.add_variable(f"beta_{k}", -np.inf, np.inf) for k in range(p)]
    up = [builder.add_variable(f"up_{i:04d}", obj=tau / n) for i in range(n)]
    um = [builder.add_variable(f"um_{i:04d}", obj=(1 - tau) / n) for i in range(n)]
    for i in range(n):
        coeffs = {beta[k]: dataset.x[i, k] for k in range(p)}
        coeffs[up[i]] = 1.0
        coeffs[um[i]] = -1.0
        builder.add_constraint(f"fit_{i:04d}", coeffs, "=", dataset.y[i])
    problem = builder.build(beta_index=beta)
    res = solve_lp(problem)
    if not res.is_optimal:
        raise DataError(f"分位数回归初值求解失败: {res.status}")
    return problem.extract_beta(res.x)


# ==================== 构造 ====================

def _moment_rows(builder: ProblemBuilder, dataset: Dataset, tau: float, binaries, t_index: Optional[int],
                 bound: float = 0.0) -> None:
    """-t <= n^{-1} Σ Z_ij (ξ_i - τ) <= t（t_index 为 None 时用常数 bound）"""
    n = dataset.n
    target = tau * np.sum(dataset.z, axis=0) / n
    for j in range(dataset.L):
        coeffs = {binaries[i]: dataset.z[i, j] / n for i in range(n)}
        if t_index is None:
            builder.add_constraint(f"mom_up_{j}", coeffs, "<=", target[j] + bound)
            builder.add_constraint(f"mom_lo_{j}", coeffs, ">=", target[j] - bound)
        else:
            builder.add_constraint(f"mom_up_{j}", {**coeffs, t_index: -1.0}, "<=", target[j])
            builder.add_constraint(f"mom_lo_{j}", {**coeffs, t_index: 1.0}, ">=", target[j])


def _metadata(dataset: Dataset, tau: float, big_m: float, wedge: float, box: ParameterBox, **extra) -> dict:
    return {'n': dataset.n, 'p': dataset.p, 'L': dataset.L, 'tau': tau, 'big_m': big_m,
            'wedge': wedge, 'box': {'lower': box.lower, 'upper': box.upper}, **extra}


def _resolve(dataset: Dataset, tau: float, big_m: float, box: Optional[ParameterBox],
             wedge: Optional[float]):
    _check_tau(tau)
    if not big_m > 0:
        raise ConfigError(f"M 必须为正，得到: {big_m}")
    box = box or ParameterBox.symmetric(np.full(dataset.p, big_m))
    _check_box(dataset, box)
    wedge = config.solver.wedge_ratio * big_m if wedge is None else float(wedge)
    if wedge < 0:
        raise ConfigError(f"楔形间隔必须非负，得到: {wedge}")
    return box, wedge


def build_ivqr_milp(dataset: Dataset, tau: float, big_m: float, box: Optional[ParameterBox] = None,
                    wedge: Optional[float] = None) -> MilpProblem:
    """IVQR 的MILP形式

    -Mξ_i + D <= Y_i - X_i'β <= M(1 - ξ_i)，-t <= E_n Z(ξ - τ) <= t，min t。

    Args:
        dataset: 数据集
        tau: 分位数
        big_m: M
        box: 参数盒，默认 [-M, M]
        wedge: 楔形间隔 D，默认 wedge_ratio·M

    Returns:
        MilpProblem
    """
    box, wedge = _resolve(dataset, tau, big_m, box, wedge)
    builder = ProblemBuilder("ivqr")
    beta = [builder.add_variable(f"beta_{k}", box.lower[k], box.upper[k]) for k in range(dataset.p)]
    xi = [builder.add_variable(f"xi_{i:04d}", binary=True) for i in range(dataset.n)]
    t = builder.add_variable("t", 0.0, np.inf, obj=1.0)
    for i in range(dataset.n):
        row = dataset.x[i]
        builder.add_constraint(f"upper_{i:04d}", {**{beta[k]: -row[k] for k in range(dataset.p)}, xi[i]: big_m},
                               "<=", big_m - dataset.y[i])
        builder.add_constraint(f"lower_{i:04d}", {**{beta[k]: row[k] for k in range(dataset.p)}, xi[i]: -big_m},
                               "<=", dataset.y[i] - wedge)
    _moment_rows(builder, dataset, tau, xi, t)
    return builder.build(_metadata(dataset, tau, big_m, wedge, box), beta_index=beta)


def build_hd_ivqr_milp(dataset: Dataset, tau: float, lam: float, big_m: float,
                       box: Optional[ParameterBox] = None, wedge: Optional[float] = None) -> MilpProblem:
    """高维IVQR（Dantzig选择器式）：min Σβ⁺+Σβ⁻ s.t. |E_n Z(ξ-τ)| <= λ"""
    if lam < 0:
        raise ConfigError(f"λ 必须非负，得到: {lam}")
    box, wedge = _resolve(dataset, tau, big_m, box, wedge)
    builder = ProblemBuilder("hd-ivqr")
    p = dataset.p
    bp = [builder.add_variable(f"betap_{k}", 0.0, max(box.upper[k], 0.0), obj=1.0) for k in range(p)]
    bm = [builder.add_variable(f"betam_{k}", 0.0, max(-box.lower[k], 0.0), obj=1.0) for k in range(p)]
    xi = [builder.add_variable(f"xi_{i:04d}", binary=True) for i in range(dataset.n)]
    for i in range(dataset.n):
        row = dataset.x[i]
        up = {**{bp[k]: -row[k] for k in range(p)}, **{bm[k]: row[k] for k in range(p)}, xi[i]: big_m}
        lo = {**{bp[k]: row[k] for k in range(p)}, **{bm[k]: -row[k] for k in range(p)}, xi[i]: -big_m}
        builder.add_constraint(f"upper_{i:04d}", up, "<=", big_m - dataset.y[i])
        builder.add_constraint(f"lower_{i:04d}", lo, "<=", dataset.y[i] - wedge)
    _moment_rows(builder, dataset, tau, xi, None, bound=lam)
    return builder.build(_metadata(dataset, tau, big_m, wedge, box, lam=lam),
                         beta_index=bp, beta_neg_index=bm)


def build_censored_milp(dataset: Dataset, tau: float, lam: float, big_m: float,
                        box: Optional[ParameterBox] = None) -> MilpProblem:
    """Powell删失分位数回归（在0处删失），λ>0 时带 ℓ1 惩罚

    目标 (τ/n)Σζ⁺ + ((1-τ)/n)Σζ⁻ + λΣθ⁺ + λΣθ⁻；r⁺ = max(X'θ, 0)。
    """
    if lam < 0:
        raise ConfigError(f"λ 必须非负，得到: {lam}")
    box, _ = _resolve(dataset, tau, big_m, box, 0.0)
    builder = ProblemBuilder("censored")
    n, p = dataset.n, dataset.p
    tp = [builder.add_variable(f"thetap_{k}", 0.0, max(box.upper[k], 0.0), obj=lam) for k in range(p)]
    tm = [builder.add_variable(f"thetam_{k}", 0.0, max(-box.lower[k], 0.0), obj=lam) for k in range(p)]
    zp = [builder.add_variable(f"zetap_{i:04d}", obj=tau / n) for i in range(n)]
    zm = [builder.add_variable(f"zetam_{i:04d}", obj=(1 - tau) / n) for i in range(n)]
    rp = [builder.add_variable(f"rp_{i:04d}") for i in range(n)]
    rm = [builder.add_variable(f"rm_{i:04d}") for i in range(n)]
    xi = [builder.add_variable(f"xi_{i:04d}", binary=True) for i in range(n)]
    for i in range(n):
        index = {**{tp[k]: dataset.x[i, k] for k in range(p)}, **{tm[k]: -dataset.x[i, k] for k in range(p)}}
        builder.add_constraint(f"fit_{i:04d}", {rp[i]: 1.0, zp[i]: 1.0, zm[i]: -1.0}, "=", dataset.y[i])
        builder.add_constraint(f"sign_lo_{i:04d}", {**index, xi[i]: big_m}, ">=", 0.0)
        builder.add_constraint(f"sign_up_{i:04d}", {**index, xi[i]: big_m}, "<=", big_m)
        builder.add_constraint(f"split_{i:04d}", {**index, rp[i]: -1.0, rm[i]: 1.0}, "=", 0.0)
        builder.add_constraint(f"rp_cap_{i:04d}", {rp[i]: 1.0, xi[i]: big_m}, "<=", big_m)
        builder.add_constraint(f"rm_cap_{i:04d}", {rm[i]: 1.0, xi[i]: -big_m}, "<=", 0.0)
    return builder.build(_metadata(dataset, tau, big_m, 0.0, box, lam=lam),
                         beta_index=tp, beta_neg_index=tm)


def build_censored_ivqr_milp(dataset: Dataset, tau: float, big_m: float, box: Optional[ParameterBox] = None,
                             wedge: Optional[float] = None) -> MilpProblem:
    """删失IVQR：q_i 表示 1{Y_i <= max(X_i'β, C_i)}，min ‖E_n Z(q - τ)‖∞"""
    censor = _censoring(dataset)
    box, wedge = _resolve(dataset, tau, big_m, box, wedge)
    builder = ProblemBuilder("censored-ivqr")
    n, p = dataset.n, dataset.p
    beta = [builder.add_variable(f"beta_{k}", box.lower[k], box.upper[k]) for k in range(p)]
    rp = [builder.add_variable(f"rp_{i:04d}") for i in range(n)]
    rm = [builder.add_variable(f"rm_{i:04d}") for i in range(n)]
    xi = [builder.add_variable(f"xi_{i:04d}", binary=True) for i in range(n)]
    q = [builder.add_variable(f"q_{i:04d}", binary=True) for i in range(n)]
    t = builder.add_variable("t", 0.0, np.inf, obj=1.0)
    for i in range(n):
        index = {beta[k]: dataset.x[i, k] for k in range(p)}
        gap = dataset.y[i] - censor[i]
        builder.add_constraint(f"split_{i:04d}", {**index, rp[i]: -1.0, rm[i]: 1.0}, "=", censor[i])
        builder.add_constraint(f"sign_lo_{i:04d}", {**index, xi[i]: big_m}, ">=", censor[i])
        builder.add_constraint(f"sign_up_{i:04d}", {**index, xi[i]: big_m}, "<=", censor[i] + big_m)
        builder.add_constraint(f"rp_cap_{i:04d}", {rp[i]: 1.0, xi[i]: big_m}, "<=", big_m)
        builder.add_constraint(f"rm_cap_{i:04d}", {rm[i]: 1.0, xi[i]: -big_m}, "<=", 0.0)
        builder.add_constraint(f"q_up_{i:04d}", {rp[i]: -1.0, q[i]: big_m}, "<=", big_m - gap)
        builder.add_constraint(f"q_lo_{i:04d}", {rp[i]: 1.0, q[i]: -big_m}, "<=", gap - wedge)
    _moment_rows(builder, dataset, tau, q, t)
    return builder.build(_metadata(dataset, tau, big_m, wedge, box), beta_index=beta)


def build_problem(kind: FormulationKind, dataset: Dataset, tau: float, big_m: float,
                  box: Optional[ParameterBox] = None, wedge: Optional[float] = None,
                  lam: float = 0.0) -> MilpProblem:
    """按名称构造MILP"""
    if kind == "ivqr":
        return build_ivqr_milp(dataset, tau, big_m, box, wedge)
    if kind == "hd-ivqr":
        return build_hd_ivqr_milp(dataset, tau, lam, big_m, box, wedge)
    if kind == "censored":
        return build_censored_milp(dataset, tau, lam, big_m, box)
    if kind == "censored-ivqr":
        return build_censored_ivqr_milp(dataset, tau, big_m, box, wedge)
    raise ConfigError(f"未知MILP形式: {kind}")


# ==================== 整数可行补全 ====================

def _sup_moment(dataset: Dataset, tau: float, indicator: np.ndarray) -> float:
    g = np.sum(dataset.z * (indicator.astype(float) - tau)[:, None], axis=0) / dataset.n
    return float(np.max(np.abs(g)))


def complete_assignment(problem: MilpProblem, dataset: Dataset, beta: np.ndarray) -> Optional[np.ndarray]:
    """由 β 构造与之一致的整数可行解；β 先截断到参数盒

    楔形区间内的观测使 β 不可行，此时返回 None。
    """
    meta = problem.metadata
    tau, big_m, wedge = meta['tau'], meta['big_m'], meta['wedge']
    box = ParameterBox(**meta['box'])
    beta = box.clip(beta)
    x = np.zeros(problem.num_vars)
    lookup = {name: j for j, name in enumerate(problem.names)}
    n = dataset.n

    def columns(prefix: str):
        return [lookup[f"{prefix}{i:04d}"] for i in range(n)]

    index = linear_index(dataset.x, beta)
    if problem.kind in ("ivqr", "hd-ivqr"):
        resid = dataset.y - index
        if np.any((resid > 0) & (resid < wedge)):
            return None
        ind = resid <= 0
        if problem.kind == "ivqr":
            x[problem.beta_index] = beta
            x[problem.index_of("t")] = _sup_moment(dataset, tau, ind)
        else:
            x[problem.beta_index] = np.maximum(beta, 0.0)
            x[problem.beta_neg_index] = np.maximum(-beta, 0.0)
        x[columns("xi_")] = ind
    elif problem.kind == "censored":
        x[problem.beta_index] = np.maximum(beta, 0.0)
        x[problem.beta_neg_index] = np.maximum(-beta, 0.0)
        pos = np.maximum(index, 0.0)
        fit = dataset.y - pos
        for prefix, values in (("rp_", pos), ("rm_", np.maximum(-index, 0.0)),
                               ("zetap_", np.maximum(fit, 0.0)), ("zetam_", np.maximum(-fit, 0.0)),
                               ("xi_", index < 0)):
            x[columns(prefix)] = values
    else:
        censor = dataset.censoring
        shifted = index - censor
        rp = np.maximum(shifted, 0.0)
        resid = dataset.y - censor - rp
        if np.any((resid > 0) & (resid < wedge)):
            return None
        ind = resid <= 0
        x[problem.beta_index] = beta
        x[problem.index_of("t")] = _sup_moment(dataset, tau, ind)
        for prefix, values in (("rp_", rp), ("rm_", np.maximum(-shifted, 0.0)),
                               ("xi_", shifted < 0), ("q_", ind)):
            x[columns(prefix)] = values
    if problem.max_violation(x) > 1e-9 * (1.0 + big_m):
        return None
    return x


def make_completion(problem: MilpProblem, dataset: Dataset):
    """返回供分支定界使用的补全函数"""
    def completion(beta: np.ndarray) -> Optional[np.ndarray]:
        return complete_assignment(problem, dataset, beta)
    return completion
