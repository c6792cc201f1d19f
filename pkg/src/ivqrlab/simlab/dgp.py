# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
模拟数据生成过程

- JTPA型设计：处理变量 D 内生，工具 S 为随机分配，条件分位数已知
- 导数设计：标量模型，总体Jacobian Γ(β) 有闭式解
- 提前终止实验设计：Y = X'θ + (X'γ)U，θ、γ 每次重复重新抽取

同一规格与种子得到逐位相同的数据集。
"""


from __future__ import annotations

import logging
from typing import Callable, Literal, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy import stats

from ..errors import DomainError
from ..model.dataset import Dataset
from ..model.moments import linear_index
from ..utils.rng import make_rng

logger = logging.getLogger(__name__)

SQRT3 = float(np.sqrt(3.0))

# (S, D) 三种取值及其概率
CELLS = ((1, 1), (1, 0), (0, 0))
CELL_PROBS = (0.42, 0.25, 0.33)

InstrumentVariant = Literal["x", "log-x", "x-log-x"]


# ==================== JTPA 型设计 ====================

class JtpaDgpSpec(BaseModel):
    """JTPA型模拟设计

    Y = 1 + D + ΣW_j + ΣD·W_j + (2√3·q + ΣW_j + ΣD·W_j)·V，
    W_j ~ U(-√3, √3)，V ~ N(0,1)。p = L = 2q + 2。
    """
    q: int = Field(default=3, ge=1, description="协变量 W 的个数")
    n: int = Field(default=2000, ge=1, description="样本量")
    seed: int = Field(default=0, ge=0, description="随机种子")

    model_config = {"frozen": True}

    @property
    def p(self) -> int:
        return 2 * self.q + 2


def jtpa_true_beta(q: int, tau: float) -> np.ndarray:
    """真值 β(τ) = (1 + 2√3·q·c_τ, 1, 1+c_τ, ..., 1+c_τ)，c_τ 为标准正态 τ 分位数"""
    if q < 1:
        raise DomainError(f"q 必须 >= 1，得到: {q}")
    if not 0 < tau < 1:
        raise DomainError(f"τ 必须在 (0,1) 内，得到: {tau}")
    c = float(stats.norm.ppf(tau))
    beta = np.full(2 * q + 2, 1.0 + c)
    beta[0] = 1.0 + 2.0 * SQRT3 * q * c
    beta[1] = 1.0
    return beta


def _jtpa_arrays(q: int, n: int, rng: np.random.Generator):
    cell = rng.choice(len(CELLS), size=n, p=CELL_PROBS)
    s = np.array([CELLS[c][0] for c in range(len(CELLS))], dtype=float)[cell]
    d = np.array([CELLS[c][1] for c in range(len(CELLS))], dtype=float)[cell]
    w = rng.uniform(-SQRT3, SQRT3, size=(n, q))
    v = rng.standard_normal(n)
    w_sum = w.sum(axis=1)
    scale = 2.0 * SQRT3 * q + w_sum + d * w_sum
    y = 1.0 + d + w_sum + d * w_sum + scale * v
    ones = np.ones((n, 1))
    x = np.hstack([ones, d[:, None], w, d[:, None] * w])
    z = np.hstack([ones, s[:, None], w, s[:, None] * w])
    return y, x, z, cell


def _jtpa_names(q: int) -> Tuple[Tuple[str, ...], Tuple[str, ...]]:
    ws = [f"w{j + 1}" for j in range(q)]
    x_names = ("const", "d", *ws, *(f"d{w}" for w in ws))
    z_names = ("const", "s", *ws, *(f"s{w}" for w in ws))
    return x_names, z_names


def generate_jtpa_like(spec: JtpaDgpSpec) -> Tuple[Dataset, Callable[[float], np.ndarray]]:
    """生成JTPA型数据集

    Args:
        spec: 设计规格

    Returns:
        (数据集, τ -> β(τ) 的真值函数)
    """
    y, x, z, _ = _jtpa_arrays(spec.q, spec.n, make_rng(spec.seed, "jtpa"))
    x_names, z_names = _jtpa_names(spec.q)
    dataset = Dataset(y=y, x=x, z=z, x_names=x_names, z_names=z_names)
    q = spec.q
    return dataset, lambda tau: jtpa_true_beta(q, tau)


def verify_conditional_quantile(spec: JtpaDgpSpec, tau: float, samples: int = 100_000) -> float:
    """蒙特卡洛检验 P(Y <= X'β(τ) | (S,D)) = τ

    Args:
        spec: 设计规格（使用其 q 与 seed）
        tau: 分位数
        samples: 模拟样本量

    Returns:
        三个 (S,D) 单元中 |经验频率 - τ| 的最大值
    """
    y, x, _, cell = _jtpa_arrays(spec.q, samples, make_rng(spec.seed, "jtpa-check"))
    below = y <= linear_index(x, jtpa_true_beta(spec.q, tau))
    worst = 0.0
    for c in range(len(CELLS)):
        mask = cell == c
        if mask.any():
            worst = max(worst, abs(float(below[mask].mean()) - tau))
    return worst


def jtpa_true_jacobian(q: int, tau: float, samples: int = 200_000, seed: int = 0) -> np.ndarray:
    """JTPA型设计在 β(τ) 处的总体Jacobian（蒙特卡洛积分）

    Γ* = E[φ(c_τ)/σ(W,D) · Z X']，σ = 2√3·q + ΣW + D·ΣW。
    q = 1 时 E[1/σ] 发散，不予计算。
    """
    if q < 2:
        raise DomainError(f"q = {q} 时总体Jacobian不存在（1/σ 不可积），需 q >= 2")
    _, x, z, _ = _jtpa_arrays(q, samples, make_rng(seed, "jtpa-jacobian"))
    w_sum = x[:, 2:2 + q].sum(axis=1)
    scale = 2.0 * SQRT3 * q + w_sum + x[:, 1] * w_sum
    weight = stats.norm.pdf(stats.norm.ppf(tau)) / scale
    return np.einsum('i,ij,ik->jk', weight, z, x, optimize=False) / samples


# ==================== 导数设计 ====================

class DerivativeDgpSpec(BaseModel):
    """标量导数设计：Y = X + Z·ε，X = Z·V，ε ~ Exp(λ)，V ~ U(0,1)，Z ~ U(0,2)"""
    lam: float = Field(gt=0, description="指数分布参数 λ（均值 1/λ）")
    n: int = Field(default=400, ge=1, description="样本量")
    seed: int = Field(default=0, ge=0, description="随机种子")

    model_config = {"frozen": True}


def _derivative_arrays(lam: float, n: int, rng: np.random.Generator):
    # 逆CDF抽样，1 - U ∈ (0, 1] 避免 log(0)
    eps = -np.log1p(-rng.random(n)) / lam
    v = rng.random(n)
    z = rng.uniform(0.0, 2.0, size=n)
    x = z * v
    return x + z * eps, x, z, v


def generate_derivative_dgp(spec: DerivativeDgpSpec) -> Dataset:
    """生成标量导数设计的数据集（p = L = 1）"""
    y, x, z, _ = _derivative_arrays(spec.lam, spec.n, make_rng(spec.seed, "derivative"))
    return Dataset(y=y, x=x, z=z, x_names=("x",), z_names=("z",))


def true_gamma(lam: float, beta: float) -> float:
    """总体导数 Γ(β) = (1 - [λ(β-1)+1]·e^{λ(1-β)}) / (λ(β-1)²)，仅对 β > 1 成立"""
    if lam <= 0:
        raise DomainError(f"λ 必须为正，得到: {lam}")
    if beta <= 1:
        raise DomainError(f"闭式解仅对 β > 1 成立，得到: {beta}")
    h = beta - 1.0
    a = lam * h
    return float((-np.expm1(-a) - a * np.exp(-a)) / (lam * h * h))


def empirical_moment_slope(lam: float, beta: float, samples: int = 1_000_000,
                           step: float = 1e-3, seed: int = 0,
                           integrate_noise: bool = True) -> float:
    """导数设计中 E[Z·1{Y <= Xb}] 在 b = β 处的中心差分斜率

    Args:
        lam: λ
        beta: 展开点
        samples: 模拟样本量
        step: 差分步长
        seed: 种子
        integrate_noise: 为 True 时在 (Z, V) 条件下对 ε 积分，
            用 Z·(1 - e^{-λV(b-1)}) 代替示性函数，显著降低方差

    Returns:
        斜率估计
    """
    if step <= 0:
        raise DomainError(f"差分步长必须为正，得到: {step}")
    y, x, z, v = _derivative_arrays(lam, samples, make_rng(seed, "derivative-slope"))

    def level(b: float) -> float:
        if integrate_noise:
            return float(np.mean(z * -np.expm1(-lam * v * max(b - 1.0, 0.0))))
        return float(np.mean(z * (y <= x * b)))

    return (level(beta + step) - level(beta - step)) / (2.0 * step)


# ==================== 提前终止实验设计 ====================

def generate_heteroskedastic_dgp(n: int, p: int, seed: int,
                                 instruments: InstrumentVariant = "x") -> Tuple[Dataset, np.ndarray, np.ndarray]:
    """Y = X'θ + (X'γ)·U，X、U、θ、γ 的元素均取自 U(0,1)

    Args:
        n: 样本量
        p: 回归变量个数
        seed: 种子（θ、γ 随之重新抽取）
        instruments: "x" 为 Z = X；"log-x" 为 Z = log X；"x-log-x" 为 Z = [X, log X]

    Returns:
        (数据集, θ, γ)，真值为 β(τ) = θ + τ·γ
    """
    if n < 1 or p < 1:
        raise DomainError(f"n、p 必须 >= 1，得到: n={n}, p={p}")
    rng = make_rng(seed, "heteroskedastic")
    theta = rng.random(p)
    gamma = rng.random(p)
    # X 取 (0,1] 以便取对数
    x = 1.0 - rng.random((n, p))
    u = rng.random(n)
    y = linear_index(x, theta) + linear_index(x, gamma) * u
    x_names = tuple(f"x{k + 1}" for k in range(p))
    log_names = tuple(f"log_x{k + 1}" for k in range(p))
    if instruments == "x":
        z, z_names = x, x_names
    elif instruments == "log-x":
        z, z_names = np.log(x), log_names
    elif instruments == "x-log-x":
        z, z_names = np.hstack([x, np.log(x)]), x_names + log_names
    else:
        raise DomainError(f"未知工具变量类型: {instruments}")
    return Dataset(y=y, x=x, z=z, x_names=x_names, z_names=z_names), theta, gamma
