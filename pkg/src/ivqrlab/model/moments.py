# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
非光滑矩函数

内置 IVQR 矩 g = Z(1{Y <= X'β} - τ)，以及删失IVQR、导数族和测试用自定义族。
指示函数在 Y = X'β 处取 1（非严格 <=）。
所有归约按观测顺序逐行累加，不经过BLAS，结果与线程数无关。
"""


from __future__ import annotations

import math
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

from ..errors import ConfigError, DataError
from .dataset import Dataset, QuantileSpec

ContributionFn = Callable[[np.ndarray], np.ndarray]


class MomentFamily(str, Enum):
    """矩函数族"""
    IVQR = "ivqr"
    CENSORED_IVQR = "censored-ivqr"
    DERIVATIVE = "derivative"       # g = Z·1{Y <= X'β}
    CUSTOM = "custom"


def linear_index(x: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """逐行计算 X_i'β（固定求和顺序）"""
    return np.einsum('ij,j->i', x, beta, optimize=False)


class MomentModel:
    """矩模型：持有数据集、分位数与矩函数族

    构造后不可变，可在线程间共享。
    """

    def __init__(self, dataset: Dataset, quantile: Union[QuantileSpec, float],
                 family: Union[MomentFamily, str] = MomentFamily.IVQR,
                 contribution_fn: Optional[ContributionFn] = None):
        """初始化矩模型

        Args:
            dataset: 数据集
            quantile: 分位数设定或 τ 数值
            family: 矩函数族
            contribution_fn: 自定义族的逐观测贡献函数，β -> n×L 矩阵
        """
        if not isinstance(quantile, QuantileSpec):
            quantile = QuantileSpec(tau=float(quantile))
        family = MomentFamily(family)
        if family is MomentFamily.CUSTOM and contribution_fn is None:
            raise ConfigError("自定义矩函数族需要提供 contribution_fn")
        if family is MomentFamily.CENSORED_IVQR and dataset.censoring is None:
            raise DataError("删失IVQR矩函数需要删失点列 C")
        self._dataset = dataset
        self._quantile = quantile
        self._family = family
        self._contribution_fn = contribution_fn

    @property
    def dataset(self) -> Dataset:
        return self._dataset

    @property
    def quantile(self) -> QuantileSpec:
        return self._quantile

    @property
    def family(self) -> MomentFamily:
        return self._family

    @property
    def tau(self) -> float:
        return self._quantile.tau

    @property
    def tau_offset(self) -> float:
        """矩中减去的常数项：IVQR类为 τ，导数族为 0"""
        return 0.0 if self._family is MomentFamily.DERIVATIVE else self._quantile.tau

    @property
    def n(self) -> int:
        return self._dataset.n

    @property
    def p(self) -> int:
        return self._dataset.p

    @property
    def L(self) -> int:
        return self._dataset.L

    def indicators(self, beta: np.ndarray) -> np.ndarray:
        """逐观测指示函数 1{Y_i <= X_i'β}（删失族为 1{Y_i <= max(X_i'β, C_i)}）"""
        if self._family is MomentFamily.CUSTOM:
            raise ConfigError("自定义矩函数族没有指示函数结构")
        beta = np.asarray(beta, dtype=float)
        index = linear_index(self._dataset.x, beta)
        if self._family is MomentFamily.CENSORED_IVQR:
            index = np.maximum(index, self._dataset.censoring)
        return self._dataset.y <= index

    def contributions(self, beta: np.ndarray) -> np.ndarray:
        """逐观测矩贡献矩阵 n×L"""
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.p,):
            raise ConfigError(f"β 维度应为 {self.p}，得到 {beta.shape}")
        if self._family is MomentFamily.CUSTOM:
            g = np.asarray(self._contribution_fn(beta), dtype=float)
            if g.shape != (self.n, self.L):
                raise ConfigError(f"自定义矩贡献形状应为 {(self.n, self.L)}，得到 {g.shape}")
            return g
        weight = self.indicators(beta).astype(float) - self.tau_offset
        return self._dataset.z * weight[:, None]

    def sample_moment(self, beta: np.ndarray) -> np.ndarray:
        """样本矩 G_n(β) = n^{-1} Σ g(W_i;β)，逐列 fsum，结果与行序无关"""
        g = self.contributions(beta)
        return np.array([math.fsum(col) for col in g.T]) / self.n

    def sup_norm(self, beta: np.ndarray) -> float:
        """‖G_n(β)‖∞"""
        return float(np.max(np.abs(self.sample_moment(beta))))


def moment_contribution(model: MomentModel, i: int, beta: np.ndarray) -> np.ndarray:
    """第 i 个观测的矩贡献 g(W_i;β)，长度 L

    取自完整贡献矩阵的第 i 行，保证与 sample_moment 的逐行累加完全一致。
    """
    return model.contributions(beta)[i].copy()


def sample_moment(model: MomentModel, beta: np.ndarray) -> np.ndarray:
    """样本矩 G_n(β)"""
    return model.sample_moment(beta)


def moment_sup_norm(model: MomentModel, beta: np.ndarray) -> float:
    """样本矩的上确界范数"""
    return model.sup_norm(beta)
