# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
乘子自助法的乘子分布

每次抽样使用由种子确定性派生的独立子流，逐次或分块并行生成的面板完全一致。
"""


from __future__ import annotations

import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field

from ..utils.config import config
from ..utils.rng import stream_rng

SchemeKind = Literal["gaussian", "bernoulli", "multinomial", "unit"]


def default_draws(n: int) -> int:
    """默认抽样次数 B = max(min_draws, ceil(sqrt(n)))"""
    return max(config.bootstrap.min_draws, math.ceil(math.sqrt(n)))


class MultiplierScheme(BaseModel):
    """乘子分布设定，所有分布满足 E(ξ_i) = 1

    - gaussian: N(1,1)
    - bernoulli: {0,2} 等概率
    - multinomial: 经典非参数自助法的重抽样次数
    - unit: ξ ≡ 1，无扰动，仅用于测试
    """
    kind: SchemeKind = Field(default="bernoulli", description="乘子分布")
    seed: int = Field(default=0, ge=0, description="64位种子")
    draws: int = Field(default=200, ge=2, description="抽样次数B")

    model_config = {"frozen": True}

    def draw(self, n: int, b: int) -> np.ndarray:
        """第 b 次抽样的乘子向量（长度 n）"""
        if self.kind == "unit":
            return np.ones(n)
        rng = stream_rng(self.seed, b)
        if self.kind == "gaussian":
            return rng.normal(1.0, 1.0, size=n)
        if self.kind == "bernoulli":
            return 2.0 * rng.integers(0, 2, size=n)
        return rng.multinomial(n, np.full(n, 1.0 / n)).astype(float)

    def draw_panel(self, n: int) -> np.ndarray:
        """B×n 乘子面板"""
        return np.vstack([self.draw(n, b) for b in range(self.draws)])
