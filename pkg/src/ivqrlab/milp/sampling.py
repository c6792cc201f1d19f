# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""MILP 初值所用的子样本"""


from __future__ import annotations

import numpy as np

from ..errors import SubsampleError
from ..model.dataset import Dataset


def subsample_rows(n: int, m: int, seed: int) -> np.ndarray:
    """无放回均匀抽取 m 行，按原顺序返回下标"""
    if not 1 <= m <= n:
        raise SubsampleError(f"子样本大小必须在 [1, {n}] 内，得到: {m}", m=m, n=n)
    if m == n:
        return np.arange(n)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=m, replace=False))


def subsample(dataset: Dataset, m: int, seed: int) -> Dataset:
    """子样本数据集

    Args:
        dataset: 原数据集
        m: 子样本大小，1 <= m <= n
        seed: 种子

    Returns:
        保持原行顺序的子样本
    """
    return dataset.take(subsample_rows(dataset.n, m, seed))
