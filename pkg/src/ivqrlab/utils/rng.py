# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
随机数流管理

主种子按标签散列出各组件种子，新增组件不会改变其他组件的随机流。
"""


from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(master_seed: int, label: str, *indices: int) -> int:
    """按标签派生64位子种子

    Args:
        master_seed: 主种子
        label: 组件标签，如 "milp-subsample"
        *indices: 附加下标（如重复实验编号）

    Returns:
        非负64位整数种子
    """
    key = ":".join([str(int(master_seed) & _MASK64), label] + [str(int(i)) for i in indices])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(master_seed: int, label: str, *indices: int) -> np.random.Generator:
    """按标签创建独立的随机数生成器"""
    return np.random.default_rng(derive_seed(master_seed, label, *indices))


def stream_rng(seed: int, index: int) -> np.random.Generator:
    """第 index 条可独立复现的子流（用于逐次抽样并行）"""
    return np.random.default_rng(np.random.SeedSequence(int(seed) & _MASK64, spawn_key=(int(index),)))
