# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
工具变量标准化

对非截距工具变量块做对称逆平方根变换，使 n^{-1}ΣZZ' = I。
采用特征分解而非Cholesky，变换与列顺序无关。
"""


from __future__ import annotations

import logging
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from ..errors import SingularityError
from .dataset import Dataset

logger = logging.getLogger(__name__)

_RELATIVE_TOL = 1e-10


class TransformRecord(BaseModel):
    """标准化变换记录（写入报告便于追溯）"""
    matrix: List[List[float]] = Field(description="作用于工具变量块的线性映射 T（Z_block @ T）")
    block_columns: List[int] = Field(description="被变换的列下标")
    intercept_column: Optional[int] = Field(default=None, description="保持不变的截距列")
    eigenvalues: List[float] = Field(default_factory=list, description="二阶矩矩阵的特征值")

    model_config = {"frozen": True}


def detect_intercept_column(z: np.ndarray) -> Optional[int]:
    """返回第一个非零常数列的下标，找不到返回 None"""
    for j in range(z.shape[1]):
        col = z[:, j]
        if col[0] != 0 and np.all(col == col[0]):
            return j
    return None


def standardize_instruments(dataset: Dataset,
                            intercept_column: Optional[int] = None) -> Tuple[Dataset, TransformRecord]:
    """标准化工具变量块

    Args:
        dataset: 原始数据集
        intercept_column: 不参与变换的截距列下标

    Returns:
        (变换后的数据集, 变换记录)
    """
    z = dataset.z
    block = [j for j in range(dataset.L) if j != intercept_column]
    if not block:
        return dataset, TransformRecord(matrix=[], block_columns=[], intercept_column=intercept_column)

    zb = z[:, block]
    second_moment = np.einsum('ij,ik->jk', zb, zb, optimize=False) / dataset.n
    second_moment = (second_moment + second_moment.T) / 2
    eigvals, eigvecs = np.linalg.eigh(second_moment)
    top = float(eigvals[-1])
    null = eigvals <= _RELATIVE_TOL * max(top, 0.0)
    if top <= 0 or null.any():
        weights = np.abs(eigvecs[:, null]).max(axis=1) if null.any() else np.ones(len(block))
        offending = [dataset.z_names[block[i]] for i in np.flatnonzero(weights > 1e-8)]
        raise SingularityError(
            f"工具变量块秩亏，涉及列: {', '.join(offending)}",
            columns=offending, smallest_eigenvalue=float(eigvals[0]),
        )

    transform = (eigvecs / np.sqrt(eigvals)) @ eigvecs.T
    transform = (transform + transform.T) / 2
    new_z = np.array(z, dtype=float, copy=True)
    new_z[:, block] = zb @ transform
    logger.debug(f"工具变量标准化完成，条件数 {top / eigvals[0]:.3g}")

    record = TransformRecord(
        matrix=transform.tolist(),
        block_columns=block,
        intercept_column=intercept_column,
        eigenvalues=eigvals.tolist(),
    )
    return dataset.with_instruments(new_z), record
