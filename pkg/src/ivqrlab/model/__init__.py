# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""数据集、矩函数与工具变量标准化"""

from .dataset import Dataset, QuantileSpec, load_dataset
from .moments import (
    MomentFamily,
    MomentModel,
    moment_contribution,
    moment_sup_norm,
    sample_moment,
)
from .standardize import TransformRecord, detect_intercept_column, standardize_instruments

__all__ = [
    "Dataset",
    "QuantileSpec",
    "load_dataset",
    "MomentFamily",
    "MomentModel",
    "moment_contribution",
    "moment_sup_norm",
    "sample_moment",
    "TransformRecord",
    "detect_intercept_column",
    "standardize_instruments",
]
