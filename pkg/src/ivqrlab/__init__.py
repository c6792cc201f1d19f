# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""IVQRLab - 工具变量分位数回归与非光滑GMM的估计与推断

"""

# 从 pyproject.toml 动态读取版本号（单一数据源）
try:
    from importlib.metadata import version, PackageNotFoundError
except ImportError:
    from importlib_metadata import version, PackageNotFoundError  # type: ignore

try:
    __version__ = version("ivqrlab")
except PackageNotFoundError:
    # 包未安装时的后备版本（开发环境）
    __version__ = "0.0.0.dev"

# 报告JSON结构版本，字段只增不删
SCHEMA_VERSION = "1.0"

__all__ = ["__version__", "SCHEMA_VERSION"]
