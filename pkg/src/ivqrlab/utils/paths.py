# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
项目路径管理

提供随包分发的数据文件路径
"""


from pathlib import Path


def get_package_root() -> Path:
    """获取 ivqrlab 包目录"""
    return Path(__file__).resolve().parent.parent


def get_data_path() -> Path:
    """获取随包数据目录路径"""
    return get_package_root() / 'data'


def get_demo_csv_path() -> Path:
    """获取内置200行演示数据（JTPA式设计，q=1）

    列：y, const, d, w1, dw1, s, sw1
    """
    return get_data_path() / 'demo_jtpa.csv'


# 便捷访问
DATA_PATH = get_data_path()
DEMO_CSV_PATH = get_demo_csv_path()
