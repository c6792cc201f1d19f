# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""测试共享夹具"""


from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from ivqrlab.model.dataset import Dataset
from ivqrlab.simlab.dgp import JtpaDgpSpec, generate_jtpa_like
from ivqrlab.utils.config import config

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(autouse=True)
def reset_config():
    """每个测试前后恢复默认配置并关闭进度条"""
    config.reset_to_defaults()
    config.update_performance_config(show_progress=False)
    yield
    config.reset_to_defaults()


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def jtpa_small():
    """q=1 的JTPA型数据（p=L=4），返回 (数据集, 真值函数)"""
    return generate_jtpa_like(JtpaDgpSpec(q=1, n=400, seed=7))


@pytest.fixture
def iv_dataset() -> Dataset:
    """恰好识别的线性IV数据：Y = 1 + 2X + e，Z 与 e 独立"""
    rng = np.random.default_rng(11)
    n = 300
    z1 = rng.normal(size=n)
    e = rng.normal(size=n)
    x1 = 0.8 * z1 + 0.5 * e + rng.normal(scale=0.3, size=n)
    y = 1.0 + 2.0 * x1 + e
    ones = np.ones(n)
    return Dataset(y=y, x=np.column_stack([ones, x1]), z=np.column_stack([ones, z1]))


@pytest.fixture
def write_csv(tmp_path):
    """把文本写成CSV文件并返回路径"""
    def _write(text: str, name: str = "data.csv") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write
