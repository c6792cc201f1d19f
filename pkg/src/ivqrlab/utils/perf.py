# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""性能计时工具"""


from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from typing import Dict, Optional

logger = logging.getLogger(__name__)


def format_elapsed_time(elapsed: float) -> str:
    """格式化耗时显示

    Args:
        elapsed: 耗时（秒）

    Returns:
        格式化后的字符串（如：3分32秒 或 45.23秒）
    """
    minutes = int(elapsed / 60)
    seconds = int(elapsed % 60)
    if minutes > 0:
        return f"{minutes}分{seconds}秒"
    return f"{elapsed:.2f}秒"


@contextmanager
def timed(name="操作", threshold=0.1, sink: Optional[Dict[str, float]] = None):
    """性能计时上下文管理器

    Args:
        name: 操作名称
        threshold: 仅当耗时超过此阈值时才输出（秒）
        sink: 可选的耗时收集字典，按名称累加秒数

    Example:
        timings = {}
        with timed("MILP初值", sink=timings):
            solve()
    """
    start = time.perf_counter()
    try:
        yield
    finally:
        elapsed = time.perf_counter() - start
        if sink is not None:
            sink[name] = sink.get(name, 0.0) + elapsed
        if elapsed >= threshold:
            logger.debug(f"[PERF] {name} 耗时: {elapsed:.2f}s")
