# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
并行执行配置

通过环境变量 IVQRLAB_NUM_WORKERS 或代码设置控制 joblib worker 数量。
并行只改变执行位置，不改变归约顺序，结果与串行逐位一致。
"""


from __future__ import annotations

import os
from typing import Callable, Iterable, List, Optional, TypeVar

from joblib import Parallel, delayed

from .config import config

T = TypeVar("T")


def resolve_n_jobs(n_jobs: Optional[int] = None) -> int:
    """确定实际worker数量

    优先级：显式参数 > 环境变量 > 全局配置

    Args:
        n_jobs: 显式指定的worker数量

    Returns:
        worker数量（>=1）
    """
    if n_jobs is not None:
        if n_jobs < 1:
            raise ValueError("worker数量必须>=1")
        return n_jobs
    env = os.getenv('IVQRLAB_NUM_WORKERS')
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return config.performance.n_jobs


def run_ordered(func: Callable[..., T], tasks: Iterable[tuple],
                n_jobs: Optional[int] = None) -> List[T]:
    """按提交顺序执行任务并收集结果

    Args:
        func: 任务函数
        tasks: 参数元组序列
        n_jobs: worker数量，None表示使用配置

    Returns:
        与 tasks 顺序一致的结果列表
    """
    tasks = list(tasks)
    workers = resolve_n_jobs(n_jobs)
    if workers == 1 or len(tasks) <= 1:
        return [func(*args) for args in tasks]
    return Parallel(n_jobs=workers, backend=config.performance.backend, verbose=0)(
        delayed(func)(*args) for args in tasks
    )
