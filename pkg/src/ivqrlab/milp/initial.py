# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
MILP 初始估计

子样本 → 默认参数盒与 big-M → 构造MILP → Q* → 热启动与初值启发式 → 分支定界。
命令行与模拟实验共用此入口。
"""


from __future__ import annotations

import logging
from typing import Literal, Optional

import numpy as np

from ..errors import DataError
from ..model.dataset import Dataset
from ..utils.config import config
from ..utils.rng import derive_seed, make_rng
from .branch_bound import MilpSolution, SearchLimits, branch_and_bound, compute_qstar
from .formulations import (
    build_censored_ivqr_milp,
    build_ivqr_milp,
    choose_big_m,
    default_parameter_box,
    make_completion,
    quantile_regression_pilot,
    two_stage_least_squares,
)
from .problem import ParameterBox
from .sampling import subsample

logger = logging.getLogger(__name__)


def solve_ivqr_initial(dataset: Dataset, tau: float, *,
                       kind: Literal["ivqr", "censored-ivqr"] = "ivqr",
                       seed: int = 0,
                       subsample_size: Optional[int] = None,
                       box: Optional[ParameterBox] = None,
                       big_m: Optional[float] = None,
                       wedge: Optional[float] = None,
                       warm_start: Optional[np.ndarray] = None,
                       limits: Optional[SearchLimits] = None,
                       early_stop: Optional[bool] = None,
                       backend: Optional[str] = None) -> MilpSolution:
    """在子样本上求解 IVQR 的MILP，得到初始估计 β̄

    Args:
        dataset: 完整数据集
        tau: 分位数
        kind: "ivqr" 或 "censored-ivqr"
        seed: 主种子（子样本与热启动种子由此派生）
        subsample_size: 子样本大小，默认 min(n, 配置值)
        box: 参数盒，默认由 2SLS 初值确定
        big_m: M，默认由参数盒确定
        wedge: 楔形间隔
        warm_start: 热启动 β，默认 N(0, I_p) 抽样
        limits: 搜索上限
        early_stop: 是否启用 Q* 提前终止
        backend: LP后端

    Returns:
        MilpSolution，metadata 中记录子样本、M、Q* 等信息
    """
    m = subsample_size or min(dataset.n, config.solver.subsample_size)
    sub_seed = derive_seed(seed, "milp-subsample")
    data = subsample(dataset, m, sub_seed)
    if data.n < 2:
        raise DataError("MILP 初值至少需要2个观测")

    box = box or default_parameter_box(data)
    big_m = big_m or choose_big_m(data, box, kind)
    if kind == "ivqr":
        problem = build_ivqr_milp(data, tau, big_m, box, wedge)
    else:
        problem = build_censored_ivqr_milp(data, tau, big_m, box, wedge)

    rule = compute_qstar(data)
    if early_stop is not None:
        rule = rule.model_copy(update={'enabled': early_stop})
    if warm_start is None:
        warm_start = make_rng(seed, "milp-start").standard_normal(data.p)

    heuristics = []
    try:
        heuristics.append(("2sls", two_stage_least_squares(data)))
    except (ValueError, np.linalg.LinAlgError):
        logger.debug("2SLS 初值不可用")
    try:
        heuristics.append(("qr-pilot", quantile_regression_pilot(data, tau)))
    except DataError as e:
        logger.debug(f"分位数回归初值不可用: {e.message}")

    logger.info(f"MILP 初值: 子样本 {data.n}/{dataset.n}, M={big_m:.4g}, Q*={rule.q_star:.4g}")
    solution = branch_and_bound(problem, rule, limits, warm_start=warm_start,
                                completion=make_completion(problem, data),
                                heuristics=heuristics, backend=backend)
    metadata = {
        'kind': kind,
        'subsample_size': data.n,
        'subsample_seed': sub_seed,
        'big_m': big_m,
        'wedge': problem.metadata['wedge'],
        'q_star': rule.q_star,
        'early_stop': rule.enabled,
        'box': {'lower': box.lower, 'upper': box.upper},
        **problem.summary(),
    }
    return solution.model_copy(update={'metadata': metadata})
