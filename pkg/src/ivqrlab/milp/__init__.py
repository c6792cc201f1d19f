# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""MILP 形式、单纯形与分支定界求解器、Q* 提前终止、LP文件与子样本"""

from .branch_bound import (
    EarlyStopRule,
    MilpSolution,
    SearchLimits,
    branch_and_bound,
    compute_qstar,
)
from .formulations import (
    audit_big_m,
    build_censored_ivqr_milp,
    build_censored_milp,
    build_hd_ivqr_milp,
    build_ivqr_milp,
    build_problem,
    choose_big_m,
    complete_assignment,
    default_parameter_box,
    make_completion,
    quantile_regression_pilot,
    two_stage_least_squares,
)
from .initial import solve_ivqr_initial
from .lp_format import export_lp_file, format_lp, parse_lp, problems_equal, read_lp_file
from .problem import MilpProblem, ParameterBox, ProblemBuilder
from .sampling import subsample, subsample_rows
from .simplex import LpResult, solve_lp

__all__ = [
    "EarlyStopRule",
    "MilpSolution",
    "SearchLimits",
    "branch_and_bound",
    "compute_qstar",
    "audit_big_m",
    "build_censored_ivqr_milp",
    "build_censored_milp",
    "build_hd_ivqr_milp",
    "build_ivqr_milp",
    "build_problem",
    "choose_big_m",
    "complete_assignment",
    "default_parameter_box",
    "make_completion",
    "quantile_regression_pilot",
    "two_stage_least_squares",
    "solve_ivqr_initial",
    "export_lp_file",
    "format_lp",
    "parse_lp",
    "problems_equal",
    "read_lp_file",
    "MilpProblem",
    "ParameterBox",
    "ProblemBuilder",
    "subsample",
    "subsample_rows",
    "LpResult",
    "solve_lp",
]
