# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""模拟数据生成过程与实验驱动"""

from .dgp import (
    DerivativeDgpSpec,
    JtpaDgpSpec,
    empirical_moment_slope,
    generate_derivative_dgp,
    generate_heteroskedastic_dgp,
    generate_jtpa_like,
    jtpa_true_beta,
    jtpa_true_jacobian,
    true_gamma,
    verify_conditional_quantile,
)
from .experiments import (
    DEFAULT_RMSE_GRID,
    CoverageConfig,
    CoverageReport,
    CoverageTarget,
    EarlyStopRecord,
    EarlyStopReport,
    RmseCell,
    coverage_targets,
    run_coverage_experiment,
    run_early_stop_experiment,
    run_rmse_experiment,
    summarize_rmse,
)

__all__ = [
    "DerivativeDgpSpec",
    "JtpaDgpSpec",
    "empirical_moment_slope",
    "generate_derivative_dgp",
    "generate_heteroskedastic_dgp",
    "generate_jtpa_like",
    "jtpa_true_beta",
    "jtpa_true_jacobian",
    "true_gamma",
    "verify_conditional_quantile",
    "DEFAULT_RMSE_GRID",
    "CoverageConfig",
    "CoverageReport",
    "CoverageTarget",
    "EarlyStopRecord",
    "EarlyStopReport",
    "RmseCell",
    "coverage_targets",
    "run_coverage_experiment",
    "run_early_stop_experiment",
    "run_rmse_experiment",
    "summarize_rmse",
]
