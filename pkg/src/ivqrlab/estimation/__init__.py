# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""k步修正估计、免调参Jacobian与渐近推断"""

from .inference import (
    CovarianceEstimate,
    InferenceReport,
    IntervalSet,
    TestResult,
    asymptotic_variance,
    build_interval_sets,
    confidence_intervals,
    estimate_omega,
    rectangle_confidence_set,
    rectangle_critical_value,
    rectangle_test,
    t_test,
    wald_test,
)
from .jacobian import (
    EntryDiagnostics,
    EntryDraws,
    JacobianEstimate,
    RootSolution,
    ScalarRootProblem,
    bootstrap_density,
    estimate_entry,
    estimate_jacobian,
    kernel_jacobian_baseline,
    reduce_entry_to_scalar,
    scalar_transform,
    solve_scalar_root,
    solve_scalar_root_detailed,
)
from .kstep import (
    CorrectionOperator,
    IterationTrace,
    JacobianMatrix,
    KStepConfig,
    default_k,
    iterate,
    one_step,
    run_pipeline,
)
from .multipliers import MultiplierScheme, default_draws

__all__ = [
    "CovarianceEstimate",
    "InferenceReport",
    "IntervalSet",
    "TestResult",
    "asymptotic_variance",
    "build_interval_sets",
    "confidence_intervals",
    "estimate_omega",
    "rectangle_confidence_set",
    "rectangle_critical_value",
    "rectangle_test",
    "t_test",
    "wald_test",
    "EntryDiagnostics",
    "EntryDraws",
    "JacobianEstimate",
    "RootSolution",
    "ScalarRootProblem",
    "bootstrap_density",
    "estimate_entry",
    "estimate_jacobian",
    "kernel_jacobian_baseline",
    "reduce_entry_to_scalar",
    "scalar_transform",
    "solve_scalar_root",
    "solve_scalar_root_detailed",
    "CorrectionOperator",
    "IterationTrace",
    "JacobianMatrix",
    "KStepConfig",
    "default_k",
    "iterate",
    "one_step",
    "run_pipeline",
    "MultiplierScheme",
    "default_draws",
]
