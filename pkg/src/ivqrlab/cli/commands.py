# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
子命令实现

每个子命令接收 RunConfig，返回可直接序列化的报告字典（milp-export 另写LP文件）。
"""


from __future__ import annotations

import logging
import math
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from .. import SCHEMA_VERSION, __version__
from ..errors import ConfigError, NumericalError
from ..estimation.jacobian import bootstrap_density, estimate_jacobian
from ..estimation.kstep import run_pipeline
from ..estimation.multipliers import MultiplierScheme, default_draws
from ..milp.branch_bound import SearchLimits, compute_qstar
from ..milp.formulations import build_problem, choose_big_m, default_parameter_box
from ..milp.initial import solve_ivqr_initial
from ..milp.lp_format import export_lp_file, format_lp
from ..milp.problem import ParameterBox
from ..milp.sampling import subsample
from ..model.dataset import Dataset, load_dataset
from ..model.moments import MomentFamily, MomentModel
from ..model.standardize import TransformRecord, detect_intercept_column, standardize_instruments
from ..simlab.experiments import (
    DEFAULT_RMSE_GRID,
    CoverageConfig,
    run_coverage_experiment,
    run_early_stop_experiment,
    run_rmse_experiment,
)
from ..utils.config import config
from ..utils.rng import derive_seed
from .config import RunConfig

logger = logging.getLogger(__name__)


def _envelope(cfg: RunConfig, **body: Any) -> Dict[str, Any]:
    return {
        'schema_version': SCHEMA_VERSION,
        'tool': {'name': 'ivqrlab', 'version': __version__},
        'command': cfg.command,
        'config': cfg.model_dump(mode='json', exclude={'jobs'}),
        'settings': config.export_config(include_performance=False),
        **body,
    }


def _load(cfg: RunConfig) -> Tuple[Dataset, Optional[TransformRecord]]:
    dataset, _ = load_dataset(cfg.input, cfg.y, cfg.x, cfg.z, cfg.tau_list[0], censor=cfg.censor)
    logger.info(f"已加载 {cfg.input}: n={dataset.n}, p={dataset.p}, L={dataset.L}")
    if not cfg.standardize_z:
        return dataset, None
    intercept = detect_intercept_column(dataset.z)
    dataset, record = standardize_instruments(dataset, intercept_column=intercept)
    logger.info(f"工具变量已标准化（截距列: {intercept}）")
    return dataset, record


def _family(cfg: RunConfig) -> MomentFamily:
    return MomentFamily.CENSORED_IVQR if cfg.model == "censored-ivqr" else MomentFamily.IVQR


def _limits(cfg: RunConfig) -> SearchLimits:
    return SearchLimits(
        time_limit_ms=cfg.time_limit_ms if cfg.time_limit_ms is not None else config.solver.time_limit_ms,
        node_limit=cfg.node_limit or config.solver.node_limit,
    )


def _milp_block(solution, omit_timings: bool) -> Dict[str, Any]:
    out = solution.model_dump(exclude={'assignment'})
    if omit_timings:
        out.pop('wall_time', None)
    return out


def _estimate_tau(cfg: RunConfig, dataset: Dataset, tau: float) -> Dict[str, Any]:
    """单个分位数：子样本MILP初值 → k步修正 → 推断"""
    initial = solve_ivqr_initial(dataset, tau, kind=cfg.model, seed=cfg.seed,
                                 subsample_size=cfg.subsample, limits=_limits(cfg),
                                 early_stop=cfg.early_stop)
    if initial.beta is None:
        raise NumericalError("MILP 未找到可行初值", tau=tau, termination=initial.termination)
    logger.info(f"τ={tau} MILP 终止: {initial.termination}, 目标值 {initial.objective:.4g}")
    report = run_pipeline(dataset, tau, np.asarray(initial.beta), seed=cfg.seed, family=_family(cfg),
                          scheme_kind=cfg.scheme, draws=cfg.draws,
                          permissive_jacobian=cfg.permissive_jacobian, alphas=cfg.alphas,
                          n_jobs=cfg.jobs, record_timings=not cfg.omit_timings)
    return {'tau': tau, 'milp': _milp_block(initial, cfg.omit_timings), 'report': report.to_dict()}


def cmd_estimate(cfg: RunConfig) -> Dict[str, Any]:
    """估计与推断"""
    dataset, record = _load(cfg)
    results = [_estimate_tau(cfg, dataset, tau) for tau in cfg.tau_list]
    return _envelope(cfg, standardization=record.model_dump() if record else None, results=results)


def _scheme(cfg: RunConfig, n: int, label: str) -> MultiplierScheme:
    return MultiplierScheme(kind=cfg.scheme or config.bootstrap.scheme,
                            seed=derive_seed(cfg.seed, label),
                            draws=cfg.draws or default_draws(n))


def cmd_jacobian(cfg: RunConfig) -> Dict[str, Any]:
    """Jacobian 估计；--density 时为单列的自助分位数密度"""
    if cfg.density is not None:
        column = cfg.density
        dataset, _ = load_dataset(cfg.input, column, [column], [column], cfg.tau_list[0])
        results = []
        for tau in cfg.tau_list:
            value = bootstrap_density(dataset.y, tau, _scheme(cfg, dataset.n, "density"))
            results.append({'tau': tau, 'column': column, 'density': value})
        return _envelope(cfg, mode='density', results=results)

    dataset, record = _load(cfg)
    results = []
    for tau in cfg.tau_list:
        if cfg.beta is not None:
            beta = np.asarray(cfg.beta, dtype=float)
            source = 'user'
        else:
            beta = np.asarray(_estimate_tau(cfg, dataset, tau)['report']['beta_tilde'])
            source = 'pipeline'
        model = MomentModel(dataset, tau, family=_family(cfg))
        estimate = estimate_jacobian(model, beta, _scheme(cfg, dataset.n, "jacobian"),
                                     permissive=cfg.permissive_jacobian, n_jobs=cfg.jobs)
        results.append({
            'tau': tau,
            'beta': beta.tolist(),
            'beta_source': source,
            'gamma': np.asarray(estimate.gamma).tolist(),
            'diagnostics': [d.model_dump() for d in estimate.diagnostics],
            'flags': estimate.flags(),
        })
    return _envelope(cfg, mode='jacobian', standardization=record.model_dump() if record else None,
                     results=results)


def cmd_milp_export(cfg: RunConfig) -> Dict[str, Any]:
    """导出 LP 文件（首个 τ），返回 M、Q* 与规模摘要"""
    dataset, _ = _load(cfg)
    tau = cfg.tau_list[0]
    m = cfg.subsample or min(dataset.n, config.solver.subsample_size)
    data = subsample(dataset, m, derive_seed(cfg.seed, "milp-subsample"))
    box: ParameterBox = default_parameter_box(data)
    big_m = choose_big_m(data, box, cfg.model)
    problem = build_problem(cfg.model, data, tau, big_m, box, lam=cfg.lam or 0.0)
    q_star = compute_qstar(data).q_star if data.n >= 2 else math.nan

    if cfg.out == "-":
        text = format_lp(problem)
        path = None
    else:
        text = None
        path = str(export_lp_file(problem, cfg.out))
    summary = {
        'model': cfg.model,
        'tau': tau,
        'big_m': big_m,
        'q_star': q_star,
        'lp_path': path,
        **problem.summary(),
    }
    logger.info(f"M={big_m:.6g}, Q*={q_star:.6g}, 变量 {problem.num_vars} 个（二元 {len(problem.binaries)} 个）, "
                f"约束 {problem.num_rows} 条")
    return _envelope(cfg, summary=summary, lp_text=text)


def cmd_simulate(cfg: RunConfig) -> Dict[str, Any]:
    """模拟实验"""
    if cfg.experiment == "coverage":
        params = {'taus': cfg.tau_list, 'seed': cfg.seed, 'subsample_size': cfg.subsample,
                  'node_limit': cfg.node_limit, 'scheme': cfg.scheme, 'draws': cfg.draws}
        for name, value in (('q', cfg.q), ('n', cfg.n), ('replications', cfg.replications),
                            ('alphas', cfg.alphas)):
            if value is not None:
                params[name] = value
        report = run_coverage_experiment(CoverageConfig(**params), n_jobs=cfg.jobs)
        logger.info("覆盖率:\n" + report.to_frame().to_string())
        return _envelope(cfg, experiment='coverage', report=report.model_dump(mode='json'))

    if cfg.experiment == "rmse":
        cells = [c for c in DEFAULT_RMSE_GRID
                 if (cfg.n is None or c.n == cfg.n)
                 and (cfg.lam is None or math.isclose(c.lam, cfg.lam, rel_tol=1e-9))]
        if not cells:
            raise ConfigError("所选 --n / --lambda 不在RMSE实验网格内", n=cfg.n, lam=cfg.lam)
        table = run_rmse_experiment(cells, replications=cfg.replications or 200, seed=cfg.seed,
                                    n_jobs=cfg.jobs)
        logger.info("RMSE（×10^-2）:\n" + table.to_string())
        return _envelope(cfg, experiment='rmse', unit='1e-2',
                         table=table.reset_index().to_dict(orient='records'))

    report = run_early_stop_experiment(
        n=cfg.n or 100, p=cfg.p or 5, replications=cfg.replications or 200,
        tau=cfg.taus[0] if cfg.taus else 0.7, instruments=cfg.instruments,
        node_limit=cfg.node_limit, time_limit_ms=cfg.time_limit_ms, seed=cfg.seed, n_jobs=cfg.jobs,
    )
    logger.info(f"‖G_n(β̂)‖∞ <= Q* 的频率: {report.frequency:.4f}")
    return _envelope(cfg, experiment='early-stop', report=report.model_dump())


COMMANDS: Dict[str, Callable[[RunConfig], Dict[str, Any]]] = {
    'estimate': cmd_estimate,
    'jacobian': cmd_jacobian,
    'milp-export': cmd_milp_export,
    'simulate': cmd_simulate,
}
