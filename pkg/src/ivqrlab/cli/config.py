# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
命令行运行配置

所有参数在计算开始前由 RunConfig 校验，校验失败对应退出码 2。
配置原样写入每份报告，用于逐位复现。
"""


from __future__ import annotations

import argparse
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from ..errors import ConfigError
from ..utils.paths import DEMO_CSV_PATH

Command = Literal["estimate", "jacobian", "milp-export", "simulate"]
ModelKind = Literal["ivqr", "hd-ivqr", "censored", "censored-ivqr"]
Experiment = Literal["coverage", "rmse", "early-stop"]

# 内置演示数据的列角色
DEMO_COLUMNS = {
    'y': "y",
    'x': ("const", "d", "w1", "dw1"),
    'z': ("const", "s", "w1", "sw1"),
}


def split_list(text: Optional[str]) -> Tuple[str, ...]:
    """逗号分隔列表，忽略空白项"""
    if not text:
        return ()
    return tuple(item.strip() for item in text.split(",") if item.strip())


def _floats(text: Optional[str], name: str) -> Optional[Tuple[float, ...]]:
    if text is None:
        return None
    try:
        return tuple(float(v) for v in split_list(text))
    except ValueError:
        raise ConfigError(f"{name} 必须是逗号分隔的实数列表，得到: {text}", option=name)


class RunConfig(BaseModel):
    """一次命令行运行的完整配置"""
    command: Command
    input: Optional[str] = Field(default=None, description="CSV路径")
    y: Optional[str] = None
    x: Tuple[str, ...] = ()
    z: Tuple[str, ...] = ()
    censor: Optional[str] = Field(default=None, description="删失点列名")
    taus: Optional[Tuple[float, ...]] = None
    alphas: Optional[Tuple[float, ...]] = None
    subsample: Optional[int] = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0)
    time_limit_ms: Optional[int] = Field(default=None, ge=0)
    node_limit: Optional[int] = Field(default=None, ge=1)
    early_stop: bool = True
    standardize_z: bool = False
    permissive_jacobian: bool = False
    scheme: Optional[Literal["gaussian", "bernoulli", "multinomial"]] = None
    draws: Optional[int] = Field(default=None, ge=2)
    model: ModelKind = "ivqr"
    lam: Optional[float] = Field(default=None, ge=0, description="惩罚参数 λ（hd-ivqr / censored）")
    beta: Optional[Tuple[float, ...]] = None
    density: Optional[str] = Field(default=None, description="密度模式所用的列")
    experiment: Optional[Experiment] = None
    replications: Optional[int] = Field(default=None, ge=1)
    n: Optional[int] = Field(default=None, ge=2)
    q: Optional[int] = Field(default=None, ge=1)
    p: Optional[int] = Field(default=None, ge=1)
    instruments: Literal["x", "log-x", "x-log-x"] = "x"
    jobs: Optional[int] = Field(default=None, ge=1)
    omit_timings: bool = False
    out: str

    model_config = {"frozen": True}

    @field_validator('taus', 'alphas')
    @classmethod
    def validate_levels(cls, v):
        if v is None:
            return v
        if not v:
            raise ValueError("列表不能为空")
        for level in v:
            if not 0 < level < 1:
                raise ValueError(f"取值必须在 (0,1) 内，得到: {level}")
        return tuple(v)

    @model_validator(mode='after')
    def validate_roles(self):
        """按子命令检查必需参数"""
        if self.command == "simulate":
            if self.experiment is None:
                raise ValueError("simulate 需要 --experiment")
            return self
        if self.input is None:
            raise ValueError(f"{self.command} 需要 --input")
        if self.command == "jacobian" and self.density is not None:
            return self
        if self.y is None or not self.x or not self.z:
            raise ValueError(f"{self.command} 需要 --y、--x、--z")
        if self.model in ("censored", "censored-ivqr") and self.censor is None:
            raise ValueError(f"--model {self.model} 需要 --censor 指定删失点列")
        if self.command in ("estimate", "jacobian") and self.model not in ("ivqr", "censored-ivqr"):
            raise ValueError(f"{self.command} 只支持 ivqr 与 censored-ivqr 模型")
        if self.model in ("hd-ivqr", "censored") and self.lam is None:
            raise ValueError(f"--model {self.model} 需要 --lambda")
        if self.beta is not None and len(self.beta) != len(self.x):
            raise ValueError(f"--beta 长度 {len(self.beta)} 与回归变量个数 {len(self.x)} 不一致")
        return self

    @property
    def tau_list(self) -> Tuple[float, ...]:
        return self.taus or (0.5,)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        """由解析后的命令行参数构造配置

        Raises:
            ConfigError: 参数不合法
        """
        fields = {
            'command': args.command,
            'input': args.input,
            'y': args.y,
            'x': split_list(args.x),
            'z': split_list(args.z),
            'censor': args.censor,
            'taus': _floats(args.tau, "--tau"),
            'alphas': _floats(args.alpha, "--alpha"),
            'subsample': args.subsample,
            'seed': args.seed,
            'time_limit_ms': args.time_limit_ms,
            'node_limit': args.node_limit,
            'early_stop': not args.no_early_stop,
            'standardize_z': args.standardize_z,
            'permissive_jacobian': args.permissive_jacobian,
            'scheme': args.scheme,
            'draws': args.draws,
            'model': args.model,
            'lam': args.lam,
            'beta': _floats(args.beta, "--beta"),
            'density': args.density,
            'experiment': args.experiment,
            'replications': args.replications,
            'n': args.n,
            'q': args.q,
            'p': args.p,
            'instruments': args.instruments,
            'jobs': args.jobs,
            'omit_timings': args.omit_timings,
            'out': args.out,
        }
        if args.demo:
            fields['input'] = fields['input'] or str(DEMO_CSV_PATH)
            fields['y'] = fields['y'] or DEMO_COLUMNS['y']
            fields['x'] = fields['x'] or DEMO_COLUMNS['x']
            fields['z'] = fields['z'] or DEMO_COLUMNS['z']
        try:
            return cls(**fields)
        except ValidationError as e:
            raise ConfigError(f"参数校验失败: {_first_error(e)}", errors=_error_list(e))


def _error_list(e: ValidationError) -> List[str]:
    return [f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()]


def _first_error(e: ValidationError) -> str:
    errors = _error_list(e)
    return errors[0] if errors else str(e)
