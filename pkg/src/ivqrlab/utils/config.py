# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
统一配置管理器

集中管理求解器、自助法、推断与并行的默认参数，消除代码中的魔法数字
使用pydantic提供数据验证和类型安全
"""


from __future__ import annotations

from typing import Any, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator


class SolverConfig(BaseModel):
    """MILP 求解相关配置"""
    node_limit: Optional[int] = Field(
        default=200,
        ge=1,
        description="分支定界节点上限，None表示不限"
    )
    time_limit_ms: Optional[int] = Field(
        default=None,
        ge=0,
        description="墙钟时间上限（毫秒），默认不限以保证结果可复现"
    )
    wedge_ratio: float = Field(
        default=1e-7,
        ge=0,
        description="楔形间隔 D = wedge_ratio * M"
    )
    integrality_tol: float = Field(
        default=1e-9,
        gt=0,
        lt=0.5,
        description="判定二元变量取整的容差"
    )
    box_multiplier: float = Field(
        default=10.0,
        gt=0,
        description="默认参数盒半径 = box_multiplier * 2SLS尺度"
    )
    subsample_size: int = Field(
        default=100,
        ge=1,
        description="MILP初值所用子样本大小"
    )
    early_stop: bool = Field(
        default=True,
        description="是否启用 Q* 提前终止"
    )
    lp_backend: Literal["simplex", "highs"] = Field(
        default="simplex",
        description="LP松弛求解后端"
    )

    model_config = {"frozen": True}


class BootstrapConfig(BaseModel):
    """乘子自助法相关配置"""
    scheme: Literal["gaussian", "bernoulli", "multinomial"] = Field(
        default="bernoulli",
        description="乘子分布"
    )
    min_draws: int = Field(
        default=200,
        ge=2,
        description="默认抽样次数 B = max(min_draws, ceil(sqrt(n)))"
    )
    window_multiplier: float = Field(
        default=10.0,
        gt=0,
        description="求根窗口半宽 = window_multiplier * MAD尺度"
    )
    boundary_warning_share: float = Field(
        default=0.05,
        ge=0,
        le=1,
        description="触及窗口边界的抽样占比超过该值时告警"
    )

    model_config = {"frozen": True}


class InferenceConfig(BaseModel):
    """推断相关配置"""
    rectangle_draws: int = Field(
        default=100000,
        ge=1000,
        description="矩形临界值的模拟次数"
    )
    alphas: Tuple[float, ...] = Field(
        default=(0.05, 0.10),
        description="显著性水平列表"
    )
    singular_tol: float = Field(
        default=1e-10,
        gt=0,
        description="相对特征值奇异判定阈值"
    )

    model_config = {"frozen": True}

    @field_validator("alphas")
    @classmethod
    def check_alphas(cls, v):
        """显著性水平必须在(0,1)内"""
        if not v:
            raise ValueError("alphas不能为空")
        for a in v:
            if not 0 < a < 1:
                raise ValueError(f"显著性水平必须在(0,1)内，得到: {a}")
        return tuple(v)


class PerformanceConfig(BaseModel):
    """并行相关配置"""
    n_jobs: int = Field(
        default=1,
        ge=1,
        description="joblib worker数量"
    )
    backend: str = Field(
        default="loky",
        description="joblib后端"
    )
    show_progress: bool = Field(
        default=True,
        description="是否显示进度条"
    )

    model_config = {"frozen": True}


class ConfigurationManager:
    """统一配置管理器

    单例模式，全局唯一配置中心
    """
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        if self._initialized:
            return

        self.solver = SolverConfig()
        self.bootstrap = BootstrapConfig()
        self.inference = InferenceConfig()
        self.performance = PerformanceConfig()
        self._initialized = True

    def update_solver_config(self, **kwargs) -> None:
        """更新求解器配置

        自动验证参数有效性。配置不可变，创建新实例。
        """
        self.solver = SolverConfig(**{**self.solver.model_dump(), **kwargs})

    def update_bootstrap_config(self, **kwargs) -> None:
        """更新自助法配置"""
        self.bootstrap = BootstrapConfig(**{**self.bootstrap.model_dump(), **kwargs})

    def update_inference_config(self, **kwargs) -> None:
        """更新推断配置"""
        self.inference = InferenceConfig(**{**self.inference.model_dump(), **kwargs})

    def update_performance_config(self, **kwargs) -> None:
        """更新并行配置"""
        self.performance = PerformanceConfig(**{**self.performance.model_dump(), **kwargs})

    def reset_to_defaults(self) -> None:
        """重置为默认配置"""
        self.solver = SolverConfig()
        self.bootstrap = BootstrapConfig()
        self.inference = InferenceConfig()
        self.performance = PerformanceConfig()

    def export_config(self, include_performance: bool = True) -> dict[str, Any]:
        """导出配置为JSON友好的字典

        Args:
            include_performance: 是否包含并行配置
        """
        out = {
            'solver': self.solver.model_dump(mode='json'),
            'bootstrap': self.bootstrap.model_dump(mode='json'),
            'inference': self.inference.model_dump(mode='json'),
        }
        if include_performance:
            out['performance'] = self.performance.model_dump(mode='json')
        return out


# 全局单例实例
config = ConfigurationManager()
