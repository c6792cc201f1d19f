# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
数据集与分位数设定

Dataset 在构造时完成全部校验并把数组设为只读，之后可在线程间安全共享。
加载器不注入截距列，需要截距时由用户在CSV中显式提供常数列。
"""


from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from ..errors import (
    CellParseError,
    ConfigError,
    DataError,
    IdentificationError,
    MissingColumnError,
)


def _frozen_array(value, ndim: int, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float, copy=True)
    if ndim == 1:
        if arr.ndim == 2 and arr.shape[1] == 1:
            arr = arr[:, 0]
        if arr.ndim != 1:
            raise DataError(f"{name} 必须是一维向量，得到形状 {arr.shape}")
    else:
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise DataError(f"{name} 必须是二维矩阵，得到形状 {arr.shape}")
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


class Dataset(BaseModel):
    """IVQR 数据集

    Attributes:
        y: 结果变量，长度 n
        x: 回归变量矩阵 n×p
        z: 工具变量矩阵 n×L
        censoring: 可选的删失点 C_i，长度 n
    """

    y: np.ndarray
    x: np.ndarray
    z: np.ndarray
    censoring: Optional[np.ndarray] = None
    y_name: str = "y"
    x_names: Tuple[str, ...] = ()
    z_names: Tuple[str, ...] = ()

    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    @model_validator(mode='before')
    @classmethod
    def normalize_arrays(cls, data):
        """统一数组形状与默认列名"""
        if not isinstance(data, dict):
            return data
        data = dict(data)
        data['y'] = _frozen_array(data['y'], 1, 'y')
        data['x'] = _frozen_array(data['x'], 2, 'x')
        data['z'] = _frozen_array(data['z'], 2, 'z')
        if data.get('censoring') is not None:
            data['censoring'] = _frozen_array(data['censoring'], 1, 'censoring')
        p = data['x'].shape[1]
        n_inst = data['z'].shape[1]
        data['x_names'] = tuple(data.get('x_names') or (f"x{k}" for k in range(p)))
        data['z_names'] = tuple(data.get('z_names') or (f"z{j}" for j in range(n_inst)))
        return data

    @model_validator(mode='after')
    def validate_dataset(self):
        """校验行数一致、取值有限、L >= p"""
        n = self.y.shape[0]
        if n < 1:
            raise DataError("数据集至少需要1行")
        for name, arr in (('x', self.x), ('z', self.z), ('censoring', self.censoring)):
            if arr is not None and arr.shape[0] != n:
                raise DataError(f"{name} 的行数 {arr.shape[0]} 与 y 的长度 {n} 不一致")
        for name, arr in (('y', self.y), ('x', self.x), ('z', self.z), ('censoring', self.censoring)):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise DataError(f"{name} 含有非有限值")
        if len(self.x_names) != self.p or len(self.z_names) != self.L:
            raise DataError("列名个数与矩阵列数不一致")
        if self.L < self.p:
            raise IdentificationError(
                f"工具变量个数 L={self.L} 少于回归变量个数 p={self.p}，模型不可识别",
                L=self.L, p=self.p,
            )
        return self

    @property
    def n(self) -> int:
        """样本量"""
        return int(self.y.shape[0])

    @property
    def p(self) -> int:
        """回归变量个数"""
        return int(self.x.shape[1])

    @property
    def L(self) -> int:
        """工具变量个数"""
        return int(self.z.shape[1])

    def take(self, rows: Sequence[int]) -> "Dataset":
        """按行下标取子集（保持给定顺序）"""
        rows = np.asarray(rows, dtype=int)
        return Dataset(
            y=self.y[rows],
            x=self.x[rows],
            z=self.z[rows],
            censoring=None if self.censoring is None else self.censoring[rows],
            y_name=self.y_name,
            x_names=self.x_names,
            z_names=self.z_names,
        )

    def with_instruments(self, z: np.ndarray, z_names: Optional[Sequence[str]] = None) -> "Dataset":
        """替换工具变量矩阵，其余字段不变"""
        return Dataset(
            y=self.y, x=self.x, z=z, censoring=self.censoring,
            y_name=self.y_name, x_names=self.x_names,
            z_names=tuple(z_names) if z_names is not None else self.z_names,
        )


class QuantileSpec(BaseModel):
    """分位数 τ ∈ (0,1)"""
    tau: float = Field(gt=0, lt=1, description="分位数水平")

    model_config = {"frozen": True}


def _parse_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column]
    values = pd.to_numeric(raw.str.strip(), errors='coerce').to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise CellParseError(
            f"第{i + 1}行（数据行）列 '{column}' 的值 {raw.iloc[i]!r} 无法解析为有限实数",
            row=i + 1, column=column, value=raw.iloc[i],
        )
    return values


def load_dataset(path: Union[str, Path], y: str, x_names: Sequence[str],
                 z_names: Sequence[str], tau: float,
                 censor: Optional[str] = None) -> Tuple[Dataset, QuantileSpec]:
    """从CSV加载数据集

    Args:
        path: UTF-8、逗号分隔、首行为表头的CSV文件
        y: 结果变量列名
        x_names: 回归变量列名（按给定顺序）
        z_names: 工具变量列名（可与 x_names 重复使用）
        tau: 分位数
        censor: 可选的删失点列名

    Returns:
        (Dataset, QuantileSpec)
    """
    if not x_names:
        raise ConfigError("至少需要一个回归变量列")
    if not z_names:
        raise ConfigError("至少需要一个工具变量列")
    quantile = QuantileSpec(tau=tau)

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
    except FileNotFoundError:
        raise DataError(f"找不到数据文件: {path}", path=str(path))
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise CellParseError(f"CSV解析失败: {e}", path=str(path))

    frame.columns = [str(c).strip() for c in frame.columns]
    wanted = [y, *x_names, *z_names] + ([censor] if censor else [])
    for name in wanted:
        if name not in frame.columns:
            raise MissingColumnError(
                f"CSV中缺少列 '{name}'", column=name, available=list(frame.columns),
            )

    columns = {name: _parse_column(frame, name) for name in dict.fromkeys(wanted)}
    dataset = Dataset(
        y=columns[y],
        x=np.column_stack([columns[c] for c in x_names]) if len(frame) else np.empty((0, len(x_names))),
        z=np.column_stack([columns[c] for c in z_names]) if len(frame) else np.empty((0, len(z_names))),
        censoring=columns[censor] if censor else None,
        y_name=y,
        x_names=tuple(x_names),
        z_names=tuple(z_names),
    )
    return dataset, quantile
