# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
混合整数线性规划问题的数据结构

MilpProblem 为稠密形式：min c'x s.t. A x (<=,=,>=) b, lb <= x <= ub，部分变量为二元。
ProblemBuilder 按名称逐个添加变量与约束，保证名称唯一。
"""


from __future__ import annotations

import math
from typing import Any, Dict, List, Literal, Mapping, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from ..errors import ConfigError, DuplicateNameError

Sense = Literal["<=", "=", ">="]
ProblemKind = Literal["ivqr", "hd-ivqr", "censored", "censored-ivqr", "lp"]


def _frozen(value, ndim: int) -> np.ndarray:
    arr = np.array(value, dtype=float, copy=True)
    if ndim == 2 and arr.size == 0:
        arr = arr.reshape(0, arr.shape[-1] if arr.ndim == 2 else 0)
    if arr.ndim != ndim:
        raise ValueError(f"应为{ndim}维数组，得到形状 {arr.shape}")
    arr.flags.writeable = False
    return arr


class ParameterBox(BaseModel):
    """参数盒 [lower_k, upper_k]"""
    lower: List[float]
    upper: List[float]

    model_config = {"frozen": True}

    @model_validator(mode='after')
    def check_box(self):
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ValueError("参数盒上下界长度不一致或为空")
        for lo, hi in zip(self.lower, self.upper):
            if math.isnan(lo) or math.isnan(hi) or lo > hi:
                raise ValueError(f"参数盒为空: [{lo}, {hi}]")
        return self

    @classmethod
    def symmetric(cls, radius: Sequence[float], center: Optional[Sequence[float]] = None) -> "ParameterBox":
        radius = np.asarray(radius, dtype=float)
        center = np.zeros_like(radius) if center is None else np.asarray(center, dtype=float)
        return cls(lower=(center - radius).tolist(), upper=(center + radius).tolist())

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def is_bounded(self) -> bool:
        return all(math.isfinite(v) for v in self.lower + self.upper)

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.lower) + np.asarray(self.upper)) / 2

    @property
    def radius(self) -> np.ndarray:
        return (np.asarray(self.upper) - np.asarray(self.lower)) / 2

    def clip(self, beta: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(beta, dtype=float), self.lower, self.upper)


class MilpProblem(BaseModel):
    """稠密形式的MILP

    beta_index / beta_neg_index 给出从解向量中提取参数的方式：
    β = x[beta_index] - x[beta_neg_index]（后者为空表示无负部）。
    """
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    a: np.ndarray
    senses: List[Sense]
    rhs: np.ndarray
    binaries: List[int]
    names: List[str]
    row_names: List[str]
    kind: ProblemKind = "lp"
    metadata: Dict[str, Any] = Field(default_factory=dict)
    beta_index: List[int] = Field(default_factory=list)
    beta_neg_index: List[int] = Field(default_factory=list)

    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    @field_validator('c', 'lb', 'ub', 'rhs', mode='before')
    @classmethod
    def as_vector(cls, v):
        return _frozen(v, 1)

    @field_validator('a', mode='before')
    @classmethod
    def as_matrix(cls, v):
        return _frozen(v, 2)

    @model_validator(mode='after')
    def check_problem(self):
        n_vars = self.c.size
        if self.lb.size != n_vars or self.ub.size != n_vars or len(self.names) != n_vars:
            raise ValueError("变量维度不一致")
        if self.a.shape != (len(self.senses), n_vars) or self.rhs.size != len(self.senses):
            raise ValueError("约束矩阵维度不一致")
        if len(self.row_names) != len(self.senses):
            raise ValueError("约束名称个数不一致")
        if len(set(self.names)) != len(self.names) or len(set(self.row_names)) != len(self.row_names):
            raise ValueError("变量或约束名称重复")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)) or np.any(self.lb > self.ub):
            raise ValueError("变量上下界非法")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.rhs))):
            raise ValueError("目标或约束含有非有限值")
        for j in self.binaries:
            if not 0 <= j < n_vars or self.lb[j] != 0 or self.ub[j] != 1:
                raise ValueError(f"二元变量 {j} 的界必须为 [0,1]")
        if self.beta_neg_index and len(self.beta_neg_index) != len(self.beta_index):
            raise ValueError("beta 正负部下标长度不一致")
        return self

    @property
    def num_vars(self) -> int:
        return self.c.size

    @property
    def num_rows(self) -> int:
        return len(self.senses)

    def index_of(self, name: str) -> int:
        return self.names.index(name)

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ np.asarray(x, dtype=float))

    def extract_beta(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        beta = x[self.beta_index]
        if self.beta_neg_index:
            beta = beta - x[self.beta_neg_index]
        return beta

    def max_violation(self, x: np.ndarray, lb: Optional[np.ndarray] = None,
                      ub: Optional[np.ndarray] = None) -> float:
        """约束与变量界的最大违反量"""
        x = np.asarray(x, dtype=float)
        lb = self.lb if lb is None else lb
        ub = self.ub if ub is None else ub
        worst = float(max(np.max(lb - x, initial=0.0), np.max(x - ub, initial=0.0)))
        if self.num_rows:
            act = self.a @ x
            senses = np.asarray(self.senses)
            le = np.where(senses == "<=", act - self.rhs, 0.0)
            ge = np.where(senses == ">=", self.rhs - act, 0.0)
            eq = np.where(senses == "=", np.abs(act - self.rhs), 0.0)
            worst = max(worst, float(np.max(le)), float(np.max(ge)), float(np.max(eq)))
        return max(worst, 0.0)

    def is_integral(self, x: np.ndarray, tol: float) -> bool:
        if not self.binaries:
            return True
        v = np.asarray(x, dtype=float)[self.binaries]
        return bool(np.all(np.minimum(v, 1 - v) <= tol))

    def summary(self) -> Dict[str, int]:
        return {'variables': self.num_vars, 'binaries': len(self.binaries), 'constraints': self.num_rows}


class ProblemBuilder:
    """逐个添加变量与约束的构造器"""

    def __init__(self, kind: ProblemKind = "lp"):
        self.kind = kind
        self._names: List[str] = []
        self._lookup: Dict[str, int] = {}
        self._lb: List[float] = []
        self._ub: List[float] = []
        self._obj: List[float] = []
        self._binaries: List[int] = []
        self._rows: List[Dict[int, float]] = []
        self._senses: List[str] = []
        self._rhs: List[float] = []
        self._row_names: List[str] = []
        self._row_lookup: set = set()

    def add_variable(self, name: str, lb: float = 0.0, ub: float = math.inf,
                     obj: float = 0.0, binary: bool = False) -> int:
        if name in self._lookup:
            raise DuplicateNameError(f"变量名重复: {name}", name=name)
        if binary:
            lb, ub = 0.0, 1.0
        idx = len(self._names)
        self._names.append(name)
        self._lookup[name] = idx
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._obj.append(float(obj))
        if binary:
            self._binaries.append(idx)
        return idx

    def add_constraint(self, name: str, coeffs: Mapping[int, float], sense: Sense, rhs: float) -> int:
        if name in self._row_lookup:
            raise DuplicateNameError(f"约束名重复: {name}", name=name)
        if sense not in ("<=", "=", ">="):
            raise ConfigError(f"未知约束类型: {sense}")
        self._row_lookup.add(name)
        self._rows.append({int(j): float(v) for j, v in coeffs.items() if v != 0})
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self._row_names.append(name)
        return len(self._rows) - 1

    def build(self, metadata: Optional[Dict[str, Any]] = None, beta_index: Sequence[int] = (),
              beta_neg_index: Sequence[int] = ()) -> MilpProblem:
        n_vars = len(self._names)
        a = np.zeros((len(self._rows), n_vars))
        for i, row in enumerate(self._rows):
            for j, v in row.items():
                a[i, j] = v
        return MilpProblem(
            c=self._obj, lb=self._lb, ub=self._ub, a=a, senses=list(self._senses), rhs=self._rhs,
            binaries=list(self._binaries), names=list(self._names), row_names=list(self._row_names),
            kind=self.kind, metadata=dict(metadata or {}),
            beta_index=list(beta_index), beta_neg_index=list(beta_neg_index),
        )
