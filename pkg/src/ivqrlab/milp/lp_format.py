# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
CPLEX-LP 格式读写

输出 Minimize / Subject To / Bounds / Binaries / End 五段，供外部MILP求解器使用。
Bounds 段按变量顺序列出全部变量，读回时据此恢复列顺序。
同一问题重复导出得到逐字节相同的文件。
"""


from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from ..errors import ConfigError, DataError
from .problem import MilpProblem, ProblemBuilder

logger = logging.getLogger(__name__)

_TERMS_PER_LINE = 8
_SENSES = ("<=", ">=", "=")
_BETA_PREFIXES = {
    "hd-ivqr": ("betap_", "betam_"),
    "censored": ("thetap_", "thetam_"),
}


def _num(value: float) -> str:
    """整数值写成整数，其余用 repr 保证读回精确"""
    value = float(value)
    if math.isinf(value):
        return "+inf" if value > 0 else "-inf"
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _terms(coeffs: Sequence[Tuple[float, str]]) -> List[str]:
    return [f"{'-' if v < 0 else '+'} {_num(abs(v))} {name}" for v, name in coeffs]


def _wrap(head: str, terms: List[str], tail: str = "") -> List[str]:
    lines = []
    for start in range(0, max(len(terms), 1), _TERMS_PER_LINE):
        chunk = " ".join(terms[start:start + _TERMS_PER_LINE])
        prefix = head if start == 0 else "   "
        lines.append(f"{prefix} {chunk}".rstrip() if chunk else prefix)
    if tail:
        lines[-1] = f"{lines[-1]} {tail}"
    return lines


def _bound_line(name: str, lo: float, hi: float) -> str:
    if math.isinf(lo) and math.isinf(hi):
        return f" {name} free"
    if math.isinf(hi):
        return f" {name} >= {_num(lo)}"
    return f" {_num(lo)} <= {name} <= {_num(hi)}"


def format_lp(problem: MilpProblem) -> str:
    """把问题转为 LP 文本"""
    names = problem.names
    lines = [f"\\ ivqrlab kind={problem.kind}", "Minimize"]
    obj = [(v, names[j]) for j, v in enumerate(problem.c) if v != 0]
    lines += _wrap(" obj:", _terms(obj))
    lines.append("Subject To")
    for i, row_name in enumerate(problem.row_names):
        row = [(v, names[j]) for j, v in enumerate(problem.a[i]) if v != 0]
        lines += _wrap(f" {row_name}:", _terms(row), f"{problem.senses[i]} {_num(problem.rhs[i])}")
    lines.append("Bounds")
    lines += [_bound_line(name, problem.lb[j], problem.ub[j]) for j, name in enumerate(names)]
    if problem.binaries:
        lines.append("Binaries")
        lines += [f" {names[j]}" for j in problem.binaries]
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_lp_file(problem: MilpProblem, path: Union[str, Path]) -> Path:
    """写出 LP 文件

    Args:
        problem: MILP问题
        path: 输出路径

    Returns:
        输出路径
    """
    path = Path(path)
    path.write_text(format_lp(problem), encoding="utf-8", newline="\n")
    logger.info(f"LP文件已写出: {path}（{problem.num_vars}个变量, {problem.num_rows}条约束）")
    return path


def _parse_terms(tokens: List[str], where: str) -> Dict[str, float]:
    if len(tokens) % 3:
        raise DataError(f"无法解析的线性表达式: {where}")
    out: Dict[str, float] = {}
    for k in range(0, len(tokens), 3):
        sign, coef, name = tokens[k:k + 3]
        if sign not in "+-":
            raise DataError(f"无法解析的系数符号 '{sign}': {where}")
        out[name] = out.get(name, 0.0) + (-1.0 if sign == "-" else 1.0) * float(coef)
    return out


def parse_lp(text: str) -> MilpProblem:
    """解析由 format_lp 写出的 LP 子集"""
    kind = "lp"
    sections: Dict[str, List[str]] = {"minimize": [], "subject to": [], "bounds": [], "binaries": []}
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("\\"):
            if "kind=" in line:
                kind = line.split("kind=", 1)[1].strip()
            continue
        key = line.lower()
        if key in sections:
            current = key
            continue
        if key == "end":
            break
        if line and current is not None:
            sections[current].append(line)

    obj_tokens = " ".join(sections["minimize"]).split()
    if obj_tokens and obj_tokens[0].endswith(":"):
        obj_tokens = obj_tokens[1:]
    objective = _parse_terms(obj_tokens, "obj")

    rows: List[Tuple[str, Dict[str, float], str, float]] = []
    tokens = " ".join(sections["subject to"]).split()
    k = 0
    while k < len(tokens):
        name = tokens[k]
        if not name.endswith(":"):
            raise DataError(f"约束缺少名称: {name}")
        end = k + 1
        while end < len(tokens) and tokens[end] not in _SENSES:
            end += 1
        if end + 1 >= len(tokens):
            raise DataError(f"约束 {name} 缺少右端项")
        rows.append((name[:-1], _parse_terms(tokens[k + 1:end], name), tokens[end], float(tokens[end + 1])))
        k = end + 2

    bounds: Dict[str, Tuple[float, float]] = {}
    for line in sections["bounds"]:
        parts = line.split()
        if len(parts) == 2 and parts[1].lower() == "free":
            bounds[parts[0]] = (-math.inf, math.inf)
        elif len(parts) == 3 and parts[1] == ">=":
            bounds[parts[0]] = (float(parts[2]), math.inf)
        elif len(parts) == 3 and parts[1] == "<=":
            bounds[parts[0]] = (0.0, float(parts[2]))
        elif len(parts) == 5 and parts[1] == parts[3] == "<=":
            bounds[parts[2]] = (float(parts[0]), float(parts[4]))
        else:
            raise DataError(f"无法解析的变量界: {line}")
    binaries = {line.split()[0] for line in sections["binaries"]}

    order = list(bounds)
    for name in list(objective) + [v for _, coeffs, _, _ in rows for v in coeffs] + sorted(binaries):
        if name not in bounds:
            bounds[name] = (0.0, math.inf)
            order.append(name)

    if kind not in ("ivqr", "hd-ivqr", "censored", "censored-ivqr", "lp"):
        raise ConfigError(f"未知问题类型: {kind}")
    builder = ProblemBuilder(kind)
    index = {}
    for name in order:
        lo, hi = bounds[name]
        index[name] = builder.add_variable(name, lo, hi, obj=objective.get(name, 0.0), binary=name in binaries)
    for name, coeffs, sense, rhs in rows:
        builder.add_constraint(name, {index[v]: c for v, c in coeffs.items()}, sense, rhs)

    pos_prefix, neg_prefix = _BETA_PREFIXES.get(kind, ("beta_", None))
    beta = [index[n] for n in order if n.startswith(pos_prefix)]
    beta_neg = [index[n] for n in order if neg_prefix and n.startswith(neg_prefix)]
    return builder.build(beta_index=beta, beta_neg_index=beta_neg)


def read_lp_file(path: Union[str, Path]) -> MilpProblem:
    """读取 LP 文件"""
    path = Path(path)
    if not path.exists():
        raise DataError(f"文件不存在: {path}")
    return parse_lp(path.read_text(encoding="utf-8"))


def problems_equal(a: MilpProblem, b: MilpProblem) -> bool:
    """按名称比较两个问题的数值内容"""
    if a.names != b.names or a.row_names != b.row_names or a.senses != b.senses:
        return False
    return bool(np.array_equal(a.c, b.c) and np.array_equal(a.lb, b.lb) and np.array_equal(a.ub, b.ub)
                and np.array_equal(a.a, b.a) and np.array_equal(a.rhs, b.rhs)
                and sorted(a.binaries) == sorted(b.binaries))
