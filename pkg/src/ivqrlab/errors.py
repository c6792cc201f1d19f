# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
异常体系

三大类错误对应命令行退出码：配置错误(2)、数据错误(3)、数值错误(4)。
库函数只抛异常，退出码映射只在 cli.main 中完成。
"""


from __future__ import annotations

from typing import Any, Optional


class IvqrlabError(Exception):
    """所有业务异常的基类"""

    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict[str, Any]:
        """转换为错误JSON结构"""
        return {
            "type": self.__class__.__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            "details": {k: _jsonable(v) for k, v in self.details.items()},
        }


def _jsonable(value: Any) -> Any:
    if isinstance(value, (str, int, bool)) or value is None:
        return value
    if isinstance(value, float):
        return value if value == value and abs(value) != float("inf") else str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    try:
        return float(value)
    except (TypeError, ValueError):
        return str(value)


class ConfigError(IvqrlabError):
    """配置或参数错误"""
    exit_code = 2


class DataError(IvqrlabError):
    """输入数据错误"""
    exit_code = 3


class NumericalError(IvqrlabError):
    """数值计算失败"""
    exit_code = 4


# ==================== 数据 ====================

class MissingColumnError(DataError):
    """CSV缺少指定列"""
    pass


class CellParseError(DataError):
    """单元格无法解析为有限实数"""
    pass


class IdentificationError(DataError):
    """工具变量个数少于回归变量个数"""
    pass


class DegenerateSampleError(DataError):
    """样本退化（如常数样本）"""
    pass


# ==================== 配置 ====================

class SubsampleError(ConfigError):
    """子样本大小非法"""
    pass


class BigMError(ConfigError):
    """big-M 无法确定或不足以覆盖参数盒"""
    pass


class DuplicateNameError(ConfigError):
    """MILP变量或约束重名"""
    pass


class DomainError(ConfigError):
    """参数超出公式定义域"""
    pass


# ==================== 数值 ====================

class SingularityError(NumericalError):
    """工具变量块秩亏"""
    pass


class SingularJacobianError(NumericalError):
    """Q'Q 或 Γ'Γ 近奇异"""

    def __init__(self, message: str, smallest_eigenvalue: float,
                 iteration: Optional[int] = None, **details: Any):
        super().__init__(message, smallest_eigenvalue=smallest_eigenvalue,
                         iteration=iteration, **details)
        self.smallest_eigenvalue = smallest_eigenvalue
        self.iteration = iteration


class WindowError(NumericalError):
    """求根窗口内没有候选点"""
    pass


class DegenerateEntryError(NumericalError):
    """X的第k列全为零，该元素不可估计"""
    pass


class ZeroDenominatorError(NumericalError):
    """所有自助抽样的 δ 均为零"""
    pass


class JacobianMatrixError(NumericalError):
    """Jacobian 存在不可估计的元素"""
    pass


class BandwidthError(NumericalError):
    """残差无离散度，无法确定带宽"""
    pass


class LpCyclingError(NumericalError):
    """单纯形迭代超过上限"""
    pass


class LpCertificationError(NumericalError):
    """LP最优解未通过对偶残差验证"""
    pass


class SingularVarianceError(NumericalError):
    """方差矩阵奇异，Wald检验不可用"""
    pass


class InvalidVarianceError(NumericalError):
    """方差矩阵无效（负对角元或非半正定）"""
    pass
