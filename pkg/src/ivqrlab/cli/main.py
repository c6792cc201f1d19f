# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""
ivqrlab 命令行入口

退出码：0 成功，2 配置错误，3 数据错误，4 数值失败。
出错时在 stderr 输出一行错误JSON。

用法示例：
    ivqrlab estimate --demo --tau 0.25,0.5,0.75 --out report.json
    ivqrlab jacobian --demo --beta 1,1,1,1 --out gamma.json
    ivqrlab milp-export --demo --model ivqr --out ivqr.lp
    ivqrlab simulate --experiment rmse --replications 50 --out rmse.json
"""


from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Any, List, Optional

import numpy as np
from pydantic import ValidationError

from .. import SCHEMA_VERSION, __version__
from ..errors import ConfigError, IvqrlabError
from ..utils.perf import format_elapsed_time
from .commands import COMMANDS
from .config import RunConfig

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """用法错误转为 ConfigError，由 main 统一输出错误JSON"""

    def error(self, message: str):
        raise ConfigError(f"命令行参数错误: {message}")


def _add_common(sub: argparse.ArgumentParser) -> None:
    data = sub.add_argument_group("数据")
    data.add_argument("--input", help="UTF-8 CSV 文件（首行为表头）")
    data.add_argument("--demo", action="store_true", help="使用内置200行演示数据及其默认列")
    data.add_argument("--y", help="结果变量列")
    data.add_argument("--x", help="回归变量列，逗号分隔")
    data.add_argument("--z", help="工具变量列，逗号分隔")
    data.add_argument("--censor", help="删失点列（censored 模型）")
    data.add_argument("--standardize-z", action="store_true", help="标准化工具变量（自动识别截距列）")

    est = sub.add_argument_group("估计")
    est.add_argument("--tau", help="分位数，逗号分隔，如 0.25,0.5,0.75")
    est.add_argument("--alpha", help="显著性水平，逗号分隔，默认 0.05,0.10")
    est.add_argument("--model", default="ivqr", choices=["ivqr", "hd-ivqr", "censored", "censored-ivqr"])
    est.add_argument("--lambda", dest="lam", type=float, help="惩罚参数 λ（hd-ivqr / censored）")
    est.add_argument("--subsample", type=int, help="MILP 初值子样本大小")
    est.add_argument("--seed", type=int, default=0, help="主种子")
    est.add_argument("--time-limit-ms", type=int, help="MILP 时间上限（毫秒）")
    est.add_argument("--node-limit", type=int, help="MILP 节点上限")
    est.add_argument("--no-early-stop", action="store_true", help="关闭 Q* 提前终止")
    est.add_argument("--scheme", choices=["gaussian", "bernoulli", "multinomial"], help="自助乘子分布")
    est.add_argument("--draws", type=int, help="自助抽样次数")
    est.add_argument("--permissive-jacobian", action="store_true", help="不可估计的Jacobian元素置零")
    est.add_argument("--beta", help="jacobian: 展开点 β，逗号分隔")
    est.add_argument("--density", help="jacobian: 对该列做自助分位数密度估计")

    sim = sub.add_argument_group("模拟")
    sim.add_argument("--experiment", help="coverage | rmse | early-stop")
    sim.add_argument("--replications", type=int, help="重复次数")
    sim.add_argument("--n", type=int, help="样本量")
    sim.add_argument("--q", type=int, help="JTPA型设计的协变量个数")
    sim.add_argument("--p", type=int, help="提前终止实验的回归变量个数")
    sim.add_argument("--instruments", default="x", choices=["x", "log-x", "x-log-x"],
                     help="提前终止实验的工具变量类型")

    run = sub.add_argument_group("运行")
    run.add_argument("--jobs", type=int, help="并行worker数量")
    run.add_argument("--omit-timings", action="store_true", help="报告中不写耗时，便于逐字节比较")
    run.add_argument("--out", required=True, help="输出路径，- 表示标准输出")
    run.add_argument("-v", "--verbose", action="store_true", help="输出调试日志")
    run.add_argument("-q", "--quiet", action="store_true", help="只输出警告与错误")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ivqrlab", description="IVQR 与非光滑GMM的估计与推断")
    parser.add_argument("--version", action="version", version=f"ivqrlab {__version__}")
    subparsers = parser.add_subparsers(dest="command", parser_class=_Parser)
    subparsers.required = True
    for name, help_text in (
        ("estimate", "MILP初值 → k步修正 → Wald/矩形推断"),
        ("jacobian", "免调参Jacobian或自助分位数密度估计"),
        ("milp-export", "导出MILP为LP文件"),
        ("simulate", "运行模拟实验"),
    ):
        _add_common(subparsers.add_parser(name, help=help_text))
    return parser


def _setup_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="[%(levelname)s] %(message)s", stream=sys.stderr, force=True)


def _sanitize(value: Any) -> Any:
    """numpy 标量与数组转为原生类型，非有限浮点数转为字符串"""
    if isinstance(value, dict):
        return {str(k): _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    if isinstance(value, np.ndarray):
        return _sanitize(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def to_json(payload: Any) -> str:
    return json.dumps(_sanitize(payload), ensure_ascii=False, indent=2, allow_nan=False) + "\n"


def _write(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")
    logger.info(f"报告已写出: {path}")


def _emit_error(error: IvqrlabError) -> None:
    payload = {'error': error.to_dict(), 'schema_version': SCHEMA_VERSION}
    sys.stderr.write(json.dumps(payload, ensure_ascii=False) + "\n")


def main(argv: Optional[List[str]] = None) -> int:
    """命令行主函数

    Args:
        argv: 参数列表，None 时取 sys.argv[1:]

    Returns:
        退出码
    """
    try:
        args = build_parser().parse_args(argv)
        _setup_logging(args.verbose, args.quiet)
        cfg = RunConfig.from_args(args)
        start = time.perf_counter()
        payload = COMMANDS[cfg.command](cfg)
        logger.info(f"{cfg.command} 完成，耗时: {format_elapsed_time(time.perf_counter() - start)}")
        if cfg.command == "milp-export":
            # --out 指向 LP 文件本身，摘要写到标准输出
            lp_text = payload.pop('lp_text')
            if cfg.out == "-":
                sys.stdout.write(lp_text)
            else:
                sys.stdout.write(to_json(payload))
        else:
            _write(to_json(payload), cfg.out)
    except IvqrlabError as e:
        logger.debug("错误详情", exc_info=True)
        _emit_error(e)
        return e.exit_code
    except ValidationError as e:
        _emit_error(ConfigError(f"参数校验失败: {e.errors()[0]['msg'] if e.errors() else e}"))
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
