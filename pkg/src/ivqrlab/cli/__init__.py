# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""命令行：estimate / jacobian / milp-export / simulate"""

from .config import RunConfig
from .main import build_parser, main

__all__ = ["RunConfig", "build_parser", "main"]
