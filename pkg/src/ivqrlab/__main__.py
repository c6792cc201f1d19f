# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""python -m ivqrlab"""

import sys

from .cli.main import main

sys.exit(main())
