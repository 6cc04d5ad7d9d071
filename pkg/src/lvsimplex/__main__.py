"""Allows ``python -m lvsimplex``."""

import sys

from .cli import main

sys.exit(main())
