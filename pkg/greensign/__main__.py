"""Allow ``python -m greensign``."""

import sys

from .cli import main

sys.exit(main())
