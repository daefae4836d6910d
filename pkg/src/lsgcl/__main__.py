"""Allow ``python -m lsgcl``."""

import sys

from .cli import main

sys.exit(main())
