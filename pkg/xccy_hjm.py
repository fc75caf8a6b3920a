"""Launcher: python xccy_hjm.py simulate|price|verify <scenario.json> [options]."""

import sys

from XCCY_HJM_Helper.cli import main

if __name__ == "__main__":
    sys.exit(main())
