#!/usr/bin/env python
"""
Deadlock checker command line.

Usage:
    python bdead.py cbc regression_tests/test_data/minset_v2.mch
    python bdead.py mc regression_tests/test_data/minset_v1.mch --max-states 100000
    python bdead.py bench regression_tests/test_data
"""

import sys

from core.cli import main

if __name__ == '__main__':
    sys.exit(main())
