#!/usr/bin/env python
"""
Command-line script for running constant-stepsize SA and Q-learning experiments.
"""

import sys
from src.main import main

if __name__ == "__main__":
    sys.exit(main())
