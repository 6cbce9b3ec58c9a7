#!/usr/bin/env python3
"""
Entry point for running the experiment CLI as a module.

Usage:
    python -m robust_linear_bandits run study.yaml
    python -m robust_linear_bandits check study.yaml --seeds 0:20
    python -m robust_linear_bandits lowerbound --d 5 --budget 8 --K 5000
"""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
