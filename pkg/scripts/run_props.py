#!/usr/bin/env python3
"""Run the full property suite and print the report.

Usage: python scripts/run_props.py [--filter PATTERN] [--seed N]
"""

import sys

from graded_transformer.cli import main

if __name__ == "__main__":
    sys.exit(main(["props", *sys.argv[1:]]))
