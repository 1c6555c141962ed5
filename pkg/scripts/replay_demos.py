#!/usr/bin/env python3
"""Print the worked-example replays (computed vs. reference values)."""

import sys

from graded_transformer.cli import main

if __name__ == "__main__":
    sys.exit(main(["demo"]))
