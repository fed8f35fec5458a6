#!/usr/bin/env python3
"""Wrapper: floatbase run-noise."""
import sys
from floatbase.cli import main

if __name__ == "__main__":
    sys.exit(main(["run-noise", *sys.argv[1:]]))
