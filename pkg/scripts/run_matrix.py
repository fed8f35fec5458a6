#!/usr/bin/env python3
"""Wrapper: floatbase run-matrix."""
import sys
from floatbase.cli import main

if __name__ == "__main__":
    sys.exit(main(["run-matrix", *sys.argv[1:]]))
