#!/usr/bin/env python3
"""Wrapper: floatbase run-task."""
import sys
from floatbase.cli import main

if __name__ == "__main__":
    sys.exit(main(["run-task", *sys.argv[1:]]))
