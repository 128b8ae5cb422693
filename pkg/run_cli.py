#!/usr/bin/env python3
"""
brickyard command-line client.

Usage:
    python run_cli.py --token T org list
    python run_cli.py --token T query invoke --file fixtures/example.briql --model <site id>
    python run_cli.py --token T app run --install <install id> --as-of 1735689600
"""

import sys

from brickyard.api.cli import main

if __name__ == "__main__":
    sys.exit(main())
