#!/usr/bin/env python3
"""
Start the brickyard service.

Usage:
    python run_server.py
    python run_server.py --config brickyard.json
    BRICKYARD_PORT=9000 python run_server.py
"""

import argparse
import sys

from brickyard.api.cli import main


def run():
    parser = argparse.ArgumentParser(description="Run the brickyard HTTP service")
    parser.add_argument("--config", "-c", help="JSON config file (default: $BRICKYARD_CONFIG)")
    args = parser.parse_args()
    argv = ["serve"] + (["--config", args.config] if args.config else [])
    sys.exit(main(argv))


if __name__ == "__main__":
    run()
