"""
External surface: the HTTP service and its command-line client.

Public API surface:
  - create_app(platform) -> FastAPI, serve(config)
  - cli.main(argv, client=None) -> exit code
"""

from .app import create_app, render, serve
from .cli import build_parser, exit_code_for, main

__all__ = ["build_parser", "create_app", "exit_code_for", "main", "render", "serve"]
