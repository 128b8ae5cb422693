"""
brickyard: a semantic building data platform.

Pipeline overview:
  1. graph       Brick ontology subset + named-graph triple store
  2. directory   organisations / sites / buildings, RBAC, model lifecycle
  3. briql       the entity-level query language (repair → validate → plan/evaluate)
  4. timeseries  scalar observation streams
  5. ingestion   DCH JSON and NEM12 payloads, point mapping, data health
  6. apps        packaged analytics bound by discovery queries, run in a sandbox
  7. api         HTTP service and CLI over the Platform object

Public API surface:
  - Platform (platform.py): every module wired under one data directory
  - PlatformConfig, load_config (config.py)
  - PlatformError and subclasses (exceptions.py)
"""

from .config import PlatformConfig, load_config
from .exceptions import PlatformError
from .platform import Platform

__version__ = "0.1.0"

__all__ = ["Platform", "PlatformConfig", "PlatformError", "load_config"]
