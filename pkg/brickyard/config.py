"""
Platform configuration.

Resolution order (later wins): model defaults → JSON config file → environment.
The config file is chosen by explicit argument, else BRICKYARD_CONFIG. A .env
file in the working directory is loaded first so deployments can keep tokens
out of the config file.
"""

import json
import os
from pathlib import Path
from typing import Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from .exceptions import InvalidArgumentError
from .logger import get_module_logger

logger = get_module_logger("config")


class GrantSpec(BaseModel):
    """A role grant applied at start-up (e.g. the first platform admin)."""
    scope: str = "platform"
    role: str = "admin"


class PlatformConfig(BaseModel):
    """Everything the service and the library need to start."""
    data_dir: Path = Path("brickyard_data")
    host: str = "127.0.0.1"
    port: int = Field(default=8340, ge=1, le=65535)
    tokens: dict[str, str] = Field(default_factory=dict)            # bearer token → principal id
    bootstrap_grants: dict[str, list[GrantSpec]] = Field(default_factory=dict)
    max_bindings: int = Field(default=1_000_000, gt=0)              # per-invocation QoS ceiling
    max_query_seconds: float = Field(default=30.0, gt=0)
    app_run_seconds: float = Field(default=300.0, gt=0)
    log_level: str = "INFO"
    log_file: Optional[Path] = None


# Environment variable → (config field, parser)
ENV_OVERRIDES = {
    "BRICKYARD_DATA_DIR": ("data_dir", str),
    "BRICKYARD_HOST": ("host", str),
    "BRICKYARD_PORT": ("port", int),
    "BRICKYARD_TOKENS": ("tokens", json.loads),
    "BRICKYARD_MAX_BINDINGS": ("max_bindings", int),
    "BRICKYARD_MAX_QUERY_SECONDS": ("max_query_seconds", float),
    "BRICKYARD_APP_RUN_SECONDS": ("app_run_seconds", float),
    "BRICKYARD_LOG_LEVEL": ("log_level", str),
    "BRICKYARD_LOG_FILE": ("log_file", str),
}


def load_config(path: Optional[Union[str, Path]] = None, env: Optional[dict] = None) -> PlatformConfig:
    """
    Build a PlatformConfig from file and environment.

    Args:
        path: JSON config file; defaults to $BRICKYARD_CONFIG when unset
        env: Environment mapping (defaults to os.environ, after .env loading)

    Returns:
        Validated PlatformConfig
    """
    if env is None:
        load_dotenv()
        env = dict(os.environ)

    values: dict = {}
    path = path or env.get("BRICKYARD_CONFIG")
    if path:
        config_file = Path(path)
        try:
            values.update(json.loads(config_file.read_text()))
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidArgumentError(
                f"Cannot read config file {config_file}: {e}",
                details={"path": str(config_file)}
            )
        logger.info(f"Loaded config file {config_file}")

    for var, (field, parse) in ENV_OVERRIDES.items():
        if var in env and env[var] != "":
            try:
                values[field] = parse(env[var])
            except (ValueError, json.JSONDecodeError) as e:
                raise InvalidArgumentError(f"Bad value for {var}: {e}", details={"variable": var})

    try:
        return PlatformConfig(**values)
    except ValidationError as e:
        raise InvalidArgumentError(f"Invalid configuration: {e}", details={"errors": e.errors(include_url=False)})
