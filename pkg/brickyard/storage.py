"""
File-based JSON store for platform state.

Benefits:
- Auditable: every registry, stored query and installation is a readable JSON file
- Manual override: an operator can inspect or repair state with a text editor
- No database dependency at desk scale

Files are named by a filesystem-safe rendering of the key.
"""

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Optional

from .logger import get_module_logger

logger = get_module_logger("storage")


def safe_key(key: str) -> str:
    """
    Filesystem-safe file stem for an arbitrary key.

    Keeps alnum, dash, underscore and dot. When anything had to be replaced a
    short digest of the original key is appended so distinct keys never collide
    (stream ids such as "inst-1/daily_savings" contain slashes).
    """
    safe_name = "".join(c if c.isalnum() or c in "-_." else "_" for c in key)
    if safe_name != key:
        digest = hashlib.md5(key.encode("utf-8")).hexdigest()[:8]
        safe_name = f"{safe_name}-{digest}"
    return safe_name


class JsonStore:
    """One JSON document per key inside a directory."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        logger.debug(f"JSON store at: {self.root}")

    def _file(self, key: str) -> Path:
        return self.root / f"{safe_key(key)}.json"

    def get(self, key: str) -> Optional[Any]:
        """Load the document stored under key, or None."""
        path = self._file(key)
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            logger.warning(f"Failed to load {path}: {e}")
            return None

    def put(self, key: str, document: Any) -> Path:
        """Write atomically (temp file + rename) so a crash never leaves half a file."""
        path = self._file(key)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, path)
        logger.debug(f"Stored {key} -> {path}")
        return path

    def delete(self, key: str) -> bool:
        path = self._file(key)
        if path.exists():
            path.unlink()
            return True
        return False
