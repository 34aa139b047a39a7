"""
Runtime settings
Loads a .env file and maps XTPROC_* environment variables onto run configuration fields
"""

import json
import os
from typing import Any, Collection, Dict, Iterable

from dotenv import load_dotenv

load_dotenv()

ENV_PREFIX = 'XTPROC_'


class Settings:
    """Environment-backed defaults, read at call time so CI overrides apply"""

    @property
    def log_level(self) -> str:
        return os.getenv(f'{ENV_PREFIX}LOG_LEVEL', 'INFO').upper()

    def env_overrides(self, field_names: Iterable[str], text_fields: Collection[str] = ()) -> Dict[str, Any]:
        """XTPROC_<FIELD> values for the given config fields

        Values are JSON-decoded when possible; text_fields always stay strings.
        """
        overrides = {}
        for name in field_names:
            raw = os.getenv(f'{ENV_PREFIX}{name.upper()}')
            if raw is None:
                continue
            if name in text_fields:
                overrides[name] = raw
                continue
            try:
                overrides[name] = json.loads(raw)
            except json.JSONDecodeError:
                overrides[name] = raw
        return overrides


# Global settings instance
settings = Settings()
