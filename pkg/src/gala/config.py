"""Environment configuration and seed substreams."""

import os
import zlib

import numpy as np
from dotenv import load_dotenv

from .exceptions import ConfigError


class Config:
    """Configuration loaded from environment variables."""

    def __init__(self):
        load_dotenv()
        self.threads = self._get_int("GALA_THREADS", 1)
        self.log_level = os.getenv("GALA_LOG_LEVEL", "INFO").upper()
        self.output_dir = os.getenv("GALA_OUTPUT_DIR", "output")

        if self.threads < 1:
            raise ConfigError("Environment variable 'GALA_THREADS' must be >= 1")

    @staticmethod
    def _get_int(key: str, default: int) -> int:
        """Get an integer environment variable or raise error."""
        value = os.getenv(key)
        if value is None or not value.strip():
            return default
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"Environment variable '{key}' must be an integer, got {value!r}")


def derive_seed(master: int, stream: str, index: int = 0) -> int:
    """
    Derive a reproducible seed for a named substream of the master seed.

    Args:
        master: Master seed of the run
        stream: Substream name (init, split, clustering, sbm, ...)
        index: Repetition index within the substream

    Returns:
        Non-negative 32-bit seed
    """
    sequence = np.random.SeedSequence([master, zlib.crc32(stream.encode("utf-8")), index])
    return int(sequence.generate_state(1)[0])
