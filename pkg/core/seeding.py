"""
GRANULA - Seeding

All randomness goes through numpy Generators built here. Sweep cells get
seeds derived from the master seed and the cell coordinates, so changing
one coordinate never perturbs another cell's stream.
"""

import hashlib
import json
import os
from typing import Any, Optional

import numpy as np
from dotenv import load_dotenv

from core.errors import UsageError

SEED_ENV_VAR = "GRANULA_SEED"
DEFAULT_SEED = 0


def get_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def derive_seed(master_seed: int, *keys: Any) -> int:
    """Stable 63-bit seed from a master seed and a tuple of cell keys."""
    payload = repr((int(master_seed),) + tuple(keys)).encode("utf-8")
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "big") & 0x7FFF_FFFF_FFFF_FFFF


def fingerprint(data: Any) -> str:
    """Short stable hex digest of a JSON-serialisable mapping."""
    payload = json.dumps(data, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.blake2b(payload, digest_size=8).hexdigest()


def default_seed(explicit: Optional[int] = None) -> int:
    """--seed wins; otherwise GRANULA_SEED from the environment or a .env file."""
    if explicit is not None:
        return int(explicit)
    load_dotenv()
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or not raw.strip():
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}")
