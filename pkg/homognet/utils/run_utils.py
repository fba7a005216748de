import os
from datetime import UTC, datetime
from importlib import metadata

import base62
import numpy as np


def utc_now():
    """Return the current time in UTC format (Since datetime.utcnow is deprecated)"""
    return datetime.now(UTC)


def new_run_id() -> str:
    return base62.encodebytes(os.urandom(16))


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the cell identified by ``keys`` under ``seed``.

    Streams for distinct key tuples never overlap, so cells may run in any order
    or in parallel and still reproduce bit-for-bit.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=keys))


def package_versions() -> dict[str, str]:
    versions = {}
    for name in ("homognet", "numpy", "scipy", "pydantic", "pybase62"):
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def derive_seed(seed: int, *keys: int) -> int:
    """Integer seed for the cell identified by ``keys`` under ``seed``"""
    return int(np.random.SeedSequence(seed, spawn_key=keys).generate_state(1)[0])
