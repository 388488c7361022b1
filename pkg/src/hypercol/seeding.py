"""Deterministic seed derivation and worker-thread configuration.

Every random stage in the toolkit draws from its own generator, seeded by
hashing the experiment base seed together with stage/run/model tags.  Adding
or removing a stage therefore never shifts the random stream of any other
stage, and results are reproducible across platforms (the hash is SHA-256,
not Python's salted ``hash``).
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

THREADS_ENV = "HYPERCOL_THREADS"


def derive_seed(*parts) -> int:
    """Collapse a tuple of tags (ints, strings) into a stable 64-bit seed."""
    h = hashlib.sha256()
    for part in parts:
        token = f"{type(part).__name__}:{part}"
        h.update(token.encode("utf-8"))
        h.update(b"\x00")
    return int.from_bytes(h.digest()[:8], "little")


def rng_for(*parts) -> np.random.Generator:
    """A PCG64 generator dedicated to the stage named by ``parts``."""
    return np.random.Generator(np.random.PCG64(derive_seed(*parts)))


def thread_count() -> int:
    """Worker-thread cap from HYPERCOL_THREADS (0 or unset = auto)."""
    raw = os.environ.get(THREADS_ENV, "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = min(os.cpu_count() or 1, 8)
    return n
