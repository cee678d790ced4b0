"""Small shared helpers: seeded substreams and config hashing."""

from __future__ import annotations

import hashlib
import json

import numpy as np


def subrng(seed, *key) -> np.random.Generator:
    """Independent, reproducible random stream for (seed, *key).

    Distinct keys give statistically independent streams, so work can be
    split across indices (chunks, words, samples) in any order or in
    parallel without changing any result.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(obj) -> str:
    """Stable short hash of a JSON-serializable config mapping."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:16]
