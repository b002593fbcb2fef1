"""Identifier generation.

Production draws random ids; test mode seeds the generator so that a scripted
scenario produces identical ids (and therefore an identical event log) on
every run.
"""

from __future__ import annotations

import random
import uuid


class IdSource:
    """Generates prefixed ids; deterministic when constructed with a seed."""

    def __init__(self, seed: int | None = None):
        self._rng = random.Random(seed) if seed is not None else None

    def new(self, prefix: str) -> str:
        if self._rng is not None:
            body = "%08x" % self._rng.getrandbits(32)
        else:
            body = uuid.uuid4().hex[:12]
        return f"{prefix}-{body}"
