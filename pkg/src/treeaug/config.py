"""Size bounds for the exact subroutines.

The values live in one mutable object so the CLI can override them. Use
:func:`limits_override` in tests to change them temporarily.
"""

from __future__ import annotations

import contextlib
import dataclasses
from collections.abc import Iterator


@dataclasses.dataclass
class Limits:
    exact_max_n: int = 24  # brute force refuses larger trees
    oracle_max_n: int = 14  # pipelines only compute OPT up to this size
    cg_max_n: int = 22  # CG separation enumerates 2^(n-1) sets
    lambda_max_width: int = 3  # largest principal-subtree leaf count for Λ generation
    few_leaf_max: int = 6


LIMITS = Limits()


@contextlib.contextmanager
def limits_override(**changes: int) -> Iterator[Limits]:
    saved = dataclasses.asdict(LIMITS)
    for key, value in changes.items():
        if not hasattr(LIMITS, key):
            raise AttributeError(key)
        setattr(LIMITS, key, value)
    try:
        yield LIMITS
    finally:
        for key, value in saved.items():
            setattr(LIMITS, key, value)
