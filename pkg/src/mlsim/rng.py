"""Seed-derived random streams.

Every source of randomness in a run is a stream keyed by
``(master_seed, domain_tag, entity_id)``.  The key is hashed with
BLAKE2b (keyed by the master seed) into the 128-bit seed space of
PCG64, so distinct keys land on distinct generator states without any
coordination between sub-models, and a stream's output is a pure
function of its key.  Streams are confined to one executing sub-model
at a time; handing one across execution units is only done at interval
boundaries.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import UnknownDomainTag

DOMAIN_TAGS = frozenset(
    {"agent-move", "coordinator-assign", "vehicle-move", "fleet-assign", "init"}
)


def stream_seed(master_seed: int, domain_tag: str, entity_id: int) -> int:
    """Keyed hash of a stream key into a 128-bit PCG64 seed.

    Pure function of its arguments; used both to build streams and by
    tests that check distinct keys never alias.
    """
    h = hashlib.blake2b(
        key=int(master_seed).to_bytes(8, "little"), digest_size=16
    )
    h.update(domain_tag.encode("utf-8"))
    h.update(b"\x00")
    h.update(int(entity_id).to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


@dataclass
class RngStream:
    """A named, reproducible random stream.

    Thin wrapper over ``numpy.random.Generator`` (PCG64) that remembers
    its key.  All draws below are the only ones the engine uses, so the
    consumption pattern of every stream is easy to audit.
    """

    stream_key: tuple[int, str, int]
    _gen: np.random.Generator = field(repr=False)

    def random(self, size: int | None = None):
        """Uniform float64 in [0, 1); scalar or vector."""
        return self._gen.random(size)

    def integers(self, high: int, size: int | None = None):
        """Uniform integers in [0, high)."""
        return self._gen.integers(0, high, size=size)


def derive_stream(master_seed: int, domain_tag: str, entity_id: int) -> RngStream:
    """Build the stream for ``(master_seed, domain_tag, entity_id)``.

    Deterministic: identical inputs yield identical streams.  Raises
    UnknownDomainTag for tags outside the documented set.
    """
    if domain_tag not in DOMAIN_TAGS:
        raise UnknownDomainTag(
            f"unknown domain tag {domain_tag!r}; expected one of "
            f"{sorted(DOMAIN_TAGS)}"
        )
    seed = stream_seed(master_seed, domain_tag, entity_id)
    gen = np.random.Generator(np.random.PCG64(seed))
    return RngStream(stream_key=(master_seed, domain_tag, entity_id), _gen=gen)


def sample_without_replacement(pool: np.ndarray, k: int, rng: RngStream) -> np.ndarray:
    """Uniform k-subset of ``pool`` (ids sorted ascending), in id order.

    Draws one uniform key per pool element and keeps the k smallest, so
    the result depends only on the stream state and the pool contents,
    never on partition internals of the platform.
    """
    n = len(pool)
    if k < 0 or k > n:
        raise ValueError(f"cannot sample {k} from pool of {n}")
    keys = rng.random(n)
    if k == 0:
        return pool[:0]
    if k == n:
        return pool.copy()
    picked = np.argpartition(keys, k)[:k]
    return np.sort(pool[picked])
