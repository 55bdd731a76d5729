"""Deterministic random-stream derivation.

Every stochastic task in an experiment (simulation, optimizer restarts,
parameter draws) pulls an independent generator derived from the single
experiment seed and a readable stream name.  Identical seeds and names
always yield bit-identical streams, regardless of the order in which the
streams are consumed.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream", "spawn"]


def _name_words(name: str) -> list[int]:
    # Stable 128-bit digest of the name, folded into four 32-bit words.
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def substream(seed: int, *names: str) -> np.random.Generator:
    """Return a generator for the stream identified by ``seed`` and ``names``.

    Args:
        seed: experiment-level integer seed.
        names: path of stream labels, e.g. ``("dgp",)`` or
            ``("fit", "cls@0.10:lower", "restart3")``.
    """
    entropy: list[int] = [int(seed)]
    for name in names:
        entropy.extend(_name_words(name))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def spawn(seed: int, *names: str) -> np.random.SeedSequence:
    """Like :func:`substream` but returns the seed sequence itself."""
    entropy: list[int] = [int(seed)]
    for name in names:
        entropy.extend(_name_words(name))
    return np.random.SeedSequence(entropy)
