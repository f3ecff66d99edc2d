"""Binary erasure channel.

Symbols are stored as ``int8`` arrays holding 0, 1 or :data:`ERASED` (-1).
Randomness comes from numpy's Philox counter-based generator keyed through
``SeedSequence``, so a given seed reproduces bit-for-bit on every platform.
Independent streams (one per Monte Carlo trial) are obtained with
:func:`make_rng` by appending the trial index to the spawn key.

Only the BEC is implemented.  The binary symmetric channel is mentioned in the
docs for context, but every analysis in this package is BEC-specific.
"""

from __future__ import annotations

import numpy as np

ERASED = -1
_TEXT = {0: "0", 1: "1", ERASED: "?"}
_FROM_TEXT = {"0": 0, "1": 1, "?": ERASED}


def make_rng(seed, *stream: int) -> np.random.Generator:
    """Philox generator for ``seed`` and an optional stream index path."""
    if isinstance(seed, np.random.Generator):
        return seed
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(base_seed: int, *stream: int) -> int:
    """64-bit seed for stream ``stream`` under ``base_seed`` (SeedSequence hash)."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(s) for s in stream))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def capacity(eps: float) -> float:
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps={eps} outside [0, 1]")
    return 1.0 - eps


def erasure_pattern(n: int, eps: float, rng) -> np.ndarray:
    """Boolean erasure mask of length ``n``.

    Position i is erased iff u_i < eps for one uniform draw u_i, so for a fixed
    generator state the erased sets are nested in eps.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps={eps} outside [0, 1]")
    return make_rng(rng).random(n) < eps


def transmit(word, eps: float, rng_seed) -> np.ndarray:
    """Send ``word`` through BEC(eps); returns an int8 symbol array."""
    bits = np.asarray(word)
    if bits.ndim != 1 or bits.size < 1:
        raise ValueError("word must be a non-empty 1-d bit sequence")
    if not np.isin(bits, (0, 1)).all():
        raise ValueError("word must contain only 0/1")
    out = bits.astype(np.int8)
    out[erasure_pattern(bits.size, eps, rng_seed)] = ERASED
    return out


def erase(word, mask) -> np.ndarray:
    out = np.asarray(word).astype(np.int8)
    out[np.asarray(mask, dtype=bool)] = ERASED
    return out


def to_text(symbols) -> str:
    return "".join(_TEXT[int(s)] for s in symbols)


def from_text(text: str) -> np.ndarray:
    try:
        return np.array([_FROM_TEXT[ch] for ch in text.strip()], dtype=np.int8)
    except KeyError as exc:
        raise ValueError(f"invalid symbol {exc.args[0]!r}") from None
