"""Polar codes on the binary erasure channel.

Indices are 0-based throughout.  Synthetic channel ``i`` of a depth-``n`` code
is reached by reading the bits of ``i`` from most to least significant: a 0
bit applies the "minus" map ``z -> z(2 - z)``, a 1 bit the "plus" map
``z -> z**2``, with the first polarization step on the most significant bit.
This is also the successive-cancellation decoding order, and it matches the
generator ``G_n = F^{(x)n}``, ``F = [[1, 0], [1, 1]]`` with no bit reversal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import ERASED, erasure_pattern, make_rng

MAX_DEPTH = 26


class PolarError(ValueError):
    pass


def polar_step(z: float) -> tuple[float, float]:
    """One polarization step: (minus, plus) = (z(2 - z), z**2)."""
    if not 0.0 <= z <= 1.0:
        raise PolarError(f"z={z} outside [0, 1]")
    return z * (2.0 - z), z * z


def synthetic_channels(depth_n: int, eps: float) -> np.ndarray:
    """Erasure probabilities of the 2**depth_n synthetic channels, decoding order."""
    if not 0 <= depth_n <= MAX_DEPTH:
        raise PolarError(f"depth {depth_n} outside [0, {MAX_DEPTH}]")
    if not 0.0 <= eps <= 1.0:
        raise PolarError(f"eps={eps} outside [0, 1]")
    z = np.array([float(eps)])
    for _ in range(depth_n):
        nxt = np.empty(2 * z.size)
        nxt[0::2] = z * (2.0 - z)
        nxt[1::2] = z * z
        z = nxt
    return z


@dataclass(frozen=True)
class PolarCodeSpec:
    depth_n: int
    design_epsilon: float
    z_values: np.ndarray
    info_set: np.ndarray      # sorted 0-based indices
    frozen_set: np.ndarray

    @property
    def N(self) -> int:
        return 1 << self.depth_n

    @property
    def k(self) -> int:
        return int(self.info_set.size)

    @property
    def rate(self) -> float:
        return self.k / self.N

    @property
    def frozen_mask(self) -> np.ndarray:
        mask = np.ones(self.N, dtype=bool)
        mask[self.info_set] = False
        return mask


def construct(depth_n: int, eps: float, k: int) -> PolarCodeSpec:
    """Pick the ``k`` channels with smallest z (ties: lower index) as information set."""
    z = synthetic_channels(depth_n, eps)
    if not 0 <= k <= z.size:
        raise PolarError(f"k={k} outside [0, {z.size}]")
    order = np.argsort(z, kind="stable")
    info = np.sort(order[:k])
    frozen = np.sort(order[k:])
    return PolarCodeSpec(depth_n, float(eps), z, info, frozen)


def encode(u, spec: PolarCodeSpec | None = None) -> np.ndarray:
    """x = u G_n over GF(2) via the butterfly network; ``u`` may be (N,) or (T, N)."""
    x = np.array(u, dtype=np.uint8)
    N = x.shape[-1]
    if N & (N - 1):
        raise PolarError(f"length {N} is not a power of two")
    if spec is not None:
        if N != spec.N:
            raise PolarError(f"length {N} != N={spec.N}")
        if x[..., spec.frozen_mask].any():
            raise PolarError("frozen positions of u must be 0")
    lead = x.shape[:-1]
    h = N // 2
    while h >= 1:
        v = x.reshape(*lead, -1, 2, h)
        v[..., 0, :] ^= v[..., 1, :]
        h //= 2
    return x


def _sc(val, known, frozen, truth, out_val, out_known, lo):
    """Recursive SC on the BEC.  Returns the re-encoded partial sums (val, known).

    ``truth`` (or None) supplies genie feedback: decisions are still recorded in
    ``out_*`` but the true bits are fed forward.
    """
    N = val.shape[-1]
    if N == 1:
        if frozen[0]:
            v = np.zeros_like(val)
            k = np.ones_like(known)
        else:
            v, k = val, known
        out_val[..., lo] = v[..., 0]
        out_known[..., lo] = k[..., 0]
        if truth is not None:
            return truth[..., lo:lo + 1].astype(np.uint8), np.ones_like(known)
        return v, k
    h = N // 2
    av, bv = val[..., :h], val[..., h:]
    ak, bk = known[..., :h], known[..., h:]
    # minus branch: both looks needed
    xa_v, xa_k = _sc(av ^ bv, ak & bk, frozen[:h], truth, out_val, out_known, lo)
    # plus branch: second half directly, or first half with the partial sum removed
    alt_v, alt_k = av ^ xa_v, ak & xa_k
    mv = np.where(bk, bv, alt_v)
    mk = bk | alt_k
    xb_v, xb_k = _sc(mv, mk, frozen[h:], truth, out_val, out_known, lo + h)
    return (
        np.concatenate([xa_v ^ xb_v, xb_v], axis=-1),
        np.concatenate([xa_k & xb_k, xb_k], axis=-1),
    )


def sc_decode(y, spec: PolarCodeSpec, genie_u=None):
    """Successive-cancellation decoding of BEC output ``y``.

    Returns ``(u_hat, success)``.  ``u_hat`` uses :data:`ERASED` for undecided
    bits; once an information bit is erased every later information bit is
    reported erased too, since its estimate would depend on the missing one.
    With ``genie_u`` the true bits are fed back instead of the estimates.
    Batched input of shape (T, N) gives per-row results.
    """
    y = np.asarray(y)
    if y.shape[-1] != spec.N:
        raise PolarError(f"received length {y.shape[-1]} != N={spec.N}")
    known = y != ERASED
    val = np.where(known, y, 0).astype(np.uint8)
    out_val = np.zeros(y.shape, dtype=np.uint8)
    out_known = np.zeros(y.shape, dtype=bool)
    truth = None if genie_u is None else np.asarray(genie_u, dtype=np.uint8)
    _sc(val, known, spec.frozen_mask, truth, out_val, out_known, 0)

    info_erased = ~out_known & ~spec.frozen_mask
    if genie_u is None:
        # successive rule: nothing after the first erased information bit is decided
        seen = np.cumsum(info_erased, axis=-1) > 0
        out_known &= ~(seen & ~spec.frozen_mask)
    u_hat = np.where(out_known, out_val, ERASED).astype(np.int8)
    success = ~info_erased.any(axis=-1)
    return u_hat, success if success.ndim else bool(success)


def block_error_bound(spec: PolarCodeSpec) -> float:
    """Union bound min(1, sum of z over the information set)."""
    return min(1.0, math.fsum(spec.z_values[spec.info_set]))


def polarization_stats(z_values, delta: float) -> tuple[float, float, float]:
    """(good, bad, middle) fractions: z < delta, z > 1 - delta, otherwise."""
    if not 0.0 < delta <= 0.5:
        raise PolarError(f"delta={delta} outside (0, 1/2]")
    z = np.asarray(z_values)
    n = z.size
    good = np.count_nonzero(z < delta)
    bad = np.count_nonzero(z > 1.0 - delta)
    return good / n, bad / n, (n - good - bad) / n


def max_k_for_target(z_values, target: float) -> int:
    """Largest k with union bound <= target (binary search on sorted partial sums)."""
    z = np.asarray(z_values)
    small = np.sort(z[z <= target])
    csum = np.cumsum(small)
    return int(np.searchsorted(csum, target, side="right"))


class ScalingResult(NamedTuple):
    mu: float
    intercept: float
    depths: np.ndarray
    ks: np.ndarray
    gaps: np.ndarray


def scaling_exponent(eps: float, target_block_error: float, depth_range) -> ScalingResult:
    """Least-squares slope of log N against -log(gap) at a fixed union-bound target.

    The gap at depth n is ``1 - k_n / (N (1 - eps))`` with ``k_n`` the largest
    information-set size whose union bound stays below the target.
    """
    depths = np.array(sorted(set(int(d) for d in depth_range)))
    if depths.size < 3:
        raise PolarError("need at least 3 depths for a scaling fit")
    if depths.max() > MAX_DEPTH or depths.min() < 1:
        raise PolarError(f"depths must lie in [1, {MAX_DEPTH}]")
    if not 0.0 < target_block_error < 1.0:
        raise PolarError("target must lie in (0, 1)")
    if not 0.0 <= eps < 1.0:
        raise PolarError("eps must lie in [0, 1)")
    ks, gaps = [], []
    for n in depths:
        k = max_k_for_target(synthetic_channels(int(n), eps), target_block_error)
        ks.append(k)
        gaps.append(1.0 - k / ((1 << int(n)) * (1.0 - eps)))
    gaps = np.array(gaps)
    if np.any(gaps <= 0):
        raise PolarError("non-positive gap; target too loose for this eps")
    log_n = depths * math.log(2.0)
    slope, icept = np.polyfit(-np.log(gaps), log_n, 1)
    return ScalingResult(float(slope), float(icept), depths, np.array(ks), gaps)


def simulate(spec: PolarCodeSpec, eps: float, trials: int, seed: int,
             random_info: bool = False, batch: int = 512) -> tuple[int, int]:
    """Monte Carlo SC decoding over BEC(eps). Returns (block_failures, trials).

    Trial ``t`` draws from stream ``(seed, t)``.  The all-zero word is sent
    unless ``random_info`` is set.  Trials are decoded in batches.
    """
    failures = 0
    for start in range(0, trials, batch):
        ts = range(start, min(start + batch, trials))
        u = np.zeros((len(ts), spec.N), dtype=np.uint8)
        erased = np.empty((len(ts), spec.N), dtype=bool)
        for row, t in enumerate(ts):
            rng = make_rng(seed, t)
            if random_info:
                u[row, spec.info_set] = rng.integers(0, 2, spec.k, dtype=np.uint8)
            erased[row] = erasure_pattern(spec.N, eps, rng)
        y = np.where(erased, ERASED, encode(u)).astype(np.int8)
        u_hat, ok = sc_decode(y, spec)
        ok = np.atleast_1d(ok)
        failures += int(np.count_nonzero(~ok))
        if np.any(u_hat[ok] != u[ok]):
            raise AssertionError("SC decoder mis-decoded a BEC output")
    return failures, trials
