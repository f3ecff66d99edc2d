"""Erasure decoders on finite factor graphs.

All three decoders work at the socket level of a :class:`FactorGraph`, so a
repeated (var, check) pair counts twice in a parity, which is the same as the
mod-2 reduced parity-check matrix.  On the BEC none of them ever guesses:
every resolved position is implied by the channel output and the checks.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .channel import ERASED, make_rng
from .graphgen import FactorGraph

__all__ = [
    "DecodeResult",
    "DecodingError",
    "bp_decode",
    "peel_decode",
    "map_decode",
    "gf2_rref",
    "gf2_nullspace",
    "random_codeword",
]


class DecodingError(RuntimeError):
    """Internal inconsistency, e.g. a received word that is no codeword's output."""


@dataclass(frozen=True)
class DecodeResult:
    word: np.ndarray
    iterations: int
    resolved_count: int

    @property
    def erased(self) -> np.ndarray:
        return self.word == ERASED


def _check_input(graph: FactorGraph, received) -> np.ndarray:
    r = np.asarray(received, dtype=np.int8)
    if r.shape != (graph.n_vars,):
        raise ValueError(f"received length {r.size} != n_vars {graph.n_vars}")
    return r


def _result(word: np.ndarray, iterations: int) -> DecodeResult:
    return DecodeResult(word, int(iterations), int(np.count_nonzero(word != ERASED)))


def bp_decode(graph: FactorGraph, received, max_iters: int = 10_000) -> DecodeResult:
    """Flooding BP.  ``iterations`` counts the rounds that resolved new variables."""
    r = _check_input(graph, received)
    ev, ec = graph.edges[:, 0], graph.edges[:, 1]
    nv, nc = graph.n_vars, graph.n_checks
    chan_known = r != ERASED
    chan_val = np.where(chan_known, r, 0).astype(np.int64)

    var_known = chan_known.copy()
    var_val = chan_val.copy()
    kc = np.zeros(ev.size, dtype=bool)   # check -> var message known
    iters = 0
    for _ in range(max_iters):
        # var -> check: channel or any *other* known incoming check message
        n_in = np.bincount(ev, weights=kc, minlength=nv)
        kv = chan_known[ev] | (n_in[ev] - kc > 0)
        vv = np.where(kv, var_val[ev], 0)
        # check -> var: all *other* sockets known; value is their XOR
        n_unknown = np.bincount(ec, weights=~kv, minlength=nc)
        par = np.bincount(ec, weights=vv, minlength=nc).astype(np.int64)
        new_kc = (n_unknown[ec] - (~kv)) == 0
        cv = (par[ec] - vv) & 1
        if np.array_equal(new_kc, kc):
            break
        kc = new_kc
        hit = np.bincount(ev, weights=kc, minlength=nv) > 0
        newly = hit & ~var_known
        if newly.any():
            ones = np.bincount(ev, weights=kc & (cv == 1), minlength=nv) > 0
            var_val[newly] = ones[newly]
            var_known |= newly
            iters += 1
    word = np.where(var_known, var_val, ERASED).astype(np.int8)
    return _result(word, iters)


def peel_decode(graph: FactorGraph, received) -> DecodeResult:
    """Peeling: repeatedly resolve a check with exactly one unresolved socket."""
    r = _check_input(graph, received)
    ev, ec = graph.edges[:, 0], graph.edges[:, 1]
    nc = graph.n_checks
    known = r != ERASED
    val = np.where(known, r, 0).astype(np.int64)

    unk_sock = ~known[ev]
    count = np.bincount(ec, weights=unk_sock, minlength=nc).astype(np.int64)
    # with one unresolved socket left, the index sum is that socket's variable
    idx_sum = np.bincount(ec, weights=np.where(unk_sock, ev, 0), minlength=nc).astype(np.int64)
    parity = (np.bincount(ec, weights=np.where(unk_sock, 0, val[ev]), minlength=nc)
              .astype(np.int64) & 1)

    order = np.argsort(ev, kind="stable")
    starts = np.searchsorted(ev[order], np.arange(graph.n_vars + 1))

    queue = deque(np.flatnonzero(count == 1).tolist())
    steps = 0
    while queue:
        c = queue.popleft()
        if count[c] != 1:
            continue
        v = int(idx_sum[c])
        bit = int(parity[c])
        known[v] = True
        val[v] = bit
        steps += 1
        for c2 in ec[order[starts[v]:starts[v + 1]]]:
            count[c2] -= 1
            idx_sum[c2] -= v
            parity[c2] ^= bit
            if count[c2] == 1:
                queue.append(int(c2))
    word = np.where(known, val, ERASED).astype(np.int8)
    return _result(word, steps)


def gf2_rref(A, b=None):
    """Reduced row echelon form over GF(2).

    Returns ``(R, rhs, pivots)`` where ``pivots[i]`` is the pivot column of row i.
    """
    R = np.array(A, dtype=bool) if np.size(A) else np.zeros(np.shape(A), dtype=bool)
    rows, cols = R.shape
    rhs = np.zeros(rows, dtype=bool) if b is None else np.array(b, dtype=bool).copy()
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.flatnonzero(R[r:, c])
        if hits.size == 0:
            continue
        p = r + hits[0]
        if p != r:
            R[[r, p]] = R[[p, r]]
            rhs[[r, p]] = rhs[[p, r]]
        others = np.flatnonzero(R[:, c])
        others = others[others != r]
        R[others] ^= R[r]
        rhs[others] ^= rhs[r]
        pivots.append(c)
        r += 1
    return R, rhs, pivots


def gf2_nullspace(A) -> np.ndarray:
    """Basis of {x : A x = 0} over GF(2), one basis vector per row."""
    A = np.asarray(A, dtype=bool)
    cols = A.shape[1]
    R, _, pivots = gf2_rref(A)
    free = [c for c in range(cols) if c not in set(pivots)]
    basis = np.zeros((len(free), cols), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row, p in enumerate(pivots):
            basis[i, p] = R[row, f]
    return basis


def random_codeword(graph: FactorGraph, rng_seed) -> np.ndarray:
    """Uniform codeword of the mod-2 code defined by ``graph``."""
    H, _ = graph.parity_check_matrix()
    basis = gf2_nullspace(H)
    coef = make_rng(rng_seed).integers(0, 2, basis.shape[0])
    return (coef @ basis.astype(np.int64) % 2).astype(np.uint8)


def map_decode(graph: FactorGraph, received) -> DecodeResult:
    """Block-MAP decoding by GF(2) elimination on the erased columns.

    A variable is resolved iff it takes the same value on every solution, i.e.
    its pivot row has no entry in a free column.
    """
    r = _check_input(graph, received)
    erased = np.flatnonzero(r == ERASED)
    word = r.copy()
    if erased.size == 0:
        return _result(word, 0)
    H, _ = graph.parity_check_matrix()
    H = H.astype(bool)
    known = r != ERASED
    s = (H[:, known].astype(np.int64) @ r[known].astype(np.int64)) & 1
    R, rhs, pivots = gf2_rref(H[:, erased], s)
    rank = len(pivots)
    if rhs[rank:].any():
        raise DecodingError("inconsistent parity system: received word is not a BEC output")
    free = np.ones(erased.size, dtype=bool)
    free[pivots] = False
    for row, p in enumerate(pivots):
        if not R[row, free].any():
            word[erased[p]] = int(rhs[row])
    return _result(word, rank)
