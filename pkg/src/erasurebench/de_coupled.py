"""Spatially coupled density evolution for (d_l, d_r) ensembles on the BEC.

Positions are 0-based, ``0..L-1``.  A variable at position i averages the
check messages from positions ``i..i+w-1``; a check at position j averages the
variable messages from positions ``j-w+1..j``.  Values outside ``[0, L)`` are
0, the informative boundary that seeds the decoding wave::

    y_j = 1 - (1 - mean_{k<w} x_{j-k})**(d_r - 1)
    x_i = eps * (mean_{k<w} y_{i+k})**(d_l - 1)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .de_uncoupled import BISECTION_CAP

__all__ = [
    "Constellation",
    "OneSidedConstellation",
    "CoupledRun",
    "OneSidedResult",
    "WaveError",
    "NoWaveError",
    "StuckWaveError",
    "coupled_de_step",
    "coupled_de_trajectory",
    "coupled_de_run",
    "uncoupled_fixed_point",
    "wave_speed",
    "coupled_threshold",
    "one_sided_step",
    "one_sided_fp_search",
]

DECODED_BELOW = 1e-8


class WaveError(RuntimeError):
    """No measurable decoding wave."""


class NoWaveError(WaveError):
    """The constellation decoded (or never formed a front) before a wave could be fitted."""


class StuckWaveError(WaveError):
    """The front did not move: the constellation is stuck at a nonzero fixed point."""


@dataclass(frozen=True)
class Constellation:
    values: np.ndarray
    window_w: int

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("constellation needs L >= 1 values")
        if self.window_w < 1:
            raise ValueError("w must be >= 1")
        if np.any(v < 0) or np.any(v > 1):
            raise ValueError("values must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def L(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class OneSidedConstellation:
    """Values at positions ``-L..0`` (index 0 of the array is position -L).

    Outside the range the clamp rule applies: 0 to the left, ``x_0`` to the right.
    """

    values: np.ndarray
    window_w: int

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("one-sided constellation needs at least one value")
        if np.any(v < 0) or np.any(v > 1):
            raise ValueError("values must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def L(self) -> int:
        return self.values.size - 1

    @property
    def entropy(self) -> float:
        return float(self.values.mean())

    @property
    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0))


class CoupledRun(NamedTuple):
    decoded: bool
    fixed_point: Constellation
    iterations: int


class OneSidedResult(NamedTuple):
    constellation: OneSidedConstellation
    entropy: float
    residual: float
    iterations: int
    converged: bool
    collapsed: bool  # ended at the all-zero constellation from a nonzero start


def _window_mean(a: np.ndarray, w: int, mode: str) -> np.ndarray:
    # sum with ones, then divide: keeps the map exactly monotone in floating point
    return np.convolve(a, np.ones(w), mode) / w


def _step(x: np.ndarray, w: int, d_l: int, d_r: int, eps: float) -> np.ndarray:
    y = 1.0 - (1.0 - _window_mean(x, w, "full")) ** (d_r - 1)
    return eps * _window_mean(y, w, "valid") ** (d_l - 1)


def coupled_de_step(c: Constellation, eps: float, d_l: int, d_r: int) -> Constellation:
    """One coupled DE iteration with zero boundary."""
    return Constellation(_step(c.values, c.window_w, d_l, d_r, eps), c.window_w)


def coupled_de_trajectory(L: int, w: int, d_l: int, d_r: int, eps: float,
                          x0=None) -> Iterator[np.ndarray]:
    """Yield successive constellations (arrays), starting after the first step."""
    x = np.ones(L) if x0 is None else np.array(x0, dtype=float)
    while True:
        x = _step(x, w, d_l, d_r, eps)
        yield x


def coupled_de_run(L: int, w: int, d_l: int, d_r: int, eps: float,
                   max_iters: int | None = None, tol: float = 1e-13) -> CoupledRun:
    """Iterate from the all-ones constellation.

    Stops when every value is below 1e-8 (decoded), when the largest point-wise
    change drops below ``tol`` (stuck), or after ``max_iters`` (default 100*L).
    """
    if L < 1 or w < 1:
        raise ValueError("need L >= 1 and w >= 1")
    cap = 100 * L if max_iters is None else int(max_iters)
    x = np.ones(L)
    it = 0
    for it, nx in enumerate(coupled_de_trajectory(L, w, d_l, d_r, eps, x), start=1):
        if nx.max() < DECODED_BELOW:
            return CoupledRun(True, Constellation(nx, w), it)
        done = np.max(np.abs(nx - x)) < tol
        x = nx
        if done or it >= cap:
            break
    return CoupledRun(False, Constellation(x, w), it)


def uncoupled_fixed_point(eps: float, d_l: int, d_r: int, tol: float = 1e-15,
                          max_iters: int = 1_000_000) -> float:
    """Limit of uncoupled DE started from x = 1 (the largest fixed point)."""
    x = 1.0
    for _ in range(max_iters):
        nx = eps * (1.0 - (1.0 - x) ** (d_r - 1)) ** (d_l - 1)
        if abs(nx - x) < tol:
            return nx
        x = nx
    return x


def _front(x: np.ndarray, level: float) -> float | None:
    """Leftmost crossing of ``level``, linearly interpolated; None if x < level everywhere."""
    above = np.flatnonzero(x >= level)
    if above.size == 0:
        return None
    i = int(above[0])
    if i == 0:
        return 0.0
    return (i - 1) + (level - x[i - 1]) / (x[i] - x[i - 1])


def wave_speed(L: int, w: int, d_l: int, d_r: int, eps: float,
               max_iters: int | None = None) -> float:
    """Speed (positions per iteration) of the left decoding front.

    The front is where x first reaches half the uncoupled fixed point; its
    position is recorded each iteration until it passes ``L/2 - w`` (the two
    fronts are about to meet), the constellation decodes, or the iteration cap
    (default 100*L) is hit.  The slope is fitted over the middle third.
    """
    if L < 10 * w:
        raise ValueError(f"need L >= 10*w for a steady wave, got L={L}, w={w}")
    x_star = uncoupled_fixed_point(eps, d_l, d_r)
    if x_star < DECODED_BELOW:
        raise NoWaveError(f"eps={eps} is below the BP threshold: no nonzero fixed point")
    level = 0.5 * x_star
    cap = 100 * L if max_iters is None else int(max_iters)
    fronts = []
    for it, x in enumerate(coupled_de_trajectory(L, w, d_l, d_r, eps), start=1):
        if x.max() < DECODED_BELOW:
            break
        f = _front(x, level)
        if f is None or f > L / 2 - w:
            break
        fronts.append(f)
        if it >= cap:
            break
    n = len(fronts)
    if n < 6:
        raise NoWaveError(f"only {n} front samples before decoding")
    fr = np.array(fronts)
    a, b = n // 3, 2 * n // 3
    slope = float(np.polyfit(np.arange(a, b), fr[a:b], 1)[0])
    if fr[-1] - fr[0] < 1.0:
        raise StuckWaveError(f"front moved {fr[-1] - fr[0]:.3g} positions in {n} iterations")
    return slope


def coupled_threshold(L: int, w: int, d_l: int, d_r: int, tol: float = 1e-5,
                      max_iters: int | None = None) -> float:
    """Bisection on eps of the ``coupled_de_run`` decoded flag; returns the midpoint."""
    if tol < 1e-6:
        raise ValueError("tol must be >= 1e-6")
    lo, hi = 0.0, 1.0
    for _ in range(BISECTION_CAP):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if coupled_de_run(L, w, d_l, d_r, mid, max_iters).decoded:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def one_sided_step(values: np.ndarray, w: int, d_l: int, d_r: int, eps: float) -> np.ndarray:
    """One DE step on positions ``-L..0`` with the clamp rule outside."""
    v = np.asarray(values, dtype=float)
    ext = np.concatenate([np.zeros(w - 1), v, np.full(w - 1, v[-1])])
    y = 1.0 - (1.0 - _window_mean(ext, w, "valid")) ** (d_r - 1)
    return eps * _window_mean(y, w, "valid") ** (d_l - 1)


def one_sided_fp_search(L: int, w: int, d_l: int, d_r: int, eps: float,
                        max_iters: int | None = None, tol: float = 1e-12) -> OneSidedResult:
    """Iterate one-sided DE from a linear ramp (0 at -L up to x* at 0).

    ``residual`` is the largest point-wise change in the last step and
    ``converged`` means it fell below ``tol``.  When no nonzero one-sided fixed
    point exists the profile drifts right and eventually collapses to zero,
    which is flagged by ``collapsed``.
    """
    if L < 1 or w < 1:
        raise ValueError("need L >= 1 and w >= 1")
    cap = 100 * L if max_iters is None else int(max_iters)
    x_star = uncoupled_fixed_point(eps, d_l, d_r)
    v = np.linspace(0.0, x_star, L + 1)
    start_nonzero = bool(v.max() > 0)
    residual = math.inf if cap > 0 else 0.0
    it = 0
    for it in range(1, cap + 1):
        nv = one_sided_step(v, w, d_l, d_r, eps)
        residual = float(np.max(np.abs(nv - v)))
        v = nv
        if residual < tol:
            break
    c = OneSidedConstellation(np.clip(v, 0.0, 1.0), w)
    collapsed = bool(start_nonzero and c.values.max() < DECODED_BELOW)
    return OneSidedResult(c, c.entropy, residual, it, residual < tol, collapsed)
