"""Density evolution for uncoupled LDPC ensembles on the BEC.

The recursion tracks ``x`` (variable-to-check erasure probability) and ``y``
(check-to-variable erasure probability)::

    y = 1 - rho(1 - x),    x = eps * lambda(y)

Fixed points satisfy ``eps = x / lambda(1 - rho(1 - x))`` which, for every
x in (0, 1], determines eps uniquely.  The EXIT value of a fixed point is the
node-perspective ``Lambda(y)`` (``y**d_l`` for a regular ensemble): the
probability that the full posterior of a bit, channel excluded, is erased.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize

from .ensemble import DegreeDistribution

__all__ = [
    "DEState",
    "ExitPoint",
    "ExitChart",
    "de_step",
    "de_iterate",
    "fp_epsilon",
    "fp_epsilon_of_x",
    "bp_threshold",
    "bp_threshold_de",
    "exit_curve",
    "exit_chart",
    "exit_area",
    "residual_bit_erasure",
]

BISECTION_CAP = 60


class DEState(NamedTuple):
    x: float
    y: float
    iteration: int


class ExitPoint(NamedTuple):
    x: float
    epsilon: float
    exit_value: float
    stability: str  # "stable" | "unstable"


class ExitChart(NamedTuple):
    var_curve: np.ndarray    # rows (y, x = eps*lambda(y))
    check_curve: np.ndarray  # rows (x, y = 1 - rho(1 - x))
    crossing: bool
    n_intersections: int     # includes the trivial one at the origin
    staircase: np.ndarray | None


def de_step(dd: DegreeDistribution, eps: float, x):
    y = dd.check_out(x)
    return eps * dd.lam(y), y


def de_iterate(dd: DegreeDistribution, eps: float, max_iters: int = 100_000,
               tol: float = 1e-12) -> tuple[float, list[DEState]]:
    """Iterate from ``x = eps`` until ``|x_l - x_{l-1}| < tol`` or ``max_iters``.

    State 0 is ``(eps, 1, 0)``: every check message starts erased.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps={eps} outside [0, 1]")
    x = float(eps)
    traj = [DEState(x, 1.0, 0)]
    for it in range(1, max_iters + 1):
        nx, y = de_step(dd, eps, x)
        nx = float(nx)
        traj.append(DEState(nx, float(y), it))
        done = abs(nx - x) < tol
        x = nx
        if done:
            break
    return x, traj


def residual_bit_erasure(dd: DegreeDistribution, eps: float, max_iters: int = 1_000_000) -> float:
    """Predicted fraction of bits still erased when BP stops: ``eps * Lambda(y_inf)``."""
    x, _ = de_iterate(dd, eps, max_iters=max_iters, tol=1e-15)
    return float(eps * dd.var_node_poly(dd.check_out(x)))


def fp_epsilon(dd: DegreeDistribution, x):
    """The channel parameter for which ``x`` is a DE fixed point."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or np.any(x > 1):
        raise ValueError("x must lie in (0, 1]")
    with np.errstate(divide="ignore", over="ignore"):
        return x / dd.lam(dd.check_out(x))


def fp_epsilon_of_x(x, d_l: int, d_r: int):
    """Regular-ensemble form ``x / (1 - (1 - x)**(d_r - 1))**(d_l - 1)``."""
    return fp_epsilon(_regular(d_l, d_r), x)


def _regular(d_l, d_r) -> DegreeDistribution:
    return DegreeDistribution({int(d_l): 1.0}, {int(d_r): 1.0})


def _fp_eps_derivative(dd: DegreeDistribution, x):
    """Analytic d eps / dx on (0, 1]."""
    y = dd.check_out(x)
    lam = dd.lam(y)
    return (lam - x * dd.lam_prime(y) * dd.check_out_prime(x)) / lam**2


def _small_x_limit(dd: DegreeDistribution) -> float:
    """lim_{x->0} eps(x) = 1 / (lambda_2 rho'(1)), or +inf without degree-2 variables."""
    degs, coefs = dd._lam
    lam2 = float(coefs[degs == 2].sum())
    if lam2 == 0:
        return math.inf
    return 1.0 / (lam2 * float(dd.check_out_prime(0.0)))


def bp_threshold(dd: DegreeDistribution, tol: float = 1e-6, cross_check: bool = False) -> float:
    """inf over x in (0, 1] of eps(x): grid search refined by golden section.

    With ``cross_check`` the result is compared against bisection on DE
    convergence (:func:`bp_threshold_de`) and a ``RuntimeError`` is raised if
    they differ by more than ``2*tol``.
    """
    if tol < 1e-10:
        raise ValueError("tol must be >= 1e-10")
    xs = np.unique(np.concatenate([np.logspace(-12, 0, 4000), np.linspace(1e-4, 1, 4000)]))
    vals = fp_epsilon(dd, xs)
    i = int(np.argmin(vals))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, xs.size - 1)]
    best = float(vals[i])
    if hi > lo:
        res = optimize.minimize_scalar(
            lambda t: float(fp_epsilon(dd, t)), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-14},
        )
        best = min(best, float(res.fun))
    best = min(best, _small_x_limit(dd))
    if cross_check:
        other = bp_threshold_de(dd, tol)
        if abs(other - best) > 2 * tol:
            raise RuntimeError(f"threshold methods disagree: {best} vs {other}")
    return best


def _de_converges(dd: DegreeDistribution, eps: float, max_iters: int) -> bool:
    x = float(eps)
    for _ in range(max_iters):
        nx = float(de_step(dd, eps, x)[0])
        if nx < 1e-12:
            return True
        if abs(nx - x) < 1e-15:
            return False
        x = nx
    return False


def bp_threshold_de(dd: DegreeDistribution, tol: float = 1e-6, max_iters: int = 1_000_000) -> float:
    """Bisection on "DE from x = eps reaches 0"; returns the bracket midpoint."""
    lo, hi = 0.0, 1.0
    for _ in range(BISECTION_CAP):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if _de_converges(dd, mid, max_iters):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def exit_curve(dd: DegreeDistribution, grid: int = 1000) -> list[ExitPoint]:
    """Fixed points projected to (eps, EXIT) on ``x = k/grid``, k = 1..grid."""
    if grid < 100:
        raise ValueError("grid must be >= 100")
    xs = np.arange(1, grid + 1) / grid
    eps = fp_epsilon(dd, xs)
    h = dd.var_node_poly(dd.check_out(xs))
    step = 1e-6
    lo = np.maximum(xs - step, 1e-300)
    hi = np.minimum(xs + step, 1.0)
    deriv = (fp_epsilon(dd, hi) - fp_epsilon(dd, lo)) / (hi - lo)
    return [
        ExitPoint(float(x), float(e), float(v), "stable" if d > 0 else "unstable")
        for x, e, v, d in zip(xs, eps, h, deriv)
    ]


def exit_area(dd: DegreeDistribution, x_lo: float = 0.0) -> float:
    """int_{x_lo}^1 h(x) eps'(x) dx along the fixed-point curve, h the EXIT value.

    Computed by parts as ``h(1) eps(1) - h(x_lo) eps(x_lo) - int eps h' dx`` so
    the integrand stays bounded at x -> 0.  The full area equals the design rate.
    """
    def h(x):
        return float(dd.var_node_poly(dd.check_out(x)))

    def eps_h_prime(x):
        if x == 0.0:
            return 0.0
        y = dd.check_out(x)
        hp = _var_node_poly_prime(dd, y) * dd.check_out_prime(x)
        return float(fp_epsilon(dd, x) * hp)

    boundary = h(1.0) * 1.0
    if x_lo > 0:
        boundary -= h(x_lo) * float(fp_epsilon(dd, x_lo))
    val, _ = integrate.quad(eps_h_prime, x_lo, 1.0, limit=200, epsabs=1e-13, epsrel=1e-12)
    return boundary - val


def _var_node_poly_prime(dd: DegreeDistribution, y):
    degs = np.array(list(dd.var_node_coeffs), dtype=float)
    coefs = np.array(list(dd.var_node_coeffs.values()))
    y = np.asarray(y, dtype=float)
    return np.sum(coefs * degs * np.power.outer(y, degs - 1), axis=-1)


def exit_chart(dd: DegreeDistribution, eps: float, grid: int = 1000,
               staircase: bool = False, crossing_tol: float = 1e-9) -> ExitChart:
    """Variable and check transfer curves at ``eps`` plus the crossing verdict."""
    if grid < 100:
        raise ValueError("grid must be >= 100")
    t = np.linspace(0.0, 1.0, grid + 1)
    var_curve = np.column_stack([t, eps * dd.lam(t)])
    check_curve = np.column_stack([t, dd.check_out(t)])

    xs = t[1:]
    in_range = xs <= eps
    margin = eps * dd.lam(dd.check_out(xs)) - xs
    crossing = bool(in_range.any() and margin[in_range].max() > crossing_tol)
    s = np.sign(np.where(np.abs(margin) <= crossing_tol, 0.0, margin))
    s = s[s != 0]
    n_changes = int(np.count_nonzero(s[1:] != s[:-1]))

    stair = None
    if staircase:
        _, traj = de_iterate(dd, eps, max_iters=10_000, tol=1e-12)
        pts = []
        for prev, cur in zip(traj[:-1], traj[1:]):
            pts.append((prev.x, cur.y))
            pts.append((cur.x, cur.y))
        stair = np.array(pts).reshape(-1, 2)
    return ExitChart(var_curve, check_curve, crossing, 1 + n_changes, stair)
