"""Potential functions for (d_l, d_r) ensembles on the BEC.

With ``f(u; eps) = eps * lambda(u)`` and ``g(x) = 1 - rho(1 - x)`` the scalar
potential is::

    U(x; eps) = int_0^x (z - f(g(z); eps)) g'(z) dz
              = x g(x) - G(x) - F(g(x); eps)

where ``G(x) = int_0^x g`` and ``F(u; eps) = int_0^u f``.  Its nonzero
stationary points are exactly the nonzero DE fixed points.

The coupled potential acts on a padded one-sided constellation ``x``::

    U(x; eps) = g(x)^T x - sum G(x_i) - sum F((A g(x))_j; eps)

with ``A`` the banded averaging matrix ``A[j, l] = 1/w`` for ``j <= l < j + w``.
Its gradient is ``g'(x) * (x - A^T f(A g(x)))``, i.e. it belongs to the
recursion ``x <- A^T f(A g(x))`` in which the averaging is applied to the node
outputs.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize

from .de_uncoupled import BISECTION_CAP, bp_threshold, exit_area, fp_epsilon
from .ensemble import DegreeDistribution, design_rate

__all__ = [
    "NonPositiveGapError",
    "StationaryPoint",
    "PotentialProfile",
    "MaxwellAreas",
    "ShiftReport",
    "potential_u",
    "potential_u_quad",
    "potential_derivative",
    "potential_profile",
    "stationary_points",
    "min_stationary_potential",
    "energy_gap",
    "area_threshold",
    "area_threshold_exit",
    "maxwell_areas",
    "k_fg",
    "pad_one_sided",
    "averaging_matrix",
    "coupled_potential",
    "coupled_potential_terms",
    "coupled_gradient",
    "shift",
    "shift_decrease_check",
]

_TANGENT_TOL = 1e-10


class NonPositiveGapError(ValueError):
    """eps is at or above the area threshold: the energy gap is not positive."""


class StationaryPoint(NamedTuple):
    x: float
    U: float
    kind: str  # "min" | "max" | "saddle"


class PotentialProfile(NamedTuple):
    d_l: int
    d_r: int
    eps: float
    x: np.ndarray
    U: np.ndarray
    dU: np.ndarray
    stationary: list


class MaxwellAreas(NamedTuple):
    eps: float
    x_unstable: float
    x_stable: float
    area_I: float
    area_II: float


class ShiftReport(NamedTuple):
    eps: float
    w: int
    gap: float
    k: float
    gap_ok: bool            # eps below the area threshold (gap > 0)
    width_ok: bool          # w > K / gap
    lhs: float              # U'(x) . (Sx - x)
    shift_difference: float  # U(Sx) - U(x)
    rhs: float              # shift_difference + K / w
    taylor_margin: float    # rhs - lhs, nonnegative when the bound holds
    decreasing: np.ndarray  # coordinates that one more iteration strictly lowers
    strict_decrease: bool | None


def _dd(d_l: int, d_r: int) -> DegreeDistribution:
    return DegreeDistribution({int(d_l): 1.0}, {int(d_r): 1.0})


def _u(dd: DegreeDistribution, x, eps: float):
    x = np.asarray(x, dtype=float)
    gx = dd.check_out(x)
    return x * gx - dd.check_out_integral(x) - eps * dd.lam_integral(gx)


def potential_u(x, eps: float, d_l: int, d_r: int):
    """Closed-form scalar potential ``x g(x) - G(x) - F(g(x); eps)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("x must lie in [0, 1]")
    out = _u(_dd(d_l, d_r), x, eps)
    return float(out) if out.ndim == 0 else out


def potential_derivative(x, eps: float, d_l: int, d_r: int):
    """dU/dx = (x - f(g(x); eps)) g'(x)."""
    dd = _dd(d_l, d_r)
    x = np.asarray(x, dtype=float)
    out = (x - eps * dd.lam(dd.check_out(x))) * dd.check_out_prime(x)
    return float(out) if out.ndim == 0 else out


def potential_u_quad(x: float, eps: float, d_l: int, d_r: int) -> float:
    """The defining integral by adaptive quadrature (validation path)."""
    val, _ = integrate.quad(
        lambda z: potential_derivative(z, eps, d_l, d_r), 0.0, x, epsabs=1e-13, epsrel=1e-12,
        limit=200,
    )
    return val


def _phi(dd, eps, x):
    """eps*lambda(g(x)) - x; its roots in (0, 1] are the nonzero fixed points."""
    return eps * dd.lam(dd.check_out(x)) - x


def _stationary(dd: DegreeDistribution, eps: float, tol: float) -> list[StationaryPoint]:
    if eps <= 0:
        return []
    xs = np.unique(np.concatenate([np.logspace(-10, 0, 2000), np.linspace(0, 1, 20001)[1:]]))
    ph = _phi(dd, eps, xs)
    f = lambda t: float(_phi(dd, eps, t))  # noqa: E731
    roots: list[tuple[float, str]] = []
    for i in np.flatnonzero(ph[:-1] == 0.0):
        roots.append((float(xs[i]), "?"))
    if ph[-1] == 0.0:
        roots.append((float(xs[-1]), "?"))
    for i in np.flatnonzero(ph[:-1] * ph[1:] < 0):
        roots.append((optimize.brentq(f, xs[i], xs[i + 1], xtol=tol), "?"))
    # tangencies: local maxima of phi that touch zero between grid points
    peaks = 1 + np.flatnonzero((ph[1:-1] >= ph[:-2]) & (ph[1:-1] >= ph[2:])
                               & (ph[1:-1] < 0) & (ph[1:-1] > -1e-6))
    for i in peaks:
        res = optimize.minimize_scalar(lambda t: -f(t), bounds=(xs[i - 1], xs[i + 1]),
                                       method="bounded", options={"xatol": 1e-14})
        peak = -float(res.fun)
        if abs(peak) <= _TANGENT_TOL:
            roots.append((float(res.x), "saddle"))
            roots.append((float(res.x), "saddle"))
        elif peak > 0:
            for lo, hi in ((xs[i - 1], res.x), (res.x, xs[i + 1])):
                roots.append((optimize.brentq(f, lo, hi, xtol=tol), "?"))
    roots.sort()
    out = []
    for x, kind in roots:
        if kind == "?":
            h = max(1e-7, 1e-6 * x)
            slope = f(min(x + h, 1.0)) - f(max(x - h, 0.0))
            # U' = -phi g', so phi decreasing through the root is a minimum of U
            kind = "min" if slope < 0 else "max" if slope > 0 else "saddle"
        out.append(StationaryPoint(float(x), float(_u(dd, x, eps)), kind))
    return out


def stationary_points(eps: float, d_l: int, d_r: int, tol: float = 1e-10) -> list[StationaryPoint]:
    """Nonzero stationary points of U on (0, 1] (sign scan + Brent refinement).

    A tangency (double root, as at the BP threshold) is reported twice at the
    same location with kind ``"saddle"``.
    """
    if tol < 1e-10:
        raise ValueError("tol must be >= 1e-10")
    return _stationary(_dd(d_l, d_r), eps, tol)


def min_stationary_potential(eps: float, d_l: int, d_r: int) -> float:
    """Smallest U over the nonzero stationary points, +inf if there are none."""
    pts = stationary_points(eps, d_l, d_r)
    return min((p.U for p in pts), default=math.inf)


def energy_gap(eps: float, d_l: int, d_r: int) -> float:
    """Minimum potential over nonzero stationary points (+inf if none).

    Raises :class:`NonPositiveGapError` when that minimum is <= 0.
    """
    gap = min_stationary_potential(eps, d_l, d_r)
    if gap <= 0:
        raise NonPositiveGapError(f"energy gap {gap:.3g} <= 0 at eps={eps}")
    return gap


def area_threshold(d_l: int, d_r: int, tol: float = 1e-8, cross_check: bool = False) -> float:
    """Smallest eps at which the nonzero potential minimum reaches 0 (bisection).

    With ``cross_check`` the value is compared against :func:`area_threshold_exit`
    and a ``RuntimeError`` is raised if they differ by more than ``10*tol``
    (floored at 1e-9 for the quadrature accuracy).
    """
    if tol < 1e-8:
        raise ValueError("tol must be >= 1e-8")
    dd = _dd(d_l, d_r)
    lo = bp_threshold(dd, tol=1e-10)
    hi = 1.0
    for _ in range(BISECTION_CAP):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if min_stationary_potential(mid, d_l, d_r) > 0:
            lo = mid
        else:
            hi = mid
    eps_a = 0.5 * (lo + hi)
    if cross_check:
        other = area_threshold_exit(d_l, d_r)
        if abs(other - eps_a) > max(10 * tol, 1e-9):
            raise RuntimeError(f"area threshold methods disagree: {eps_a} vs {other}")
    return eps_a


def _x_bp(dd: DegreeDistribution) -> float:
    res = optimize.minimize_scalar(lambda t: float(fp_epsilon(dd, t)), bounds=(1e-9, 1.0),
                                   method="bounded", options={"xatol": 1e-13})
    return float(res.x)


def area_threshold_exit(d_l: int, d_r: int) -> float:
    """Area threshold from the EXIT curve.

    Integrates the stable branch from x = 1 leftwards and stops where the area
    under it, ``int_{x_A}^1 h(x) eps'(x) dx``, equals the design rate; returns
    ``eps(x_A)``.
    """
    dd = _dd(d_l, d_r)
    rate = design_rate(dd)
    x_bp = _x_bp(dd)
    x_a = optimize.brentq(lambda t: exit_area(dd, t) - rate, x_bp, 1.0, xtol=1e-14)
    return float(fp_epsilon(dd, x_a))


def maxwell_areas(d_l: int, d_r: int, eps: float) -> MaxwellAreas:
    """The two areas of the Maxwell construction at ``eps`` (equal at the area threshold).

    Area I lies between the vertical line at ``eps`` and the part of the EXIT
    curve to its left (x between the unstable and stable fixed points); area II
    lies between the line and the curve's tail to its right (x below the
    unstable fixed point).
    """
    dd = _dd(d_l, d_r)
    pts = stationary_points(eps, d_l, d_r)
    if len(pts) < 2:
        raise ValueError(f"no unstable/stable fixed-point pair at eps={eps}")
    x_u = min(p.x for p in pts if p.kind in ("max", "saddle"))
    x_s = max(p.x for p in pts if p.kind in ("min", "saddle"))

    def h_prime(x):
        return float(_var_poly_prime(dd, dd.check_out(x)) * dd.check_out_prime(x))

    def integrand(x, sign):
        if x == 0.0:
            return 0.0
        return sign * (eps - float(fp_epsilon(dd, x))) * h_prime(x)

    area_1, _ = integrate.quad(integrand, x_u, x_s, args=(1.0,), epsabs=1e-13, limit=200)
    area_2, _ = integrate.quad(integrand, 0.0, x_u, args=(-1.0,), epsabs=1e-13, limit=200)
    return MaxwellAreas(float(eps), x_u, x_s, area_1, area_2)


def _var_poly_prime(dd: DegreeDistribution, y):
    degs = np.array(list(dd.var_node_coeffs), dtype=float)
    coefs = np.array(list(dd.var_node_coeffs.values()))
    return np.sum(coefs * degs * np.power.outer(np.asarray(y, dtype=float), degs - 1), axis=-1)


def k_fg(d_l: int, d_r: int, eps: float) -> float:
    """||g'|| + ||g'||^2 ||f'|| + ||g''|| (sup norms on [0, 1]) for a regular ensemble."""
    g1 = d_r - 1
    g2 = (d_r - 1) * (d_r - 2)
    f1 = eps * (d_l - 1)
    return float(g1 + g1 * g1 * f1 + g2)


def potential_profile(eps: float, d_l: int, d_r: int, grid: int = 1000) -> PotentialProfile:
    x = np.linspace(0.0, 1.0, grid + 1)
    return PotentialProfile(d_l, d_r, eps, x, potential_u(x, eps, d_l, d_r),
                            potential_derivative(x, eps, d_l, d_r),
                            stationary_points(eps, d_l, d_r))


# -- coupled potential ------------------------------------------------------

def _i0(w: int) -> int:
    return (w - 1) // 2


def pad_one_sided(values, w: int) -> np.ndarray:
    """Layout: w zeros, the L+1 values (positions -L..0), then 2w + i0 copies of x_0.

    Total length ``L + 3w + i0 + 1`` with ``i0 = (w - 1) // 2``.
    """
    v = np.asarray(values, dtype=float)
    return np.concatenate([np.zeros(w), v, np.full(2 * w + _i0(w), v[-1])])


def averaging_matrix(n: int, w: int) -> np.ndarray:
    """n x n upper band: ``A[j, l] = 1/w`` for ``j <= l < j + w``."""
    j = np.arange(n)
    d = j[None, :] - j[:, None]
    return np.where((d >= 0) & (d < w), 1.0 / w, 0.0)


def _coupled_parts(dd, x, eps, w):
    n = x.size
    A = averaging_matrix(n, w)
    gx = dd.check_out(x)
    Ag = A @ gx
    return A, gx, Ag


def coupled_potential_terms(x, eps: float, d_l: int, d_r: int, w: int) -> np.ndarray:
    """Per-coordinate terms ``g(x_i) x_i - G(x_i) - F((A g(x))_i)`` of a padded vector."""
    dd = _dd(d_l, d_r)
    x = np.asarray(x, dtype=float)
    _, gx, Ag = _coupled_parts(dd, x, eps, w)
    return gx * x - dd.check_out_integral(x) - eps * dd.lam_integral(Ag)


def coupled_potential(c, eps: float, d_l: int, d_r: int, w: int | None = None) -> float:
    """Coupled potential of a one-sided constellation (padded) or of a padded vector.

    ``c`` may be a :class:`~erasurebench.de_coupled.OneSidedConstellation`, in
    which case it is padded with :func:`pad_one_sided`, or a raw padded array
    together with ``w``.
    """
    x, w = _as_padded(c, w)
    return math.fsum(coupled_potential_terms(x, eps, d_l, d_r, w))


def _as_padded(c, w):
    if hasattr(c, "window_w"):
        w = c.window_w if w is None else w
        if w != c.window_w:
            raise ValueError("w does not match the constellation window")
        return pad_one_sided(c.values, w), w
    if w is None:
        raise ValueError("a raw vector needs w")
    x = np.asarray(c, dtype=float)
    if x.ndim != 1 or x.size < w:
        raise ValueError("padded vector must be 1-d with at least w entries")
    return x, w


def coupled_gradient(x, eps: float, d_l: int, d_r: int, w: int) -> np.ndarray:
    """``g'(x) * (x - A^T f(A g(x)))``."""
    dd = _dd(d_l, d_r)
    x = np.asarray(x, dtype=float)
    A, _, Ag = _coupled_parts(dd, x, eps, w)
    return dd.check_out_prime(x) * (x - A.T @ (eps * dd.lam(Ag)))


def shift(x) -> np.ndarray:
    """Right shift by one position with a zero entering on the left."""
    x = np.asarray(x, dtype=float)
    return np.concatenate([[0.0], x[:-1]])


def shift_decrease_check(c, eps: float, d_l: int, d_r: int, w: int | None = None) -> ShiftReport:
    """Evaluate ``U'(x).(Sx - x) <= U(Sx) - U(x) + K/w`` on a padded constellation.

    ``U(Sx) - U(x)`` equals ``-U(x_0)`` for the clamped layout.  When the gap is
    positive and ``w > K/gap`` the right side is negative, so some coordinate
    with ``U'_i > 0`` and ``(Sx - x)_i < 0`` exists, i.e. one more iteration of
    ``x <- A^T f(A g(x))`` lowers ``x_i``; those coordinates are reported.
    """
    x, w = _as_padded(c, w)
    dd = _dd(d_l, d_r)
    gap = min_stationary_potential(eps, d_l, d_r)
    k = k_fg(d_l, d_r, eps)
    gap_ok = gap > 0
    width_ok = bool(gap_ok and w > k / gap)
    sx = shift(x)
    grad = coupled_gradient(x, eps, d_l, d_r, w)
    lhs = float(grad @ (sx - x))
    diff = coupled_potential(sx, eps, d_l, d_r, w) - coupled_potential(x, eps, d_l, d_r, w)
    rhs = diff + k / w
    A, _, Ag = _coupled_parts(dd, x, eps, w)
    nxt = A.T @ (eps * dd.lam(Ag))
    decreasing = np.flatnonzero((nxt < x) & (sx < x) & (grad > 0))
    strict = None
    if gap_ok:
        strict = bool(lhs < 0 and decreasing.size > 0)
    return ShiftReport(float(eps), int(w), float(gap), k, bool(gap_ok), width_ok, lhs, diff,
                       rhs, rhs - lhs, decreasing, strict)
