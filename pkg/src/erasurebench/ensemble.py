"""LDPC degree distributions and the quantities derived from them.

A :class:`DegreeDistribution` stores the node-perspective polynomials
``Lambda(x) = sum_i Lambda_i x**i`` (variables) and ``P(x) = sum_i P_i x**i``
(checks).  The edge-perspective polynomials ``lambda`` and ``rho`` are the
normalized derivatives; by convention a coefficient keyed by ``i`` in an
edge-perspective mapping multiplies ``x**(i - 1)``, i.e. it is the probability
that a random edge attaches to a node of degree ``i``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

_SUM_TOL = 1e-12


class EnsembleError(ValueError):
    """Invalid degree distribution."""


class NonPositiveRateError(EnsembleError):
    """The requested ensemble has design rate <= 0."""


def _clean(coeffs: Mapping[int, float], name: str) -> dict[int, float]:
    out: dict[int, float] = {}
    for deg, frac in coeffs.items():
        deg = int(deg)
        frac = float(frac)
        if deg < 1:
            raise EnsembleError(f"{name}: degree {deg} < 1")
        if frac < 0 or not math.isfinite(frac):
            raise EnsembleError(f"{name}: coefficient of degree {deg} is {frac}")
        if frac > 0:
            out[deg] = out.get(deg, 0.0) + frac
    if not out:
        raise EnsembleError(f"{name}: empty distribution")
    total = math.fsum(out.values())
    if abs(total - 1.0) > _SUM_TOL:
        raise EnsembleError(f"{name}: coefficients sum to {total!r}, expected 1")
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class DegreeDistribution:
    """Node-perspective degree distribution pair (Lambda, P)."""

    var_node_coeffs: Mapping[int, float]
    check_node_coeffs: Mapping[int, float]
    _lam: tuple = field(init=False, repr=False, compare=False)
    _rho: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        var = _clean(self.var_node_coeffs, "Lambda")
        chk = _clean(self.check_node_coeffs, "P")
        object.__setattr__(self, "var_node_coeffs", var)
        object.__setattr__(self, "check_node_coeffs", chk)
        object.__setattr__(self, "_lam", _edge_arrays(var))
        object.__setattr__(self, "_rho", _edge_arrays(chk))

    # -- summary numbers -------------------------------------------------
    @property
    def avg_var_degree(self) -> float:
        """Lambda'(1)."""
        return math.fsum(d * f for d, f in self.var_node_coeffs.items())

    @property
    def avg_check_degree(self) -> float:
        """P'(1)."""
        return math.fsum(d * f for d, f in self.check_node_coeffs.items())

    @property
    def is_regular(self) -> bool:
        return len(self.var_node_coeffs) == 1 and len(self.check_node_coeffs) == 1

    @property
    def regular_degrees(self) -> tuple[int, int]:
        if not self.is_regular:
            raise EnsembleError("distribution is not regular")
        return next(iter(self.var_node_coeffs)), next(iter(self.check_node_coeffs))

    @property
    def max_var_degree(self) -> int:
        return max(self.var_node_coeffs)

    @property
    def max_check_degree(self) -> int:
        return max(self.check_node_coeffs)

    # -- polynomial evaluation (vectorized) ------------------------------
    def lam(self, y):
        """Edge-perspective variable polynomial lambda(y)."""
        degs, coefs = self._lam
        y = np.asarray(y, dtype=float)
        return np.sum(coefs * np.power.outer(y, degs - 1), axis=-1)

    def lam_prime(self, y):
        degs, coefs = self._lam
        y = np.asarray(y, dtype=float)
        k = degs - 1
        terms = np.where(k > 0, coefs * k * np.power.outer(y, np.maximum(k - 1, 0)), 0.0)
        return np.sum(terms, axis=-1)

    def lam_integral(self, y):
        """int_0^y lambda(z) dz."""
        degs, coefs = self._lam
        y = np.asarray(y, dtype=float)
        return np.sum(coefs / degs * np.power.outer(y, degs), axis=-1)

    def rho(self, x):
        """Edge-perspective check polynomial rho(x)."""
        degs, coefs = self._rho
        x = np.asarray(x, dtype=float)
        return np.sum(coefs * np.power.outer(x, degs - 1), axis=-1)

    def check_out(self, x):
        """1 - rho(1 - x), evaluated without cancellation for small x."""
        degs, coefs = self._rho
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            t = np.multiply.outer(np.log1p(-np.minimum(x, 1.0)), degs - 1)
        return np.sum(coefs * -np.expm1(t), axis=-1)

    def check_out_prime(self, x):
        """d/dx (1 - rho(1 - x)) = rho'(1 - x)."""
        degs, coefs = self._rho
        x = np.asarray(x, dtype=float)
        k = degs - 1
        terms = np.where(k > 0, coefs * k * np.power.outer(1.0 - x, np.maximum(k - 1, 0)), 0.0)
        return np.sum(terms, axis=-1)

    def check_out_integral(self, x):
        """int_0^x (1 - rho(1 - z)) dz."""
        degs, coefs = self._rho
        x = np.asarray(x, dtype=float)
        # int_0^x rho(1-z) dz = sum_i rho_i (1 - (1-x)^i) / i
        with np.errstate(divide="ignore"):
            t = np.multiply.outer(np.log1p(-np.minimum(x, 1.0)), degs)
        return x - np.sum(coefs / degs * -np.expm1(t), axis=-1)

    def var_node_poly(self, y):
        """Node-perspective Lambda(y)."""
        degs = np.array(list(self.var_node_coeffs), dtype=float)
        coefs = np.array(list(self.var_node_coeffs.values()))
        y = np.asarray(y, dtype=float)
        return np.sum(coefs * np.power.outer(y, degs), axis=-1)

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "lambda_nodes": {str(d): f for d, f in self.var_node_coeffs.items()},
            "rho_nodes": {str(d): f for d, f in self.check_node_coeffs.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping) -> "DegreeDistribution":
        try:
            lam = {int(k): float(v) for k, v in data["lambda_nodes"].items()}
            rho = {int(k): float(v) for k, v in data["rho_nodes"].items()}
        except (KeyError, AttributeError, TypeError) as exc:
            raise EnsembleError(f"malformed degree distribution: {exc}") from exc
        return cls(lam, rho)

    @classmethod
    def from_json(cls, text: str) -> "DegreeDistribution":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "DegreeDistribution":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _edge_arrays(node_coeffs: Mapping[int, float]) -> tuple[np.ndarray, np.ndarray]:
    degs = np.array(list(node_coeffs), dtype=float)
    w = degs * np.array(list(node_coeffs.values()))
    return degs, w / w.sum()


def make_regular(d_l: int, d_r: int) -> DegreeDistribution:
    """The (d_l, d_r)-regular ensemble: Lambda = x**d_l, P = x**d_r."""
    if int(d_l) != d_l or int(d_r) != d_r:
        raise EnsembleError("degrees must be integers")
    if d_l < 2 or d_r < 2:
        raise EnsembleError(f"degrees must be >= 2, got ({d_l}, {d_r})")
    if d_l >= d_r:
        raise NonPositiveRateError(f"design rate 1 - {d_l}/{d_r} is not positive")
    return DegreeDistribution({int(d_l): 1.0}, {int(d_r): 1.0})


def edge_perspective(dd: DegreeDistribution) -> tuple[dict[int, float], dict[int, float]]:
    """Return (lambda, rho) keyed by node degree; key i multiplies x**(i-1)."""

    def conv(coeffs):
        total = math.fsum(d * f for d, f in coeffs.items())
        return {d: d * f / total for d, f in coeffs.items()}

    return conv(dd.var_node_coeffs), conv(dd.check_node_coeffs)


def design_rate(dd: DegreeDistribution) -> float:
    return 1.0 - dd.avg_var_degree / dd.avg_check_degree


def design_rate_integral(dd: DegreeDistribution) -> float:
    """Design rate from the edge-perspective integrals, 1 - int rho / int lambda.

    ``int_0^1 lambda`` is the reciprocal average variable degree, so this is the
    same number as :func:`design_rate` reached by a different route.
    """
    lam, rho = edge_perspective(dd)
    o_l = math.fsum(f / d for d, f in lam.items())
    o_r = math.fsum(f / d for d, f in rho.items())
    return 1.0 - o_r / o_l


def shannon_threshold(dd: DegreeDistribution) -> float:
    return 1.0 - design_rate(dd)


def matching_margin(
    dd: DegreeDistribution | tuple[Callable, Callable],
    eps: float,
    grid_size: int = 10_000,
) -> float:
    """max over x in (0, eps] of eps*lambda(1 - rho(1 - x)) - x on a uniform grid.

    ``dd`` may also be a pair of vectorized callables ``(lam, rho)``, which
    admits non-polynomial families such as ``1 - (1 - x)**a``.  For ``eps == 0``
    the interval is empty and the grid is taken on (0, 1] instead.
    """
    if grid_size < 100:
        raise ValueError("grid_size must be >= 100")
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps={eps} outside [0, 1]")
    upper = eps if eps > 0 else 1.0
    x = upper * np.arange(1, grid_size + 1) / grid_size
    if isinstance(dd, DegreeDistribution):
        inner = dd.check_out(x)
        val = eps * dd.lam(inner) - x
    else:
        lam, rho = dd
        val = eps * np.asarray(lam(1.0 - np.asarray(rho(1.0 - x)))) - x
    return float(np.max(val))
