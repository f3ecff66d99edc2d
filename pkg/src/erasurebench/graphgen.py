"""Finite LDPC factor graphs: configuration model, protograph lifting and the
random spatially coupled construction.

Graphs are socket-level multigraphs: ``edges`` is an (E, 2) integer array of
``(var, check)`` pairs and repeated pairs are kept.  Spatial positions are
0-based: variables sit at ``0..L-1`` and checks at ``0..L+w-2``; a variable at
position i only connects to checks at positions ``i..i+w-1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import make_rng
from .ensemble import DegreeDistribution


class GraphError(ValueError):
    pass


class SocketMismatchError(GraphError):
    """Variable and check socket totals cannot be made equal."""


@dataclass(frozen=True)
class FactorGraph:
    n_vars: int
    n_checks: int
    edges: np.ndarray
    var_positions: np.ndarray | None = None
    check_positions: np.ndarray | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (
            edges[:, 0].min() < 0 or edges[:, 0].max() >= self.n_vars
            or edges[:, 1].min() < 0 or edges[:, 1].max() >= self.n_checks
        ):
            raise GraphError("edge endpoint out of range")
        object.__setattr__(self, "edges", edges)
        for name, size in (("var_positions", self.n_vars), ("check_positions", self.n_checks)):
            pos = getattr(self, name)
            if pos is not None:
                pos = np.asarray(pos, dtype=np.int64)
                if pos.shape != (size,):
                    raise GraphError(f"{name} must have length {size}")
                object.__setattr__(self, name, pos)

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def var_degrees(self) -> np.ndarray:
        return np.bincount(self.edges[:, 0], minlength=self.n_vars)

    def check_degrees(self) -> np.ndarray:
        return np.bincount(self.edges[:, 1], minlength=self.n_checks)

    def parity_check_matrix(self) -> tuple[np.ndarray, bool]:
        """Dense H (n_checks x n_vars, uint8) with multi-edges reduced mod 2.

        The flag reports whether any reduction happened.
        """
        counts = np.zeros((self.n_checks, self.n_vars), dtype=np.int64)
        np.add.at(counts, (self.edges[:, 1], self.edges[:, 0]), 1)
        return (counts % 2).astype(np.uint8), bool((counts > 1).any())

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        _, reduced = self.parity_check_matrix() if self.n_vars * self.n_checks <= 1 << 24 else (None, None)
        meta = dict(self.metadata)
        if reduced is not None:
            meta["multi_edges_reduced_mod2"] = reduced
        return {
            "n_vars": self.n_vars,
            "n_checks": self.n_checks,
            "edges": self.edges.tolist(),
            "positions": None if self.var_positions is None else {
                "vars": self.var_positions.tolist(),
                "checks": self.check_positions.tolist(),
            },
            "metadata": meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "FactorGraph":
        pos = data.get("positions")
        return cls(
            int(data["n_vars"]),
            int(data["n_checks"]),
            np.array(data["edges"], dtype=np.int64).reshape(-1, 2),
            None if pos is None else np.array(pos["vars"]),
            None if pos is None else np.array(pos["checks"]),
            dict(data.get("metadata", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "FactorGraph":
        return cls.from_dict(json.loads(text))

    def to_adjacency_text(self) -> str:
        """Header ``n_vars n_checks`` then one line per check listing its sockets."""
        lines = [f"{self.n_vars} {self.n_checks}"]
        order = np.argsort(self.edges[:, 1], kind="stable")
        by_check = np.split(self.edges[order, 0], np.cumsum(self.check_degrees())[:-1])
        for c, vs in enumerate(by_check):
            lines.append(f"{c}: " + " ".join(str(v) for v in vs))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_adjacency_text(cls, text: str) -> "FactorGraph":
        rows = [ln for ln in text.strip().splitlines() if ln.strip()]
        n_vars, n_checks = (int(t) for t in rows[0].split())
        edges = []
        for ln in rows[1:]:
            head, _, rest = ln.partition(":")
            c = int(head)
            edges.extend((int(v), c) for v in rest.split())
        return cls(n_vars, n_checks, np.array(edges, dtype=np.int64).reshape(-1, 2))


def apportion(coeffs: dict[int, float], total: int) -> dict[int, int]:
    """Largest-remainder rounding of ``total * coeffs`` to integer node counts.

    Ties in the fractional part go to the smaller degree.
    """
    degs = sorted(coeffs)
    raw = [total * coeffs[d] for d in degs]
    counts = [int(math.floor(r + 1e-9)) for r in raw]
    short = total - sum(counts)
    rema = sorted(range(len(degs)), key=lambda i: (-(raw[i] - counts[i]), degs[i]))
    for i in rema[:short]:
        counts[i] += 1
    return {d: c for d, c in zip(degs, counts)}


def _node_sockets(counts: dict[int, int]) -> np.ndarray:
    degs = np.concatenate([np.full(c, d, dtype=np.int64) for d, c in counts.items()]) \
        if counts else np.zeros(0, dtype=np.int64)
    return np.repeat(np.arange(degs.size), degs)


def sample_configuration(dd: DegreeDistribution, n_vars: int, rng_seed) -> FactorGraph:
    """Configuration-model graph: sockets matched by one uniform permutation."""
    if n_vars < 1:
        raise GraphError("n_vars must be >= 1")
    var_counts = apportion(dd.var_node_coeffs, n_vars)
    var_sockets = _node_sockets(var_counts)
    n_sock = var_sockets.size
    m_real = n_sock / dd.avg_check_degree
    n_checks = int(round(m_real))
    if n_checks < 1 or abs(m_real - n_checks) > 1e-9:
        raise SocketMismatchError(
            f"{n_sock} variable sockets is not a multiple of the average check degree "
            f"{dd.avg_check_degree:g}"
        )
    check_counts = apportion(dd.check_node_coeffs, n_checks)
    check_sockets = _node_sockets(check_counts)
    if check_sockets.size != n_sock:
        raise SocketMismatchError(
            f"check degree counts {check_counts} give {check_sockets.size} sockets, "
            f"variables give {n_sock}"
        )
    perm = make_rng(rng_seed).permutation(n_sock)
    edges = np.column_stack([var_sockets, check_sockets[perm]])
    return FactorGraph(n_vars, n_checks, edges, metadata={"kind": "configuration"})


def lift_protograph(proto: FactorGraph, M: int, rng_seed) -> FactorGraph:
    """M-fold lift; copy j of node v gets index ``v*M + j``."""
    if M < 1:
        raise GraphError("lift size M must be >= 1")
    rng = make_rng(rng_seed)
    E = proto.n_edges
    perms = np.stack([rng.permutation(M) for _ in range(E)]) if E else np.zeros((0, M), np.int64)
    copies = np.arange(M)
    var_idx = proto.edges[:, :1] * M + copies
    chk_idx = proto.edges[:, 1:] * M + perms
    edges = np.column_stack([var_idx.ravel(), chk_idx.ravel()])
    vpos = None if proto.var_positions is None else np.repeat(proto.var_positions, M)
    cpos = None if proto.check_positions is None else np.repeat(proto.check_positions, M)
    meta = dict(proto.metadata, lift=M)
    return FactorGraph(proto.n_vars * M, proto.n_checks * M, edges, vpos, cpos, meta)


def sample_coupled(d_l: int, d_r: int, L: int, w: int, M: int, rng_seed) -> FactorGraph:
    """Random spatially coupled (d_l, d_r, L, w) graph with M variables per position.

    Every variable position splits its ``M*d_l`` sockets over the offsets
    ``0..w-1`` with a fixed quota (an even split; any remainder goes to the
    lowest offsets), sockets being assigned to offsets by a uniform shuffle.
    Because every position uses the same quota, interior check positions are
    filled exactly; boundary check positions keep some sockets empty, which
    is equivalent to tying them to known-zero dummy variables.
    """
    if not 1 <= w <= L:
        raise GraphError(f"need 1 <= w <= L, got w={w}, L={L}")
    if M < 1 or (M * d_l) % d_r:
        raise GraphError(f"M*d_l = {M * d_l} must be a positive multiple of d_r = {d_r}")
    rng = make_rng(rng_seed)
    per_pos_checks = M * d_l // d_r
    n_cpos = L + w - 1
    quota = np.full(w, (M * d_l) // w)
    quota[: (M * d_l) % w] += 1

    incoming: list[list[np.ndarray]] = [[] for _ in range(n_cpos)]
    for i in range(L):
        sockets = np.repeat(np.arange(i * M, (i + 1) * M), d_l)
        sockets = sockets[rng.permutation(sockets.size)]
        for k, chunk in enumerate(np.split(sockets, np.cumsum(quota)[:-1])):
            incoming[i + k].append(chunk)

    edges = []
    for j in range(n_cpos):
        vs = np.concatenate(incoming[j]) if incoming[j] else np.zeros(0, np.int64)
        slots = np.repeat(np.arange(j * per_pos_checks, (j + 1) * per_pos_checks), d_r)
        chosen = slots[rng.permutation(slots.size)[: vs.size]]
        edges.append(np.column_stack([vs, chosen]))
    edges = np.concatenate(edges)
    vpos = np.repeat(np.arange(L), M)
    cpos = np.repeat(np.arange(n_cpos), per_pos_checks)
    meta = {"kind": "coupled", "d_l": d_l, "d_r": d_r, "L": L, "w": w, "M": M}
    return FactorGraph(L * M, n_cpos * per_pos_checks, edges, vpos, cpos, meta)
