"""Monte Carlo experiment runner and result emission.

Every trial ``t`` of an experiment draws from its own stream, seeded with
``derive_seed(base_seed, t)`` (a SeedSequence hash of the pair).  The same
trial seed is reused for every eps of a sweep: the graph and the uniform draws
behind the erasure pattern are shared, so erased sets are nested in eps.  All
simulations send the all-zero codeword, which is enough for a linear code on
the BEC.  Aggregates are integer sums, so serial and parallel runs agree
exactly.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import decoders, graphgen, polar
from .channel import ERASED, derive_seed, make_rng
from .ensemble import DegreeDistribution, EnsembleError

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SimRecord",
    "SimResult",
    "CSV_COLUMNS",
    "run_experiment",
    "run_trial",
    "emit",
    "load_result",
    "empirical_threshold",
]

KINDS = ("polar-sim", "ldpc-sim", "coupled-sim", "de", "threshold", "potential-scan", "scaling")
SIM_KINDS = ("polar-sim", "ldpc-sim", "coupled-sim")
CSV_COLUMNS = ("kind", "param_summary", "eps", "trials", "block_fail", "bit_erasures",
               "mean_iters", "seed")
DECODERS = {"bp": decoders.bp_decode, "peel": decoders.peel_decode, "map": decoders.map_decode}

_REQUIRED = {
    "polar-sim": ("depth",),
    "ldpc-sim": ("n",),
    "coupled-sim": ("dl", "dr", "L", "w", "M"),
    "de": (),
    "threshold": (),
    "potential-scan": ("dl", "dr"),
    "scaling": ("depths",),
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    params: dict
    eps: tuple = ()
    trials: int = 1
    seed: int = 0
    out: str | None = None
    jobs: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "eps", tuple(float(e) for e in self.eps))
        object.__setattr__(self, "params", dict(self.params))
        errors = self.problems()
        if errors:
            raise ConfigError("; ".join(errors))

    def problems(self) -> list[str]:
        out = []
        if self.kind not in KINDS:
            return [f"kind must be one of {', '.join(KINDS)}, got {self.kind!r}"]
        if int(self.trials) != self.trials or self.trials < 1:
            out.append(f"trials must be an integer >= 1, got {self.trials}")
        for e in self.eps:
            if not 0.0 <= e <= 1.0:
                out.append(f"eps value {e} outside [0, 1]")
        if self.kind in SIM_KINDS and not self.eps:
            out.append("simulation kinds need at least one eps value")
        for key in _REQUIRED[self.kind]:
            if key not in self.params:
                out.append(f"params.{key} is required for kind {self.kind}")
        dd_file = self.params.get("dd_file")
        if dd_file is not None and not Path(dd_file).is_file():
            out.append(f"params.dd_file {dd_file!r} does not exist")
        if self.kind in ("ldpc-sim", "de", "threshold") and dd_file is None \
                and not {"dl", "dr"} <= self.params.keys():
            out.append("need params.dd_file or params.dl and params.dr")
        if self.params.get("decoder", "bp") not in DECODERS:
            out.append(f"params.decoder must be one of {sorted(DECODERS)}")
        if self.jobs is not None and self.jobs < 1:
            out.append("jobs must be >= 1")
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {"kind", "params", "eps", "trials", "seed", "out", "jobs"}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        if "kind" not in data:
            raise ConfigError("config field 'kind' is required")
        return cls(data["kind"], data.get("params", {}), tuple(data.get("eps", ())),
                   data.get("trials", 1), data.get("seed", 0), data.get("out"), data.get("jobs"))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params, "eps": list(self.eps),
                "trials": self.trials, "seed": self.seed, "out": self.out, "jobs": self.jobs}

    def degree_distribution(self) -> DegreeDistribution:
        if "dd_file" in self.params:
            return DegreeDistribution.load(self.params["dd_file"])
        return DegreeDistribution({int(self.params["dl"]): 1.0}, {int(self.params["dr"]): 1.0})

    def param_summary(self) -> str:
        return ";".join(f"{k}={self.params[k]}" for k in sorted(self.params))


@dataclass(frozen=True)
class SimRecord:
    kind: str
    param_summary: str
    eps: float
    trials: int
    block_fail: int
    bit_erasures: int
    mean_iters: float
    seed: int
    n: int = 0
    wall_time: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.block_fail > self.trials:
            raise ValueError("block failures exceed trials")
        if self.n and self.bit_erasures > self.n * self.trials:
            raise ValueError("bit erasures exceed n * trials")

    @property
    def block_error_rate(self) -> float:
        return self.block_fail / self.trials

    @property
    def bit_erasure_rate(self) -> float:
        return self.bit_erasures / (self.n * self.trials) if self.n else float("nan")


@dataclass(frozen=True)
class SimResult:
    config: ExperimentConfig
    records: tuple = ()
    table: tuple = ()   # rows (dicts) for the analytic kinds


# -- trials ------------------------------------------------------------------

def _build_code(kind: str, params: dict, trial_seed: int):
    """Return (n, decode_fn) for one trial; graph sampling uses sub-stream 0."""
    if kind == "ldpc-sim":
        dd = (DegreeDistribution.load(params["dd_file"]) if "dd_file" in params
              else DegreeDistribution({int(params["dl"]): 1.0}, {int(params["dr"]): 1.0}))
        g = graphgen.sample_configuration(dd, int(params["n"]), make_rng(trial_seed, 0))
    elif kind == "coupled-sim":
        g = graphgen.sample_coupled(int(params["dl"]), int(params["dr"]), int(params["L"]),
                                    int(params["w"]), int(params["M"]), make_rng(trial_seed, 0))
    else:
        raise ConfigError(f"no graph for kind {kind}")
    dec = DECODERS[params.get("decoder", "bp")]
    return g.n_vars, (lambda y: dec(g, y))


def run_trial(kind: str, params: dict, eps_list, trial_seed: int) -> list[tuple[int, int, int]]:
    """One trial at every eps: list of (block_fail, bit_erasures, iterations)."""
    out = []
    if kind == "polar-sim":
        spec = _polar_spec(params, eps_list)
        u = make_rng(trial_seed, 1).random(spec.N)
        for e in eps_list:
            y = np.where(u < e, ERASED, 0).astype(np.int8)
            u_hat, ok = polar.sc_decode(y, spec)
            erased = int(np.count_nonzero(u_hat[spec.info_set] == ERASED))
            out.append((int(not ok), erased, spec.depth_n))
        return out
    n, decode = _build_code(kind, params, trial_seed)
    u = make_rng(trial_seed, 1).random(n)
    for e in eps_list:
        y = np.where(u < e, ERASED, 0).astype(np.int8)
        res = decode(y)
        erased = n - res.resolved_count
        if np.any(res.word[res.word != ERASED] != 0):
            raise RuntimeError(f"decoder mis-decoded at eps={e}, trial seed {trial_seed}")
        out.append((int(erased > 0), erased, res.iterations))
    return out


def _polar_spec(params: dict, eps_list) -> polar.PolarCodeSpec:
    depth = int(params["depth"])
    design = float(params.get("design_eps", eps_list[0] if eps_list else 0.5))
    N = 1 << depth
    if "k" in params:
        k = int(params["k"])
    else:
        k = int(round(float(params.get("rate", 0.5)) * N))
    return polar.construct(depth, design, k)


def _chunk(kind, params, eps_list, seeds):
    return [run_trial(kind, params, eps_list, s) for s in seeds]


def _default_jobs() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1


def run_experiment(cfg: ExperimentConfig) -> SimResult:
    """Run ``cfg``; identical configs give identical results (wall times aside)."""
    if cfg.kind not in SIM_KINDS:
        return SimResult(cfg, (), tuple(_analytic(cfg)))
    t0 = time.perf_counter()
    seeds = [derive_seed(cfg.seed, t) for t in range(cfg.trials)]
    jobs = cfg.jobs or _default_jobs()
    jobs = max(1, min(jobs, cfg.trials))
    try:
        if jobs == 1:
            per_trial = _chunk(cfg.kind, cfg.params, cfg.eps, seeds)
        else:
            parts = [seeds[i::jobs] for i in range(jobs)]
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futs = [pool.submit(_chunk, cfg.kind, cfg.params, cfg.eps, p) for p in parts]
                per_trial = [r for f in futs for r in f.result()]
    except (ConfigError, EnsembleError, graphgen.GraphError, polar.PolarError):
        raise
    except Exception as exc:
        raise RuntimeError(f"{cfg.kind} run aborted: {exc}") from exc
    wall = time.perf_counter() - t0

    n = _blocklength(cfg)
    summary = cfg.param_summary()
    records = []
    for j, e in enumerate(cfg.eps):
        fails = sum(t[j][0] for t in per_trial)
        bits = sum(t[j][1] for t in per_trial)
        iters = sum(t[j][2] for t in per_trial)
        records.append(SimRecord(cfg.kind, summary, e, cfg.trials, fails, bits,
                                 iters / cfg.trials, cfg.seed, n, wall))
    return SimResult(cfg, tuple(records))


def _blocklength(cfg: ExperimentConfig) -> int:
    p = cfg.params
    if cfg.kind == "polar-sim":
        return _polar_spec(p, cfg.eps).k
    if cfg.kind == "ldpc-sim":
        return int(p["n"])
    return int(p["L"]) * int(p["M"])


def _analytic(cfg: ExperimentConfig) -> list[dict]:
    from . import de_coupled, de_uncoupled, potential

    p = cfg.params
    if cfg.kind == "de":
        dd = cfg.degree_distribution()
        rows = []
        for e in cfg.eps:
            x, traj = de_uncoupled.de_iterate(dd, e)
            rows.append({"eps": e, "limit_x": x, "iterations": len(traj) - 1,
                         "bit_erasure": de_uncoupled.residual_bit_erasure(dd, e)})
        return rows
    if cfg.kind == "threshold":
        dd = cfg.degree_distribution()
        row = {"bp": de_uncoupled.bp_threshold(dd, tol=float(p.get("tol", 1e-6)))}
        if dd.is_regular:
            dl, dr = dd.regular_degrees
            row["area"] = potential.area_threshold(dl, dr)
            if "L" in p and "w" in p:
                row["coupled"] = de_coupled.coupled_threshold(int(p["L"]), int(p["w"]), dl, dr)
        return [row]
    if cfg.kind == "potential-scan":
        dl, dr = int(p["dl"]), int(p["dr"])
        grid = int(p.get("grid", 1000))
        rows = []
        for e in cfg.eps:
            prof = potential.potential_profile(e, dl, dr, grid)
            rows += [{"eps": e, "x": x, "U": u, "dU": d} for x, u, d in zip(prof.x, prof.U, prof.dU)]
        return rows
    if cfg.kind == "scaling":
        depths = _parse_depths(p["depths"])
        res = polar.scaling_exponent(float(p.get("eps", 0.5)), float(p.get("target", 1e-3)), depths)
        return [{"depth": int(d), "k": int(k), "gap": float(g), "mu": res.mu}
                for d, k, g in zip(res.depths, res.ks, res.gaps)]
    raise ConfigError(f"unsupported kind {cfg.kind}")  # pragma: no cover


def _parse_depths(spec) -> list[int]:
    if isinstance(spec, str):
        a, _, b = spec.partition("..")
        return list(range(int(a), int(b) + 1)) if b else [int(a)]
    return [int(d) for d in spec]


# -- emission ----------------------------------------------------------------

def _csv_text(result: SimResult) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    if result.config.kind in SIM_KINDS:
        wr.writerow(CSV_COLUMNS)
        for r in result.records:
            wr.writerow([r.kind, r.param_summary, repr(r.eps), r.trials, r.block_fail,
                         r.bit_erasures, repr(float(r.mean_iters)), r.seed])
    elif result.table:
        cols = list(result.table[0])
        wr.writerow(cols)
        for row in result.table:
            wr.writerow([repr(float(v)) if isinstance(v, float) else v for v in row.values()])
    return buf.getvalue()


def _json_obj(result: SimResult) -> dict:
    return {
        "config": result.config.to_dict(),
        "records": [asdict(r) for r in result.records],
        "table": [dict(r) for r in result.table],
    }


def emit(result: SimResult, path=None, fmt: str = "csv") -> str:
    """Serialize ``result`` as CSV or JSON; write to ``path`` if given, return the text."""
    if fmt == "csv":
        text = _csv_text(result)
    elif fmt == "json":
        text = json.dumps(_json_obj(result), indent=2, default=_json_default) + "\n"
    else:
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
    return text


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def load_result(path) -> SimResult:
    data = json.loads(Path(path).read_text())
    cfg = ExperimentConfig.from_dict(data["config"])
    recs = tuple(SimRecord(**r) for r in data.get("records", []))
    return SimResult(cfg, recs, tuple(data.get("table", [])))


# -- finite-length threshold -------------------------------------------------

def _critical_eps(dd: DegreeDistribution, n: int, trial_seed: int, decoder: str) -> float:
    dec = DECODERS[decoder]
    g = graphgen.sample_configuration(dd, n, make_rng(trial_seed, 0))
    u = make_rng(trial_seed, 1).random(n)
    order = np.sort(u)

    def ok(m):  # erase the m smallest draws
        y = np.zeros(n, dtype=np.int8)
        if m:
            y[u <= order[m - 1]] = ERASED
        return dec(g, y).resolved_count == n

    lo, hi = 0, n  # ok(lo) holds; find the largest such m
    if ok(hi):
        return 1.0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    # any eps in (order[lo-1], order[lo]] erases exactly lo bits
    return float(order[lo])


def _critical_chunk(dd_dict, n, seeds, decoder):
    dd = DegreeDistribution.from_dict(dd_dict)
    return [_critical_eps(dd, n, s, decoder) for s in seeds]


def empirical_threshold(dd: DegreeDistribution, n: int, instances: int, seed: int,
                        decoder: str = "peel", jobs: int | None = 1) -> tuple[float, np.ndarray]:
    """Median over instances of the largest eps at which the instance fully decodes.

    Each instance fixes a graph and one uniform draw per bit; the erased set at
    eps is ``{i : u_i < eps}``, nested in eps, and decoding success is monotone
    in the erased set, so the critical eps is found exactly by binary search
    over the sorted draws.  Returns the median and the per-instance values.
    """
    if decoder not in DECODERS:
        raise ConfigError(f"decoder must be one of {sorted(DECODERS)}")
    seeds = [derive_seed(seed, t) for t in range(instances)]
    jobs = max(1, min(jobs or _default_jobs(), instances))
    if jobs == 1:
        crit = _critical_chunk(dd.to_dict(), n, seeds, decoder)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(_critical_chunk, dd.to_dict(), n, seeds[i::jobs], decoder)
                    for i in range(jobs)]
            parts = [f.result() for f in futs]
        crit = [None] * instances
        for i, part in enumerate(parts):
            crit[i::jobs] = part
    crit = np.array(crit, dtype=float)
    return float(np.median(crit)), crit
