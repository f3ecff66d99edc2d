"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import de_coupled, de_uncoupled, harness, polar, potential
from .ensemble import DegreeDistribution, EnsembleError, make_regular

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _depths(text: str) -> list[int]:
    a, sep, b = text.partition("..")
    try:
        return list(range(int(a), int(b) + 1)) if sep else [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad depth range {text!r}; use a..b or a,b,c") from None


def _eps_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from None


def _dd_args(p):
    p.add_argument("--dd", help="degree distribution JSON file")
    p.add_argument("--dl", type=int)
    p.add_argument("--dr", type=int)


def _dd_from(args) -> DegreeDistribution:
    if args.dd:
        try:
            return DegreeDistribution.load(args.dd)
        except OSError as exc:
            raise _ArgError(f"cannot read {args.dd}: {exc}") from exc
    if args.dl is None or args.dr is None:
        raise _ArgError("give --dd FILE or both --dl and --dr")
    return make_regular(args.dl, args.dr)


def _globals(defaults: bool) -> argparse.ArgumentParser:
    # sub-commands repeat the global flags without defaults so they never
    # overwrite values given before the sub-command name
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=d(0), help="base seed (default 0)")
    p.add_argument("--out", default=d(None), help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=d("csv"))
    p.add_argument("--jobs", type=int, default=d(None), help="worker processes")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _globals(False)
    ap = _Parser(prog="erasurebench", parents=[_globals(True)],
                 description="Erasure-channel coding workbench")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    pol = sub.add_parser("polar", help="polar codes").add_subparsers(dest="action", required=True)
    c = pol.add_parser("construct", parents=[common])
    c.add_argument("--depth", type=int, required=True)
    c.add_argument("--eps", type=float, required=True)
    c.add_argument("--rate", type=float, required=True)
    s = pol.add_parser("sim", parents=[common])
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--rate", type=float, default=0.5)
    s.add_argument("--trials", type=int, required=True)
    for parent in (pol, sub):
        sc = parent.add_parser("scaling", parents=[common])
        sc.add_argument("--eps", type=float, default=0.5)
        sc.add_argument("--target", type=float, default=1e-3)
        sc.add_argument("--depths", type=_depths, default=_depths("10..24"))

    ld = sub.add_parser("ldpc", help="LDPC Monte Carlo").add_subparsers(dest="action", required=True)
    s = ld.add_parser("sim", parents=[common])
    _dd_args(s)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--eps", type=_eps_list, required=True)
    s.add_argument("--trials", type=int, required=True)
    s.add_argument("--decoder", choices=sorted(harness.DECODERS), default="bp")
    s = ld.add_parser("threshold", parents=[common], help="finite-length empirical threshold")
    _dd_args(s)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--instances", type=int, default=50)

    cp = sub.add_parser("coupled", help="coupled DE").add_subparsers(dest="action", required=True)
    for name in ("run", "threshold", "wave-speed", "sim"):
        q = cp.add_parser(name, parents=[common])
        q.add_argument("--L", type=int, required=True)
        q.add_argument("--w", type=int, required=True)
        q.add_argument("--dl", type=int, default=3)
        q.add_argument("--dr", type=int, default=6)
        if name in ("run", "wave-speed"):
            q.add_argument("--eps", type=float, required=True)
        if name == "run":
            q.add_argument("--dump-every", type=int, default=0)
        if name == "threshold":
            q.add_argument("--tol", type=float, default=1e-5)
        if name == "sim":
            q.add_argument("--M", type=int, required=True)
            q.add_argument("--eps", type=_eps_list, required=True)
            q.add_argument("--trials", type=int, required=True)

    de = sub.add_parser("de", help="uncoupled DE").add_subparsers(dest="action", required=True)
    q = de.add_parser("run", parents=[common])
    _dd_args(q)
    q.add_argument("--eps", type=float, required=True)
    q = de.add_parser("threshold", parents=[common])
    _dd_args(q)
    q.add_argument("--tol", type=float, default=1e-6)
    q = de.add_parser("exit-curve", parents=[common])
    _dd_args(q)
    q.add_argument("--grid", type=int, default=1000)

    po = sub.add_parser("potential", help="potential functions").add_subparsers(
        dest="action", required=True)
    q = po.add_parser("scan", parents=[common])
    q.add_argument("--dl", type=int, required=True)
    q.add_argument("--dr", type=int, required=True)
    q.add_argument("--eps", type=float, required=True)
    q.add_argument("--grid", type=int, default=1000)
    q = po.add_parser("area-threshold", parents=[common])
    q.add_argument("--dl", type=int, required=True)
    q.add_argument("--dr", type=int, required=True)

    q = sub.add_parser("run", parents=[common], help="run a JSON experiment config")
    q.add_argument("config")
    return ap


def _table(header, rows, fmt) -> str:
    if fmt == "json":
        return json.dumps([dict(zip(header, r)) for r in rows], indent=2,
                          default=lambda o: o.item() if isinstance(o, np.generic) else str(o)) + "\n"
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _write(text: str, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


POLAR_HEADER = ("depth", "eps", "k", "bound", "empirical_block_err", "trials", "seed")


def _dispatch(args) -> str | None:
    fmt = args.format
    if args.cmd == "polar" and args.action == "construct":
        spec = polar.construct(args.depth, args.eps, int(round(args.rate * (1 << args.depth))))
        return _table(POLAR_HEADER, [(args.depth, args.eps, spec.k,
                                      polar.block_error_bound(spec), "", 0, args.seed)], fmt)
    if args.cmd == "polar" and args.action == "sim":
        spec = polar.construct(args.depth, args.eps, int(round(args.rate * (1 << args.depth))))
        fails, trials = polar.simulate(spec, args.eps, args.trials, args.seed)
        return _table(POLAR_HEADER, [(args.depth, args.eps, spec.k, polar.block_error_bound(spec),
                                      fails / trials, trials, args.seed)], fmt)
    if args.cmd == "scaling" or (args.cmd == "polar" and args.action == "scaling"):
        res = polar.scaling_exponent(args.eps, args.target, args.depths)
        rows = [(int(d), args.eps, int(k), "", "", 0, args.seed) for d, k in zip(res.depths, res.ks)]
        text = _table(POLAR_HEADER, rows, fmt)
        sys.stderr.write(f"mu = {res.mu:.4f}\n")
        return text
    if args.cmd == "ldpc" and args.action == "sim":
        _dd_from(args)  # validate early
        params = {"n": args.n, "decoder": args.decoder}
        params.update({"dd_file": args.dd} if args.dd else {"dl": args.dl, "dr": args.dr})
        cfg = harness.ExperimentConfig("ldpc-sim", params, tuple(args.eps), args.trials,
                                       args.seed, args.out, args.jobs)
        return harness.emit(harness.run_experiment(cfg), None, fmt)
    if args.cmd == "ldpc" and args.action == "threshold":
        med, crit = harness.empirical_threshold(_dd_from(args), args.n, args.instances,
                                                args.seed, jobs=args.jobs)
        return _table(("n", "instances", "median_eps", "mean_eps", "seed"),
                      [(args.n, args.instances, med, float(crit.mean()), args.seed)], fmt)
    if args.cmd == "coupled":
        return _coupled(args, fmt)
    if args.cmd == "de":
        dd = _dd_from(args)
        if args.action == "run":
            x, traj = de_uncoupled.de_iterate(dd, args.eps)
            return _table(("iter", "x", "y"), [(s.iteration, s.x, s.y) for s in traj], fmt)
        if args.action == "threshold":
            return _table(("bp_threshold",), [(de_uncoupled.bp_threshold(dd, args.tol),)], fmt)
        pts = de_uncoupled.exit_curve(dd, args.grid)
        return _table(("x", "epsilon", "exit", "stability"), [tuple(p) for p in pts], fmt)
    if args.cmd == "potential":
        if args.action == "scan":
            prof = potential.potential_profile(args.eps, args.dl, args.dr, args.grid)
            return _table(("x", "U", "dU"), list(zip(prof.x, prof.U, prof.dU)), fmt)
        a = potential.area_threshold(args.dl, args.dr)
        b = potential.area_threshold_exit(args.dl, args.dr)
        return _table(("area_threshold", "exit_cross_check"), [(a, b)], fmt)
    if args.cmd == "run":
        cfg = harness.ExperimentConfig.load(args.config)
        if args.jobs:
            cfg = harness.ExperimentConfig(**{**cfg.__dict__, "jobs": args.jobs})
        res = harness.run_experiment(cfg)
        return harness.emit(res, None, fmt)
    raise _ArgError("unknown command")  # pragma: no cover


def _coupled(args, fmt) -> str:
    if args.action == "run":
        rows = []
        step = args.dump_every
        x = np.ones(args.L)
        res = de_coupled.coupled_de_run(args.L, args.w, args.dl, args.dr, args.eps)
        if step:
            gen = de_coupled.coupled_de_trajectory(args.L, args.w, args.dl, args.dr, args.eps, x)
            for it, xs in enumerate(gen, start=1):
                if it % step == 0 or it == res.iterations:
                    rows += [(it, i, v) for i, v in enumerate(xs)]
                if it >= res.iterations:
                    break
        else:
            rows = [(res.iterations, i, v) for i, v in enumerate(res.fixed_point.values)]
        sys.stderr.write(f"decoded = {res.decoded}, iterations = {res.iterations}\n")
        return _table(("iter", "pos", "x"), rows, fmt)
    if args.action == "threshold":
        thr = de_coupled.coupled_threshold(args.L, args.w, args.dl, args.dr, args.tol)
        return _table(("L", "w", "dl", "dr", "threshold"), [(args.L, args.w, args.dl, args.dr, thr)],
                      fmt)
    if args.action == "wave-speed":
        v = de_coupled.wave_speed(args.L, args.w, args.dl, args.dr, args.eps)
        return _table(("L", "w", "eps", "speed"), [(args.L, args.w, args.eps, v)], fmt)
    params = {"dl": args.dl, "dr": args.dr, "L": args.L, "w": args.w, "M": args.M}
    cfg = harness.ExperimentConfig("coupled-sim", params, tuple(args.eps), args.trials,
                                   args.seed, args.out, args.jobs)
    return harness.emit(harness.run_experiment(cfg), None, fmt)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = _dispatch(args)
    except (_ArgError, harness.ConfigError, EnsembleError, polar.PolarError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        sys.stderr.write(f"runtime error: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME
    try:
        _write(text, args.out)
    except OSError as exc:
        sys.stderr.write(f"runtime error: {exc}\n")
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
