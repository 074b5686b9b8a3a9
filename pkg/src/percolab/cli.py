"""Command-line front end.

Exit codes: 0 success, 2 bad arguments, 3 resource guard hit, 4 a
containment check found a violation (or a locality check failed).

Estimate CSV files (``estimate``, ``sweep``) start with ``#`` comment lines
holding the schema tag and the run manifest as JSON, followed by a header
row and the data, columns in this fixed order::

    spec,d,p,trials,successes,p_hat,ci_low,ci_high,seed,wall_time

``renorm`` writes ``d,n,M,p,K,density,dependence_radius_checked``.  When
``--out`` is given a ``<out>.manifest.json`` sidecar is written next to the
file; ``percolab replay <manifest>`` re-runs it.  Worker threads come from
``PERCOLAB_THREADS`` and never change results.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import time
from datetime import datetime, timezone
from fractions import Fraction
from importlib import metadata

from . import config as _config
from ._backend import BACKEND
from .estimate import Estimate, estimate_event, estimate_until, exact_probability
from .events import EventSpec, SpecError, parse_event
from .fit import fit_power_law, extremal_pairs, pair_region_radius, ratio_report, schedule
from .lattice import RegionError, ResourceGuardError

EXIT_OK, EXIT_ARGS, EXIT_RESOURCE, EXIT_VIOLATION = 0, 2, 3, 4

ESTIMATE_SCHEMA = "percolab-estimate/1"
RENORM_SCHEMA = "percolab-renorm/1"
ESTIMATE_COLUMNS = ["spec", "d", "p", "trials", "successes", "p_hat", "ci_low", "ci_high",
                    "seed", "wall_time"]
RENORM_COLUMNS = ["d", "n", "M", "p", "K", "density", "dependence_radius_checked"]


class ArgError(Exception):
    pass


class Violation(Exception):
    def __init__(self, payload: str):
        super().__init__("violation")
        self.payload = payload


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# -- argument helpers ------------------------------------------------------------

def _resolve_p(text: str, d: int, settings) -> float:
    if text.strip().lower() in ("pc", "p_c"):
        return settings.threshold(d)
    try:
        p = float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise ArgError(f"bad probability {text!r}") from None
    if not 0 <= p <= 1:
        raise ArgError(f"probability {text!r} outside [0, 1]")
    return p


def _p_list(text: str, d: int, settings) -> list[float]:
    return [_resolve_p(t, d, settings) for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ArgError(f"bad integer list {text!r}") from None


def _event(text: str, settings) -> EventSpec:
    """Parse event text; two_arms without an explicit origin takes the configured policy."""
    spec = parse_event(text)
    if spec.kind == "two_arms" and not re.search(r"\borigin\s*=", text):
        spec = _two_arms(spec.d, spec.get("n"), settings)
    return spec


def _two_arms(d: int, n: int, settings) -> EventSpec:
    return EventSpec.make("two_arms", d, n=n, origin=settings.origin_policy)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


# -- output --------------------------------------------------------------------

class Run:
    """Collects the manifest of one invocation and writes outputs."""

    def __init__(self, args, argv: list[str], settings):
        self.args = args
        self.settings = settings
        self.manifest = {
            "argv": list(argv),
            "command": args.command,
            "seed": getattr(args, "seed", None),
            "config": settings.snapshot(),
            "version": _version(),
            "backend": BACKEND,
            "start": _now(),
            "outputs": [],
        }

    def finish(self, schema: str) -> dict:
        self.manifest["end"] = _now()
        self.manifest["schema"] = schema
        out = getattr(self.args, "out", None)
        if out:
            self.manifest["outputs"] = [os.path.abspath(out)]
        return self.manifest

    def write_csv(self, schema: str, columns: list[str], rows: list[dict],
                  trailer: list[str] = ()) -> None:
        manifest = self.finish(schema)
        buf = io.StringIO()
        buf.write(f"# schema: {schema}\n")
        buf.write(f"# manifest: {json.dumps(manifest, sort_keys=True)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])
        for line in trailer:
            buf.write(f"# {line}\n")
        self._emit(buf.getvalue(), manifest)

    def write_json(self, schema: str, payload: dict) -> str:
        manifest = self.finish(schema)
        text = json.dumps({"schema": schema, "manifest": manifest, **payload}, indent=2,
                          sort_keys=True, default=_json_default) + "\n"
        self._emit(text, manifest)
        return text

    def _emit(self, text: str, manifest: dict) -> None:
        out = getattr(self.args, "out", None)
        if not out:
            sys.stdout.write(text)
            return
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        with open(out + ".manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _json_default(o):
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, EventSpec):
        return str(o)
    if hasattr(o, "item"):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")


def read_estimates(path: str) -> list[dict]:
    """Rows of an estimate CSV (comment lines skipped), numbers converted."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = []
    for r in csv.DictReader(lines):
        rows.append({"spec": r["spec"], "d": int(r["d"]), "p": float(r["p"]),
                     "trials": int(r["trials"]), "successes": int(r["successes"]),
                     "p_hat": float(r["p_hat"]), "ci_low": float(r["ci_low"]),
                     "ci_high": float(r["ci_high"]), "seed": int(r["seed"]),
                     "wall_time": float(r["wall_time"])})
    return rows


# -- estimation plumbing -----------------------------------------------------------

def _run_estimate(spec: EventSpec, p: float, args, settings) -> tuple[Estimate, float]:
    workers = _config.threads(settings)
    kw = dict(chunk=settings.chunk_size, lazy=args.lazy, dense_limit=settings.dense_site_limit)
    conf = args.confidence if args.confidence is not None else settings.confidence
    t0 = time.perf_counter()
    if args.target_width is not None:
        cap = args.max_trials if args.max_trials is not None else 10 * args.trials
        est = estimate_until(spec, p, args.target_width, cap, args.seed, conf,
                             initial=min(args.trials, cap), workers=workers, **kw)
    else:
        est = estimate_event(spec, p, args.trials, args.seed, conf, workers, **kw)
    return est, time.perf_counter() - t0


def _row(est: Estimate, wall: float) -> dict:
    r = est.row()
    r["wall_time"] = round(wall, 3)
    return r


# -- subcommands ---------------------------------------------------------------

def cmd_estimate(args, run: Run) -> int:
    spec = _event(args.event, run.settings)
    p = _resolve_p(args.p, spec.d, run.settings)
    est, wall = _run_estimate(spec, p, args, run.settings)
    run.write_csv(ESTIMATE_SCHEMA, ESTIMATE_COLUMNS, [_row(est, wall)])
    return EXIT_OK


def _sweep_ns(args) -> list[int]:
    if args.n:
        return _int_list(args.n)
    if args.n_min is None or args.n_max is None:
        raise ArgError("sweep needs --n or both --n-min and --n-max")
    return schedule(args.n_min, args.n_max, Fraction(args.ratio))


def cmd_sweep(args, run: Run) -> int:
    settings = run.settings
    if args.trials is None:
        args.trials = settings.sweep_trials
    ns = _sweep_ns(args)
    d = args.d
    p = _resolve_p(args.p, d, settings)
    M = args.M
    ratios = [b / a for a, b in zip(ns, ns[1:])]
    trailer = [f"schedule: {json.dumps(ns)}",
               f"max_ratio: {max(ratios) if ratios else 1}",
               f"ratio_bound_8M: {8 * M}",
               f"ratios_within_bound: {all(r <= 8 * M for r in ratios)}"]
    rows, by_n = [], {}
    if args.family == "two_arms":
        for n in ns:
            est, wall = _run_estimate(_two_arms(d, n, settings), p, args, settings)
            rows.append(_row(est, wall))
    elif args.family == "a2_ratio":
        for n in ns:
            est, wall = _run_estimate(EventSpec.make("a2", d, m=n, n=M * n), p, args, settings)
            rows.append(_row(est, wall))
        low = min(rows, key=lambda r: r["p_hat"])
        trailer.append(f"min_p_hat: {low['p_hat']!r} at {low['spec']} "
                       f"(ci {low['ci_low']!r}, {low['ci_high']!r})")
    else:  # ratio family: A2(n, Mn), two-arms(0, n) and extremal point pairs
        if M < 2:
            raise ArgError("ratio family needs M >= 2")
        for n in ns:
            a2_est, wall = _run_estimate(EventSpec.make("a2", d, m=n, n=M * n), p, args, settings)
            rows.append(_row(a2_est, wall))
            ta_est, wall = _run_estimate(_two_arms(d, n, settings), p, args, settings)
            rows.append(_row(ta_est, wall))
            pair_ests = []
            for x, y in extremal_pairs(d, n):
                spec = EventSpec.make("point_pair", d, x=x, y=y, r=pair_region_radius(n, M))
                e, wall = _run_estimate(spec, p, args, settings)
                rows.append(_row(e, wall))
                pair_ests.append(e)
            by_n[n] = (a2_est, ta_est, min(pair_ests, key=lambda e: e.p_hat))
        report = ratio_report(ns, d, *[[by_n[n][i] for n in ns] for i in range(3)])
        for pt in report:
            trailer.append("ratio: " + json.dumps(pt.__dict__))
    run.write_csv(ESTIMATE_SCHEMA, ESTIMATE_COLUMNS, rows, trailer)
    return EXIT_OK


def cmd_verify(args, run: Run) -> int:
    from .verify import run_check

    p_grid = _p_list(args.p, args.d, run.settings) if args.check != "inclusions" else []
    summary = run_check(args.check, args.d, args.n, args.M, p_grid, args.trials, args.seed,
                        fault=args.inject_fault, r=args.r, R=args.R)
    text = run.write_json("percolab-verify/1", summary.to_dict())
    if summary.violations:
        raise Violation(text if args.out else "")
    return EXIT_OK


def cmd_fit(args, run: Run) -> int:
    rows = read_estimates(args.input)
    if not rows:
        raise ArgError(f"no estimate rows in {args.input}")
    specs = [parse_event(r["spec"]) for r in rows]
    if args.kind:
        keep = [(s, r) for s, r in zip(specs, rows) if s.kind == args.kind]
    else:
        keep = list(zip(specs, rows))
    kinds = {s.kind for s, _ in keep}
    if len(kinds) != 1:
        raise ArgError(f"fit needs rows of one event kind (found {sorted(kinds)}); use --kind")
    d = keep[0][0].d
    # a2_ratio rows are indexed by the inner scale m
    size = (lambda s: s.get("m")) if kinds == {"a2"} else (lambda s: s.get("n"))
    points = []
    for s, r in keep:
        sigma = math.sqrt(r["p_hat"] * (1 - r["p_hat"]) / r["trials"])
        points.append((size(s), r["p_hat"], sigma, r["ci_high"]))
    result = fit_power_law(points, d=d)
    payload = result.to_dict()
    payload["input"] = os.path.abspath(args.input)
    run.write_json("percolab-fit/1", payload)
    return EXIT_OK


def cmd_enumerate(args, run: Run) -> int:
    spec = _event(args.event, run.settings)
    if args.p.strip().lower() in ("pc", "p_c"):
        q = Fraction(run.settings.threshold(spec.d))
    else:
        try:
            q = Fraction(args.p.strip())
        except (ValueError, ZeroDivisionError):
            raise ArgError(f"bad probability {args.p!r}") from None
    guard = args.guard if args.guard is not None else run.settings.enumeration_guard
    try:
        val = exact_probability(spec, q, guard=guard)
    except ValueError as exc:
        if isinstance(exc, SpecError):
            raise
        raise ArgError(str(exc)) from None
    print(str(val))
    if args.float:
        print(repr(float(val)))
    return EXIT_OK


def cmd_renorm(args, run: Run) -> int:
    from .renorm import locality_check, sample_field

    settings = run.settings
    p = _resolve_p(args.p, args.d, settings)
    n, M, K = args.n, args.M, args.K
    if n < 1 or M < 2 or K < 0:
        raise ArgError("need n >= 1, M >= 2, K >= 0")
    dens = []
    for t in range(args.trials):
        f = sample_field(args.d, K, n, M, p, args.seed, t, dense_limit=settings.dense_site_limit,
                         lazy=False if not args.lazy else None)
        dens.append(f.density)
    changed = locality_check(args.d, n, M, p, args.seed, args.locality_trials)
    row = {"d": args.d, "n": n, "M": M, "p": p, "K": K,
           "density": sum(dens) / len(dens) if dens else float("nan"),
           "dependence_radius_checked": 32 * M if changed == 0 else -1}
    trailer = [f"locality_trials: {args.locality_trials}", f"locality_changes: {changed}"]
    run.write_csv(RENORM_SCHEMA, RENORM_COLUMNS, [row], trailer)
    if changed:
        raise Violation("")
    return EXIT_OK


def cmd_replay(args, run: Run) -> int:
    with open(args.manifest, encoding="utf-8") as fh:
        manifest = json.load(fh)
    argv = list(manifest["argv"])
    if args.out:
        if "--out" in argv:
            argv[argv.index("--out") + 1] = args.out
        else:
            argv += ["--out", args.out]
    return main(argv)


# -- parser --------------------------------------------------------------------

def _add_estimation(sp, trials_default: int | None) -> None:
    sp.add_argument("--trials", type=int, default=trials_default,
                    help="trials per estimate (initial batch with --target-width)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--confidence", type=float, default=None,
                    help="confidence level of the Wilson interval (config default 0.95)")
    sp.add_argument("--target-width", type=float, default=None,
                    help="keep adding trials until (ci_high - ci_low) / p_hat <= this")
    sp.add_argument("--max-trials", type=int, default=None,
                    help="hard trial cap for --target-width (default 10 x --trials)")
    sp.add_argument("--lazy", action="store_true",
                    help="sample sites on demand instead of materializing the support")
    sp.add_argument("--out", help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="percolab", description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", help="INI file overriding the packaged defaults")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("estimate", help="estimate the probability of one event")
    sp.add_argument("--event", required=True, help='event text, e.g. "two_arms(d=2,n=8)"')
    sp.add_argument("--p", required=True, help="site density, a number or 'pc'")
    _add_estimation(sp, 10_000)

    sp = sub.add_parser("sweep", help="estimate an event family over a schedule of n")
    sp.add_argument("--family", choices=("two_arms", "a2_ratio", "ratio"), required=True,
                    help="two_arms(0,n); A2(n,Mn); or the A2/two-arms/point-pair ratio report")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--p", required=True)
    sp.add_argument("--M", type=int, default=2)
    sp.add_argument("--n", help="comma-separated n values (overrides the schedule)")
    sp.add_argument("--n-min", type=int)
    sp.add_argument("--n-max", type=int)
    sp.add_argument("--ratio", default="2", help="schedule ratio (rational allowed)")
    _add_estimation(sp, None)

    sp = sub.add_parser("verify", help="run a containment check on sampled configurations")
    sp.add_argument("--check", required=True,
                    choices=("gluing", "good_gluing", "annulus", "subface", "inclusions"))
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--M", type=int, default=2)
    sp.add_argument("--p", default="0.3,0.5,0.7", help="comma-separated p grid")
    sp.add_argument("--trials", type=int, default=1000, help="configurations per p")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--r", type=int, default=None, help="inner radius for the annulus check")
    sp.add_argument("--R", type=int, default=None, help="outer radius for the annulus check")
    sp.add_argument("--out")
    sp.add_argument("--inject-fault", choices=("a2-false", "crossing-false"), default=None,
                    help=argparse.SUPPRESS)

    sp = sub.add_parser("fit", help="fit a power law to a sweep CSV")
    sp.add_argument("--input", required=True)
    sp.add_argument("--kind", help="only fit rows of this event kind")
    sp.add_argument("--out")

    sp = sub.add_parser("enumerate", help="exact probability by exhaustive enumeration")
    sp.add_argument("--event", required=True)
    sp.add_argument("--p", required=True, help="rational, e.g. 1/2 or 0.25")
    sp.add_argument("--guard", type=int, default=None, help="maximum support size")
    sp.add_argument("--float", action="store_true", help="also print the float value")

    sp = sub.add_parser("renorm", help="density and locality of the good-point field")
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--M", type=int, default=2)
    sp.add_argument("--K", type=int, default=2, help="coarse window radius")
    sp.add_argument("--p", required=True)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--locality-trials", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--lazy", action="store_true")
    sp.add_argument("--out")

    sp = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out", help="write to this path instead of the recorded one")
    return ap


COMMANDS = {"estimate": cmd_estimate, "sweep": cmd_sweep, "verify": cmd_verify,
            "fit": cmd_fit, "enumerate": cmd_enumerate, "renorm": cmd_renorm,
            "replay": cmd_replay}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        settings = _config.load(args.config)
        for name in ("trials", "locality_trials"):
            if getattr(args, name, 1) is not None and getattr(args, name, 1) < 1:
                raise ArgError(f"--{name.replace('_', '-')} must be >= 1")
        return COMMANDS[args.command](args, Run(args, argv, settings))
    except Violation as exc:
        if exc.payload:
            sys.stderr.write(exc.payload)
        print("percolab: violation found", file=sys.stderr)
        return EXIT_VIOLATION
    except ResourceGuardError as exc:
        print(f"percolab: resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ArgError, SpecError, RegionError, ValueError, OSError) as exc:
        print(f"percolab: error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
