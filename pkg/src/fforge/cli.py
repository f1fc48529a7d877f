"""Command-line front end.

Exit codes: 0 success, 2 bad input, 3 evaluation or integration failure,
4 a surviving non-flat Finslerian Ricci-flat draw, 5 an invariant failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from collections import Counter
from typing import Any, Callable, Sequence

import numpy as np

from fforge import __version__, checks, core, corpus, geodesics, report, so3
from fforge.core import LocalGeometry, SamplePoint
from fforge.dsl import DslError, GeometrySpec, parse_geometry, parse_kprofile, validate
from fforge.jets import HESSIAN_CONFIG, JetError
from fforge.sampling import GENERATOR, SampleBox, domain_samples, sign_for

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3
EXIT_THEOREM = 4
EXIT_INVARIANT = 5

WHICH = ("metric", "cartan", "spray", "curvature", "ricci", "landsberg", "vacuum-residual")
COLUMNS = ("t", "r", "theta", "phi", "dt", "dr", "dtheta", "dphi")
EXPECTED_TAG = {
    "class1-I": (so3.POWER_LAW, "I"),
    "class1-II": (so3.POWER_LAW, "II"),
    "class1-III": (so3.POWER_LAW, "III"),
    "class2": (so3.EXPONENTIAL, ""),
    "class3": (so3.ONE_VARIABLE, ""),
    "group2": (so3.GROUP_II, ""),
}


class InputError(Exception):
    pass


class Failure(Exception):
    """Raised by a command to exit with a specific nonzero code after writing its report."""

    def __init__(self, code: int, message: str, payload: dict | None = None, as_csv=None):
        super().__init__(message)
        self.code = code
        self.payload = payload
        self.as_csv = as_csv


# --- input helpers -----------------------------------------------------------------


def _load_text(ref: str | None, suffix: str) -> str:
    if not ref:
        raise InputError("--input is required")
    try:
        return corpus.resolve_text(ref, suffix)[0]
    except OSError as exc:
        raise InputError(f"cannot read {ref}: {exc}") from exc


def load_spec(ref: str | None) -> GeometrySpec:
    try:
        spec = parse_geometry(_load_text(ref, ".geom"))
    except DslError as exc:
        raise InputError(f"{ref}: {exc}") from exc
    diags = validate(spec)
    if diags:
        raise InputError("\n".join(f"{ref}: {d}" for d in diags))
    return spec


def load_kprofile(ref: str | None):
    try:
        src = parse_kprofile(_load_text(ref, ".kprof"))
    except DslError as exc:
        raise InputError(f"{ref}: {exc}") from exc
    diags = src.diagnostics()
    if diags:
        raise InputError("\n".join(f"{ref}: {d}" for d in diags))
    if not src.points:
        raise InputError(f"{ref}: no 'point:' lines")
    return src


def parse_state(text: str, what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise InputError(f"{what}: {exc}") from exc
    if len(vals) != 8 or not all(math.isfinite(v) for v in vals):
        raise InputError(f"{what} needs 8 finite comma-separated numbers (t, r, theta, phi, dt, dr, dtheta, dphi)")
    return vals


def _box(args) -> SampleBox:
    if not args.r_min < args.r_max:
        raise InputError("--r-min must be smaller than --r-max")
    return SampleBox(r=(args.r_min, args.r_max))


def _samples(args, spec: GeometrySpec) -> list[SamplePoint]:
    if args.point:
        pts = [SamplePoint.from_values(parse_state(p, "--point")) for p in args.point]
        for s in pts:
            core.require_domain(spec, s)
        return pts
    if args.samples < 1:
        raise InputError("--samples must be at least 1")
    return domain_samples(spec, args.samples, args.seed, _box(args), sign_for(spec, args.timelike))


# --- eval ----------------------------------------------------------------------------


def _eval_sample(spec: GeometrySpec, s: SamplePoint, which: Sequence[str]) -> dict:
    geo = LocalGeometry(spec, s)
    out: dict[str, Any] = {"sample": s.values, "L": float(geo.L.value)}
    if "metric" in which:
        m = geo.metric
        out["metric"] = {
            "g": report.labelled(m.g, "g_{}_{}"),
            "det_g": m.det_g,
            "signature": list(m.signature),
        }
    if "cartan" in which:
        c = geo.cartan
        out["cartan"] = {
            "C": report.labelled(c.C, "C_{}_{}_{}"),
            "C_trace": report.labelled(c.C_trace, "C_{}"),
            "C_trace_logdet": report.labelled(c.C_trace_logdet, "C_{}"),
        }
    if "spray" in which:
        sp = geo.spray
        out["spray"] = {"G": report.labelled(sp.G, "G^{}"), "N": report.labelled(sp.N, "N^{}_{}")}
    if "curvature" in which:
        cv = geo.curvature
        out["curvature"] = {"R": report.labelled(cv.Rabc, "R^{}_{}_{}"), "scale": cv.scale}
    if "ricci" in which:
        out["ricci"] = {"R": geo.curvature.ricci, "normalized": core.normalized_ricci(geo)}
    if "landsberg" in which:
        ls = geo.landsberg
        out["landsberg"] = {
            "S_trace": report.labelled(ls.S_trace, "S_{}"),
            "scale": ls.scale,
            "S": report.labelled(ls.S, "S_{}_{}_{}"),
        }
    if "vacuum-residual" in which:
        trace, ricci_term, scale = core.vacuum_terms(LocalGeometry(spec, s, HESSIAN_CONFIG))
        out["vacuum_residual"] = {
            "residual": trace - ricci_term,
            "normalized": abs(trace - ricci_term) / scale if scale > 0 else abs(trace - ricci_term),
            "hessian_trace": trace,
            "ricci_term": ricci_term,
        }
    return out


def cmd_eval(args) -> tuple[dict, Callable[[], str]]:
    spec = load_spec(args.input)
    which = _which(args.which)
    samples = _samples(args, spec)
    items = []
    for i, s in enumerate(samples):
        items.append({"index": i, **_eval_sample(spec, s, which)})
    summary: dict[str, Any] = {"samples": len(items)}
    if "ricci" in which:
        summary["max_normalized_ricci"] = max(it["ricci"]["normalized"] for it in items)
        summary["max_abs_ricci"] = max(abs(it["ricci"]["R"]) for it in items)
    if "vacuum-residual" in which:
        summary["max_normalized_vacuum_residual"] = max(it["vacuum_residual"]["normalized"] for it in items)
    if args.tol is not None:
        worst = [v for k, v in summary.items() if k.startswith("max_normalized")]
        summary["within_tol"] = all(v < args.tol for v in worst)
    results = {"summary": summary, "items": items}

    def as_csv() -> str:
        rows = []
        for it in items:
            for key, value in _flatten(it, ""):
                if key in ("index",) or key.startswith("sample"):
                    continue
                rows.append([it["index"], *it["sample"], key, value])
        return report.csv_text(["index", *COLUMNS, "quantity", "value"], rows)

    return _envelope(args, "eval", spec.name, results), as_csv


def _which(text: str) -> list[str]:
    which = [w.strip() for w in text.split(",") if w.strip()]
    bad = [w for w in which if w not in WHICH]
    if bad or not which:
        raise InputError(f"--which accepts {', '.join(WHICH)}; got {text!r}")
    return which


def _flatten(obj, prefix):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else k)
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


# --- classify ------------------------------------------------------------------------


def _classify_point(k: so3.KProfile, tol: float) -> dict:
    klass = so3.classify(k, tol)
    p = so3.curvature_profile(k)
    out: dict[str, Any] = {
        "point": list(k.point),
        "tag": klass.tag,
        "group": klass.group,
        "subcase": klass.subcase,
        "reason": klass.reason,
        "witness": dict(klass.witness),
        "curvature_coefficients": {f"a{i}": p[i] for i in range(1, 15)},
        "ricci_coefficients": vars(so3.ricci_coefficients(p)),
    }
    try:
        q = so3.abc(k)
    except so3.K10Zero:
        out.update(abc=None, discriminants=None, metrizability_residuals=None, lemma2_i=None)
    else:
        lem = so3.lemma2_checks(k, p, q, 0.0, 0.0)
        out.update(
            abc={"a": q.a, "b": q.b, "c": q.c},
            discriminants=so3.discriminants(p, q).as_dict(),
            metrizability_residuals=[float(v) for v in so3.metrizability_residuals(p, q)],
            lemma2_i=float(lem.residuals[0]),
            lemma2_applicable=lem.applicable,
        )
    v = so3.birkhoff_verdict(k, tol)
    out["verdict"] = {"outcome": v.outcome, "trace": v.fired_case}
    return out


def cmd_classify(args) -> tuple[dict, Callable[[], str]]:
    src = load_kprofile(args.input)
    tol = args.tol if args.tol is not None else so3.CLASS_TOLERANCE
    items = [_classify_point(k, tol) for k in so3.profiles_from_source(src)]
    results = {"tolerance": tol, "items": items}

    def as_csv() -> str:
        rows = []
        for it in items:
            d = it["discriminants"] or {}
            rows.append([*it["point"], it["tag"], it["subcase"], d.get("D", ""), d.get("E", ""), d.get("F", ""),
                         "" if it["lemma2_i"] is None else it["lemma2_i"], it["verdict"]["outcome"]])
        return report.csv_text(["t", "r", "tag", "subcase", "D", "E", "F", "lemma2_i", "verdict"], rows)

    return _envelope(args, "classify", src.name, results), as_csv


# --- birkhoff --------------------------------------------------------------------------


def scan_kind(kind: str, draws: int, rng: np.random.Generator, tol: float) -> dict:
    expected = EXPECTED_TAG[kind]
    hist: Counter = Counter()
    survivors = pointwise = mismatches = 0
    traces: list[str] = []
    survivor_points: list[dict] = []
    cite_minus_one = True
    for _ in range(draws):
        k = so3.draw_profile(kind, rng)
        v = so3.birkhoff_verdict(k, tol)
        hist[v.outcome] += 1
        if (v.klass.tag, v.klass.subcase) != expected:
            mismatches += 1
        independent = so3.pointwise_survivor(k)
        pointwise += independent
        if v.survivor_candidate or independent:
            survivors += 1
            if len(survivor_points) < 5:
                survivor_points.append({"k": k.k, "dk_dt": k.dk_dt, "dk_dr": k.dk_dr, "trace": v.fired_case})
        if kind == "group2":
            cite_minus_one &= "-1 != 0" in v.fired_case
        if len(traces) < 3 and v.fired_case not in traces:
            traces.append(v.fired_case)
    out = {
        "kind": kind,
        "draws": draws,
        "histogram": dict(sorted(hist.items())),
        "survivors": survivors,
        "pointwise_survivors": pointwise,
        "class_mismatches": mismatches,
        "trace_examples": traces,
    }
    if kind == "group2":
        out["all_cite_minus_one"] = cite_minus_one
    if survivor_points:
        out["survivor_examples"] = survivor_points
    return out


def cmd_birkhoff(args) -> tuple[dict, Callable[[], str]]:
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    bad = [k for k in kinds if k not in so3.DRAW_KINDS]
    if bad or not kinds:
        raise InputError(f"--kinds accepts {', '.join(so3.DRAW_KINDS)}; got {args.kinds!r}")
    if args.draws < 1 or args.group2_draws < 1:
        raise InputError("draw counts must be at least 1")
    tol = args.tol if args.tol is not None else so3.CLASS_TOLERANCE
    streams = np.random.SeedSequence(args.seed).spawn(len(so3.DRAW_KINDS))
    scans = []
    for kind in kinds:
        rng = np.random.default_rng(streams[so3.DRAW_KINDS.index(kind)])
        n = args.group2_draws if kind == "group2" else args.draws
        scans.append(scan_kind(kind, n, rng, tol))
    files = []
    if args.input:
        src = load_kprofile(args.input)
        for k in so3.profiles_from_source(src):
            v = so3.birkhoff_verdict(k, tol)
            files.append({"point": list(k.point), "tag": v.klass.tag, "outcome": v.outcome, "trace": v.fired_case,
                          "survivor": bool(v.survivor_candidate or so3.pointwise_survivor(k))})
    survivors = sum(s["survivors"] for s in scans) + sum(f["survivor"] for f in files)
    results = {
        "generator": "numpy.random.default_rng(SeedSequence(seed).spawn(6)[kind])",
        "tolerance": tol,
        "scans": scans,
        "profiles": files,
        "total_draws": sum(s["draws"] for s in scans),
        "survivors": survivors,
        "zero_survivors": survivors == 0,
    }

    def as_csv() -> str:
        outcomes = sorted({o for s in scans for o in s["histogram"]})
        rows = [[s["kind"], s["draws"], *[s["histogram"].get(o, 0) for o in outcomes], s["survivors"]] for s in scans]
        return report.csv_text(["kind", "draws", *outcomes, "survivors"], rows)

    env = _envelope(args, "birkhoff", None, results)
    if survivors:
        raise Failure(EXIT_THEOREM, f"{survivors} draw(s) survive as non-flat Finslerian Ricci-flat", env, as_csv)
    return env, as_csv


# --- geodesic --------------------------------------------------------------------------


def cmd_geodesic(args) -> tuple[dict, Callable[[], str]]:
    spec = load_spec(args.input)
    circular = None
    if args.preset == "circular":
        if args.radius <= 0:
            raise InputError("--radius must be positive")
        init = geodesics.circular_orbit_state(spec, args.radius)
        omega = init.xdot[3]
        period = 2 * math.pi / abs(omega)
        circular = {"radius": args.radius, "omega": omega, "period": period}
    elif args.initial:
        vals = parse_state(args.initial, "--initial")
        init = geodesics.make_state(spec, 0.0, vals[:4], vals[4:])
    else:
        raise InputError("give --initial or --preset circular")
    tau_max = args.tau_max
    if tau_max is None:
        tau_max = circular["period"] * args.revolutions if circular else 10.0
    try:
        cfg = geodesics.IntegratorConfig(
            method=args.method, step=args.step, rel_tol=args.rtol, abs_tol=args.atol,
            max_steps=args.max_steps, tau_max=tau_max,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    traj = geodesics.integrate(spec, init, cfg)
    states = traj.states
    summary: dict[str, Any] = {
        "termination": traj.termination,
        "diagnostics": traj.diagnostics,
        "method": cfg.method,
        "steps": len(states) - 1,
        "tau_end": states[-1].tau,
        "initial": dict(zip(("tau", *COLUMNS, "L"), states[0].row)),
        "final": dict(zip(("tau", *COLUMNS, "L"), states[-1].row)),
        "L_drift": traj.L_drift(),
    }
    try:
        summary["proper_time"] = geodesics.proper_time(traj)
    except geodesics.SignChange as exc:
        summary["proper_time"] = None
        summary["proper_time_note"] = str(exc)
    if circular:
        radii = np.array([s.x[1] for s in states])
        circular["radial_drift"] = float(np.max(np.abs(radii - args.radius)) / args.radius)
        circular["revolutions"] = (states[-1].tau - states[0].tau) / circular["period"]
        summary["circular"] = circular

    def as_csv() -> str:
        return report.csv_text(["tau", *COLUMNS, "L"], (s.row for s in states))

    if args.trajectory:
        _write(args.trajectory, as_csv())
    return _envelope(args, "geodesic", spec.name, summary), as_csv


# --- check -------------------------------------------------------------------------------


def cmd_check(args) -> tuple[dict, Callable[[], str]]:
    spec = load_spec(args.input)
    tol = checks.Tolerances.uniform(args.tol) if args.tol is not None else checks.Tolerances()
    if args.samples < 1:
        raise InputError("--samples must be at least 1")
    sign = sign_for(spec, args.timelike)
    samples = domain_samples(spec, args.samples, args.seed, _box(args), sign)
    results = checks.run_suite(spec, samples, args.seed, tol, args.berwald_points, sign=sign)
    failures = [r.name for r in results if not r.passed]
    payload = {"samples": len(samples), "invariants": [r.as_dict() for r in results],
               "failures": failures, "all_passed": not failures}

    def as_csv() -> str:
        return report.csv_text(["invariant", "passed", "worst", "tolerance"],
                               ([r.name, r.passed, r.worst, r.tolerance] for r in results))

    env = _envelope(args, "check", spec.name, payload)
    if failures:
        raise Failure(EXIT_INVARIANT, "invariant failures: " + ", ".join(failures), env, as_csv)
    return env, as_csv


# --- plumbing ------------------------------------------------------------------------------


def _envelope(args, command: str, spec_name: str | None, results: Any) -> dict:
    config = {k: v for k, v in sorted(vars(args).items())
              if k not in ("func", "output", "format", "timing", "trajectory")}
    config["sampler"] = GENERATOR
    return report.envelope(command, spec_name, config, results)


def _write(path: str | None, text: str):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _common(p: argparse.ArgumentParser, samples: int = 10):
    p.add_argument("--input", help="geometry or k-profile file, or corpus:NAME for a bundled file")
    p.add_argument("--samples", type=int, default=samples, help="number of seeded samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=None, help="tolerance override")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", help="write the report here instead of standard output")
    p.add_argument("--timing", action="store_true", help="include wall-clock time (breaks byte-identity)")


def _sampling(p: argparse.ArgumentParser):
    p.add_argument("--r-min", type=float, default=2.0)
    p.add_argument("--r-max", type=float, default=10.0)
    p.add_argument("--timelike", action="store_true", help="keep samples with L of the timelike sign")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fforge", description="Finsler geometry workbench")
    parser.add_argument("--version", action="version", version=f"fforge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="tensors and residuals at samples")
    _common(p)
    _sampling(p)
    p.add_argument("--which", default="metric,spray,ricci", help=f"comma list from {', '.join(WHICH)}")
    p.add_argument("--point", action="append", help="explicit sample t,r,theta,phi,dt,dr,dtheta,dphi (repeatable)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("classify", help="class tag of each point of a k-profile file")
    _common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("birkhoff", help="seeded scan of random metrizable profiles")
    _common(p)
    p.add_argument("--kinds", default=",".join(so3.DRAW_KINDS))
    p.add_argument("--draws", type=int, default=1000, help="draws per class kind")
    p.add_argument("--group2-draws", type=int, default=200)
    p.set_defaults(func=cmd_birkhoff)

    p = sub.add_parser("geodesic", help="integrate one geodesic")
    _common(p)
    p.add_argument("--initial", help="t,r,theta,phi,dt,dr,dtheta,dphi")
    p.add_argument("--preset", choices=("circular",))
    p.add_argument("--radius", type=float, default=6.0)
    p.add_argument("--revolutions", type=float, default=1.0)
    p.add_argument("--method", choices=("rk45-adaptive", "rk4-fixed"), default="rk45-adaptive")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--tau-max", type=float, default=None)
    p.add_argument("--rtol", type=float, default=1e-11)
    p.add_argument("--atol", type=float, default=1e-13)
    p.add_argument("--max-steps", type=int, default=200_000)
    p.add_argument("--trajectory", help="also write the trajectory CSV here")
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("check", help="invariant suite")
    _common(p, samples=8)
    _sampling(p)
    p.add_argument("--berwald-points", type=int, default=3)
    p.set_defaults(func=cmd_check)
    return parser


def _emit(args, env: dict, as_csv: Callable[[], str]):
    _write(args.output, as_csv() if args.format == "csv" else report.dumps(env))


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        env, as_csv = args.func(args)
    except InputError as exc:
        print(f"fforge: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Failure as exc:
        if exc.payload is not None:
            if args.timing:
                exc.payload["timing_seconds"] = time.perf_counter() - start
            _emit(args, exc.payload, exc.as_csv)
        print(f"fforge: {exc}", file=sys.stderr)
        return exc.code
    except geodesics.DomainExit as exc:
        print(f"fforge: DomainExit: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (geodesics.GeodesicError, core.GeometryError, JetError, DslError, ArithmeticError, ValueError) as exc:
        print(f"fforge: evaluation failed ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.timing:
        env["timing_seconds"] = time.perf_counter() - start
    _emit(args, env, as_csv)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
