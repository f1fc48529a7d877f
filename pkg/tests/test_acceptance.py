"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Lines are collected in RESULTS and shown in the terminal summary; run
``python tests/test_acceptance.py`` to print them without pytest.
"""

import json
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings

import oracles
from fforge import cli, core, corpus, geodesics, so3
from fforge.core import LocalGeometry, SamplePoint
from fforge.dsl import parse, parse_geometry, to_source, validate
from fforge.jets import HESSIAN_CONFIG
from fforge.sampling import SampleBox, domain_samples, sign_for, velocity_samples
from fforge.so3 import AbcQuantities, CurvatureProfile, KProfile

RESULTS: dict[int, str] = {}

TITLES = {
    1: "Schwarzschild Ricci-flatness",
    2: "flatness oracle",
    3: "cross-module curvature equivalence",
    4: "Berwald certification",
    5: "Birkhoff replay",
    6: "a14 lemma replay",
    7: "case-analysis identities",
    8: "differentiation correctness",
    9: "invariant suite on the corpus",
    10: "geodesics",
    11: "parser",
}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {TITLES[n]}: {detail}"
    print(RESULTS[n])
    assert ok, RESULTS[n]


def spec_of(name):
    return parse_geometry(corpus.read(name + ".geom"))


def rel(a, b, scale):
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    if not np.all(np.isfinite(d)):
        return math.inf
    return float(np.max(d)) / max(scale, 1e-300)


def test_criterion_01_schwarzschild_ricci_flat():
    spec = spec_of("schwarzschild")
    start = time.perf_counter()
    samples = domain_samples(spec, 200, seed=1, box=SampleBox(r=(2.5, 50.0)), sign=sign_for(spec, True))
    worst_r = worst_v = 0.0
    for s in samples:
        geo = LocalGeometry(spec, s, HESSIAN_CONFIG)
        assert geo.L.value < 0
        worst_r = max(worst_r, core.normalized_ricci(geo))
        trace, term, scale = core.vacuum_terms(geo)
        worst_v = max(worst_v, abs(trace - term) / scale)
    elapsed = time.perf_counter() - start
    ok = len(samples) == 200 and worst_r < 1e-8 and worst_v < 1e-8 and elapsed < 30
    record(1, ok, f"200 timelike samples, max |R| {worst_r:.1e}, max vacuum residual {worst_v:.1e}, {elapsed:.1f} s")


def test_criterion_02_flatness():
    spec = spec_of("minkowski")
    samples = domain_samples(spec, 100, seed=2)
    worst_R = max(float(np.max(np.abs(LocalGeometry(spec, s).curvature.Rabc))) for s in samples)
    worst_a = 0.0
    for s in samples:
        t, r = s.x[0], s.x[1]
        k = KProfile.from_slots({9: 1 / r, 10: -r}, dk_dr={9: -1 / r**2, 10: -1.0}, point=(t, r))
        worst_a = max(worst_a, float(np.max(np.abs(so3.curvature_profile(k).a))))
    ok = worst_R < 1e-9 and worst_a < 1e-12
    record(2, ok, f"100 samples, max |R^a_bc| {worst_R:.1e}, max |a_i| {worst_a:.1e}")


def test_criterion_03_channels_match_table():
    worst = {}
    for name in ("powerlaw", "exponential"):
        spec = spec_of(name)
        w = 0.0
        for s in domain_samples(spec, 50, seed=3):
            t, r, th, _ = s.x
            k = so3.profile_from_geometry(spec, t, r, s.xdot, theta=th)
            table = so3.curvature_channels(so3.curvature_profile(k), s.xdot, th)
            curv = LocalGeometry(spec, s).curvature
            w = max(w, rel(table, curv.Rabc, curv.scale))
        worst[name] = w
    ok = all(v < 1e-6 for v in worst.values())
    record(3, ok, ", ".join(f"{k} max rel {v:.1e}" for k, v in worst.items()) + " over 50 samples each")


def test_criterion_04_berwald_certification():
    parts = []
    ok = True
    for name in ("powerlaw", "exponential"):
        spec = spec_of(name)
        dev = land = 0.0
        cmin = math.inf
        for i, s in enumerate(domain_samples(spec, 20, seed=4)):
            vs = velocity_samples(spec, s.x, 20, seed=400 + i)
            rep = core.berwald_test(spec, s.x, vs)
            ok &= rep.is_berwald
            dev = max(dev, rep.max_deviation)
            for v in vs[:3]:
                geo = LocalGeometry(spec, SamplePoint(s.x, v))
                cscale = float(np.max(np.abs(geo.metric.g))) / float(np.max(np.abs(v)))
                cmin = min(cmin, float(np.max(np.abs(geo.cartan.C))) / cscale)
                land = max(land, float(np.max(np.abs(geo.landsberg.S_trace))))
        ok &= dev < 1e-8 and land < 1e-8 and cmin > 1e-6
        parts.append(f"{name} deviation {dev:.1e}, min |C| {cmin:.1e}, max |S_a| {land:.1e}")
    record(4, ok, "; ".join(parts) + " (20 points x 20 velocities)")


def test_criterion_05_birkhoff_scan(tmp_path, capsys):
    out = tmp_path / "birkhoff.json"
    start = time.perf_counter()
    code = cli.main(["birkhoff", "--seed", "0", "--output", str(out)])
    elapsed = time.perf_counter() - start
    capsys.readouterr()
    res = json.loads(out.read_text())["results"]
    draws = {s["kind"]: s["draws"] for s in res["scans"]}
    (g2,) = [s for s in res["scans"] if s["kind"] == "group2"]
    ok = (
        code == 0
        and res["survivors"] == 0
        and sum(s["pointwise_survivors"] for s in res["scans"]) == 0
        and all(draws[k] == 1000 for k in so3.DRAW_KINDS if k != "group2")
        and draws["group2"] == 200
        and g2["all_cite_minus_one"]
        and elapsed < 60
    )
    record(5, ok, f"{res['total_draws']} draws, {res['survivors']} survivors, exit {code}, {elapsed:.1f} s")


def test_criterion_06_lemma_replay():
    rng = np.random.default_rng(6)
    worst_i = 0.0
    n = 0
    while n < 10_000:
        k = KProfile(rng.normal(size=12), rng.normal(size=12), rng.normal(size=12))
        if abs(k.val(10)) <= 0.1:
            continue
        n += 1
        res = so3.lemma2_checks(k, so3.curvature_profile(k), so3.abc(k), 0.0, 0.0)
        worst_i = max(worst_i, abs(res.residuals[0]))
    worst_ii = 0.0
    field = so3.metrizable_field(AbcQuantities(0.4, 0.7, -1.1), lambda t, r: (1.3 + 0.2 * t - 0.4 * r, 0.2, -0.4))
    for t, r in [(0.0, 1.0), (0.5, 1.5), (-0.3, 2.2), (1.0, 0.5)]:
        k = field(t, r)
        p, q = so3.curvature_profile(k), so3.abc(k)
        dt, dr = so3.a14_field_derivatives(field, t, r, h=1e-5)
        res = so3.lemma2_checks(k, p, q, dt, dr)
        assert res.applicable
        worst_ii = max(worst_ii, float(np.max(np.abs(res.residuals[1:]))))
    ok = worst_i < 1e-13 and worst_ii < 1e-6
    record(6, ok, f"(i) max {worst_i:.1e} over 10^4 draws, (ii) max {worst_ii:.1e} by finite differences")


# --- criterion 7 -----------------------------------------------------------------

UNKNOWNS = ("a1", "a2", "a3", "a4", "a5", "a7", "a11")


def _profile_map(q):
    """14 x 7 map from the unknowns to a metrizable curvature profile (a14 omitted)."""
    a, b, abc_ = q.a, q.b, q.ab_c
    P = np.zeros((14, 7))
    for i in range(5):
        P[i, i] = 1.0
    P[5, 5], P[6, 5], P[7, 5], P[8, 5] = a, 1.0, b, abc_
    P[9, 6], P[10, 6], P[11, 6], P[12, 6] = a, 1.0, b, abc_
    return P


def _linear(fn, q):
    """Rows of a function of the profile that is linear in the unknowns."""
    P = _profile_map(q)
    return np.array([fn(CurvatureProfile(P[:, j])) for j in range(7)]).T


def _row(**coeffs):
    r = np.zeros(7)
    for k, v in coeffs.items():
        r[UNKNOWNS.index(k)] = v
    return r


def _case_rows(case, q):
    a, b, c = q.a, q.b, q.c
    abc_ = q.ab_c
    if case == "I":
        return [
            _row(a1=1, a5=-1, a3=abc_ / b),
            _row(a2=1, a3=-a * abc_ / b),
            _row(a4=1, a5=-1, a3=a),
        ]
    if case == "II":
        return [_row(a1=1, a4=1, a5=-2), _row(a2=1, a3=-a * a, a4=-2 * a, a5=2 * a)]
    return [_row(a2=1, a1=a, a5=-a), _row(a3=1), _row(a4=1, a5=-1)]


RICCI_ROWS = {"I": (0,), "II": (0, 1), "III": (1,)}


def _draw_case(case, rng):
    a = rng.uniform(-2, 2)
    b = math.copysign(rng.uniform(0.2, 2), rng.normal()) if case != "III" else 0.0
    if case == "II":
        c = -2 * a * b
    else:
        while True:
            c = rng.uniform(-2, 2)
            if abs(2 * a * b + c) > 0.1 and abs(c) > 0.1:
                break
    return AbcQuantities(a, b, c)


def _forced(case, q, u):
    a, b, c = q.a, q.b, q.c
    a1, a2, a3, a4, a5, a7, a11 = u
    abc_ = q.ab_c
    if case == "I":
        return [a1 - (3 * abc_ * a7 - b * a11), a2 + 2 * a * abc_ * a7, a4 - ((c + 3 * a * b) * a7 - b * a11)]
    if case == "II":
        return [a4 + 2 * b * a11, a * a3 - a1]
    return [a1 - 3 * c * a7]


def test_criterion_07_case_identities():
    rng = np.random.default_rng(7)
    worst = {}
    for case in ("I", "II", "III"):
        w = 0.0
        for _ in range(1000):
            q = _draw_case(case, rng)
            ricci = _linear(lambda p: so3.ricci_flat_system(p, q), q)
            a5_identity = _linear(lambda p: so3.metrizability_residuals(p, q), q)[6]
            free = rng.normal(size=2)
            M = np.array(_case_rows(case, q) + [a5_identity] + [ricci[i] for i in RICCI_ROWS[case]]
                         + [_row(a7=1), _row(a11=1)])
            rhs = np.zeros(len(M))
            rhs[-2:] = free
            assert M.shape == (7, 7) and np.linalg.matrix_rank(M) == 7
            u = np.linalg.solve(M, rhs)
            disc = so3.discriminants(CurvatureProfile(_profile_map(q) @ u), q)
            scale = max(1.0, float(np.max(np.abs(u))) * max(1.0, abs(q.a), abs(q.b), abs(q.c)) ** 3)
            w = max(w, max(abs(x) for x in _forced(case, q, u)) / scale, max(abs(disc.A), abs(disc.B), abs(disc.C)) / scale)
        worst[case] = w
    ok = all(v < 1e-10 for v in worst.values())
    record(7, ok, ", ".join(f"Case {k} max {v:.1e}" for k, v in worst.items()) + " over 10^3 draws each")


# --- criterion 8 -----------------------------------------------------------------

QUADRATIC = ("minkowski", "schwarzschild", "desitter-like", "onevariable")


def test_criterion_08_differentiation():
    names = [n[: -len(".geom")] for n in corpus.names(".geom")]
    per = math.ceil(100 / len(names))
    worst = {"g": 0.0, "C": 0.0, "G": 0.0}
    count = 0
    for j, name in enumerate(names):
        spec = spec_of(name)
        for s in domain_samples(spec, per, seed=80 + j, box=SampleBox(r=(2.0, 6.0))):
            geo = LocalGeometry(spec, s)
            x = s.values
            g = geo.metric.g
            cscale = float(np.max(np.abs(g))) / float(np.max(np.abs(s.xdot)))
            worst["g"] = max(worst["g"], rel(g, oracles.fd_metric(spec, x), float(np.max(np.abs(g)))))
            worst["C"] = max(worst["C"], rel(geo.cartan.C, oracles.fd_cartan(spec, x), cscale))
            G = geo.spray.G
            worst["G"] = max(worst["G"], rel(G, oracles.fd_spray(spec, x), float(np.max(np.abs(G)))))
            count += 1
    riem = 0.0
    for j, name in enumerate(QUADRATIC):
        spec = spec_of(name)
        for s in domain_samples(spec, 4, seed=90 + j, box=SampleBox(r=(2.0, 6.0))):
            geo = LocalGeometry(spec, s)
            v = np.array(s.xdot)
            gam = oracles.christoffel(spec, s.x)
            R = oracles.riemann(spec, s.x)
            riem = max(riem, rel(core.connection_coefficients(geo), gam, float(np.max(np.abs(gam)))))
            curv = geo.curvature
            riem = max(riem, rel(curv.Rabc, np.einsum("adcb,d->abc", R, v), max(curv.scale, 1e-300)))
            ric = np.einsum("abad->bd", R)
            riem = max(riem, rel(curv.ricci, -(v @ ric @ v), geo._ricci_scale()))
    ok = count >= 100 and max(worst.values()) < 1e-5 and riem < 1e-8
    record(8, ok, f"{count} samples, max rel g {worst['g']:.1e} C {worst['C']:.1e} G {worst['G']:.1e}; "
                  f"Christoffel/Riemann/Ricci oracle {riem:.1e}")


# --- criterion 9 -----------------------------------------------------------------

CORE_INVARIANTS = ("homogeneity", "euler-identities", "tensor-symmetries", "torsion-free",
                   "metric-compatibility", "cartan-trace-duality", "so3-killing")
BERWALD_ONLY = {"berwald", "landsberg-trace"}
NEGATIVE_CONTROL = "nonberwald-perturbed"


def test_criterion_09_invariant_suite(tmp_path, capsys):
    ok = True
    notes = []
    for name in (n[: -len(".geom")] for n in corpus.names(".geom")):
        out = tmp_path / f"{name}.json"
        code = cli.main(["check", "--input", f"corpus:{name}", "--output", str(out)])
        capsys.readouterr()
        inv = {r["name"]: r for r in json.loads(out.read_text())["results"]["invariants"]}
        ok &= all(inv[k]["passed"] for k in CORE_INVARIANTS)
        ok &= inv["so3-killing"]["worst"] < 1e-10 and inv["homogeneity"]["worst"] < 1e-9
        failed = {k for k, r in inv.items() if not r["passed"]}
        if name == NEGATIVE_CONTROL:
            ok &= code == cli.EXIT_INVARIANT and failed == BERWALD_ONLY
            notes.append(f"{name} fails only {', '.join(sorted(failed))} as intended")
        else:
            ok &= code == 0 and not failed
    record(9, ok, f"{len(corpus.names('.geom'))} corpus specs green; " + "; ".join(notes))


def test_criterion_10_geodesics():
    spec = spec_of("schwarzschild")
    s = geodesics.circular_orbit_state(spec, 6.0)
    tau_rev = 2 * math.pi / (s.xdot[3] / s.xdot[0]) / s.xdot[0]
    traj = geodesics.integrate(spec, s, geodesics.IntegratorConfig(tau_max=tau_rev))
    drift = max(abs(st.x[1] - 6.0) for st in traj.states) / 6.0
    L_drift = traj.L_drift()
    power = spec_of("powerlaw")
    ptraj = geodesics.integrate(power, geodesics.make_state(power, 0.0, (0, 4.0, 1.2, 0), (1.2, 0.1, 0.05, 0.03)),
                                geodesics.IntegratorConfig(tau_max=5.0))
    L_drift = max(L_drift, ptraj.L_drift())
    init = geodesics.make_state(spec, 0.0, s.x, (s.xdot[0], 0.05, 0.0, s.xdot[3]))
    ref = geodesics.integrate(spec, init, geodesics.IntegratorConfig(tau_max=20.0, rel_tol=1e-13, abs_tol=1e-15))
    errs = []
    for h in (0.4, 0.2):
        t = geodesics.integrate(spec, init, geodesics.IntegratorConfig("rk4-fixed", step=h, tau_max=20.0))
        errs.append(np.max(np.abs(np.array(t.states[-1].x + t.states[-1].xdot)
                                  - np.array(ref.states[-1].x + ref.states[-1].xdot))))
    ratio = errs[0] / errs[1]
    ok = traj.termination == "tau-limit" and drift < 1e-6 and L_drift < 1e-8 and abs(ratio - 16) <= 2
    record(10, ok, f"radial drift {drift:.1e} per revolution, L drift {L_drift:.1e}, RK4 ratio {ratio:.2f}")


def test_criterion_11_parser():
    import test_dsl

    cases = test_dsl.CASES
    golden_ok = all(test_dsl.render(p) == p.with_suffix(".out").read_text(encoding="utf-8") for p in cases)
    variants = {json.loads(p.read_text())["variant"] for p in cases if p.suffix == ".class"}
    constructors = {so3.POWER_LAW, so3.EXPONENTIAL, so3.ONE_VARIABLE, so3.CLASS5} <= variants
    a = parse_geometry("param p = 1\nparam q = 2\nL: x*dt^2 + y*q*p*dr^2\n")
    b = parse_geometry("param q = 2\nparam p = 1\nL: x*dt^2 + y*q*p*dr^2\n")
    deterministic = [str(d) for d in validate(a)] == [str(d) for d in validate(b)] and all(
        test_dsl.render(p) == test_dsl.render(p) for p in cases)
    failures = []

    @settings(max_examples=300, deadline=None)
    @given(test_dsl.trees)
    def round_trip(tree):
        if parse(to_source(tree)) != tree:
            failures.append(to_source(tree))

    round_trip()
    ok = golden_ok and len(cases) >= 20 and constructors and deterministic and not failures
    record(11, ok, f"{len(cases)} golden cases {'match' if golden_ok else 'differ'}, all class constructors "
                   f"{'covered' if constructors else 'missing'}, 300 round trips with {len(failures)} failures")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
