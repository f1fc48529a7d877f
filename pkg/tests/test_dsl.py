"""Parser and evaluator tests.

Golden cases live in tests/golden/parser: each input file has a rendered
``.out`` next to it.  Set FFORGE_REGEN_GOLDEN=1 to rewrite the outputs after
an intended change, then review the diff.
"""

import json
import math
import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from fforge import dsl, so3
from fforge.dsl import (
    Binary,
    Call,
    DslError,
    Let,
    Name,
    Num,
    Unary,
    eval_scalar,
    evaluate,
    expression_diagnostics,
    in_domain,
    kprofile_jets,
    parse,
    parse_geometry,
    parse_kprofile,
    to_source,
    validate,
)

GOLDEN = Path(__file__).parent / "golden" / "parser"
SAMPLE = [0.3, 2.5, 1.1, 0.4, 1.2, -0.3, 0.2, 0.1]
CASES = sorted(p for p in GOLDEN.iterdir() if p.suffix != ".out")


def sexpr(node) -> str:
    if isinstance(node, Num):
        return dsl._fmt_number(node.value)
    if isinstance(node, Name):
        return node.name
    if isinstance(node, Unary):
        return f"(neg {sexpr(node.operand)})"
    if isinstance(node, Binary):
        return f"({node.op} {sexpr(node.left)} {sexpr(node.right)})"
    if isinstance(node, Call):
        return f"({node.func} {' '.join(sexpr(a) for a in node.args)})"
    return f"(let {node.name} {sexpr(node.value)} {sexpr(node.body)})"


def _num(v: float) -> str:
    return format(v, ".15g")


def _error(exc: Exception) -> str:
    return f"error: {type(exc).__name__}: {exc}"


def render(path: Path) -> str:
    text = path.read_text(encoding="utf-8")
    out: list[str] = []
    try:
        if path.suffix == ".expr":
            node = parse(text.strip())
            out += [f"source: {to_source(node)}", f"tree: {sexpr(node)}"]
            diags = expression_diagnostics(node, {})
            out += [f"diagnostic: {d}" for d in diags]
            if not diags:
                out.append(f"value: {_num(eval_scalar(node, {}, SAMPLE))}")
        elif path.suffix == ".geom":
            spec = parse_geometry(text)
            out.append(spec.to_text().rstrip("\n"))
            diags = validate(spec)
            out += [f"diagnostic: {d}" for d in diags]
            if not diags:
                out += [f"value: {_num(evaluate(spec, SAMPLE))}", f"in_domain: {in_domain(spec, SAMPLE)}"]
        elif path.suffix == ".kprof":
            src = parse_kprofile(text)
            out.append(f"name: {src.name}")
            out += [f"point: {_num(t)}, {_num(r)}" for t, r in src.points]
            diags = src.diagnostics()
            out += [f"diagnostic: {d}" for d in diags]
            if not diags:
                for t, r in src.points:
                    vals, dts, drs = kprofile_jets(src, t, r)
                    for i in np.flatnonzero(np.abs(vals) + np.abs(dts) + np.abs(drs)):
                        out.append(f"k{i + 1}({_num(t)}, {_num(r)}): {_num(vals[i])} d_t {_num(dts[i])} d_r {_num(drs[i])}")
        elif path.suffix == ".class":
            params = so3.ClassParams(**json.loads(text))
            spec = so3.build_class_spec(params)
            out.append(spec.to_text().rstrip("\n"))
            out += [f"value: {_num(evaluate(spec, SAMPLE))}", f"in_domain: {in_domain(spec, SAMPLE)}"]
    except (DslError, so3.InvalidClassParams) as exc:
        out.append(_error(exc))
    return "\n".join(out) + "\n"


class TestGolden:
    def test_case_count(self):
        assert len(CASES) >= 20
        assert {p.suffix for p in CASES} == {".expr", ".geom", ".kprof", ".class"}
        variants = {json.loads(p.read_text())["variant"] for p in CASES if p.suffix == ".class"}
        assert {so3.POWER_LAW, so3.EXPONENTIAL, so3.ONE_VARIABLE, so3.CLASS5} <= variants

    @pytest.mark.parametrize("path", CASES, ids=lambda p: p.stem)
    def test_matches_golden(self, path):
        got = render(path)
        golden = path.with_suffix(".out")
        if os.environ.get("FFORGE_REGEN_GOLDEN"):
            golden.write_text(got, encoding="utf-8")
        assert golden.exists(), f"missing {golden.name}; run with FFORGE_REGEN_GOLDEN=1"
        assert got == golden.read_text(encoding="utf-8")

    @pytest.mark.parametrize("path", CASES, ids=lambda p: p.stem)
    def test_rendering_is_deterministic(self, path):
        assert render(path) == render(path)


def _w2(x):
    return x[6] ** 2 + x[7] ** 2 * math.sin(x[2]) ** 2


def _powerlaw(x, lam, rho, u, v, prof=1.0):
    return prof * u ** (2 - 2 * lam) * (v + rho * u * u) ** lam


X = SAMPLE
t, r, th, ph, dt, dr, dth, dph = X
W2 = _w2(X)
ORACLES = {
    "01_precedence": 19.0,
    "02_power_right_assoc": 512.0,
    "03_unary_minus_power": -4.0,
    "04_signed_exponent": 0.5 + r**-2,
    "05_let_nested": r * r + r,
    "06_let_shadows_coordinate": 4.0 + t,
    "07_functions": 16.0,
    "08_trig_pi": 1.0 + th,
    "09_w_builtin": dph**2 * math.sin(th) ** 2,
    "10_number_forms": 1.5e-3 * r + 0.5 - 2 * dt + 100,
    "11_left_assoc_division": r / 8 - 11,
    "12_parenthesised": dt**2 - dr**2 - r,
    "19_schwarzschild": -(1 - 1 / r) * dt**2 + dr**2 / (1 - 1 / r) + r * r * W2,
    "20_continuation_and_params": 5 * dt**2 - 2 * dr**2 - r * r * W2,
    "28_class_powerlaw": _powerlaw(X, 0.3, 1.0, dt, -dr**2 - W2),
    "29_class_powerlaw_abc": _powerlaw(X, 1.5, 2.0, dt - 0.5 * dr, -dr**2 - 0.5 * dt * dr - W2, math.exp(t) * r * r),
    "30_class_exponential": dt**2 * math.exp(0.2 * (-dr**2 - W2) / dt**2),
    "31_class_onevariable": (dt - 0.5 * dr) ** 2 + (-dr**2 + 0.5 * dt * dr - W2),
    "32_class_class5": dt**2 * (1 - (dr / dt) ** 2 - W2 / dt**2 + 0.1 * (dr / dt) ** 4),
    "33_class_string_coefficients": _powerlaw(
        X, 0.3, 1 / r**2, dt, -dr**2 / (r**2 * (1 - 0.05 * r**2)) - W2, r**0.6
    ),
}


class TestValueOracles:
    @pytest.mark.parametrize("stem", sorted(ORACLES))
    def test_golden_value_matches_hand_formula(self, stem):
        (path,) = [p for p in CASES if p.stem == stem]
        line = [ln for ln in render(path).splitlines() if ln.startswith("value: ")]
        assert line, render(path)
        assert_allclose(float(line[0][7:]), ORACLES[stem], rtol=1e-13)

    def test_kprofile_values_and_derivatives(self):
        src = parse_kprofile((GOLDEN / "25_kprofile_schwarzschild.kprof").read_text())
        vals, dts, drs = kprofile_jets(src, 0.0, 4.0)
        f, fp = 0.75, 1 / 16
        assert_allclose(vals[[1, 8, 9]], [fp / (2 * f), 0.25, -4 * f])
        assert_allclose(drs[8], -1 / 16)
        assert_allclose(drs[9], -1.0)
        assert_allclose(dts, 0.0)
        assert src.points[1] == (0.5, 3.0)


class TestDiagnostics:
    def test_codes_and_order(self):
        spec = parse_geometry((GOLDEN / "18_unknown_function_and_arity.geom").read_text())
        codes = [d.code for d in validate(spec)]
        assert codes == ["UnknownFunction", "ArityMismatch", "ArityMismatch"]

    def test_unbound_parameter_is_named(self):
        spec = parse_geometry((GOLDEN / "17_unbound_parameter.geom").read_text())
        (d,) = validate(spec)
        assert d.code == "UnboundParameter" and "'m'" in d.message

    def test_same_diagnostics_for_reordered_parameters(self):
        a = parse_geometry("param p = 1\nparam q = 2\nL: x*dt^2 + y*q*p*dr^2\n")
        b = parse_geometry("param q = 2\nparam p = 1\nL: x*dt^2 + y*q*p*dr^2\n")
        assert [str(d) for d in validate(a)] == [str(d) for d in validate(b)]
        assert [d.code for d in validate(a)] == ["UnboundParameter"] * 2

    def test_let_bound_names_are_not_reported(self):
        assert expression_diagnostics(parse("let m = 2 in m*dt^2"), {}) == []

    def test_parse_error_span(self):
        with pytest.raises(DslError) as exc:
            parse("(r + 1")
        assert exc.value.span == (6, 6)


class TestEvaluation:
    def test_w_needs_angular_motion_for_odd_powers(self):
        spec = parse_geometry("L: dt^2 - w\n")
        with pytest.raises(DslError):
            dsl.eval_jet(spec, [0, 2, 1, 0, 1, 0, 0, 0])

    def test_even_powers_of_w_are_smooth_at_rest(self):
        spec = parse_geometry("L: dt^2 - r^2*w^2\n")
        j = dsl.eval_jet(spec, [0, 2, 1, 0, 1, 0, 0, 0])
        assert_allclose(j.value, 1.0)

    def test_domain(self):
        spec = parse_geometry("param rs = 1\ndomain: r - rs\nL: dt^2\n")
        assert in_domain(spec, [0, 1.5, 1, 0, 1, 0, 0, 0])
        assert not in_domain(spec, [0, 0.5, 1, 0, 1, 0, 0, 0])

    def test_jet_value_matches_scalar(self):
        spec = parse_geometry((GOLDEN / "19_schwarzschild.geom").read_text())
        assert_allclose(dsl.eval_jet(spec, SAMPLE).value, evaluate(spec, SAMPLE), rtol=1e-14)


# --- round trip ------------------------------------------------------------------

_names = st.sampled_from(["t", "r", "theta", "dt", "dr", "w", "pi", "a", "b"])
_numbers = st.floats(min_value=0, max_value=1e6, allow_nan=False).map(lambda v: Num(float(v)))


def _extend(children):
    return st.one_of(
        st.builds(Unary, st.just("-"), children),
        st.builds(Binary, st.sampled_from(["+", "-", "*", "/", "^"]), children, children),
        st.builds(lambda f, a: Call(f, (a,)), st.sampled_from(["exp", "ln", "sqrt", "sin", "abs"]), children),
        st.builds(lambda a, b: Call("pow", (a, b)), children, children),
        st.builds(Let, st.sampled_from(["a", "b", "u"]), children, children),
    )


trees = st.recursive(st.one_of(_numbers, _names.map(Name)), _extend, max_leaves=12)


class TestRoundTrip:
    @settings(max_examples=300, deadline=None)
    @given(trees)
    def test_print_parse_identity(self, tree):
        assert parse(to_source(tree)) == tree

    @settings(max_examples=100, deadline=None)
    @given(trees)
    def test_printing_is_a_fixed_point(self, tree):
        once = to_source(tree)
        assert to_source(parse(once)) == once

    @settings(max_examples=50, deadline=None)
    @given(st.sampled_from([p for p in CASES if p.suffix == ".geom"]))
    def test_geometry_text_round_trip(self, path):
        try:
            spec = parse_geometry(path.read_text())
        except DslError:
            return
        again = parse_geometry(spec.to_text())
        assert again == spec
