"""Spherically symmetric connection profiles and the Ricci-flatness case analysis.

Index conventions: ``k[i-1]`` holds k_i (i = 1..12) and ``a[i-1]`` holds a_i
(i = 1..14).  Coordinates are ordered (t, r, theta, phi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np

from fforge import jets
from fforge.core import (
    POLE_THRESHOLD,
    LocalGeometry,
    PoleSample,
    SamplePoint,
    connection_coefficients,
)
from fforge.dsl import GeometrySpec, KProfileSource, kprofile_jets, parse_geometry, validate
from fforge.jets import DEFAULT_CONFIG, Jet, JetConfig

T, R, TH, PH = range(4)

CLASS_TOLERANCE = 1e-10
GRAY_FACTOR = 100.0
K10_THRESHOLD = 1e-12

POWER_LAW = "PowerLaw"
EXPONENTIAL = "Exponential"
ONE_VARIABLE = "OneVariable"
GROUP_II = "Class4/5 group"
CLASS5 = "Class5"
RIEMANNIAN = "Riemannian"
UNCLASSIFIED = "Unclassified"

FLAT = "Flat"
PSEUDO_RIEMANNIAN_ONLY = "PseudoRiemannianOnly"
INCONSISTENT = "Inconsistent"


class K10Zero(ArithmeticError):
    """k10 vanishes while k7..k9 do not: the ratios a, b, c are undefined."""


class InvalidClassParams(ValueError):
    pass


def _vec(x, n: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.shape != (n,):
        raise ValueError(f"expected {n} entries, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite entry")
    return arr


@dataclass(frozen=True)
class KProfile:
    k: np.ndarray
    dk_dt: np.ndarray
    dk_dr: np.ndarray
    point: tuple[float, float] = (0.0, 1.0)
    provenance: str = "analytic"

    def __post_init__(self):
        for name in ("k", "dk_dt", "dk_dr"):
            object.__setattr__(self, name, _vec(getattr(self, name), 12))

    @classmethod
    def from_slots(
        cls,
        k: Mapping[int, float],
        dk_dt: Mapping[int, float] | None = None,
        dk_dr: Mapping[int, float] | None = None,
        point=(0.0, 1.0),
        provenance="analytic",
    ) -> "KProfile":
        """Build from 1-based sparse slots, e.g. ``{9: 0.5, 10: -2}``."""

        def dense(m):
            out = np.zeros(12)
            for i, v in (m or {}).items():
                out[i - 1] = v
            return out

        return cls(dense(k), dense(dk_dt), dense(dk_dr), tuple(point), provenance)

    def val(self, i: int) -> float:
        return float(self.k[i - 1])

    def dt(self, i: int) -> float:
        return float(self.dk_dt[i - 1])

    def dr(self, i: int) -> float:
        return float(self.dk_dr[i - 1])


@dataclass(frozen=True)
class CurvatureProfile:
    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _vec(self.a, 14))

    def __getitem__(self, i: int) -> float:
        return float(self.a[i - 1])

    @classmethod
    def from_slots(cls, slots: Mapping[int, float]) -> "CurvatureProfile":
        a = np.zeros(14)
        for i, v in slots.items():
            a[i - 1] = v
        return cls(a)

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.a)))


@dataclass(frozen=True)
class AbcQuantities:
    a: float
    b: float
    c: float

    @property
    def ab_c(self) -> float:
        return self.a * self.b + self.c

    @property
    def twoab_c(self) -> float:
        return 2 * self.a * self.b + self.c


@dataclass(frozen=True)
class Discriminants:
    A: float
    B: float
    C: float
    D: float
    E: float
    F: float

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in "ABCDEF"}


@dataclass(frozen=True)
class BerwaldClass:
    tag: str
    witness: Mapping[str, float] = field(default_factory=dict)
    reason: str = ""
    subcase: str = ""

    @property
    def group(self) -> str:
        if self.tag in (POWER_LAW, EXPONENTIAL, ONE_VARIABLE):
            return "I"
        if self.tag == GROUP_II:
            return "II"
        return ""


@dataclass(frozen=True)
class BirkhoffVerdict:
    outcome: str
    fired_case: str
    klass: BerwaldClass
    survivor_candidate: bool = False


# --- connection table ------------------------------------------------------------


def connection_to_full(k: KProfile, point_with_theta: Sequence[float]) -> np.ndarray:
    """Gamma^a_bc at (t, r, theta), symmetric in the lower pair."""
    theta = point_with_theta[-1]
    s, c = math.sin(theta), math.cos(theta)
    if abs(s) < POLE_THRESHOLD:
        raise PoleSample(f"sin(theta) = {s:.2e}")
    K = k.k
    G = np.zeros((4, 4, 4))

    def put(a, b, cc, v):
        G[a, b, cc] = v
        G[a, cc, b] = v

    put(T, T, T, K[0])
    put(T, T, R, K[1])
    put(T, R, R, K[2])
    put(R, T, T, K[3])
    put(R, R, R, K[4])
    put(R, T, R, K[5])
    put(T, TH, TH, K[6])
    put(T, PH, PH, K[6] * s * s)
    put(PH, PH, T, K[7])
    put(TH, TH, T, K[7])
    put(PH, PH, R, K[8])
    put(TH, TH, R, K[8])
    put(R, TH, TH, K[9])
    put(R, PH, PH, K[9] * s * s)
    put(PH, T, TH, K[10] / s)
    put(TH, PH, T, -K[10] * s)
    put(PH, R, TH, K[11] / s)
    put(TH, R, PH, -K[11] * s)
    put(TH, PH, PH, -s * c)
    put(PH, TH, PH, c / s)
    return G


def curvature_profile(k: KProfile) -> CurvatureProfile:
    """The fourteen curvature coefficients from k and its first derivatives."""
    k1, k2, k3, k4, k5, k6, k7, k8, k9, k10 = k.k[:10]
    dt = k.dk_dt
    dr = k.dk_dr

    def t(i):
        return dt[i - 1]

    def r(i):
        return dr[i - 1]

    a = [
        r(1) - t(2) + k3 * k4 - k2 * k6,
        r(2) - t(3) + k2 * k2 + k3 * k6 - k1 * k3 - k2 * k5,
        r(4) - t(6) + k1 * k6 + k4 * k5 - k2 * k4 - k6 * k6,
        r(6) - t(5) + k2 * k6 - k3 * k4,
        r(8) - t(9),
        -t(7) + k7 * k8 - k1 * k7 - k2 * k10,
        -t(10) + k8 * k10 - k4 * k7 - k6 * k10,
        -t(8) + k1 * k8 + k4 * k9 - k8 * k8,
        -t(9) + k2 * k8 + k6 * k9 - k8 * k9,
        -r(7) + k7 * k9 - k2 * k7 - k3 * k10,
        -r(10) + k9 * k10 - k6 * k7 - k5 * k10,
        -r(8) + k2 * k8 + k6 * k9 - k8 * k9,
        -r(9) + k3 * k8 + k5 * k9 - k9 * k9,
        1 + k7 * k8 + k9 * k10,
    ]
    return CurvatureProfile(np.array(a, dtype=float))


def curvature_channels(p: CurvatureProfile, xdot: Sequence[float], theta: float) -> np.ndarray:
    """R^a_bc(xdot) assembled from the coefficient table (antisymmetric in b, c)."""
    td, rd, thd, phd = xdot
    s2 = math.sin(theta) ** 2
    a = p.a
    Rm = np.zeros((4, 4, 4))

    def put(up, b, c, v):
        Rm[up, b, c] = v
        Rm[up, c, b] = -v

    put(T, T, R, a[0] * td + a[1] * rd)
    put(R, T, R, a[2] * td + a[3] * rd)
    put(TH, T, R, a[4] * thd)
    put(PH, T, R, a[4] * phd)
    put(T, T, TH, a[5] * thd)
    put(R, T, TH, a[6] * thd)
    put(TH, T, TH, a[7] * td + a[8] * rd)
    put(T, T, PH, a[5] * phd * s2)
    put(R, T, PH, a[6] * phd * s2)
    put(PH, T, PH, a[7] * td + a[8] * rd)
    put(T, R, TH, a[9] * thd)
    put(R, R, TH, a[10] * thd)
    put(TH, R, TH, a[11] * td + a[12] * rd)
    put(T, R, PH, a[9] * phd * s2)
    put(R, R, PH, a[10] * phd * s2)
    put(PH, R, PH, a[11] * td + a[12] * rd)
    put(TH, TH, PH, -a[13] * phd * s2)
    put(PH, TH, PH, a[13] * thd)
    return Rm


def affine_riemann(p: CurvatureProfile, theta: float) -> np.ndarray:
    """R^a_bcd = dot-d_b R^a_cd, indexed [a, b, c, d]."""
    out = np.zeros((4, 4, 4, 4))
    for b in range(4):
        e = np.zeros(4)
        e[b] = 1.0
        out[:, b] = curvature_channels(p, e, theta)
    return out


def abc(k: KProfile) -> AbcQuantities:
    k7, k8, k9, k10 = k.k[6:10]
    if abs(k10) < K10_THRESHOLD:
        raise K10Zero(f"k10 = {k10:.3e} with (k7, k8, k9) = ({k7:.3e}, {k8:.3e}, {k9:.3e})")
    return AbcQuantities(k7 / k10, k8 / k10, (k9 * k10 - k7 * k8) / k10**2)


def metrizability_residuals(p: CurvatureProfile, q: AbcQuantities) -> np.ndarray:
    """Six constraints on a6..a13 followed by the a5 identity (all zero when metrizable)."""
    a, b, abc_ = q.a, q.b, q.ab_c
    return np.array(
        [
            p[6] - a * p[7],
            p[8] - b * p[7],
            p[9] - abc_ * p[7],
            p[10] - a * p[11],
            p[12] - b * p[11],
            p[13] - abc_ * p[11],
            p[5] - (abc_ * p[7] - b * p[11]),
        ]
    )


def _metrizability_scales(p: CurvatureProfile, q: AbcQuantities) -> np.ndarray:
    a, b, abc_ = abs(q.a), abs(q.b), abs(q.ab_c)
    x = np.abs(p.a)
    return np.array(
        [
            max(x[5], a * x[6]),
            max(x[7], b * x[6]),
            max(x[8], abc_ * x[6]),
            max(x[9], a * x[10]),
            max(x[11], b * x[10]),
            max(x[12], abc_ * x[10]),
            max(x[4], abc_ * x[6], b * x[10]),
        ]
    )


def discriminants(p: CurvatureProfile, q: AbcQuantities) -> Discriminants:
    a, b, c = q.a, q.b, q.c
    a1, a2, a3, a4, a5 = p.a[:5]
    A = b * (a * a1 + a2) + (a * b + c) * (a * a3 + a4) - a5 * (2 * a * b + c)
    B = a * (a * a3 + a4) - (a * a1 + a2)
    C = (a * b + c) * a3 + b * (a * a3 + a4) + b * (a1 - 2 * a5)
    return Discriminants(A, B, C, a * a3 - a1 + a5, b * a3, a * a3 - a1)


@dataclass(frozen=True)
class RicciQuadratic:
    tt: float
    tr: float
    rr: float
    ww: float

    def __call__(self, xdot: Sequence[float], theta: float) -> float:
        td, rd, thd, phd = xdot
        w2 = thd**2 + (phd * math.sin(theta)) ** 2
        return self.tt * td * td + self.tr * td * rd + self.rr * rd * rd + self.ww * w2


def ricci_coefficients(p: CurvatureProfile) -> RicciQuadratic:
    return RicciQuadratic(
        -(p[3] + 2 * p[8]),
        p[1] - p[4] - 2 * (p[9] + p[12]),
        p[2] - 2 * p[13],
        p[6] + p[11] - p[14],
    )


def ricci_so3(p: CurvatureProfile, xdot: Sequence[float], theta: float) -> float:
    return ricci_coefficients(p)(xdot, theta)


def ricci_flat_system(p: CurvatureProfile, q: AbcQuantities) -> np.ndarray:
    a, b = q.a, q.b
    return np.array(
        [
            p[3] + 2 * b * p[7],
            p[1] - p[4] - 2 * p[5] - 4 * b * p[11],
            p[2] - 2 * q.ab_c * p[11],
            a * p[7] + p[11] - p[14],
        ]
    )


@dataclass(frozen=True)
class Lemma2Result:
    residuals: np.ndarray
    applicable: bool
    """False when the profile fails metrizability, outside the lemma's hypotheses."""


def lemma2_checks(
    k: KProfile,
    p: CurvatureProfile,
    q: AbcQuantities,
    da14_dt: float,
    da14_dr: float,
    tol: float = 1e-8,
) -> Lemma2Result:
    k10 = k.val(10)
    if abs(k10) < K10_THRESHOLD:
        raise K10Zero(f"k10 = {k10:.3e}")
    s = q.twoab_c
    res = np.array(
        [
            p[14] - 1 - k10**2 * s,
            da14_dt + 2 * k10 * s * p[7],
            da14_dr + 2 * k10 * s * p[11],
        ]
    )
    m = metrizability_residuals(p, q)
    scales = np.maximum(_metrizability_scales(p, q), max(p.scale, term_scale(k)))
    return Lemma2Result(res, bool(np.all(np.abs(m) <= tol * scales)))


def a14_field_derivatives(
    field: Callable[[float, float], KProfile], t: float, r: float, h: float = 1e-5
) -> tuple[float, float]:
    """Central finite differences of a14 along a k-field."""

    def a14(tt, rr):
        return curvature_profile(field(tt, rr))[14]

    return (
        (a14(t + h, r) - a14(t - h, r)) / (2 * h),
        (a14(t, r + h) - a14(t, r - h)) / (2 * h),
    )


# --- classification -----------------------------------------------------------


def term_scale(k: KProfile) -> float:
    """Typical size of the terms summed into the a_i: products of k and first derivatives."""
    return max(float(np.max(np.abs(k.k))) ** 2, float(np.max(np.abs(k.dk_dt))), float(np.max(np.abs(k.dk_dr))), 1e-300)


class _Zero:
    """Tri-state zero test against a scale: True, False or None (gray zone)."""

    def __init__(self, tol: float):
        self.tol = tol

    def __call__(self, value: float, scale: float):
        scale = max(scale, 1e-300)
        x = abs(value) / scale
        if x <= self.tol:
            return True
        if x <= GRAY_FACTOR * self.tol:
            return None
        return False


def riemannian_fit(k: KProfile, p: CurvatureProfile, tol: float = 1e-9) -> np.ndarray | None:
    """An SO(3)-invariant quadratic metric (A, B, C, D) compatible with the connection.

    Returns coefficients of g = A dt^2 + 2B dt dr + C dr^2 + D dOmega^2 at the
    point, or None when only degenerate candidates satisfy the algebraic
    compatibility conditions.
    """
    theta = math.pi / 2
    k7, k8, k9, k10, k11, k12 = k.k[6:12]
    rows = [
        [k7, k10, 0.0, k8],
        [0.0, k7, k10, k9],
        [0.0, 0.0, 0.0, k11],
        [0.0, 0.0, 0.0, k12],
    ]
    Rm = affine_riemann(p, theta)
    basis = [_metric_block(*e) for e in np.eye(4)]
    for b in range(4):
        for a in range(b, 4):
            for c in range(4):
                for d in range(c + 1, 4):
                    rows.append(
                        [
                            float(g[a] @ Rm[:, b, c, d] + g[b] @ Rm[:, a, c, d])
                            for g in basis
                        ]
                    )
    M = np.array(rows)
    scale = max(float(np.max(np.abs(M))), 1.0)
    _, sv, vt = np.linalg.svd(M / scale)
    null = vt[np.sum(sv > tol) :]
    best = None
    for coeffs in _probe_combinations(null):
        A, B, C, D = coeffs
        det = (A * C - B * B) * D * D
        if best is None or abs(det) > abs(best[0]):
            best = (det, coeffs)
    if best is None or abs(best[0]) < 1e-8:
        return None
    return best[1] / np.max(np.abs(best[1]))


def _metric_block(A, B, C, D) -> np.ndarray:
    g = np.zeros((4, 4))
    g[0, 0], g[0, 1], g[1, 0], g[1, 1] = A, B, B, C
    g[2, 2] = g[3, 3] = D
    return g


def _probe_combinations(null: np.ndarray):
    if len(null) == 0:
        return
    yield from null
    rng = np.random.default_rng(12345)
    for _ in range(8):
        v = rng.normal(size=len(null)) @ null
        yield v / np.linalg.norm(v)


def classify(k: KProfile, tol: float = CLASS_TOLERANCE) -> BerwaldClass:
    """Assign one of the SO(3) Berwald classes to a connection profile."""
    zero = _Zero(tol)
    kscale = max(1.0, float(np.max(np.abs(k.k))))
    g2 = np.concatenate([k.k[6:10], k.dk_dt[6:10], k.dk_dr[6:10]])
    if float(np.max(np.abs(k.k[6:10]))) < tol * kscale:
        if float(np.max(np.abs(g2))) < tol * kscale:
            return BerwaldClass(GROUP_II, {"max|k7..k10|": float(np.max(np.abs(k.k[6:10])))})
        return BerwaldClass(UNCLASSIFIED, reason="k7..k10 vanish at the point but not their derivatives")
    if float(np.max(np.abs(np.concatenate([k.k[10:], k.dk_dt[10:], k.dk_dr[10:]])))) >= tol * kscale:
        return BerwaldClass(UNCLASSIFIED, reason="k11 or k12 nonzero: the connection is not reflection invariant")
    try:
        q = abc(k)
    except K10Zero as exc:
        return BerwaldClass(UNCLASSIFIED, reason=f"K10Zero: {exc}")
    p = curvature_profile(k)
    ref = max(p.scale, term_scale(k))
    m = metrizability_residuals(p, q)
    scales = np.maximum(_metrizability_scales(p, q), ref)
    witness = {"a": q.a, "b": q.b, "c": q.c}
    if not np.all(np.abs(m) <= tol * scales):
        fit = riemannian_fit(k, p)
        if fit is not None:
            witness.update({"max_metrizability_residual": float(np.max(np.abs(m)))})
            return BerwaldClass(RIEMANNIAN, witness, "metrizability fails; a quadratic metric is compatible")
        return BerwaldClass(UNCLASSIFIED, witness, "metrizability fails and no quadratic metric is compatible")
    if zero(q.b, max(abs(q.a), abs(q.c), 1.0)) is not False and zero(q.c, max(abs(q.a), 1.0)) is not False:
        return BerwaldClass(UNCLASSIFIED, witness, "b and c both vanish: degenerate metric")
    disc = discriminants(p, q)
    witness.update(disc.as_dict())
    dscale = ref
    abc_terms = _abc_scales(p, q)
    for name, v, s in zip("ABC", (disc.A, disc.B, disc.C), abc_terms):
        if not zero(v, max(s, dscale)):
            return BerwaldClass(UNCLASSIFIED, witness, f"{name} = {v:.3e} violates the metrizability relations")
    a1, _, a3, _, a5 = np.abs(p.a[:5])
    d0 = zero(disc.D, max(abs(q.a) * a3, a1, a5, dscale))
    e0 = zero(disc.E, max(abs(q.b) * a3, dscale))
    f0 = zero(disc.F, max(abs(q.a) * a3, a1, dscale))
    if d0 is None or (d0 and (e0 is None or (e0 and f0 is None))):
        return BerwaldClass(UNCLASSIFIED, witness, "discriminant within the tolerance gray zone")
    if not d0:
        return BerwaldClass(POWER_LAW, witness, subcase=_power_law_case(q, zero))
    if not e0:
        return BerwaldClass(EXPONENTIAL, witness)
    if f0:
        return BerwaldClass(ONE_VARIABLE, witness)
    return BerwaldClass(UNCLASSIFIED, witness, "D = E = 0 with F != 0 is not among the known classes")


def _abc_scales(p: CurvatureProfile, q: AbcQuantities) -> tuple[float, float, float]:
    a, b, c = abs(q.a), abs(q.b), abs(q.c)
    x = np.abs(p.a)
    abc_ = abs(q.ab_c)
    return (
        max(b * a * x[0], b * x[1], abc_ * a * x[2], abc_ * x[3], x[4] * abs(q.twoab_c)),
        max(a * a * x[2], a * x[3], a * x[0], x[1]),
        max(abc_ * x[2], b * a * x[2], b * x[3], b * x[0], 2 * b * x[4]),
    )


def _power_law_case(q: AbcQuantities, zero: _Zero) -> str:
    scale = max(abs(q.a), abs(q.b), abs(q.c), 1.0)
    if zero(q.b, scale):
        return "III"
    if zero(q.twoab_c, max(abs(2 * q.a * q.b), abs(q.c), 1.0)):
        return "II"
    return "I"


# --- Birkhoff verdict --------------------------------------------------------------

_UNKNOWNS = ("a1", "a2", "a3", "a4", "a5", "a7", "a11", "a14")


def _row(**coeffs: float) -> np.ndarray:
    r = np.zeros(len(_UNKNOWNS))
    for name, v in coeffs.items():
        r[_UNKNOWNS.index(name)] = v
    return r


def _replay_rows(q: AbcQuantities, tag: str) -> list[tuple[str, np.ndarray]]:
    """Homogeneous linear relations on (a1..a5, a7, a11, a14) for a class."""
    a, b, c = q.a, q.b, q.c
    ab_c, s = q.ab_c, q.twoab_c
    rows = [
        ("a5 identity", _row(a5=1, a7=-ab_c, a11=b)),
        ("A = 0", _row(a1=a * b, a2=b, a3=ab_c * a, a4=ab_c, a5=-s)),
        ("B = 0", _row(a3=a * a, a4=a, a1=-a, a2=-1)),
        ("C = 0", _row(a3=ab_c + a * b, a4=b, a1=b, a5=-2 * b)),
        ("Ricci-flat eq. 1", _row(a3=1, a7=2 * b)),
        ("Ricci-flat eq. 2", _row(a1=1, a4=-1, a5=-2, a11=-4 * b)),
        ("Ricci-flat eq. 3", _row(a2=1, a11=-2 * ab_c)),
        ("Ricci-flat eq. 4", _row(a7=a, a11=1, a14=-1)),
    ]
    if tag == EXPONENTIAL:
        rows.append(("D = 0", _row(a3=a, a1=-1, a5=1)))
    if tag == ONE_VARIABLE:
        rows += [(f"a{i} = 0 (commuting horizontal t, r)", _row(**{f"a{i}": 1})) for i in range(1, 6)]
    return rows


@dataclass(frozen=True)
class _Affine:
    x0: np.ndarray
    null: np.ndarray
    feasible: bool

    def forced(self, name: str, tol=1e-9) -> bool:
        i = _UNKNOWNS.index(name)
        return self.null.size == 0 or bool(np.all(np.abs(self.null[:, i]) < tol))

    def identically_zero(self, functional: np.ndarray, tol=1e-9) -> bool:
        scale = max(float(np.max(np.abs(functional))), 1.0)
        vals = [abs(float(functional @ self.x0))] + [abs(float(functional @ n)) for n in self.null]
        return max(vals) < tol * scale


def _solve_affine(M: np.ndarray, rhs: np.ndarray, tol=1e-10) -> _Affine:
    scale = max(float(np.max(np.abs(M))), 1.0)
    Ms = M / scale
    x0, *_ = np.linalg.lstsq(Ms, rhs / scale, rcond=None)
    feasible = float(np.max(np.abs(Ms @ x0 - rhs / scale), initial=0.0)) < tol * max(1.0, float(np.max(np.abs(rhs / scale), initial=0.0)))
    _, sv, vt = np.linalg.svd(Ms)
    rank = int(np.sum(sv > tol))
    return _Affine(x0, vt[rank:], feasible)


def birkhoff_verdict(k: KProfile, tol: float = CLASS_TOLERANCE) -> BirkhoffVerdict:
    """Decide whether this connection's class admits a non-flat Ricci-flat metric.

    The class relations, the Ricci-flat system and the a14 identities are
    imposed as linear conditions on (a1..a5, a7, a11, a14) with the point's
    (a, b, c, k10) as coefficients.  Because Ricci-flatness is a condition on
    an open set, a14 forced to vanish also forces its t- and r-derivatives to
    vanish, which is added as the closure step.
    """
    klass = classify(k, tol)
    if klass.tag == GROUP_II:
        return BirkhoffVerdict(
            INCONSISTENT,
            "group II: k7 = k8 = k9 = k10 = 0 gives a5..a13 = 0, a14 = 1, so a*a7 + a11 - a14 = -1 != 0",
            klass,
        )
    if klass.tag == RIEMANNIAN:
        return BirkhoffVerdict(
            PSEUDO_RIEMANNIAN_ONLY, "metrizability fails: Levi-Civita connection, classical theorem applies", klass
        )
    if klass.tag == UNCLASSIFIED:
        return BirkhoffVerdict(UNCLASSIFIED, klass.reason, klass)

    q = abc(k)
    p = curvature_profile(k)
    k10 = k.val(10)
    s = q.twoab_c
    label = {POWER_LAW: "Class1", EXPONENTIAL: "Class2", ONE_VARIABLE: "Class3"}[klass.tag]
    if klass.subcase:
        label += f"/Case{klass.subcase}"
    steps = []
    rows = _replay_rows(q, klass.tag)
    M = np.array([r for _, r in rows])
    homog = _solve_affine(M, np.zeros(len(M)))
    zero = _Zero(tol)
    if homog.forced("a14") and not zero(k10 * s, max(abs(k10), 1.0) * max(abs(2 * q.a * q.b), abs(q.c), 1.0)):
        steps.append("a14 = 0 on an open set, so d_t a14 = d_r a14 = 0 forces a7 = a11 = 0 (k10 != 0, 2ab + c != 0)")
        M = np.vstack([M, _row(a7=1), _row(a11=1)])
    lemma_row = _row(a14=1)
    M = np.vstack([M, lemma_row])
    rhs = np.zeros(len(M))
    rhs[-1] = 1 + k10**2 * s
    sol = _solve_affine(M, rhs)
    if not sol.feasible:
        steps.append(f"a14 = 1 + k10^2 (2ab + c) = {rhs[-1]:.6g} contradicts the forced value of a14")
        return BirkhoffVerdict(INCONSISTENT, f"{label}: " + "; ".join(steps), klass)

    D = _row(a3=q.a, a1=-1, a5=1)
    E = _row(a3=q.b)
    F = _row(a3=q.a, a1=-1)
    if klass.tag == POWER_LAW and sol.identically_zero(D):
        steps.append("all solutions have D = 0, contradicting D != 0")
        return BirkhoffVerdict(INCONSISTENT, f"{label}: " + "; ".join(steps), klass)
    if klass.tag == POWER_LAW and sol.identically_zero(F):
        steps.append("F = 0 so lambda = F/D = 0: L depends on u alone, L degenerate")
        return BirkhoffVerdict(INCONSISTENT, f"{label}: " + "; ".join(steps), klass)
    if klass.tag == EXPONENTIAL and sol.identically_zero(E):
        steps.append("all solutions have E = b a3 = 0, contradicting E != 0")
        return BirkhoffVerdict(INCONSISTENT, f"{label}: " + "; ".join(steps), klass)

    only_flat = sol.null.size == 0 and float(np.max(np.abs(sol.x0))) < 1e-9
    if only_flat:
        if p.scale <= tol * term_scale(k):
            steps.append("R = 0 forces a1 = ... = a14 = 0 and the profile has all a_i = 0")
            return BirkhoffVerdict(FLAT, f"{label}: " + "; ".join(steps), klass)
        steps.append("R = 0 forces all a_i = 0 but this profile is curved")
        return BirkhoffVerdict(INCONSISTENT, f"{label}: " + "; ".join(steps), klass)
    steps.append("non-flat solutions of the Ricci-flat system remain")
    return BirkhoffVerdict(UNCLASSIFIED, f"{label}: " + "; ".join(steps), klass, survivor_candidate=True)


def pointwise_survivor(k: KProfile, tol: float = 1e-8) -> bool:
    """Independent check: Ricci-flat system satisfied at the point with curvature present."""
    try:
        q = abc(k)
    except K10Zero:
        return False
    p = curvature_profile(k)
    ref = max(p.scale, term_scale(k))
    m = metrizability_residuals(p, q)
    if not np.all(np.abs(m) <= tol * np.maximum(_metrizability_scales(p, q), ref)):
        return False
    res = ricci_flat_system(p, q)
    return bool(np.max(np.abs(res)) <= tol * ref and p.scale > tol * ref)


# --- class constructors --------------------------------------------------------


@dataclass(frozen=True)
class ClassParams:
    """Parameters for a class Finsler function.

    ``a``, ``b``, ``c``, ``rho`` and ``mu`` may be numbers or expression text in
    t and r.  ``profile`` is expression text for the class's free function:
    in t, r for PowerLaw and Exponential, in z for OneVariable and in p, s
    for Class5.
    """

    variant: str
    a: float | str = 0.0
    b: float | str = 0.0
    c: float | str = -1.0
    lam: float | None = None
    rho: float | str | None = None
    mu: float | str | None = None
    profile: str = "1"
    name: str | None = None


def _term(x) -> str:
    if isinstance(x, str):
        return f"({x})"
    return repr(float(x))


def _is_zero(x) -> bool:
    return not isinstance(x, str) and float(x) == 0.0


def _scaled(coeff, monomial: str) -> str:
    """``coeff*monomial`` as a signed summand, empty when coeff is the number 0."""
    if _is_zero(coeff):
        return ""
    if not isinstance(coeff, str):
        v = float(coeff)
        if v == 1.0:
            return f" + {monomial}"
        if v == -1.0:
            return f" - {monomial}"
        return f" - {-v!r}*{monomial}" if v < 0 else f" + {v!r}*{monomial}"
    return f" + {_term(coeff)}*{monomial}"


def _times(factor: float, x):
    return f"{factor!r}*{_term(x)}" if isinstance(x, str) else factor * float(x)


def _uv_bindings(params: ClassParams) -> str:
    u = "dt" + _scaled(_times(-1.0, params.a), "dr")
    v = _scaled(params.c, "dr^2") + _scaled(_times(2.0, params.b), "dt*dr") + " - w^2"
    return f"let u = {u} in let v = {v.lstrip(' +')} in "


def build_class_spec(params: ClassParams) -> GeometrySpec:
    """DSL source for the class Finsler function, parsed back into a spec."""
    variant = params.variant
    if _is_zero(params.b) and _is_zero(params.c):
        raise InvalidClassParams("b and c cannot both vanish (degenerate metric)")
    head = _uv_bindings(params)
    domain = [f"{head}u"]
    if variant == POWER_LAW:
        lam = params.lam
        if lam is None or params.rho is None:
            raise InvalidClassParams("PowerLaw needs lam and rho")
        if lam in (0.0, 1.0):
            raise InvalidClassParams(f"lam = {lam} gives a degenerate Finsler function")
        inner = f"v{_scaled(params.rho, 'u^2')}"
        body = f"({params.profile})*u^(2 - 2*{lam!r})*({inner})^{lam!r}"
        domain.append(f"{head}{inner}")
        default_name = "powerlaw"
    elif variant == EXPONENTIAL:
        if params.mu is None or _is_zero(params.mu):
            raise InvalidClassParams("Exponential needs a nonzero mu")
        body = f"({params.profile})*u^2*exp({_term(params.mu)}*v/u^2)"
        default_name = "exponential"
    elif variant == ONE_VARIABLE:
        body = f"let z = v/u^2 in u^2*({params.profile})"
        default_name = "onevariable"
    elif variant == CLASS5:
        head = ""
        domain = ["dt"]
        body = f"let p = dr/dt in let s = w/dt in dt^2*({params.profile})"
        default_name = "class5"
    else:
        raise InvalidClassParams(f"no constructor for variant {variant!r}")
    text = f"name: {params.name or default_name}\ndomain: {', '.join(domain)}\nL: {head}{body}\n"
    spec = parse_geometry(text)
    diags = validate(spec)
    if diags:
        raise InvalidClassParams("; ".join(str(d) for d in diags))
    return spec


# --- profiles from other sources ---------------------------------------------------


def profile_from_geometry(
    spec: GeometrySpec,
    t: float,
    r: float,
    xdot: Sequence[float],
    theta: float = math.pi / 2,
    method: str = "jet",
    h: float = 1e-4,
) -> KProfile:
    """Read k1..k12 off the spray of a Berwald spec, with t- and r-derivatives.

    ``method="jet"`` differentiates the spray jet exactly; ``"fd"`` uses
    central differences of the connection with step ``h``.
    """

    def read(G: np.ndarray) -> np.ndarray:
        s = math.sin(theta)
        return np.array(
            [
                G[T, T, T], G[T, T, R], G[T, R, R], G[R, T, T], G[R, R, R], G[R, T, R],
                G[T, TH, TH], G[TH, TH, T], G[TH, TH, R], G[R, TH, TH],
                s * G[PH, T, TH], s * G[PH, R, TH],
            ]
        )

    def gamma_at(tt, rr):
        geo = LocalGeometry(spec, SamplePoint((tt, rr, theta, 0.3), tuple(xdot)))
        return connection_coefficients(geo)

    if method == "fd":
        k = read(gamma_at(t, r))
        dk_dt = (read(gamma_at(t + h, r)) - read(gamma_at(t - h, r))) / (2 * h)
        dk_dr = (read(gamma_at(t, r + h)) - read(gamma_at(t, r - h))) / (2 * h)
        return KProfile(k, dk_dt, dk_dr, (t, r), "finite-difference")
    geo = LocalGeometry(spec, SamplePoint((t, r, theta, 0.3), tuple(xdot)))
    G = geo.spray_jet

    def second(a, b, c, pos=None):
        alpha = [0] * 8
        alpha[4 + b] += 1
        alpha[4 + c] += 1
        if pos is not None:
            alpha[pos] += 1
        return G[a].partial(alpha)

    full = [np.array([[[second(a, b, c, pos) for c in range(4)] for b in range(4)] for a in range(4)]) for pos in (None, 0, 1)]
    return KProfile(read(full[0]), read(full[1]), read(full[2]), (t, r), "jet")


def profiles_from_source(src: KProfileSource) -> list[KProfile]:
    out = []
    for t, r in src.points:
        k, dt, dr = kprofile_jets(src, t, r)
        out.append(KProfile(k, dt, dr, (t, r), "jet"))
    return out


class ConnectionGeometry(LocalGeometry):
    """Spray G^a = (1/2) Gamma^a_bc(x) xdot^b xdot^c of a k-profile, linear in (t, r)."""

    def __init__(self, k: KProfile, sample: SamplePoint, config: JetConfig = DEFAULT_CONFIG):
        super().__init__(None, sample, config)
        self.kprofile = k

    @cached_property
    def spray_jet(self) -> Jet:
        cfg = self.config
        X = jets.seed_point(self.sample.values, cfg)
        t0, r0 = self.sample.x[0], self.sample.x[1]
        kp = self.kprofile
        K = [
            X[0] * 0.0 + kp.k[i] + (X[0] - t0) * kp.dk_dt[i] + (X[1] - r0) * kp.dk_dr[i]
            for i in range(12)
        ]
        s = jets.sin(X[2])
        c = jets.cos(X[2])
        zero = X[0] * 0.0
        G = [[[zero] * 4 for _ in range(4)] for _ in range(4)]

        def put(a, b, cc, v):
            G[a][b][cc] = v
            G[a][cc][b] = v

        put(T, T, T, K[0])
        put(T, T, R, K[1])
        put(T, R, R, K[2])
        put(R, T, T, K[3])
        put(R, R, R, K[4])
        put(R, T, R, K[5])
        put(T, TH, TH, K[6])
        put(T, PH, PH, K[6] * s * s)
        put(PH, PH, T, K[7])
        put(TH, TH, T, K[7])
        put(PH, PH, R, K[8])
        put(TH, TH, R, K[8])
        put(R, TH, TH, K[9])
        put(R, PH, PH, K[9] * s * s)
        put(PH, T, TH, K[10] / s)
        put(TH, PH, T, -K[10] * s)
        put(PH, R, TH, K[11] / s)
        put(TH, R, PH, -K[11] * s)
        put(TH, PH, PH, -s * c)
        put(PH, TH, PH, c / s)
        V = X[4:8]
        comps = []
        for a in range(4):
            acc = zero
            for b in range(4):
                for cc in range(4):
                    acc = acc + G[a][b][cc] * V[b] * V[cc]
            comps.append(acc * 0.5)
        return Jet.stack(comps)


# --- random draws for scans ------------------------------------------------------------

DRAW_KINDS = ("class1-I", "class1-II", "class1-III", "class2", "class3", "group2")


def _nonzero(rng: np.random.Generator, lo=0.3, hi=2.0) -> float:
    return float(rng.choice([-1.0, 1.0]) * rng.uniform(lo, hi))


def draw_abc(kind: str, rng: np.random.Generator) -> AbcQuantities:
    a = float(rng.uniform(-2, 2))
    if kind == "class1-I":
        b = _nonzero(rng)
        c = float(rng.uniform(-2, 2))
        while abs(2 * a * b + c) < 0.3 or abs(a * b + c) < 1e-3:
            c = float(rng.uniform(-2, 2))
        return AbcQuantities(a, b, c)
    if kind in ("class1-II", "class2"):
        b = _nonzero(rng)
        return AbcQuantities(a, b, -2 * a * b)
    if kind == "class1-III":
        return AbcQuantities(a, 0.0, _nonzero(rng))
    if kind == "class3":
        b = _nonzero(rng) if rng.uniform() < 0.7 else 0.0
        c = float(rng.uniform(-2, 2)) if b else _nonzero(rng)
        return AbcQuantities(a, b, c)
    raise ValueError(f"unknown draw kind {kind!r}")


def _targets(kind: str, q: AbcQuantities, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Target a1..a13 satisfying the class relations, and k10."""
    a, b, c = q.a, q.b, q.c
    abc_ = q.ab_c
    k10 = _nonzero(rng, 0.3, 3.0)
    a7, a11 = float(rng.normal()), float(rng.normal())
    flat = False
    if kind == "class3":
        if rng.uniform() < 0.2 and q.twoab_c < -1e-3:
            flat = True
            a7 = a11 = 0.0
            k10 = math.copysign(math.sqrt(-1.0 / q.twoab_c), k10)
        elif b != 0:
            a11 = abc_ * a7 / b
        else:
            a7 = 0.0
    a5 = abc_ * a7 - b * a11
    if kind == "class1-I":
        a3 = _nonzero(rng)
        a1 = a5 - abc_ * a3 / b
        a2 = a * abc_ * a3 / b
        a4 = a5 - a * a3
    elif kind == "class1-II":
        a3, a4 = float(rng.normal()), float(rng.normal())
        a1 = -a4 + 2 * a5
        a2 = a * a * a3 + 2 * a * (a4 - a5)
    elif kind == "class1-III":
        a1 = a5 + _nonzero(rng)
        a2 = -a * a1 + a * a5
        a3, a4 = 0.0, a5
    elif kind == "class2":
        a3 = _nonzero(rng)
        a1 = a * a3 + a5
        a2 = -a * a * a3
        a4 = -a * a3 + a5
    else:
        a1 = a2 = a3 = a4 = 0.0
    out = np.array(
        [a1, a2, a3, a4, a5, a * a7, a7, b * a7, abc_ * a7, a * a11, a11, b * a11, abc_ * a11]
    )
    if flat:
        out[:] = 0.0
    return out, k10


def profile_hitting(targets: np.ndarray, q: AbcQuantities, k10: float, rng: np.random.Generator, point=(0.0, 1.0)) -> KProfile:
    """A KProfile whose (a, b, c) and a1..a13 equal the requested values at the point.

    Each target except a5 owns one derivative slot with unit coefficient;
    a5 then follows from a9 - a12.
    """
    k = np.zeros(12)
    k[:6] = rng.normal(size=6)
    k[6], k[7], k[8], k[9] = q.a * k10, q.b * k10, q.ab_c * k10, k10
    dt = np.zeros(12)
    dr = np.zeros(12)
    # free slots that appear alongside the solved ones
    for i in (2, 3, 5, 9):
        dt[i - 1] = rng.normal()
    for i in (8,):
        dr[i - 1] = rng.normal()
    base = curvature_profile(KProfile(k, dt, dr, point)).a
    # slot, sign of its coefficient in a_i, and whether it is a t- or r-derivative
    owners = {
        1: (1, +1, "r"), 2: (2, +1, "r"), 3: (4, +1, "r"), 4: (6, +1, "r"),
        6: (7, -1, "t"), 7: (10, -1, "t"), 8: (8, -1, "t"), 9: (9, -1, "t"),
        10: (7, -1, "r"), 11: (10, -1, "r"), 12: (8, -1, "r"), 13: (9, -1, "r"),
    }
    for i, (slot, sign, var) in owners.items():
        delta = (targets[i - 1] - base[i - 1]) * sign
        (dt if var == "t" else dr)[slot - 1] += delta
    return KProfile(k, dt, dr, point, "synthetic")


def draw_profile(kind: str, rng: np.random.Generator) -> KProfile:
    """A random metrizable non-Riemannian profile of the requested class or case."""
    if kind == "group2":
        k = np.zeros(12)
        k[:6] = rng.normal(size=6)
        dt = np.zeros(12)
        dr = np.zeros(12)
        dt[:6] = rng.normal(size=6)
        dr[:6] = rng.normal(size=6)
        return KProfile(k, dt, dr, (0.0, 1.0), "synthetic")
    q = draw_abc(kind, rng)
    targets, k10 = _targets(kind, q, rng)
    return profile_hitting(targets, q, k10, rng)


def metrizable_field(q: AbcQuantities, k10_fn: Callable[[float, float], tuple[float, float, float]]):
    """A k-field with constant (a, b, c) that satisfies the metrizability constraints.

    ``k10_fn(t, r)`` returns (k10, d_t k10, d_r k10).  k1..k6 are k10 times the
    solution of the six linear constraints, so the field is metrizable at
    every point.
    """
    a, b, c = q.a, q.b, q.c
    abc_, s = q.ab_c, q.twoab_c
    M = np.array(
        [
            [-a, -1, 0, a * a, 0, a],
            [b, 0, 0, s, 0, b],
            [0, b, 0, a * abc_, 0, 2 * abc_],
            [0, -a, -1, 0, a, a * a],
            [0, b, 0, 0, b, s],
            [0, 0, b, 0, 2 * abc_, a * abc_],
        ]
    )
    rhs = np.array([0, 2 * b * b, 2 * b * abc_, 0, 2 * b * abc_, 2 * abc_ * abc_])
    ratios, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    if np.max(np.abs(M @ ratios - rhs)) > 1e-10:
        raise InvalidClassParams("metrizability constraints have no solution for these (a, b, c)")
    shape = np.concatenate([ratios, [a, b, abc_, 1.0, 0.0, 0.0]])

    def field(t: float, r: float) -> KProfile:
        k10, k10_t, k10_r = k10_fn(t, r)
        return KProfile(shape * k10, shape * k10_t, shape * k10_r, (t, r), "analytic")

    return field
