"""Tensorial objects of a Finsler function at a point of the tangent bundle.

Every quantity is assembled from one jet of L at the sample: the metric and
Cartan tensor from velocity derivatives, the spray by solving a jet-valued
linear system, and the nonlinear connection and its curvature by
differentiating the spray jet.  Nothing is obtained by finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from fforge import jets
from fforge.dsl import GeometrySpec, eval_jet, in_domain
from fforge.jets import DEFAULT_CONFIG, HESSIAN_CONFIG, Jet, JetConfig

POS = range(0, 4)
VEL = range(4, 8)

DEGENERACY_THRESHOLD = 1e-12
BERWALD_TOLERANCE = 1e-8
MIN_BERWALD_SAMPLES = 10
POLE_THRESHOLD = 1e-8


class GeometryError(ArithmeticError):
    pass


class DegenerateMetric(GeometryError):
    """det g vanishes at the sample: the point lies outside the admissible cone."""


class InsufficientSamples(GeometryError):
    pass


class NullSample(GeometryError):
    """L vanishes at the sample, so quantities divided by L are undefined."""


class PoleSample(GeometryError):
    """sin(theta) vanishes: the rotation generators are singular there."""


@dataclass(frozen=True)
class SamplePoint:
    x: tuple[float, float, float, float]
    xdot: tuple[float, float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "xdot", tuple(float(v) for v in self.xdot))
        if len(self.x) != 4 or len(self.xdot) != 4:
            raise ValueError("sample needs 4 positions and 4 velocities")
        if not any(self.xdot):
            raise ValueError("velocity must be nonzero")

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "SamplePoint":
        return cls(tuple(values[:4]), tuple(values[4:8]))

    @property
    def values(self) -> list[float]:
        return list(self.x) + list(self.xdot)

    def scaled(self, lam: float) -> "SamplePoint":
        return SamplePoint(self.x, tuple(lam * v for v in self.xdot))


@dataclass(frozen=True)
class MetricValue:
    g: np.ndarray
    g_inv: np.ndarray
    det_g: float
    signature: tuple[int, int, int, int]


@dataclass(frozen=True)
class CartanValue:
    C: np.ndarray
    C_trace: np.ndarray
    C_trace_logdet: np.ndarray


@dataclass(frozen=True)
class SprayValue:
    G: np.ndarray
    N: np.ndarray


@dataclass(frozen=True)
class CurvatureValue:
    Rabc: np.ndarray
    ricci: float
    ricci_hessian: np.ndarray | None
    scale: float
    """Largest magnitude among the terms summed into R^a_bc (normalizes residuals)."""


@dataclass(frozen=True)
class LandsbergValue:
    S: np.ndarray
    S_trace: np.ndarray
    scale: float


@dataclass(frozen=True)
class BerwaldReport:
    is_berwald: bool
    gamma: np.ndarray
    max_deviation: float
    samples_used: int
    tolerance: float


def _velocity_seed(cfg: JetConfig, sample: Sequence[float]) -> Jet:
    return jets.seed_vector(sample, cfg)[4:8]


def _ein(subscripts: str, *operands: Jet) -> Jet:
    """Tensor contraction of jets whose index string has no products (linear ops only)."""
    (op,) = operands
    inp, out = subscripts.split("->")
    return Jet(op.cfg, np.einsum(f"{inp}z->{out}z", op.c))


def _contract(a: Jet, a_idx: str, b: Jet, b_idx: str, out_idx: str) -> Jet:
    """Product of two tensor jets summed over indices absent from ``out_idx``."""
    letters = sorted(set(a_idx) | set(b_idx), key=lambda ch: (a_idx + b_idx).index(ch))
    A = a.c
    B = b.c
    # align both operands on the full letter set, then multiply and sum
    A = _align(A, a_idx, letters)
    B = _align(B, b_idx, letters)
    prod = Jet(a.cfg, A) * Jet(b.cfg, B)
    sum_axes = tuple(i for i, ch in enumerate(letters) if ch not in out_idx)
    if sum_axes:
        prod = prod.sum(sum_axes)
    kept = [ch for ch in letters if ch in out_idx]
    perm = tuple(kept.index(ch) for ch in out_idx)
    return prod.transpose(*perm) if perm != tuple(range(len(perm))) else prod


def _align(arr: np.ndarray, idx: str, letters: list[str]) -> np.ndarray:
    perm = [idx.index(ch) for ch in letters if ch in idx]
    arr = np.transpose(arr, perm + [len(idx)])
    shape = []
    it = iter(arr.shape[:-1])
    for ch in letters:
        shape.append(next(it) if ch in idx else 1)
    return arr.reshape(shape + [arr.shape[-1]])


class LocalGeometry:
    """Lazily computed jets and tensors of one Finsler function at one sample."""

    def __init__(self, spec: GeometrySpec, sample: SamplePoint, config: JetConfig = DEFAULT_CONFIG):
        self.spec = spec
        self.sample = sample
        self.config = config

    # --- jets ----------------------------------------------------------------

    @cached_property
    def L(self) -> Jet:
        return eval_jet(self.spec, self.sample.values, self.config)

    @cached_property
    def xdot(self) -> Jet:
        return _velocity_seed(self.config, self.sample.values)

    @cached_property
    def dL_v(self) -> Jet:
        return self.L.grad(VEL)

    @cached_property
    def g_jet(self) -> Jet:
        return self.dL_v.grad(VEL) * 0.5

    @cached_property
    def spray_jet(self) -> Jet:
        dLv_x = self.dL_v.grad(POS)  # [b, c] = d_c dot-d_b L
        K = _contract(dLv_x, "bc", self.xdot, "c", "b") - self.L.grad(POS)
        self._check_degenerate()
        return jets.solve(self.g_jet, K) * 0.25

    @cached_property
    def N_jet(self) -> Jet:
        return self.spray_jet.grad(VEL)  # [a, b] = dot-d_b G^a

    @cached_property
    def delta_N_jet(self) -> tuple[Jet, Jet, Jet]:
        """(d_c N^a_b, N^d_c dot-d_d N^a_b, delta_c N^a_b) indexed [a, b, c]."""
        dN_x = self.N_jet.grad(POS)
        dN_v = self.N_jet.grad(VEL)
        transport = _contract(self.N_jet, "dc", dN_v, "abd", "abc")
        return dN_x, transport, dN_x - transport

    @cached_property
    def R_jet(self) -> Jet:
        D = self.delta_N_jet[2]
        return D - D.transpose(0, 2, 1)

    @cached_property
    def ricci_jet(self) -> Jet:
        trace = _ein("aab->b", self.R_jet)
        return _contract(trace, "b", self.xdot, "b", "")

    @cached_property
    def C_jet(self) -> Jet:
        return self.g_jet.grad(VEL) * 0.5

    @cached_property
    def g_inv_jet(self) -> Jet:
        self._check_degenerate()
        return jets.inverse(self.g_jet)

    @cached_property
    def C_trace_jet(self) -> Jet:
        return _contract(self.g_inv_jet, "bc", self.C_jet, "abc", "a")

    # --- values --------------------------------------------------------------

    def _check_degenerate(self):
        g = self.g_jet.value
        det = float(np.linalg.det(g))
        scale = float(np.max(np.abs(g)))
        if not np.all(np.isfinite(g)) or abs(det) <= DEGENERACY_THRESHOLD * scale**4:
            raise DegenerateMetric(f"|det g| = {abs(det):.3e} at {self.sample.values}")

    @cached_property
    def metric(self) -> MetricValue:
        self._check_degenerate()
        g = self.g_jet.value
        g = 0.5 * (g + g.T)
        eig = np.linalg.eigvalsh(g)
        return MetricValue(g, np.linalg.inv(g), float(np.linalg.det(g)), tuple(int(s) for s in np.sign(eig)))

    @cached_property
    def cartan(self) -> CartanValue:
        g_inv = self.metric.g_inv
        C = self.C_jet.value
        trace = np.einsum("bc,abc->a", g_inv, C)
        det = jets.determinant4(self.g_jet)
        logdet = jets.log(jets.absolute(det)) * 0.5
        trace_logdet = logdet.grad(VEL).value
        return CartanValue(C, trace, trace_logdet)

    @cached_property
    def spray(self) -> SprayValue:
        return SprayValue(self.spray_jet.value, self.N_jet.value)

    @cached_property
    def curvature(self) -> CurvatureValue:
        dN_x, transport, _ = self.delta_N_jet
        R = self.R_jet.value
        scale = float(max(np.max(np.abs(dN_x.value)), np.max(np.abs(transport.value)), 0.0))
        hessian = None
        if self.ricci_jet.cfg.max_velocity_order >= 2:
            hessian = np.array(
                [[self.ricci_jet.partial(_vv(a, b)) for b in range(4)] for a in range(4)]
            )
        return CurvatureValue(R, float(self.ricci_jet.value), hessian, scale)

    @cached_property
    def landsberg(self) -> LandsbergValue:
        N = self.spray.N
        xd = np.array(self.sample.xdot)
        C = self.C_jet.value
        dC_x = self.C_jet.grad(POS).value  # [a,b,c,d] = d_d C_abc
        dC_v = self.C_jet.grad(VEL).value
        deltaC = dC_x - np.einsum("ed,abce->abcd", N, dC_v)
        S = (
            np.einsum("d,abcd->abc", xd, deltaC)
            - np.einsum("da,dbc->abc", N, C)
            - np.einsum("db,adc->abc", N, C)
            - np.einsum("dc,abd->abc", N, C)
        )
        Ca = self.C_trace_jet
        dCa_x = Ca.grad(POS).value  # [a, b] = d_b C_a
        dCa_v = Ca.grad(VEL).value
        deltaCa = dCa_x - np.einsum("eb,ae->ab", N, dCa_v)
        S_trace = np.einsum("b,ab->a", xd, deltaCa) - np.einsum("ba,b->a", N, Ca.value)
        terms = [
            np.abs(np.einsum("d,abcd->abc", xd, dC_x)),
            np.abs(np.einsum("d,ed,abce->abc", xd, N, dC_v)),
            np.abs(np.einsum("da,dbc->abc", N, C)),
        ]
        scale = float(max(np.max(t) for t in terms))
        return LandsbergValue(S, S_trace, scale)

    def _ricci_scale(self) -> float:
        return self.curvature.scale * float(np.max(np.abs(self.sample.xdot)))


def _vv(a: int, b: int) -> tuple[int, ...]:
    alpha = [0] * 8
    alpha[4 + a] += 1
    alpha[4 + b] += 1
    return tuple(alpha)


def local_geometry(spec: GeometrySpec, s: SamplePoint, config: JetConfig = DEFAULT_CONFIG) -> LocalGeometry:
    return LocalGeometry(spec, s, config)


# --- public operations ------------------------------------------------------


def metric(spec: GeometrySpec, s: SamplePoint) -> MetricValue:
    return LocalGeometry(spec, s).metric


def cartan(spec: GeometrySpec, s: SamplePoint) -> CartanValue:
    return LocalGeometry(spec, s).cartan


def spray(spec: GeometrySpec, s: SamplePoint) -> SprayValue:
    return LocalGeometry(spec, s).spray


def curvature(spec: GeometrySpec, s: SamplePoint, with_hessian: bool = False) -> CurvatureValue:
    cfg = HESSIAN_CONFIG if with_hessian else DEFAULT_CONFIG
    return LocalGeometry(spec, s, cfg).curvature


def landsberg(spec: GeometrySpec, s: SamplePoint) -> LandsbergValue:
    return LocalGeometry(spec, s).landsberg


def normalized_ricci(geo: LocalGeometry) -> float:
    """|R| divided by the size of the curvature terms that cancel into it."""
    scale = geo._ricci_scale()
    return abs(geo.curvature.ricci) / scale if scale > 0 else abs(geo.curvature.ricci)


def vacuum_terms(geo: LocalGeometry) -> tuple[float, float, float]:
    """(g^ab dot-d_a dot-d_b R, 6 R / L, normalizing scale) at the sample."""
    L = geo.L.value
    if abs(L) <= 1e-12 * max(1.0, float(np.max(np.abs(geo.metric.g)))) * max(np.abs(geo.sample.xdot)) ** 2:
        raise NullSample(f"L = {L:.3e} vanishes at the sample")
    curv = geo.curvature
    if curv.ricci_hessian is None:
        raise jets.OrderExceeded("vacuum residual needs a jet with velocity order >= 6")
    trace = float(np.einsum("ab,ab->", geo.metric.g_inv, curv.ricci_hessian))
    ricci_term = 6.0 * curv.ricci / L
    vmax = float(np.max(np.abs(geo.sample.xdot)))
    scale = max(
        float(np.max(np.abs(geo.metric.g_inv))) * curv.scale / vmax,
        6.0 * curv.scale * vmax / abs(L),
    )
    return trace, ricci_term, scale


def vacuum_residual(spec: GeometrySpec, s: SamplePoint) -> float:
    """g^ab dot-d_a dot-d_b R - 6 R / L at ``s``."""
    trace, ricci_term, _ = vacuum_terms(LocalGeometry(spec, s, HESSIAN_CONFIG))
    return trace - ricci_term


def metric_compatibility_check(spec: GeometrySpec, s: SamplePoint) -> np.ndarray:
    """The dynamical covariant derivative of g (identically zero in exact arithmetic)."""
    return metric_compatibility(LocalGeometry(spec, s))[0]


def metric_compatibility(geo: LocalGeometry) -> tuple[np.ndarray, float]:
    N = geo.spray.N
    xd = np.array(geo.sample.xdot)
    g = geo.metric.g
    dg_x = geo.g_jet.grad(POS).value  # [a, b, d] = d_d g_ab
    dg_v = geo.g_jet.grad(VEL).value
    horizontal = np.einsum("d,abd->ab", xd, dg_x)
    vertical = np.einsum("d,ed,abe->ab", xd, N, dg_v)
    twist = np.einsum("da,db->ab", N, g)
    residual = horizontal - vertical - twist - twist.T
    scale = float(max(np.max(np.abs(horizontal)), np.max(np.abs(vertical)), np.max(np.abs(twist))))
    return residual, scale


# --- Berwald detection ------------------------------------------------------


def connection_coefficients(geo: LocalGeometry) -> np.ndarray:
    """Gamma^a_bc = dot-d_b dot-d_c G^a at the sample."""
    G = geo.spray_jet
    return np.array(
        [[[G[a].partial(_vv(b, c)) for c in range(4)] for b in range(4)] for a in range(4)]
    )


def berwald_test(
    spec: GeometrySpec,
    x: Sequence[float],
    velocity_samples: Sequence[Sequence[float]],
    tolerance: float = BERWALD_TOLERANCE,
) -> BerwaldReport:
    """Check that N^a_b(x, v) = Gamma^a_bc(x) v^c for every supplied velocity."""
    if len(velocity_samples) < MIN_BERWALD_SAMPLES:
        raise InsufficientSamples(
            f"need at least {MIN_BERWALD_SAMPLES} velocity samples, got {len(velocity_samples)}"
        )
    first = LocalGeometry(spec, SamplePoint(tuple(x), tuple(velocity_samples[0])))
    gamma = connection_coefficients(first)
    worst = 0.0
    for v in velocity_samples:
        geo = first if v is velocity_samples[0] else LocalGeometry(spec, SamplePoint(tuple(x), tuple(v)))
        N = geo.spray.N
        linear = np.einsum("abc,c->ab", gamma, np.asarray(v, dtype=float))
        scale = max(float(np.max(np.abs(N))), float(np.max(np.abs(linear))), 1e-300)
        worst = max(worst, float(np.max(np.abs(N - linear))) / scale)
    return BerwaldReport(worst < tolerance, gamma, worst, len(velocity_samples), tolerance)


# --- spherical symmetry -------------------------------------------------------


def so3_lifts(sample: Sequence[float]) -> np.ndarray:
    """Components of the complete lifts of the three rotation generators.

    Row i holds the 8 components of X^C_i along (d_t, d_r, d_theta, d_phi,
    dot-d_t, dot-d_r, dot-d_theta, dot-d_phi).
    """
    _, _, th, ph, _, _, thd, phd = sample
    s, c = math.sin(th), math.cos(th)
    if abs(s) < POLE_THRESHOLD:
        raise PoleSample(f"sin(theta) = {s:.2e}")
    cot = c / s
    sp, cp = math.sin(ph), math.cos(ph)
    X1 = [0, 0, sp, cot * cp, 0, 0, phd * cp, -(thd * cp / s**2 + phd * cot * sp)]
    X2 = [0, 0, -cp, cot * sp, 0, 0, phd * sp, -(thd * sp / s**2) + phd * cot * cp]
    X3 = [0, 0, 0, 1, 0, 0, 0, 0]
    return np.array([X1, X2, X3], dtype=float)


def killing_residuals(spec: GeometrySpec, s: SamplePoint) -> np.ndarray:
    lifts = so3_lifts(s.values)
    L = eval_jet(spec, s.values, JetConfig(1, 1, 1))
    grad = np.array([L.partial(jets.unit(i)) for i in range(8)])
    return lifts @ grad


def killing_check_so3(spec: GeometrySpec, samples: Sequence[SamplePoint]) -> list[np.ndarray]:
    """X^C_i(L) for the three rotation generators at each sample (zero iff invariant)."""
    return [killing_residuals(spec, s) for s in samples]


def require_domain(spec: GeometrySpec, s: SamplePoint):
    if not in_domain(spec, s.values):
        raise DegenerateMetric(f"sample {s.values} outside the declared domain of {spec.name}")
