"""Invariant suite: identities every Finsler function must satisfy, evaluated numerically."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from fforge import core
from fforge.core import LocalGeometry, SamplePoint
from fforge.dsl import GeometrySpec, eval_jet
from fforge.jets import JetConfig, unit
from fforge.sampling import velocity_samples

HOMOGENEITY_FACTORS = (0.5, 2.0, 3.0)


@dataclass(frozen=True)
class Tolerances:
    homogeneity: float = 1e-9
    euler: float = 1e-9
    symmetry: float = 1e-9
    torsion: float = 1e-9
    compatibility: float = 1e-9
    cartan_duality: float = 1e-9
    killing: float = 1e-10
    berwald: float = core.BERWALD_TOLERANCE
    landsberg: float = 1e-8

    @classmethod
    def uniform(cls, tol: float) -> "Tolerances":
        return cls(*([tol] * 9))


@dataclass
class InvariantResult:
    name: str
    worst: float
    tolerance: float
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.worst) and self.worst < self.tolerance)

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "worst": self.worst, "tolerance": self.tolerance, **self.detail}


def _rel(diff, scale) -> float:
    diff = float(np.max(np.abs(diff)))
    scale = float(scale)
    return diff / scale if scale > 0 else diff


def homogeneity(spec: GeometrySpec, geo: LocalGeometry) -> float:
    """Worst relative violation of the scaling laws of L, G, N, R^a_bc and R."""
    base = geo
    L0, G0, N0 = base.L.value, base.spray.G, base.spray.N
    R0 = base.curvature
    worst = 0.0
    for lam in HOMOGENEITY_FACTORS:
        g = LocalGeometry(spec, base.sample.scaled(lam), base.config)
        pairs = [
            (g.L.value, lam**2 * L0, abs(lam**2 * L0)),
            (g.spray.G, lam**2 * G0, lam**2 * np.max(np.abs(G0))),
            (g.spray.N, lam * N0, lam * np.max(np.abs(N0))),
            (g.curvature.Rabc, lam * R0.Rabc, lam * R0.scale),
            (g.curvature.ricci, lam**2 * R0.ricci, lam**2 * base._ricci_scale()),
        ]
        for got, want, scale in pairs:
            worst = max(worst, _rel(np.asarray(got) - np.asarray(want), max(scale, 1e-300)))
    return worst


def euler_identities(geo: LocalGeometry) -> float:
    """xdot.dL = 2L, g(xdot, xdot) = L, C(., ., xdot) = 0 and N xdot = 2G."""
    xd = np.array(geo.sample.xdot)
    L = geo.L.value
    g = geo.metric.g
    gscale = float(np.max(np.abs(g))) * float(np.max(np.abs(xd))) ** 2
    dL = geo.dL_v.value
    N, G = geo.spray.N, geo.spray.G
    C = geo.C_jet.value
    return max(
        _rel(dL @ xd - 2 * L, gscale),
        _rel(xd @ g @ xd - L, gscale),
        _rel(np.einsum("abc,c->ab", C, xd), float(np.max(np.abs(g)))),
        _rel(N @ xd - 2 * G, max(float(np.max(np.abs(N))) * float(np.max(np.abs(xd))), 1e-300)),
    )


def tensor_symmetries(geo: LocalGeometry) -> float:
    """g and C symmetric, R^a_bc antisymmetric in bc, R equal to the trace contraction."""
    g = geo.metric.g
    raw = geo.g_jet.value
    C = geo.C_jet.value
    curv = geo.curvature
    xd = np.array(geo.sample.xdot)
    gs = float(np.max(np.abs(raw)))
    cs = max(float(np.max(np.abs(C))), gs * 1e-300)
    out = [
        _rel(raw - raw.T, gs),
        _rel(g @ geo.metric.g_inv - np.eye(4), 1.0),
        _rel(C - C.transpose(1, 0, 2), cs),
        _rel(C - C.transpose(0, 2, 1), cs),
        _rel(curv.Rabc + curv.Rabc.transpose(0, 2, 1), max(curv.scale, 1e-300)),
        _rel(np.einsum("aab,b->", curv.Rabc, xd) - curv.ricci, max(geo._ricci_scale(), 1e-300)),
    ]
    return max(out)


def torsion(geo: LocalGeometry) -> float:
    """dot-d_b N^a_c - dot-d_c N^a_b."""
    dN = geo.N_jet.grad(core.VEL).value
    return _rel(dN - dN.transpose(0, 2, 1), max(float(np.max(np.abs(dN))), 1e-300))


def compatibility(geo: LocalGeometry) -> float:
    res, scale = core.metric_compatibility(geo)
    return _rel(res, max(scale, 1e-300))


def cartan_duality(geo: LocalGeometry) -> float:
    """g^bc C_abc equals dot-d_a log sqrt|det g|."""
    c = geo.cartan
    scale = max(float(np.max(np.abs(c.C_trace))), float(np.max(np.abs(geo.C_jet.value)))
                * float(np.max(np.abs(geo.metric.g_inv))), 1e-300)
    return _rel(c.C_trace - c.C_trace_logdet, scale)


def killing(spec: GeometrySpec, s: SamplePoint) -> float:
    """X^C_i(L) normalized by the size of the terms summed into it."""
    lifts = core.so3_lifts(s.values)
    res = core.killing_residuals(spec, s)
    L = eval_jet(spec, s.values, JetConfig(1, 1, 1))
    grad = np.array([L.partial(unit(i)) for i in range(8)])
    scale = float(np.max(np.abs(lifts) @ np.abs(grad)))
    return _rel(res, max(scale, 1e-300))


def landsberg_trace(geo: LocalGeometry) -> float:
    ls = geo.landsberg
    g_inv = float(np.max(np.abs(geo.metric.g_inv)))
    # floor for (pseudo-)Riemannian L, where C and hence ls.scale are rounding noise
    _, horizontal = core.metric_compatibility(geo)
    floor = horizontal * g_inv / float(np.max(np.abs(geo.sample.xdot)))
    return _rel(ls.S_trace, max(ls.scale * g_inv, floor, 1e-300))


def run_suite(
    spec: GeometrySpec,
    samples: Sequence[SamplePoint],
    seed: int = 0,
    tol: Tolerances = Tolerances(),
    berwald_points: int = 3,
    berwald_velocities: int = 12,
    sign: int | None = None,
) -> list[InvariantResult]:
    """Evaluate every invariant over ``samples``; report the worst residual of each."""
    worst = {k: 0.0 for k in ("homogeneity", "euler", "symmetry", "torsion", "compatibility",
                              "cartan_duality", "killing", "landsberg")}
    where: dict[str, list[float]] = {}

    def note(name, value, s):
        if not value <= worst[name]:
            worst[name] = value
            where[name] = s.values

    for s in samples:
        geo = LocalGeometry(spec, s)
        note("homogeneity", homogeneity(spec, geo), s)
        note("euler", euler_identities(geo), s)
        note("symmetry", tensor_symmetries(geo), s)
        note("torsion", torsion(geo), s)
        note("compatibility", compatibility(geo), s)
        note("cartan_duality", cartan_duality(geo), s)
        note("killing", killing(spec, s), s)
        note("landsberg", landsberg_trace(geo), s)

    berwald_worst = 0.0
    berwald_where = None
    for i, s in enumerate(samples[:berwald_points]):
        vs = velocity_samples(spec, s.x, berwald_velocities, seed + 1000 + i, sign=sign)
        rep = core.berwald_test(spec, s.x, vs, tol.berwald)
        if not rep.max_deviation <= berwald_worst:
            berwald_worst, berwald_where = rep.max_deviation, list(s.x)

    names = {
        "homogeneity": "homogeneity",
        "euler": "euler-identities",
        "symmetry": "tensor-symmetries",
        "torsion": "torsion-free",
        "compatibility": "metric-compatibility",
        "cartan_duality": "cartan-trace-duality",
        "killing": "so3-killing",
        "landsberg": "landsberg-trace",
    }
    out = []
    for key, label in names.items():
        if key == "landsberg":
            out.append(InvariantResult("berwald", berwald_worst, tol.berwald, {"at": berwald_where}))
        out.append(InvariantResult(label, worst[key], getattr(tol, key), {"at": where.get(key)}))
    return out
