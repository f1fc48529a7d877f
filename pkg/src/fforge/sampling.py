"""Seeded low-discrepancy samples inside a spec's domain."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from fforge.core import DegenerateMetric, InsufficientSamples, LocalGeometry, SamplePoint
from fforge.dsl import GeometrySpec, evaluate, in_domain
from fforge.jets import JetConfig

GENERATOR = "scipy.stats.qmc.Halton(scramble=True)"
_METRIC_CONFIG = JetConfig(2, 0, 2)


@dataclass(frozen=True)
class SampleBox:
    """Coordinate ranges; angular velocities are scaled by 1/r (and 1/sin(theta) for phi)."""

    t: tuple[float, float] = (0.0, 1.0)
    r: tuple[float, float] = (2.0, 10.0)
    theta: tuple[float, float] = (0.3, math.pi - 0.3)
    phi: tuple[float, float] = (0.0, 2 * math.pi)
    tdot: tuple[float, float] = (0.5, 1.5)
    rdot: tuple[float, float] = (-0.5, 0.5)
    angular: tuple[float, float] = (-0.5, 0.5)


def _map(u: np.ndarray, box: SampleBox) -> list[float]:
    def lerp(x, rng):
        return rng[0] + (rng[1] - rng[0]) * float(x)

    t, r, th, ph = (lerp(u[0], box.t), lerp(u[1], box.r), lerp(u[2], box.theta), lerp(u[3], box.phi))
    tdot = lerp(u[4], box.tdot)
    rdot = lerp(u[5], box.rdot)
    thdot = lerp(u[6], box.angular) / r
    phdot = lerp(u[7], box.angular) / (r * math.sin(th))
    return [t, r, th, ph, tdot, rdot, thdot, phdot]


def admissible(spec: GeometrySpec, values, sign: int | None = None) -> bool:
    """In the domain, L of the requested sign and bounded away from zero, metric non-degenerate."""
    if not in_domain(spec, values):
        return False
    L = evaluate(spec, values)
    scale = max(abs(v) for v in values[4:]) ** 2
    if abs(L) < 1e-6 * scale:
        return False
    if sign is not None and math.copysign(1, L) != sign:
        return False
    try:
        LocalGeometry(spec, SamplePoint.from_values(values), _METRIC_CONFIG).metric
    except (DegenerateMetric, ArithmeticError, ValueError):
        return False
    return True


def domain_samples(
    spec: GeometrySpec,
    n: int,
    seed: int,
    box: SampleBox = SampleBox(),
    sign: int | None = None,
    max_tries_factor: int = 200,
) -> list[SamplePoint]:
    """``n`` admissible samples from a scrambled Halton sequence seeded by ``seed``."""
    sampler = qmc.Halton(d=8, scramble=True, seed=seed)
    out: list[SamplePoint] = []
    tries = 0
    limit = max(n, 1) * max_tries_factor
    while len(out) < n:
        batch = sampler.random(64)
        for u in batch:
            tries += 1
            values = _map(u, box)
            if admissible(spec, values, sign):
                out.append(SamplePoint.from_values(values))
                if len(out) == n:
                    break
        if tries >= limit and len(out) < n:
            raise InsufficientSamples(f"only {len(out)} of {n} admissible samples after {tries} draws")
    return out


def velocity_samples(
    spec: GeometrySpec, x, n: int, seed: int, box: SampleBox = SampleBox(), sign: int | None = None
) -> list[tuple[float, ...]]:
    """``n`` admissible velocities at the base point ``x``."""
    sampler = qmc.Halton(d=4, scramble=True, seed=seed)
    r, th = x[1], x[2]
    out = []
    tries = 0
    while len(out) < n:
        for u in sampler.random(32):
            tries += 1
            v = (
                box.tdot[0] + (box.tdot[1] - box.tdot[0]) * u[0],
                box.rdot[0] + (box.rdot[1] - box.rdot[0]) * u[1],
                (box.angular[0] + (box.angular[1] - box.angular[0]) * u[2]) / r,
                (box.angular[0] + (box.angular[1] - box.angular[0]) * u[3]) / (r * math.sin(th)),
            )
            if admissible(spec, list(x) + list(v), sign):
                out.append(tuple(float(c) for c in v))
                if len(out) == n:
                    break
        if tries > 200 * n and len(out) < n:
            raise InsufficientSamples(f"only {len(out)} admissible velocities at {list(x)}")
    return out


def sign_for(spec: GeometrySpec, timelike: bool) -> int | None:
    """Sign of L on timelike vectors from the geometry's signature hint (None when unknown)."""
    if not timelike:
        return None
    hint = (spec.signature_hint or "").replace(" ", "").replace(",", "")
    if hint.startswith("-"):
        return -1
    if hint.startswith("+"):
        return 1
    return None
