"""Integration of the geodesic equation x'' + 2 G(x, x') = 0."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.integrate import simpson

from fforge.core import GeometryError, LocalGeometry, SamplePoint
from fforge.dsl import DslError, GeometrySpec, evaluate, in_domain
from fforge.jets import JetConfig, JetError

SPRAY_CONFIG = JetConfig(2, 1, 2)

TAU_LIMIT = "tau-limit"
DOMAIN_EXIT = "domain-exit"
SIGN_CHANGE = "sign-change"
MAX_STEPS = "max-steps"


class GeodesicError(RuntimeError):
    pass


class DomainExit(GeodesicError):
    def __init__(self, message: str, last_state: "GeodesicState | None" = None):
        super().__init__(message)
        self.last_state = last_state


class StepFailure(GeodesicError):
    pass


class SignChange(GeodesicError):
    pass


@dataclass(frozen=True)
class GeodesicState:
    tau: float
    x: tuple[float, ...]
    xdot: tuple[float, ...]
    L_value: float

    @property
    def row(self) -> list[float]:
        return [self.tau, *self.x, *self.xdot, self.L_value]


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk45-adaptive"
    step: float = 0.01
    rel_tol: float = 1e-11
    abs_tol: float = 1e-13
    max_steps: int = 200_000
    tau_max: float = 10.0
    min_step: float = 1e-12

    def __post_init__(self):
        if self.method not in ("rk4-fixed", "rk45-adaptive"):
            raise ValueError(f"unknown method {self.method!r}")
        if min(self.step, self.rel_tol, self.abs_tol, self.tau_max) <= 0 or self.max_steps < 1:
            raise ValueError("step, tolerances, tau_max and max_steps must be positive")


@dataclass
class Trajectory:
    states: list[GeodesicState]
    termination: str
    diagnostics: list[str] = field(default_factory=list)

    @property
    def taus(self) -> np.ndarray:
        return np.array([s.tau for s in self.states])

    @property
    def L_values(self) -> np.ndarray:
        return np.array([s.L_value for s in self.states])

    def L_drift(self) -> float:
        L = self.L_values
        return float(np.max(np.abs(L - L[0])) / abs(L[0])) if L[0] != 0 else float(np.max(np.abs(L)))


def spray_value(spec: GeometrySpec, x: Sequence[float], xdot: Sequence[float]) -> np.ndarray:
    return LocalGeometry(spec, SamplePoint(tuple(x), tuple(xdot)), SPRAY_CONFIG).spray_jet.value


def make_state(spec: GeometrySpec, tau: float, x: Sequence[float], xdot: Sequence[float]) -> GeodesicState:
    x = tuple(float(v) for v in x)
    xdot = tuple(float(v) for v in xdot)
    return GeodesicState(float(tau), x, xdot, evaluate(spec, list(x) + list(xdot)))


class _System:
    def __init__(self, spec: GeometrySpec):
        self.spec = spec

    def __call__(self, y: np.ndarray) -> np.ndarray:
        if not in_domain(self.spec, y):
            raise DomainExit(f"left the domain at {y.tolist()}")
        G = spray_value(self.spec, y[:4], y[4:])
        return np.concatenate([y[4:], -2.0 * G])


_RK_FAIL = (GeometryError, JetError, DslError, ArithmeticError, ValueError)


def _rk4_step(f: _System, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def _dopri_step(f: _System, y: np.ndarray, h: float, k1: np.ndarray):
    ks = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * k for a, k in zip(_A[i], ks))
        ks.append(f(yi))
    K = np.array(ks)
    y5 = y + h * (_B5 @ K)
    err = h * ((_B5 - _B4) @ K)
    return y5, err, ks[-1]


def integrate(spec: GeometrySpec, init: GeodesicState, cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Integrate from ``init`` until tau_max, a domain exit, a sign change of L or max_steps."""
    y = np.array(init.x + init.xdot, dtype=float)
    if not in_domain(spec, y):
        raise DomainExit(f"initial state {y.tolist()} is outside the domain of {spec.name}", init)
    f = _System(spec)
    f(y)  # raises DegenerateMetric before any step is taken
    states = [make_state(spec, init.tau, y[:4], y[4:])]
    tau_end = init.tau + cfg.tau_max
    sign0 = math.copysign(1.0, states[0].L_value)
    if cfg.method == "rk4-fixed":
        return _run_fixed(spec, f, y, states, tau_end, cfg, sign0)
    return _run_adaptive(spec, f, y, states, tau_end, cfg, sign0)


def _accept(spec, states, tau, y, sign0) -> str | None:
    st = make_state(spec, tau, y[:4], y[4:])
    states.append(st)
    if st.L_value == 0.0 or math.copysign(1.0, st.L_value) != sign0:
        return SIGN_CHANGE
    return None


def _run_fixed(spec, f, y, states, tau_end, cfg, sign0) -> Trajectory:
    tau = states[0].tau
    n = max(1, int(round((tau_end - tau) / cfg.step)))
    h = (tau_end - tau) / n
    if n > cfg.max_steps:
        n = cfg.max_steps
    for i in range(n):
        try:
            y = _rk4_step(f, y, h)
        except DomainExit as exc:
            return Trajectory(states, DOMAIN_EXIT, [str(exc)])
        except _RK_FAIL as exc:
            raise StepFailure(f"fixed step failed at tau = {tau}: {exc}") from exc
        tau = states[0].tau + (i + 1) * h
        if not in_domain(spec, y):
            return Trajectory(states, DOMAIN_EXIT, [f"left the domain at tau = {tau}"])
        if _accept(spec, states, tau, y, sign0):
            return Trajectory(states, SIGN_CHANGE, [f"L changed sign at tau = {tau}"])
    term = TAU_LIMIT if n * h >= tau_end - states[0].tau - 1e-12 else MAX_STEPS
    return Trajectory(states, term)


def _run_adaptive(spec, f, y, states, tau_end, cfg, sign0) -> Trajectory:
    tau = states[0].tau
    h = min(cfg.step, tau_end - tau)
    k1 = f(y)
    prev_err = 1.0
    safety, beta, alpha = 0.9, 0.04, 0.7 / 5 - 0.75 * 0.04
    steps = 0
    diagnostics: list[str] = []
    while tau < tau_end:
        if steps >= cfg.max_steps:
            return Trajectory(states, MAX_STEPS, diagnostics)
        h = min(h, tau_end - tau)
        try:
            y_new, err_vec, k_last = _dopri_step(f, y, h, k1)
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
            if not math.isfinite(err):
                raise StepFailure("non-finite error estimate")
        except (DomainExit, *_RK_FAIL) as exc:
            # a stage left the admissible region: shrink towards the boundary
            h *= 0.25
            if h < cfg.min_step:
                if isinstance(exc, DomainExit):
                    return Trajectory(states, DOMAIN_EXIT, diagnostics + [str(exc)])
                raise StepFailure(f"step size underflow at tau = {tau}: {exc}") from exc
            continue
        if err <= 1.0:
            steps += 1
            tau = tau + h if tau_end - (tau + h) > 1e-14 * max(1.0, abs(tau_end)) else tau_end
            y, k1 = y_new, k_last
            if _accept(spec, states, tau, y, sign0):
                return Trajectory(states, SIGN_CHANGE, diagnostics + [f"L changed sign at tau = {tau}"])
            # PI controller
            factor = safety * max(err, 1e-10) ** (-alpha) * prev_err**beta
            h *= min(5.0, max(0.2, factor))
            prev_err = max(err, 1e-4)
        else:
            h *= max(0.1, safety * err ** (-0.2))
            if h < cfg.min_step:
                raise StepFailure(f"tolerance unreachable at tau = {tau} (h = {h:.3e})")
    return Trajectory(states, TAU_LIMIT, diagnostics)


def proper_time(traj: Trajectory) -> float:
    """Integral of sqrt|L| over the affine parameter (Simpson on the accepted steps)."""
    L = traj.L_values
    if np.any(L == 0) or (np.any(L > 0) and np.any(L < 0)):
        raise SignChange("L is not sign-definite along the trajectory")
    taus = traj.taus
    if len(taus) < 2:
        return 0.0
    return float(simpson(np.sqrt(np.abs(L)), x=taus))


def circular_orbit_state(
    spec: GeometrySpec,
    r: float,
    tdot: float = 1.0,
    theta: float = math.pi / 2,
    omega_max: float | None = None,
    grid: int = 400,
    normalize: bool = True,
) -> GeodesicState:
    """Initial state on a circular equatorial orbit at radius ``r``.

    Solves G^r(x, (1, 0, 0, omega)) = 0 for the angular rate by scanning for a
    sign change and refining with Brent's method.
    """
    x = (0.0, float(r), float(theta), 0.0)

    def radial(omega: float) -> float:
        return float(spray_value(spec, x, (tdot, 0.0, 0.0, omega))[1])

    top = omega_max if omega_max is not None else 10.0 / r
    omegas = np.linspace(top / grid, top, grid)
    prev = None
    for om in omegas:
        sample = list(x) + [tdot, 0.0, 0.0, float(om)]
        if not in_domain(spec, sample):
            break
        try:
            val = radial(float(om))
        except GeometryError:
            break
        if prev is not None and np.sign(val) != np.sign(prev[1]):
            omega = optimize.brentq(radial, prev[0], float(om), xtol=1e-15, rtol=4 * np.finfo(float).eps)
            state = make_state(spec, 0.0, x, (tdot, 0.0, 0.0, omega))
            if normalize:
                lam = 1.0 / math.sqrt(abs(state.L_value))
                state = make_state(spec, 0.0, x, (tdot * lam, 0.0, 0.0, omega * lam))
            return state
        prev = (float(om), val)
    raise StepFailure(f"no circular orbit found at r = {r}")


def rescaled(state: GeodesicState, lam: float, spec: GeometrySpec) -> GeodesicState:
    return make_state(spec, state.tau, state.x, tuple(lam * v for v in state.xdot))
