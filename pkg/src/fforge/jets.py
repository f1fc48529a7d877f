"""Truncated multivariate Taylor arithmetic over the 8 phase-space variables.

A jet stores the Taylor coefficients of a function of
``(t, r, theta, phi, dt, dr, dtheta, dphi)`` around a point.  Coefficients are
kept in a dense array laid out over the multi-indices admitted by a
:class:`JetConfig`; the caps on position order and velocity order prune the
index set far below the full degree-``T`` simplex.

Jets may carry leading tensor axes: ``Jet.c`` has shape ``(*shape, n)`` and
every operation broadcasts over the leading axes.  A scalar jet is the special
case ``shape == ()``.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

NVARS = 8
NPOS = 4
VARIABLE_NAMES = ("t", "r", "theta", "phi", "dt", "dr", "dtheta", "dphi")

MultiIndex = tuple[int, ...]


class JetError(ArithmeticError):
    """Base class for jet arithmetic failures."""


class DivisionByZeroJet(JetError):
    """Division by a jet whose constant term vanishes."""


class DomainErrorJet(JetError):
    """Elementary function evaluated outside its real domain."""


class OrderExceeded(JetError):
    """Requested a derivative the truncation cannot represent."""


@dataclass(frozen=True, order=True)
class JetConfig:
    max_total_order: int = 5
    max_position_order: int = 2
    max_velocity_order: int = 4

    def __post_init__(self):
        if min(self.max_total_order, self.max_position_order, self.max_velocity_order) < 0:
            raise ValueError("jet orders must be non-negative")
        if self.max_total_order < max(self.max_position_order, self.max_velocity_order):
            raise ValueError("max_total_order must dominate the per-class caps")

    def admits(self, alpha: Sequence[int]) -> bool:
        p = sum(alpha[:NPOS])
        v = sum(alpha[NPOS:])
        return p <= self.max_position_order and v <= self.max_velocity_order and p + v <= self.max_total_order

    def meet(self, other: "JetConfig") -> "JetConfig":
        return _normalized(
            min(self.max_total_order, other.max_total_order),
            min(self.max_position_order, other.max_position_order),
            min(self.max_velocity_order, other.max_velocity_order),
        )

    def lowered(self, var: int) -> "JetConfig":
        """Config of the partial derivative along variable ``var``."""
        if self.max_total_order == 0:
            raise OrderExceeded("cannot differentiate an order-0 jet")
        p, v = self.max_position_order, self.max_velocity_order
        if var < NPOS:
            if p == 0:
                raise OrderExceeded(f"no position order left to differentiate along {VARIABLE_NAMES[var]}")
            p -= 1
        else:
            if v == 0:
                raise OrderExceeded(f"no velocity order left to differentiate along {VARIABLE_NAMES[var]}")
            v -= 1
        return _normalized(self.max_total_order - 1, p, v)


def _normalized(t: int, p: int, v: int) -> JetConfig:
    # Caps above the total order are inert; clip them so equal index sets share one layout.
    return JetConfig(t, min(p, t), min(v, t))


DEFAULT_CONFIG = JetConfig()
# Enough velocity order for the velocity Hessian of the Finsler-Ricci scalar.
HESSIAN_CONFIG = JetConfig(6, 2, 6)


def multi_index(**orders: int) -> MultiIndex:
    """Build a multi-index from variable names, e.g. ``multi_index(r=1, dt=2)``."""
    alpha = [0] * NVARS
    for name, k in orders.items():
        alpha[VARIABLE_NAMES.index(name)] = k
    return tuple(alpha)


def unit(i: int, k: int = 1) -> MultiIndex:
    alpha = [0] * NVARS
    alpha[i] = k
    return tuple(alpha)


def graded_lex_key(alpha: Sequence[int]):
    return (sum(alpha), tuple(-a for a in alpha))


class _Layout:
    """Index set, product table and factorial weights for one config."""

    def __init__(self, cfg: JetConfig):
        self.cfg = cfg
        P, V, T = cfg.max_position_order, cfg.max_velocity_order, cfg.max_total_order
        pos = [a for a in itertools.product(range(P + 1), repeat=NPOS) if sum(a) <= P]
        vel = [a for a in itertools.product(range(V + 1), repeat=NPOS) if sum(a) <= V]
        idx = [p + v for p in pos for v in vel if sum(p) + sum(v) <= T]
        idx.sort(key=graded_lex_key)
        self.indices: list[MultiIndex] = idx
        self.lookup = {a: i for i, a in enumerate(idx)}
        self.n = len(idx)
        arr = np.array(idx, dtype=np.int64)
        self.array = arr
        self.factorials = np.array(
            [math.prod(math.factorial(k) for k in a) for a in idx], dtype=float
        )
        self._codes = (arr * (16 ** np.arange(NVARS))).sum(-1)
        self._code_order = np.argsort(self._codes)
        self._build_product_table()

    def _positions(self, sums: np.ndarray) -> np.ndarray:
        codes = (sums * (16 ** np.arange(NVARS))).sum(-1)
        sorted_codes = self._codes[self._code_order]
        return self._code_order[np.searchsorted(sorted_codes, codes)]

    def _build_product_table(self):
        cfg, arr, n = self.cfg, self.array, self.n
        I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        S = arr[:, None, :] + arr[None, :, :]
        ok = (
            (S[..., :NPOS].sum(-1) <= cfg.max_position_order)
            & (S[..., NPOS:].sum(-1) <= cfg.max_velocity_order)
            & (S.sum(-1) <= cfg.max_total_order)
        )
        I, J, S = I[ok], J[ok], S[ok]
        K = self._positions(S)
        order = np.argsort(K, kind="stable")
        self.pair_i = I[order]
        self.pair_j = J[order]
        K = K[order]
        # every output slot is hit at least by the pair (0, k)
        self.segment_starts = np.flatnonzero(np.r_[True, K[1:] != K[:-1]])

    @functools.lru_cache(maxsize=None)
    def projection(self, target: JetConfig) -> np.ndarray:
        """Positions in this layout of every index of ``target`` (a sub-config)."""
        sub = layout(target)
        return np.array([self.lookup[a] for a in sub.indices], dtype=np.int64)

    @functools.lru_cache(maxsize=None)
    def derivative_map(self, var: int) -> tuple[JetConfig, np.ndarray, np.ndarray]:
        lowered = self.cfg.lowered(var)
        sub = layout(lowered)
        src = np.array([self.lookup[a[:var] + (a[var] + 1,) + a[var + 1:]] for a in sub.indices])
        weight = sub.array[:, var] + 1.0
        return lowered, src, weight


@functools.lru_cache(maxsize=None)
def layout(cfg: JetConfig) -> _Layout:
    return _Layout(cfg)


class Jet:
    """Truncated Taylor expansion, optionally tensor-valued.

    ``c[..., k]`` is the Taylor coefficient of monomial ``layout(cfg).indices[k]``,
    so the partial derivative of multi-index ``alpha`` is ``alpha! * c[alpha]``.
    """

    __slots__ = ("cfg", "c")
    __array_priority__ = 100

    def __init__(self, cfg: JetConfig, coeffs: np.ndarray):
        self.cfg = cfg
        self.c = coeffs
        self.c.flags.writeable = False

    # construction -------------------------------------------------------

    @classmethod
    def constant(cls, value, cfg: JetConfig = DEFAULT_CONFIG) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (layout(cfg).n,))
        c[..., 0] = value
        return cls(cfg, c)

    @classmethod
    def from_coefficients(cls, coeffs: dict, cfg: JetConfig = DEFAULT_CONFIG) -> "Jet":
        lay = layout(cfg)
        c = np.zeros(lay.n)
        for alpha, v in coeffs.items():
            alpha = tuple(alpha) + (0,) * (NVARS - len(alpha))
            if alpha in lay.lookup:
                c[lay.lookup[alpha]] = v
        return cls(cfg, c)

    @classmethod
    def stack(cls, jets: Sequence["Jet"]) -> "Jet":
        jets = list(jets)
        cfg = functools.reduce(JetConfig.meet, (j.cfg for j in jets))
        return cls(cfg, np.stack([j.project(cfg).c for j in jets]))

    # basic accessors ----------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.c.shape[:-1]

    @property
    def value(self):
        v = self.c[..., 0]
        return float(v) if v.ndim == 0 else v.copy()

    @property
    def coefficients(self) -> dict[MultiIndex, float]:
        """Sparse view of a scalar jet: nonzero coefficients keyed by multi-index."""
        if self.shape:
            raise ValueError("coefficients view is defined for scalar jets only")
        lay = layout(self.cfg)
        return {lay.indices[k]: float(v) for k, v in enumerate(self.c) if v != 0.0}

    def coefficient(self, alpha: Sequence[int]):
        alpha = tuple(alpha)
        lay = layout(self.cfg)
        if alpha not in lay.lookup:
            raise OrderExceeded(f"multi-index {alpha} outside truncation {self.cfg}")
        v = self.c[..., lay.lookup[alpha]]
        return float(v) if v.ndim == 0 else v.copy()

    def partial(self, alpha: Sequence[int]):
        """Partial derivative of multi-index ``alpha`` at the expansion point."""
        alpha = tuple(alpha)
        return self.coefficient(alpha) * math.prod(math.factorial(a) for a in alpha)

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.cfg, self.c[key])

    def __repr__(self):
        if self.shape:
            return f"Jet(shape={self.shape}, cfg={self.cfg})"
        terms = ", ".join(f"{a}: {v:.6g}" for a, v in list(self.coefficients.items())[:6])
        return f"Jet({{{terms}}}, cfg={self.cfg})"

    # structural ops -----------------------------------------------------

    def project(self, cfg: JetConfig) -> "Jet":
        """Truncate to a smaller config (every index of ``cfg`` must be admitted here)."""
        if cfg == self.cfg:
            return self
        sel = layout(self.cfg).projection(cfg)
        return Jet(cfg, self.c[..., sel])

    def d(self, var: int) -> "Jet":
        """Jet of the partial derivative along variable ``var`` (one order lost)."""
        lowered, src, weight = layout(self.cfg).derivative_map(var)
        return Jet(lowered, self.c[..., src] * weight)

    def grad(self, vars: Iterable[int]) -> "Jet":
        """Stack of partial-derivative jets along ``vars`` as a new trailing tensor axis."""
        parts = [self.d(v) for v in vars]
        cfg = functools.reduce(JetConfig.meet, (p.cfg for p in parts))
        return Jet(cfg, np.stack([p.project(cfg).c for p in parts], axis=-2))

    def sum(self, axis) -> "Jet":
        axis = _tensor_axis(axis, len(self.shape))
        return Jet(self.cfg, self.c.sum(axis=axis))

    def transpose(self, *axes) -> "Jet":
        nd = len(self.shape)
        axes = axes or tuple(reversed(range(nd)))
        return Jet(self.cfg, np.transpose(self.c, tuple(axes) + (nd,)))

    def expand(self, axis) -> "Jet":
        axis = _tensor_axis(axis, len(self.shape) + 1)
        return Jet(self.cfg, np.expand_dims(self.c, axis))

    # arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self.cfg)

    def __add__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            shape = np.broadcast_shapes(self.shape, other.shape)
            c = np.broadcast_to(self.c, shape + self.c.shape[-1:]).copy()
            c[..., 0] += other
            return Jet(self.cfg, c)
        cfg = self.cfg.meet(other.cfg)
        return Jet(cfg, self.project(cfg).c + other.project(cfg).c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.cfg, -self.c)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(self.cfg, self.c * other[..., None])
        cfg = self.cfg.meet(other.cfg)
        return Jet(cfg, _convolve(cfg, self.project(cfg).c, other.project(cfg).c))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * reciprocal(other)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, exponent):
        if isinstance(exponent, Jet):
            return exp(log(self) * exponent)
        if float(exponent).is_integer():
            return integer_power(self, int(exponent))
        return power(self, float(exponent))


def _tensor_axis(axis, nd):
    if isinstance(axis, tuple):
        return tuple(a % nd for a in axis)
    return axis % nd


def _convolve(cfg: JetConfig, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    lay = layout(cfg)
    prod = a[..., lay.pair_i] * b[..., lay.pair_j]
    return np.add.reduceat(prod, lay.segment_starts, axis=-1)


# seeding ------------------------------------------------------------------


def seed_point(values: Sequence[float], cfg: JetConfig = DEFAULT_CONFIG) -> list[Jet]:
    """Jets of the 8 coordinate functions at ``values``."""
    if len(values) != NVARS:
        raise ValueError(f"expected {NVARS} coordinates, got {len(values)}")
    lay = layout(cfg)
    out = []
    for i, x in enumerate(values):
        c = np.zeros(lay.n)
        c[0] = float(x)
        e = unit(i)
        if e in lay.lookup:
            c[lay.lookup[e]] = 1.0
        out.append(Jet(cfg, c))
    return out


def seed_vector(values: Sequence[float], cfg: JetConfig = DEFAULT_CONFIG) -> Jet:
    """Same as :func:`seed_point` but stacked into one shape-(8,) jet."""
    return Jet.stack(seed_point(values, cfg))


# elementary functions -------------------------------------------------------


def _compose(a: Jet, taylor: np.ndarray) -> Jet:
    """Evaluate sum_k taylor[k] * (a - a0)^k by Horner's scheme.

    ``taylor`` has shape ``(K+1, *a.shape)``.
    """
    h = _nilpotent_part(a)
    K = taylor.shape[0] - 1
    acc = Jet.constant(taylor[K], a.cfg)
    for k in range(K - 1, -1, -1):
        acc = acc * h + taylor[k]
    return acc


def _nilpotent_part(a: Jet) -> Jet:
    c = a.c.copy()
    c[..., 0] = 0.0
    return Jet(a.cfg, c)


def _order(a: Jet) -> int:
    return a.cfg.max_total_order


def reciprocal(a: Jet) -> Jet:
    a0 = np.asarray(a.c[..., 0])
    if np.any(a0 == 0.0):
        raise DivisionByZeroJet("division by a jet with zero constant term")
    K = _order(a)
    k = np.arange(K + 1).reshape((-1,) + (1,) * a0.ndim)
    taylor = (-1.0) ** k / a0 ** (k + 1)
    return _compose(a, taylor)


def exp(a: Jet) -> Jet:
    a0 = np.asarray(a.c[..., 0])
    K = _order(a)
    taylor = np.stack([np.exp(a0) / math.factorial(k) for k in range(K + 1)])
    return _compose(a, taylor)


def log(a: Jet) -> Jet:
    a0 = np.asarray(a.c[..., 0])
    if np.any(a0 <= 0.0):
        raise DomainErrorJet("ln of a non-positive value")
    K = _order(a)
    taylor = [np.log(a0)] + [(-1.0) ** (k + 1) / (k * a0**k) for k in range(1, K + 1)]
    return _compose(a, np.stack(taylor))


def power(a: Jet, lam: float) -> Jet:
    """Real power ``a**lam``; non-integer exponents need a positive base."""
    lam = float(lam)
    if lam.is_integer():
        return integer_power(a, int(lam))
    a0 = np.asarray(a.c[..., 0])
    if np.any(a0 <= 0.0):
        raise DomainErrorJet(f"fractional power {lam} of a non-positive value")
    K = _order(a)
    taylor = []
    coef = 1.0
    for k in range(K + 1):
        taylor.append(coef * a0 ** (lam - k))
        coef *= (lam - k) / (k + 1)
    return _compose(a, np.stack(taylor))


def integer_power(a: Jet, n: int) -> Jet:
    if n < 0:
        return reciprocal(integer_power(a, -n))
    result = Jet.constant(np.ones(a.shape), a.cfg)
    base = a
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


def sqrt(a: Jet) -> Jet:
    return power(a, 0.5)


def sin(a: Jet) -> Jet:
    a0 = np.asarray(a.c[..., 0])
    cycle = [np.sin(a0), np.cos(a0), -np.sin(a0), -np.cos(a0)]
    K = _order(a)
    return _compose(a, np.stack([cycle[k % 4] / math.factorial(k) for k in range(K + 1)]))


def cos(a: Jet) -> Jet:
    a0 = np.asarray(a.c[..., 0])
    cycle = [np.cos(a0), -np.sin(a0), -np.cos(a0), np.sin(a0)]
    K = _order(a)
    return _compose(a, np.stack([cycle[k % 4] / math.factorial(k) for k in range(K + 1)]))


def absolute(a: Jet) -> Jet:
    a0 = np.asarray(a.c[..., 0])
    if np.any(a0 == 0.0):
        raise DomainErrorJet("abs is not differentiable at 0")
    return a * np.sign(a0)


ELEMENTARY = {
    "exp": exp,
    "ln": log,
    "sqrt": sqrt,
    "sin": sin,
    "cos": cos,
    "abs": absolute,
}


def elem(a: Jet, name: str, lam: float | None = None) -> Jet:
    """Apply an elementary function by name (``pow_real`` takes ``lam``)."""
    if name == "pow_real":
        return power(a, lam)
    return ELEMENTARY[name](a)


def arith(a: Jet, b: Jet, op: str) -> Jet:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown op {op!r}")


def extract_partial(j: Jet, alpha: Sequence[int]) -> float:
    return j.partial(alpha)


# tensor helpers -------------------------------------------------------------


def solve(A: Jet, B: Jet) -> Jet:
    """Jet of the solution ``X`` of ``A X = B`` for a (4,4) jet ``A``.

    ``B`` has shape (4,) or (4, k).  Uses the fixed-point iteration
    ``X <- A0^{-1} (B - (A - A0) X)``, which is exact after as many sweeps as
    the truncation order because ``A - A0`` has no constant term.
    """
    cfg = A.cfg.meet(B.cfg)
    A = A.project(cfg)
    B = B.project(cfg)
    A0 = A.c[..., 0]
    A0inv = np.linalg.inv(A0)
    nil = _nilpotent_part(A)
    vec = len(B.shape) == 1
    if vec:
        B = B.expand(-1)
    X = Jet(cfg, np.einsum("ij,jkn->ikn", A0inv, B.c))
    for _ in range(cfg.max_total_order):
        NX = (nil.expand(-1) * X.expand(0)).sum(1)
        X = Jet(cfg, np.einsum("ij,jkn->ikn", A0inv, (B - NX).c))
    return X[:, 0] if vec else X


def inverse(A: Jet) -> Jet:
    eye = Jet.constant(np.eye(A.shape[0]), A.cfg)
    return solve(A, eye)


def determinant4(A: Jet) -> Jet:
    """Determinant of a (4,4) jet by cofactor expansion."""
    n = A.shape[0]
    total = None
    for perm in itertools.permutations(range(n)):
        sign = _perm_sign(perm)
        term = A[0, perm[0]]
        for i in range(1, n):
            term = term * A[i, perm[i]]
        term = term * sign
        total = term if total is None else total + term
    return total


def _perm_sign(perm) -> int:
    sign = 1
    p = list(perm)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign
