"""Reference computations that share no code with the jet engine.

Everything here works from plain float evaluations of L and sixth-order
central differences.
"""

from __future__ import annotations

import itertools

import numpy as np

from fforge.dsl import GeometrySpec, evaluate

STENCIL = ((-3, -1 / 60), (-2, 3 / 20), (-1, -3 / 4), (1, 3 / 4), (2, -3 / 20), (3, 1 / 60))


def diff(f, x, i, h):
    """d f / d x_i with a sixth-order central stencil; ``f`` may return arrays."""
    x = np.asarray(x, dtype=float)
    acc = 0.0
    for k, w in STENCIL:
        y = x.copy()
        y[i] += k * h
        acc = acc + w * np.asarray(f(y))
    return acc / h


def L_of(spec: GeometrySpec):
    return lambda y: evaluate(spec, list(y))


def velocity_hessian(spec, x, h=1e-3):
    f = L_of(spec)
    H = np.empty((4, 4))
    for a in range(4):
        for b in range(a, 4):
            H[a, b] = H[b, a] = diff(lambda y: diff(f, y, 4 + b, h), x, 4 + a, h)
    return H


def fd_metric(spec, x, h=1e-3):
    return 0.5 * velocity_hessian(spec, x, h)


def fd_cartan(spec, x, h=2e-3):
    f = L_of(spec)
    C = np.empty((4, 4, 4))
    for a, b, c in itertools.combinations_with_replacement(range(4), 3):
        d3 = diff(lambda y: diff(lambda z: diff(f, z, 4 + c, h), y, 4 + b, h), x, 4 + a, h)
        for p in set(itertools.permutations((a, b, c))):
            C[p] = d3 / 4
    return C


def fd_spray(spec, x, h=1e-3):
    """G^a = (1/4) g^ab (xdot^c d_c dot-d_b L - d_b L)."""
    f = L_of(spec)
    x = np.asarray(x, dtype=float)
    g = fd_metric(spec, x, h)
    mixed = np.empty((4, 4))
    for b in range(4):
        for c in range(4):
            mixed[b, c] = diff(lambda y: diff(f, y, 4 + b, h), x, c, h)
    dL = np.array([diff(f, x, b, h) for b in range(4)])
    return 0.25 * np.linalg.solve(g, mixed @ x[4:] - dL)


# --- quadratic L ------------------------------------------------------------------


# fixed velocities with dt dominant, inside the cone of every corpus spec
_PROBES = np.column_stack([np.ones(24), np.random.default_rng(0).uniform(-0.4, 0.4, (24, 3))])
_PAIRS = [(a, b) for a in range(4) for b in range(a, 4)]


def polarized_metric(spec, pos):
    """g_ab(x) of a quadratic L, fitted to its values at fixed velocities (no differentiation)."""
    pos = list(pos)
    A = np.array([[v[a] * v[b] * (1 if a == b else 2) for a, b in _PAIRS] for v in _PROBES])
    y = np.array([evaluate(spec, pos + list(v)) for v in _PROBES])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    g = np.empty((4, 4))
    for (a, b), c in zip(_PAIRS, coef):
        g[a, b] = g[b, a] = c
    return g


def christoffel(spec, pos, h=2e-3):
    pos = np.asarray(pos, dtype=float)
    g = polarized_metric(spec, pos)
    dg = np.array([diff(lambda y: polarized_metric(spec, y), pos, c, h) for c in range(4)])  # [c, a, b]
    gi = np.linalg.inv(g)
    lower = 0.5 * (dg.transpose(1, 2, 0) + dg.transpose(1, 0, 2) - dg)  # [d, b, c]
    return np.einsum("ad,dbc->abc", gi, lower)


def riemann(spec, pos, h=2e-3):
    """R^a_bcd = d_c Gamma^a_db - d_d Gamma^a_cb + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb."""
    pos = np.asarray(pos, dtype=float)
    gam = christoffel(spec, pos, h)
    dgam = np.array([diff(lambda y: christoffel(spec, y, h), pos, c, h) for c in range(4)])  # [c, a, b, d]
    R = (
        np.einsum("cadb->abcd", dgam)
        - np.einsum("dacb->abcd", dgam)
        + np.einsum("ace,edb->abcd", gam, gam)
        - np.einsum("ade,ecb->abcd", gam, gam)
    )
    return R


def ricci_tensor(spec, pos, h=2e-3):
    return np.einsum("abad->bd", riemann(spec, pos, h))
