"""Boundary-value solvers for finite chains.

Each probability is the unique bounded solution of ``(Qu)(z) = 0`` on a
domain ``D`` with ``u`` prescribed off ``D``. These solvers touch only the
Q-matrix and serve as the oracle for the closed forms in
:mod:`skipfree.chain`, :mod:`skipfree.cpp` and :mod:`skipfree.mbi`.
"""
from __future__ import annotations

import numpy as np

from . import _arith as ar


def harmonic_extension(c, domain, boundary_values):
    """Solve ``Qu = 0`` on ``domain`` with ``u = boundary_values`` elsewhere.

    ``boundary_values`` is a full-length vector; its entries on ``domain``
    are ignored. Mass sent to the cemetery contributes zero.
    """
    D = [c.idx(z) for z in domain]
    u = np.array(boundary_values, dtype=object if c.mode == ar.RATIONAL else float)
    if not D:
        return u
    outside = [i for i in range(c.n) if i not in set(D)]
    rhs = c.rates[np.ix_(D, outside)].dot(u[outside]) if outside else ar.zeros(len(D), c.mode)
    u[D] = ar.solve(-c.rates[np.ix_(D, D)], rhs)
    return u


def _indicator(c, states):
    v = ar.zeros(c.n, c.mode)
    for z in states:
        v[c.idx(z)] = ar.one(c.mode)
    return v


def hit_prob(c, x, y):
    """``P_x(T_y < zeta)``."""
    u = harmonic_extension(c, [z for z in c.states if z != y], _indicator(c, [y]))
    return u[c.idx(x)]


def two_sided_exit(c, x, a, b):
    """``P_x(T_a < T_[b ^ zeta)`` for ``a <= x``."""
    if x >= b:
        return ar.zero(c.mode)
    inside = [z for z in c.states if a < z < b]
    u = harmonic_extension(c, inside, _indicator(c, [a]))
    return u[c.idx(x)]


def exit_expectation(c, f, a, b, x):
    """``E_x[f(X_T) 1{T < zeta}]`` with ``T`` the exit time of ``(a, b)``."""
    fv = ar.asarray([f(z) for z in c.states], c.mode) if callable(f) else np.asarray(f)
    inside = [z for z in c.states if a < z < b]
    return harmonic_extension(c, inside, fv)[c.idx(x)]


def passage_up_prob(c, x, b):
    """``P_x(T_[b < zeta)``."""
    if x >= b:
        return ar.one(c.mode)
    below = [z for z in c.states if z < b]
    u = harmonic_extension(c, below, _indicator(c, [z for z in c.states if z >= b]))
    return u[c.idx(x)]
