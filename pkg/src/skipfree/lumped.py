"""Exact finite chains that reproduce windowed events of the infinite models.

A skip-free downward process started in ``[a, b)`` must pass through
every state on its way down, so the event "reach ``a`` before ``[b``"
is decided before the path ever sees a state outside ``a..b`` other
than the first one at or above ``b``. Sending every upward overshoot to
the single state ``b`` therefore changes nothing about that event, and
the boundary-value solvers in :mod:`skipfree.boundary` give an exact
oracle for the closed forms of :mod:`skipfree.cpp` and :mod:`skipfree.mbi`.

The boundary rows (``a`` and ``b``) never enter those solves. They are
filled with unit killing (and a unit down-step at ``b``) only so the
result is a valid transient chain that :mod:`skipfree.chain` also accepts.
"""
from __future__ import annotations

from . import _arith as ar
from .chain import FiniteSkipFreeChain
from .cpp import CppParams
from .errors import ModelError
from .mbi import MbiParams

LUMP, KILL = "lump", "kill"


def _moves_cpp(params: CppParams, z):
    """``{step: rate}`` and killing rate of the compound Poisson process at ``z``."""
    moves = {j - 1: params.alpha * w for j, w in params.mu.probs.items()}
    return moves, params.p


def _moves_mbi(params: MbiParams, z):
    moves = {}
    for j, w in params.mu.probs.items():
        moves[j - 1] = moves.get(j - 1, 0) + params.alpha * z * w
    for k, w in params.nu.probs.items():
        moves[k] = moves.get(k, 0) + params.beta * w
    return moves, params.kill_rate(z)


def _assemble(mode, lo, hi, moves_at, interior, overflow, edge_rows):
    n = hi - lo + 1
    off = ar.zeros((n, n), mode)
    kill = ar.zeros(n, mode)
    one = ar.one(mode)
    for z in range(lo, hi + 1):
        i = z - lo
        if z not in interior:
            down, k = edge_rows(z)
            if down and z > lo:
                off[i, i - 1] = off[i, i - 1] + down * one
            kill[i] = kill[i] + k * one
            continue
        moves, k = moves_at(z)
        kill[i] = kill[i] + k
        for step, rate in moves.items():
            if rate == 0:
                continue
            dest = z + step
            if dest > hi:
                if overflow == KILL:
                    kill[i] = kill[i] + rate
                    continue
                dest = hi
            off[i, dest - lo] = off[i, dest - lo] + rate
    return FiniteSkipFreeChain.from_rates(lo, off, kill)


def _edge(z):
    return 1, 1


def cpp_window(params: CppParams, a: int, b: int) -> FiniteSkipFreeChain:
    """States ``a..b``; interior ``a < z < b`` follows the process, overshoot lands on ``b``."""
    if not a < b:
        raise ModelError("need a < b")
    return _assemble(params.mode, a, b, lambda z: _moves_cpp(params, z),
                     range(a + 1, b), LUMP, _edge)


def cpp_below(params: CppParams, floor: int, b: int) -> FiniteSkipFreeChain:
    """States ``floor..b``; paths reaching ``floor`` are killed.

    Approximates the upward passage to ``[b`` with the floor removed; the
    error is at most the probability of descending to ``floor`` first.
    """
    if not floor < b:
        raise ModelError("need floor < b")
    return _assemble(params.mode, floor, b, lambda z: _moves_cpp(params, z),
                     range(floor + 1, b), LUMP, _edge)


def mbi_window(params: MbiParams, a: int, b: int) -> FiniteSkipFreeChain:
    """The branching-with-immigration analogue of :func:`cpp_window` (``0 <= a < b``)."""
    if not 0 <= a < b:
        raise ModelError("need 0 <= a < b")
    return _assemble(params.mode, a, b, lambda z: _moves_mbi(params, z),
                     range(a + 1, b), LUMP, _edge)


def mbi_below(params: MbiParams, b: int) -> FiniteSkipFreeChain:
    """States ``0..b`` with overshoot lumped on ``b``; exact for the passage to ``[b``.

    If state 0 is absorbing (no immigration, no constant killing) it is
    given unit killing instead: an absorbed path never reaches ``b``.
    """
    if b < 1:
        raise ModelError("need b >= 1")

    def moves_at(z):
        moves, k = _moves_mbi(params, z)
        if z == 0 and k == 0 and all(r == 0 for r in moves.values()):
            return {}, ar.one(params.mode)
        return moves, k

    return _assemble(params.mode, 0, b, moves_at, range(0, b), LUMP, _edge)


def mbi_truncated(params: MbiParams, top: int) -> FiniteSkipFreeChain:
    """States ``0..top``; jumps above ``top`` go to the cemetery.

    Its resolvent underestimates the true one by the mass that escapes
    above ``top``, which is negligible when ``top`` is far above the
    states of interest and killing is strong.
    """
    if top < 1:
        raise ModelError("need top >= 1")

    def moves_at(z):
        moves, k = _moves_mbi(params, z)
        if z == 0 and k == 0 and all(r == 0 for r in moves.values()):
            raise ModelError("state 0 is absorbing; the truncated chain is not transient")
        return moves, k

    return _assemble(params.mode, 0, top, moves_at, range(0, top + 1), KILL, _edge)

