"""Finite skip-free downward chains: resolvents and fluctuation identities.

A chain lives on the integer interval ``[lo, hi]``. Its Q-matrix may only
step down by one unit, may jump up arbitrarily, and may lose mass to the
cemetery state at a state-dependent killing rate. All states must be
transient, which for a finite chain means ``-Q`` is invertible.

The identities here are computed from the three fundamental functions
(``H``, the dual ``H_hat`` and the killed ``H^[b``). The independent
boundary-value solvers in :mod:`skipfree.boundary` are their oracle.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _arith as ar
from .errors import ConfigError, ModelError, SingularGenerator

MAX_STATES = 2000
ROW_TOL = 1e-12
EXCESSIVE_TOL = 1e-10


@dataclass(frozen=True)
class FiniteSkipFreeChain:
    """Q-matrix ``rates`` on states ``lo..hi`` with killing rates ``kill``.

    ``rates[i, j]`` is the rate from state ``lo + i`` to ``lo + j``; the
    diagonal holds minus the total jump rate (killing included).
    """

    lo: int
    hi: int
    rates: np.ndarray
    kill: np.ndarray

    def __post_init__(self):
        n = self.hi - self.lo + 1
        if n < 1:
            raise ModelError("empty state space")
        if n > MAX_STATES:
            raise ModelError(f"{n} states exceed the dense-solver cap of {MAX_STATES}")
        if self.rates.shape != (n, n) or self.kill.shape != (n,):
            raise ModelError("rates/kill shapes do not match the state space")
        ar.mode_of(self.rates, self.kill)

    @classmethod
    def from_rates(cls, lo, offdiag, kill):
        """Build from off-diagonal jump rates and killing; fills the diagonal."""
        offdiag = np.array(offdiag)
        kill = np.array(kill)
        mode = ar.mode_of(offdiag, kill)
        offdiag = ar.asarray(offdiag, mode)
        kill = ar.asarray(kill, mode)
        n = offdiag.shape[0]
        rates = offdiag.copy()
        for i in range(n):
            rates[i, i] = ar.zero(mode)
            rates[i, i] = -(rates[i].sum() + kill[i])
        return cls(lo, lo + n - 1, rates, kill)

    @classmethod
    def from_json(cls, obj, mode=ar.FLOAT):
        try:
            lo, hi, rows, kill = int(obj["lo"]), int(obj["hi"]), obj["rows"], obj["kill"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"chain needs lo, hi, rows, kill ({exc})", "params") from None
        n = hi - lo + 1
        if len(rows) != n or any(len(r) != n for r in rows) or len(kill) != n:
            raise ConfigError("rows/kill dimensions do not match hi - lo + 1", "params.rows")
        rates = ar.zeros((n, n), mode)
        for i, row in enumerate(rows):
            for j, v in enumerate(row):
                rates[i, j] = ar.parse_scalar(v, mode, f"params.rows[{i}][{j}]")
        k = ar.asarray([ar.parse_scalar(v, mode, f"params.kill[{i}]") for i, v in enumerate(kill)], mode)
        try:
            return cls(lo, hi, rates, k)
        except ModelError as exc:
            raise ConfigError(str(exc), "params") from None

    def to_json(self):
        return {
            "lo": self.lo,
            "hi": self.hi,
            "rows": [[ar.format_scalar(v) for v in row] for row in self.rates],
            "kill": [ar.format_scalar(v) for v in self.kill],
        }

    @property
    def mode(self) -> str:
        return ar.RATIONAL if self.rates.dtype == object else ar.FLOAT

    @property
    def n(self) -> int:
        return self.hi - self.lo + 1

    @property
    def states(self) -> range:
        return range(self.lo, self.hi + 1)

    def idx(self, x: int) -> int:
        if not self.lo <= x <= self.hi:
            raise ModelError(f"state {x} outside [{self.lo}, {self.hi}]")
        return x - self.lo

    def generator_apply(self, f: np.ndarray) -> np.ndarray:
        """``(Qf)(x) = sum_y Q(x, y) f(y)``; the cemetery contributes 0."""
        return self.rates.dot(f)

    def astype(self, mode: str) -> "FiniteSkipFreeChain":
        if mode == self.mode:
            return self
        if mode == ar.FLOAT:
            return FiniteSkipFreeChain(self.lo, self.hi, ar.to_float(self.rates), ar.to_float(self.kill))
        raise ModelError("cannot convert a float chain to rational mode")


@dataclass
class ChainReport:
    valid: bool
    transient: bool
    problems: list = field(default_factory=list)


def validate_chain(c: FiniteSkipFreeChain) -> ChainReport:
    """List every violated Q-matrix condition and test transience."""
    problems = []
    exact = c.mode == ar.RATIONAL
    Q, n = c.rates, c.n
    for i in range(n):
        x = c.lo + i
        if i > 0 and not Q[i, i - 1] > 0:
            problems.append(f"skip-free: Q({x},{x - 1}) must be > 0")
        for j in range(i - 1):
            if Q[i, j] != 0:
                problems.append(f"skip-free: Q({x},{c.lo + j}) must be 0 (jump down by {i - j})")
        for j in range(n):
            if j != i and Q[i, j] < 0:
                problems.append(f"negative rate Q({x},{c.lo + j})")
        if c.kill[i] < 0:
            problems.append(f"negative killing rate at {x}")
        off = Q[i].sum() - Q[i, i]
        resid = off + c.kill[i] + Q[i, i]
        scale = abs(Q[i, i]) if not exact else 0
        if (resid != 0) if exact else abs(resid) > ROW_TOL * max(1.0, scale):
            problems.append(f"row {x}: rates plus killing do not sum to -Q({x},{x})")
    transient = _is_transient(c)
    if not transient:
        problems.append("not all states transient: -Q singular or its inverse is not nonnegative")
    return ChainReport(valid=not problems, transient=transient, problems=problems)


def _is_transient(c) -> bool:
    try:
        G = ar.inv(-c.rates)
    except SingularGenerator:
        return False
    if c.mode == ar.FLOAT:
        if not np.all(np.isfinite(G)):
            return False
        scale = np.abs(G).max()
        if np.any(G < -1e-12 * scale):
            return False
        cond = np.linalg.cond(c.rates)
        if not np.isfinite(cond) or cond > 1e14:
            return False
    elif any(v < 0 for v in G.flat):
        return False
    return all(G[i, i] > 0 for i in range(c.n))


@dataclass(frozen=True)
class ReferenceData:
    """Reference point and positive excessive reference measure."""

    ref_point: int
    ref_measure: np.ndarray

    def check(self, c: FiniteSkipFreeChain):
        pi = self.ref_measure
        if pi.shape != (c.n,) or any(not v > 0 for v in pi):
            raise ModelError("reference measure must be positive on every state")
        c.idx(self.ref_point)
        flow = pi.dot(c.rates)
        if c.mode == ar.RATIONAL:
            bad = any(v > 0 for v in flow)
        else:
            bad = np.any(flow > EXCESSIVE_TOL * max(1.0, float(np.abs(pi).max())))
        if bad:
            raise ModelError("reference measure is not excessive (pi Q > 0 somewhere)")
        return self


def default_reference(c: FiniteSkipFreeChain) -> ReferenceData:
    """Reference point ``lo`` and ``pi(y) = sum_x 2^{-sigma(x)} G(x, y)``.

    ``sigma`` enumerates the states upward from ``lo`` starting at 1.
    """
    return _default_reference_refined(c)


@dataclass(frozen=True)
class ResolventMatrix:
    raw: np.ndarray  # G(x, y)
    g: np.ndarray  # G(x, y) / pi(y)


def resolvent(c: FiniteSkipFreeChain, ref: ReferenceData | None = None) -> ResolventMatrix:
    """``G = (-Q)^{-1}`` and its density with respect to the reference measure."""
    G = ar.inv(-c.rates)
    if c.mode == ar.FLOAT and not np.all(np.isfinite(G)):
        raise SingularGenerator("-Q is numerically singular")
    if ref is None:
        ref = default_reference(c)
    return ResolventMatrix(G, G / ref.ref_measure[None, :])


def _kept(c, avoid):
    avoid = {int(a) for a in avoid}
    return [i for i, x in enumerate(c.states) if x not in avoid]


def killed_resolvent_raw(c: FiniteSkipFreeChain, avoid) -> np.ndarray:
    """``G^A`` for the chain killed on entering ``avoid``, zero-extended."""
    keep = _kept(c, avoid)
    out = ar.zeros((c.n, c.n), c.mode)
    if keep:
        sub = -c.rates[np.ix_(keep, keep)]
        out[np.ix_(keep, keep)] = ar.inv(sub)
    return out


def killed_resolvent(c: FiniteSkipFreeChain, avoid, ref: ReferenceData | None = None) -> ResolventMatrix:
    G = killed_resolvent_raw(c, avoid)
    if ref is None:
        ref = default_reference(c)
    return ResolventMatrix(G, G / ref.ref_measure[None, :])


def dual_chain(c: FiniteSkipFreeChain, ref: ReferenceData) -> FiniteSkipFreeChain:
    """Time reversal with respect to ``pi``: ``Qhat(y, x) = pi(x) Q(x, y) / pi(y)``.

    The result is skip-free upward, so it is returned as a bare matrix
    container without the downward validation.
    """
    pi = ref.ref_measure
    Qh = (pi[:, None] * c.rates).T / pi[:, None]
    kill = -Qh.sum(axis=1)
    return _DualChain(c.lo, c.hi, Qh, kill)


@dataclass(frozen=True)
class _DualChain:
    lo: int
    hi: int
    rates: np.ndarray
    kill: np.ndarray

    @property
    def n(self):
        return self.hi - self.lo + 1

    @property
    def mode(self):
        return ar.RATIONAL if self.rates.dtype == object else ar.FLOAT

    @property
    def states(self):
        return range(self.lo, self.hi + 1)


class Potential:
    """Cached fundamental functions of one chain and reference data.

    Vectors are indexed by ``x - lo``. In float mode the fundamental vectors
    are held in extended precision (see :func:`skipfree._arith.solve_refined`)
    because the upward identities subtract nearly equal values of ``H`` and
    ``H^[y``; public results are rounded back to binary64.
    """

    def __init__(self, c: FiniteSkipFreeChain, ref: ReferenceData | None = None, check_ref=True):
        self.chain = c
        self._A = -c.rates
        self._Aw = self._A if c.mode == ar.RATIONAL else self._A.astype(np.longdouble)
        self.ref = ref or _default_reference_refined(c)
        if check_ref:
            self.ref.check(c)
        self._hb = {}

    @property
    def pi(self):
        return self.ref.ref_measure

    @property
    def o(self) -> int:
        return self.chain.idx(self.ref.ref_point)

    def _unit(self, k, n=None):
        e = ar.zeros(self.chain.n if n is None else n, self.chain.mode)
        e[k] = ar.one(self.chain.mode)
        return e

    @cached_property
    def G(self) -> np.ndarray:
        G = ar.inv(self._A)
        if self.chain.mode == ar.FLOAT and not np.all(np.isfinite(G)):
            raise SingularGenerator("-Q is numerically singular")
        return G

    @cached_property
    def g(self):
        return self.G / self.pi[None, :]

    @cached_property
    def _col_lo(self):
        # G(., l): occupation of the lower end
        return ar.solve_refined(self._A, self._unit(0))

    @cached_property
    def _row_hi(self):
        # G(r, .): row of the upper end, via the transposed system
        return ar.solve_refined(self._A.T.copy(), self._unit(self.chain.n - 1))

    @cached_property
    def C(self):
        G_oo = ar.solve_refined(self._A, self._unit(self.o))[self.o]
        return G_oo / self.pi[self.o]

    @cached_property
    def H(self) -> np.ndarray:
        # finite lower end: the ratio G(x, l)/G(o, l) at y = l
        return self._col_lo / self._col_lo[self.o]

    @cached_property
    def H_hat(self) -> np.ndarray:
        # dual resolvent Ghat(y, r) = pi(r) G(r, y) / pi(y), normalized at o
        ratio = self._row_hi / self.pi
        return ratio / ratio[self.o]

    def Hb(self, b: int) -> np.ndarray:
        """``H^[b(x) = G^[b(x, l) / G(o, l)``; zero for ``x >= b``."""
        c = self.chain
        b = min(max(b, c.lo), c.hi + 1)
        if b not in self._hb:
            k = b - c.lo
            out = ar.zeros(c.n, c.mode)
            if c.mode == ar.FLOAT:
                out = out.astype(np.longdouble)
            if k > 0:
                sub = self._A[:k, :k].copy()
                out[:k] = ar.solve_refined(sub, self._unit(0, k)) / self._col_lo[self.o]
            self._hb[b] = out
        return self._hb[b]

    # -- identities ---------------------------------------------------------

    def hit_prob(self, x: int, y: int):
        c = self.chain
        i, j = c.idx(x), c.idx(y)
        return ar.finish((self.H[i] - self.Hb(y)[i]) / self.H[j])

    def resolvent_entry(self, x: int, y: int):
        """``G(x, y) = pi(y) C Hhat(y) (H(x) - H^[y(x))``."""
        c = self.chain
        i, j = c.idx(x), c.idx(y)
        return ar.finish(self.pi[j] * self.C * self.H_hat[j] * (self.H[i] - self.Hb(y)[i]))

    def two_sided_exit(self, x: int, a: int, b: int):
        c = self.chain
        if not (c.lo <= a <= x and a < b):
            raise ModelError("two-sided exit needs a <= x and a < b")
        if x >= b:
            return ar.zero(c.mode)
        hb = self.Hb(b)
        return ar.finish(hb[c.idx(x)] / hb[c.idx(a)])

    @cached_property
    def _hb_all(self) -> np.ndarray:
        # column j holds H^[y for y = lo + j
        return np.stack([self.Hb(self.chain.lo + j) for j in range(self.chain.n)], axis=1)

    def _killed_density(self, rows, coef):
        """``C Hhat(y) (coef(x, y) - H^[y(x))`` on ``rows`` squared, zero elsewhere."""
        c = self.chain
        out = ar.zeros((c.n, c.n), c.mode)
        if c.mode == ar.FLOAT:
            out = out.astype(np.longdouble)
        if len(rows):
            ix = np.ix_(rows, rows)
            out[ix] = self.C * self.H_hat[rows][None, :] * (coef - self._hb_all[ix])
        return out

    def one_sided_killed_density(self, b: int) -> np.ndarray:
        """``g^[b(x, y) = C Hhat(y) (H^[b(x) - H^[y(x))`` on ``E^[b`` squared."""
        c = self.chain
        rows = list(range(max(min(b, c.hi + 1) - c.lo, 0)))
        return self._killed_density(rows, self.Hb(b)[rows][:, None])

    def two_sided_killed_density(self, a: int, b: int) -> np.ndarray:
        """Density of ``G^{(a,b)^c}`` from the fundamental functions."""
        c = self.chain
        hb = self.Hb(b)
        ia = c.idx(a)
        rows = [c.idx(z) for z in range(a + 1, b) if c.lo <= z <= c.hi]
        coef = hb[rows][:, None] / hb[ia] * self._hb_all[ia, rows][None, :]
        return self._killed_density(rows, coef)

    def _work(self, v):
        return v if self.chain.mode == ar.RATIONAL else np.asarray(v, dtype=np.longdouble)

    def dynkin_exit(self, f, a: int, b: int, x: int):
        """``E_x[f(X_T) 1{T < zeta}]`` for the exit time ``T`` of ``(a, b)``."""
        c = self.chain
        if not a < b:
            raise ModelError("dynkin exit needs a < b")
        fv = self._work(_as_function_vector(c, f))
        Qf = self._work(c.rates).dot(fv)
        G = self.two_sided_killed_density(a, b) * self._work(self.pi)[None, :]
        i = c.idx(x)
        return ar.finish(fv[i] + G[i].dot(Qf))

    def passage_up_prob(self, x: int, b: int):
        c = self.chain
        if x >= b:
            return ar.one(c.mode)
        G = self.one_sided_killed_density(b) * self._work(self.pi)[None, :]
        return ar.finish(1 - G[c.idx(x)].dot(self._work(c.kill)))

    def resolvent_identity_residual(self) -> float:
        """Largest relative deviation in ``g = C Hhat(y) (H(x) - H^[y(x))``.

        Each entry is scaled by the largest of ``|g|``, the reconstructed
        value and the leading term ``|C Hhat(y) H(x)|``.
        """
        c = self.chain
        worst = 0.0 if c.mode == ar.FLOAT else ar.zero(ar.RATIONAL)
        for j in range(c.n):
            y = c.lo + j
            lead = self.C * self.H_hat[j] * self.H
            rhs = lead - self.C * self.H_hat[j] * self.Hb(y)
            diff = self.g[:, j] - rhs
            if c.mode == ar.RATIONAL:
                for i in range(c.n):
                    if diff[i] != 0:
                        scale = max(abs(self.g[i, j]), abs(rhs[i]), abs(lead[i]))
                        worst = max(worst, abs(diff[i]) / scale)
            else:
                scale = np.maximum.reduce([np.abs(self.g[:, j]), np.abs(rhs), np.abs(lead)])
                scale[scale == 0] = 1.0
                worst = max(worst, float(np.max(np.abs(diff) / scale)))
        return worst

    def harmonic_residual(self, h, a: int) -> float:
        """Max ``|(Qh)(x)|`` over ``x > a`` for the chain stopped at ``a``."""
        c = self.chain
        h = np.asarray(h)
        k = c.idx(a)
        Qh = c.rates[k + 1:, k:].dot(h[k:])
        return float(np.max(np.abs(ar.to_float(Qh)))) if len(Qh) else 0.0


def _default_reference_refined(c):
    n = c.n
    if c.mode == ar.FLOAT:
        w = 0.5 ** np.arange(1, n + 1)
    else:
        w = ar.asarray([ar.Rational(1, 2 ** (i + 1)) for i in range(n)], ar.RATIONAL)
    pi = ar.solve_refined((-c.rates).T.copy(), w)
    return ReferenceData(c.lo, ar.finish(pi))


def _as_function_vector(c, f):
    if callable(f):
        return ar.asarray([f(x) for x in c.states], c.mode)
    f = np.asarray(f)
    return f if f.dtype == object or c.mode == ar.FLOAT else ar.asarray(f, c.mode)


# -- module-level operations ------------------------------------------------


def fundamental_H(c, ref=None):
    return Potential(c, ref).H


def dual_H_hat(c, ref=None):
    return Potential(c, ref).H_hat


def killed_fundamental_Hb(c, ref=None, b=None):
    return Potential(c, ref).Hb(b)


def resolvent_identity_residual(c, ref=None):
    return Potential(c, ref).resolvent_identity_residual()


def hit_prob(c, ref, x, y):
    return Potential(c, ref).hit_prob(x, y)


def two_sided_exit(c, ref, x, a, b):
    return Potential(c, ref).two_sided_exit(x, a, b)


def dynkin_exit(c, f, a, b, x, ref=None):
    return Potential(c, ref).dynkin_exit(f, a, b, x)


def passage_up_prob(c, x, b, ref=None):
    return Potential(c, ref).passage_up_prob(x, b)
