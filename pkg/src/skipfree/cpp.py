"""Skip-free downward compound Poisson processes on the integers.

The process jumps at rate ``alpha`` by ``j - 1`` with probability
``mu(j)`` and is killed at constant rate ``p``. Everything is expressed
through the branching polynomial ``psi(s) = alpha (mu*[s] - s) - p s``,
its smallest root ``s0`` in ``(0, 1]`` and the scale sequence ``W``
whose generating function is ``1/psi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from fractions import Fraction

import numpy as np

from . import _arith as ar
from . import measures
from .errors import ConfigError, ModelError, RecurrentChain, ScaleOverflow
from .measures import ProbMeasure

TRANSIENT_KILLED = "transient-p>0"
TRANSIENT_DRIFT = "transient-m!=1"
RECURRENT_CRITICAL = "recurrent-critical"

SNAP_DENOMINATOR = 10**6
CRITICAL_TOL = 1e-12


@dataclass(frozen=True)
class CppParams:
    alpha: object
    mu: ProbMeasure
    p: object

    def __post_init__(self):
        mode = self.mu.mode
        object.__setattr__(self, "alpha", ar.coerce(self.alpha, mode))
        object.__setattr__(self, "p", ar.coerce(self.p, mode))
        if not self.alpha > 0:
            raise ModelError("alpha must be positive")
        if self.p < 0:
            raise ModelError("killing rate p must be nonnegative")
        if not self.mu.mass(0) > 0:
            raise ModelError("mu(0) must be positive (the process must be able to step down)")
        if self.mu.mass(1) != 0:
            raise ModelError("mu(1) must be zero (a jump of size 0 is not a jump)")

    @property
    def mode(self) -> str:
        return self.mu.mode

    @classmethod
    def from_json(cls, obj, mode=ar.FLOAT, pointer="params"):
        try:
            alpha, mu, p = obj["alpha"], obj["mu"], obj.get("p", 0)
        except (KeyError, TypeError):
            raise ConfigError("compound Poisson model needs alpha and mu", pointer) from None
        mu = ProbMeasure.from_json(mu, mode, f"{pointer}.mu")
        try:
            return cls(
                ar.parse_scalar(alpha, mode, f"{pointer}.alpha"),
                mu,
                ar.parse_scalar(p, mode, f"{pointer}.p"),
            )
        except ModelError as exc:
            raise ConfigError(str(exc), pointer) from None

    def to_json(self):
        return {"alpha": ar.format_scalar(self.alpha), "mu": self.mu.to_json(), "p": ar.format_scalar(self.p)}

    def astype(self, mode):
        return CppParams(ar.to_float(self.alpha) if mode == ar.FLOAT else self.alpha, self.mu.astype(mode),
                         ar.to_float(self.p) if mode == ar.FLOAT else self.p)

    @property
    def m(self):
        """Mean offspring ``sum_j j mu(j)``."""
        return self.mu.mean()


def psi_coeffs(alpha, mu: ProbMeasure, p) -> np.ndarray:
    """Coefficients of ``psi`` in increasing powers of ``s``."""
    c = alpha * mu.as_array(max(mu.max_support, 1))
    c[1] = c[1] - alpha - p
    return c


def poly_derivative(c: np.ndarray) -> np.ndarray:
    if len(c) <= 1:
        return ar.zeros(1, ar.mode_of(c))
    return c[1:] * np.arange(1, len(c))


def psi_eval(params: CppParams, s):
    return ar.horner(psi_coeffs(params.alpha, params.mu, params.p), s)


def psi_prime_eval(params: CppParams, s):
    return ar.horner(poly_derivative(psi_coeffs(params.alpha, params.mu, params.p)), s)


def smallest_root(coeffs: np.ndarray, analytic_one: bool):
    """Smallest zero of a convex polynomial with ``psi(0) > 0`` in ``(0, 1]``.

    With ``analytic_one`` the caller has established that the root is 1.
    Otherwise ``psi(1) <= 0`` with a sign change inside ``(0, 1)`` and
    the root is bracketed by bisection down to adjacent doubles. In
    rational mode a float root that is exactly a small-denominator
    rational is returned as that rational.
    """
    exact = coeffs.dtype == object
    if analytic_one:
        return ar.one(ar.RATIONAL if exact else ar.FLOAT)
    fc = ar.to_float(coeffs)
    lo, hi = 0.0, 1.0 - 1e-15
    if ar.horner(fc, hi) > 0:
        hi = 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if ar.horner(fc, mid) > 0:
            lo = mid
        else:
            hi = mid
    root = hi if abs(ar.horner(fc, hi)) <= abs(ar.horner(fc, lo)) else lo
    if exact:
        cand = Fraction(root).limit_denominator(SNAP_DENOMINATOR)
        cand = ar.Rational(cand.numerator, cand.denominator)
        if cand > 0 and ar.horner(coeffs, cand) == 0:
            return cand
    return root


def is_critical(params: CppParams) -> bool:
    """``p = 0`` and mean offspring 1; float means within ``CRITICAL_TOL`` of 1 count."""
    if params.p != 0:
        return False
    if params.mode == ar.RATIONAL:
        return params.m == 1
    return abs(params.m - 1) <= CRITICAL_TOL


def find_s0(params: CppParams):
    """Return ``(s0, psi'(s0))``."""
    if is_critical(params):
        return ar.one(params.mode), ar.zero(params.mode)
    coeffs = psi_coeffs(params.alpha, params.mu, params.p)
    s0 = smallest_root(coeffs, params.p == 0 and params.m <= 1)
    dcoeffs = poly_derivative(coeffs)
    if isinstance(s0, float) and dcoeffs.dtype == object:
        dcoeffs = ar.to_float(dcoeffs)
    return s0, ar.horner(dcoeffs, s0)


def classify(params: CppParams) -> str:
    if params.p > 0:
        return TRANSIENT_KILLED
    if not is_critical(params):
        return TRANSIENT_DRIFT
    return RECURRENT_CRITICAL


def scale_sequence(params: CppParams, K: int, prefix=None) -> np.ndarray:
    """``W(0..K)`` by the renewal-type recursion, reusing ``prefix`` if given.

    Only the last ``max_support - 1`` terms carry a tail weight, and the
    killing contribution is a running prefix sum, so the cost is
    ``O(K * support)``.
    """
    mode = params.mode
    alpha, p, mu = params.alpha, params.p, params.mu
    mu0 = mu.mass(0)
    d = mu.max_support
    tails = measures.tail(mu, max(d, 1))
    W = ar.zeros(K + 1, mode)
    start = 0
    if prefix is not None and len(prefix):
        start = min(len(prefix), K + 1)
        W[:start] = prefix[:start]
    base = 1 / (alpha * mu0)
    kill = p / alpha
    if start == 0:
        W[0] = base
        start = 1
    running = sum(W[:start - 1], ar.zero(mode)) if mode == ar.RATIONAL else float(np.sum(W[:start - 1]))
    for x in range(start - 1, K):
        running = running + W[x]
        acc = kill * running
        for j in range(max(0, x + 1 - d + 1), x + 1):
            acc = acc + W[j] * tails[x - j + 1]
        W[x + 1] = base + acc / mu0
        if mode == ar.FLOAT and not math.isfinite(W[x + 1]):
            raise ScaleOverflow(f"W({x + 1}) exceeds the float range; use rational mode or a smaller horizon")
    return W


@dataclass(frozen=True)
class CppTables:
    params: CppParams
    psi_coeffs: np.ndarray
    m: object
    s0: object
    psi_prime_s0: object
    W: np.ndarray
    regime: str

    @property
    def horizon(self) -> int:
        return len(self.W) - 1

    def ensure(self, K: int) -> "CppTables":
        """Tables with ``W`` known up to at least ``K``; ``self`` is not modified."""
        if K <= self.horizon:
            return self
        K = max(K, 2 * self.horizon)
        return replace(self, W=scale_sequence(self.params, K, self.W))

    def w(self, z: int):
        if z < 0:
            return ar.zero(self.params.mode)
        if z > self.horizon:
            raise ModelError(f"W({z}) beyond horizon {self.horizon}; call ensure() first")
        return self.W[z]

    def w_sum(self, upto: int):
        """``sum_{z=0}^{upto} W(z)`` (zero when ``upto < 0``)."""
        if upto < 0:
            return ar.zero(self.params.mode)
        return sum(self.W[: upto + 1], ar.zero(self.params.mode))

    @cached_property
    def deflated(self) -> dict:
        """Sequences whose generating functions have the pole at ``s0`` removed.

        With ``psi(s) = (s - s0) rho(s)`` and ``sigma = (rho - psi'(s0)) / (s - s0)``:
        ``U`` has generating function ``-sigma/rho``, i.e.
        ``U(n) = s0^{-n-1} + psi'(s0) W(n)``, and ``V`` has ``1/((1-s)(1-s0) rho)``,
        i.e. ``V(n) = sum_{k<n} W(k) - s0 W(n)/(1-s0)``. Written through ``W``
        both subtract terms of size ``s0^{-n}``; computed from their own
        series they stay bounded. ``V`` is only defined for ``s0 < 1``.
        """
        s0, d0, coeffs = self.s0, self.psi_prime_s0, self.psi_coeffs
        if isinstance(s0, float):
            coeffs, d0 = ar.to_float(coeffs), float(d0)
        rho = _deflate(coeffs, s0)
        shifted = rho.copy()
        shifted[0] = shifted[0] - d0
        mode = ar.mode_of(rho)
        inv_rho = _series_quotient(ar.asarray([ar.one(mode)], mode), rho, self.horizon)
        U = -_series_quotient(_deflate(shifted, s0), rho, self.horizon)
        V = None
        if s0 != 1:
            V = np.cumsum(inv_rho) / (1 - s0)
        return {"U": U, "V": V}


def _deflate(c: np.ndarray, root) -> np.ndarray:
    """Quotient of the polynomial ``c`` (increasing powers) by ``s - root``; the remainder is dropped."""
    n = len(c) - 1
    if n < 1:
        return 0 * c[:1]
    q = [c[n]]
    for k in range(n - 1, 0, -1):
        q.append(c[k] + root * q[-1])
    return ar.asarray(q[::-1], ar.mode_of(c))


def _series_quotient(num: np.ndarray, den: np.ndarray, K: int) -> np.ndarray:
    """Coefficients ``0..K`` of the power series ``num / den`` (``den[0] != 0``)."""
    out = ar.zeros(K + 1, ar.mode_of(den))
    d = len(den) - 1
    for n in range(K + 1):
        acc = num[n] if n < len(num) else 0 * den[0]
        for j in range(1, min(n, d) + 1):
            acc = acc - den[j] * out[n - j]
        out[n] = acc / den[0]
    return out


def build_tables(params: CppParams, K: int = 64) -> CppTables:
    if K < 0:
        raise ModelError("horizon must be nonnegative")
    coeffs = psi_coeffs(params.alpha, params.mu, params.p)
    s0, d0 = find_s0(params)
    return CppTables(params, coeffs, params.m, s0, d0, scale_sequence(params, K), classify(params))


def _mix(*vals):
    """Promote to float when an irrational ``s0`` meets exact values."""
    if any(isinstance(v, float) for v in vals):
        return tuple(float(v) for v in vals)
    return vals


def _power(s0, k):
    if k >= 0 or s0 != 0:
        return s0 ** k
    raise ModelError("s0 = 0 cannot be raised to a negative power")


def resolvent_G(tables: CppTables, x: int, y: int):
    if tables.regime == RECURRENT_CRITICAL:
        raise RecurrentChain("critical unkilled walk (p = 0, m = 1): all states recurrent")
    h, d0 = _mix(hit_prob(tables, x, y), tables.psi_prime_s0)
    return -h / d0


def _exact(tables: CppTables) -> bool:
    return tables.params.mode == ar.RATIONAL and not isinstance(tables.s0, float)


def hit_prob(tables: CppTables, x: int, y: int):
    if y <= x:
        return _power(tables.s0, x - y)
    t = tables.ensure(y - x - 1)
    if t.s0 == 1 or _exact(t):
        return _power(t.s0, x - y) + t.psi_prime_s0 * t.w(y - x - 1)
    return t.deflated["U"][y - x - 1]


def _check_window(x, a, b):
    if not a <= x <= b - 1:
        raise ModelError(f"need a <= x <= b - 1, got a={a}, x={x}, b={b}")


def two_sided_exit_down(tables: CppTables, x: int, a: int, b: int):
    _check_window(x, a, b)
    t = tables.ensure(b - a - 1)
    return t.w(b - x - 1) / t.w(b - a - 1)


def exit_interval_prob(tables: CppTables, x: int, a: int, b: int):
    _check_window(x, a, b)
    t = tables.ensure(b - a - 1)
    p = t.params.p
    ratio = t.w(b - x - 1) / t.w(b - a - 1)
    if p == 0:
        return ar.one(t.params.mode)
    if t.params.mode == ar.RATIONAL:
        return 1 + p * t.w_sum(b - x - 2) - ratio * p * t.w_sum(b - a - 2)
    V = t.deflated["V"]
    return 1 + p * V[b - x - 1] - ratio * p * V[b - a - 1]


def passage_up_prob(tables: CppTables, x: int, b: int):
    if x >= b:
        return ar.one(tables.params.mode)
    t = tables.ensure(b - x - 1)
    p = t.params.p
    if p > 0 and _exact(t):
        return 1 + p * t.w_sum(b - x - 2) - p * t.s0 / (1 - t.s0) * t.w(b - x - 1)
    if p > 0:
        p, v = _mix(p, t.deflated["V"][b - x - 1])
        return 1 + p * v
    if t.s0 != 1:
        return ar.one(t.params.mode)
    return 1 + t.psi_prime_s0 * t.w(b - x - 1)


def gf_residual(tables: CppTables):
    """Max deviation of ``psi * W`` from the unit sequence over ``0..K``.

    Rational tables give the exact maximum. Float deviations are scaled by
    the sum of absolute terms in each coefficient.
    """
    K = tables.horizon
    prod = measures.convolve(tables.psi_coeffs, tables.W, K)
    target = ar.zeros(K + 1, tables.params.mode)
    target[0] = ar.one(tables.params.mode)
    diff = prod - target
    if tables.params.mode == ar.RATIONAL:
        return max(abs(v) for v in diff)
    scale = measures.convolve(np.abs(tables.psi_coeffs), np.abs(tables.W), K)
    return float(np.max(np.abs(diff) / np.maximum(scale, 1.0)))
