"""Markov branching processes with immigration (MBI) on the nonnegative integers.

From state ``x`` each of the ``x`` individuals branches at rate ``alpha``
into ``j`` offspring with probability ``mu(j)`` and dies (is killed) at
rate ``p``; immigration of ``j`` individuals arrives at rate
``beta nu(j)`` and the whole population is killed at rate ``q``.

The identities are built from five sequences: the scale increments
``dW``, the scale sequence ``W``, ``kappa``, the stationary measure
``pi`` and its convolution inverse ``varpi``. The generating functions
of these are ``(1-s)/psi``, ``1/psi``, ``phi/psi``, ``exp(int phi/psi)``
and ``exp(-int phi/psi)`` on ``[0, s0)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.integrate
import scipy.signal

from . import _arith as ar
from . import cpp, measures
from ._backend import kernels
from .errors import (
    ConfigError,
    InvalidFamily,
    MbpAtZero,
    ModelError,
    NonConvergent,
    RecurrentChain,
    ScaleOverflow,
    SeriesTruncation,
)
from .measures import ProbMeasure

TRANSIENT = "transient"
RECURRENT = "recurrent"
MBP = "mbp"

SERIES_CAP = 10**6
SERIES_START = 8192
DIRECT_MAX = 16384
CDQ_BLOCK = 512
EXACT_BLOCK = 8
EXACT_WINDOW = 512
RUN_LENGTH = 10
GF_TOL = 1e-12


@dataclass(frozen=True)
class MbiParams:
    alpha: object
    mu: ProbMeasure
    p: object = 0
    beta: object = 0
    nu: ProbMeasure | None = None
    q: object = 0

    def __post_init__(self):
        mode = self.mu.mode
        for name in ("alpha", "p", "beta", "q"):
            object.__setattr__(self, name, ar.coerce(getattr(self, name), mode))
        nu = self.nu if self.nu is not None else ProbMeasure({1: 1}, mode)
        if nu.mode != mode:
            raise ar.ModeError("mu and nu use different arithmetic modes")
        object.__setattr__(self, "nu", nu)
        if not self.alpha > 0:
            raise ModelError("alpha must be positive")
        if self.p < 0 or self.beta < 0 or self.q < 0:
            raise ModelError("p, beta and q must be nonnegative")
        if not self.mu.mass(0) > 0 or self.mu.mass(1) != 0:
            raise ModelError("need mu(0) > 0 and mu(1) = 0")
        if 0 in nu.probs:
            raise ModelError("immigration law nu must live on {1, 2, ...}")

    @property
    def mode(self):
        return self.mu.mode

    @property
    def m(self):
        return self.mu.mean()

    def branching(self) -> cpp.CppParams:
        return cpp.CppParams(self.alpha, self.mu, self.p)

    def kill_rate(self, x):
        return self.p * x + self.q

    @classmethod
    def from_json(cls, obj, mode=ar.FLOAT, pointer="params"):
        if not isinstance(obj, dict) or "alpha" not in obj or "mu" not in obj:
            raise ConfigError("branching model needs alpha and mu", pointer)

        def scalar(name):
            return ar.parse_scalar(obj.get(name, 0), mode, f"{pointer}.{name}")

        mu = ProbMeasure.from_json(obj["mu"], mode, f"{pointer}.mu")
        nu = ProbMeasure.from_json(obj["nu"], mode, f"{pointer}.nu") if "nu" in obj else None
        try:
            return cls(scalar("alpha"), mu, scalar("p"), scalar("beta"), nu, scalar("q"))
        except ModelError as exc:
            raise ConfigError(str(exc), pointer) from None

    def rational_image(self) -> "MbiParams":
        """Exact parameters read from the decimal form of each float."""
        if self.mode == ar.RATIONAL:
            return self
        d = ar.decimal_rational
        return MbiParams(d(self.alpha), self.mu.rational_image(), d(self.p), d(self.beta),
                         self.nu.rational_image(), d(self.q))

    def to_json(self):
        f = ar.format_scalar
        return {"alpha": f(self.alpha), "mu": self.mu.to_json(), "p": f(self.p),
                "beta": f(self.beta), "nu": self.nu.to_json(), "q": f(self.q)}

    def astype(self, mode):
        if mode == self.mode:
            return self
        if mode != ar.FLOAT:
            raise ModelError("cannot convert float parameters to rational mode")
        return MbiParams(float(self.alpha), self.mu.astype(mode), float(self.p), float(self.beta),
                         self.nu.astype(mode), float(self.q))


def phi_coeffs(params: MbiParams) -> np.ndarray:
    """Coefficients of ``phi(s) = beta (1 - nu*[s]) + q``."""
    c = -params.beta * params.nu.as_array()
    c[0] = params.beta + params.q
    return c


def phi_eval(params: MbiParams, s):
    return ar.horner(phi_coeffs(params), s)


def psi_eval(params: MbiParams, s):
    return cpp.psi_eval(params.branching(), s)


def example_family(alpha, mu: ProbMeasure, p=0) -> MbiParams:
    """Immigration matched to branching so that ``phi = -psi'``.

    ``beta = alpha m``, ``nu(j) = (j+1) mu(j+1) / m`` and
    ``q = p - alpha (m - 1)``; requires ``0 < m <= 1 + p/alpha``.
    """
    mode = mu.mode
    alpha, p = ar.coerce(alpha, mode), ar.coerce(p, mode)
    m = mu.mean()
    q = p - alpha * (m - 1)
    if mode == ar.FLOAT and -measures.SUM_TOL * max(p, alpha * m, 1.0) <= q < 0:
        q = 0.0  # the boundary m = 1 + p/alpha up to round-off
    if not m > 0 or q < 0:
        raise InvalidFamily(f"need 0 < m <= 1 + p/alpha, got m={m}")
    nu = {j - 1: j * w / m for j, w in mu.probs.items() if j >= 2}
    if mode == ar.FLOAT:
        total = sum(nu.values())
        nu = {k: v / total for k, v in nu.items()}
    return MbiParams(alpha, mu, p, alpha * m, ProbMeasure(nu, mode), q)


# -- the five sequences -------------------------------------------------------


def _online_recursion(kappa: np.ndarray, c: float, K: int) -> np.ndarray:
    """Float solution of ``out[0] = 1``, ``out[k] = c/k sum_{j<k} out[j] kappa[k-1-j]``.

    Short sequences use the direct compiled loop. Long ones use a
    divide-and-conquer scheme: the left half of each range is finished
    first and its contribution to the right half is added with one FFT
    product, giving ``O(K log^2 K)`` work.
    """
    out = np.zeros(K + 1)
    out[0] = 1.0
    acc = np.zeros(K + 1)
    kappa = np.ascontiguousarray(kappa[: K + 1], dtype=float)
    if K + 1 <= DIRECT_MAX:
        kernels.conv_recursion_block(out, acc, kappa, 0, K + 1, c)
        return out

    def solve(lo, hi):
        if hi - lo <= CDQ_BLOCK:
            kernels.conv_recursion_block(out, acc, kappa, lo, hi, c)
            return
        mid = (lo + hi) // 2
        solve(lo, mid)
        seg = scipy.signal.fftconvolve(out[lo:mid], kappa[: hi - lo])
        acc[mid:hi] += seg[mid - lo - 1: hi - lo - 1]
        solve(mid, hi)

    solve(0, K + 1)
    return out


def _exact_recursion(kappa, sign, K):
    """Rational counterpart of :func:`_online_recursion` (same splitting, exact products)."""
    out = ar.zeros(K + 1, ar.RATIONAL)
    out[0] = ar.Rational(1)
    acc = ar.zeros(K + 1, ar.RATIONAL)

    def solve(lo, hi):
        if hi - lo <= EXACT_BLOCK:
            for k in range(max(lo, 1), hi):
                s = acc[k] + np.dot(out[lo:k], kappa[k - 1 - lo::-1]) if k > lo else acc[k]
                out[k] = sign * s / k
            return
        mid = (lo + hi) // 2
        solve(lo, mid)
        seg = ar.exact_convolve(out[lo:mid], kappa[: hi - lo], hi - lo - 2)
        acc[mid:hi] += seg[mid - lo - 1: hi - lo - 1]
        solve(mid, hi)

    solve(0, K + 1)
    return out


def _long_convolve(f, g, K):
    if K + 1 <= DIRECT_MAX or f.dtype == object:
        return measures.convolve(f, g, K)
    return scipy.signal.fftconvolve(f[: K + 1], g[: K + 1])[: K + 1]


def lemma_sequences(params: MbiParams, K: int, theta=1) -> dict:
    """``dW, W, kappa, pi, varpi`` on ``0..K``, each multiplied by ``theta^k``.

    ``theta = 1`` gives the sequences themselves; ``theta = s0`` tames
    their geometric growth for long series. Rational mode requires a
    rational ``theta``.
    """
    mode = params.mode
    alpha, mu, p, beta, q = params.alpha, params.mu, params.p, params.beta, params.q
    mu0 = mu.mass(0)
    d, dn = mu.max_support, params.nu.max_support
    if mode == ar.FLOAT:
        theta = float(theta)
        pw = theta ** np.arange(max(d, dn) + 1)
        mu_tail = measures.tail(mu, max(d - 1, 0)) * pw[: max(d, 1)]
        nu_tail = measures.tail(params.nu, max(dn - 1, 0)) * pw[:dn]
        dW = np.zeros(K + 1)
        W = np.zeros(K + 1)
        dW[0] = 1.0 / (alpha * mu0)
        with np.errstate(over="ignore", invalid="ignore"):
            kernels.scale_recursion(dW, W, mu_tail, mu0, p / alpha * theta, theta)
            kappa = beta * _long_convolve(dW, nu_tail, K) + q * W
            pi = _online_recursion(kappa, theta, K)
            varpi = _online_recursion(kappa, -theta, K)
        for name, seq in (("W", W), ("pi", pi), ("varpi", varpi)):
            if not np.all(np.isfinite(seq)):
                raise ScaleOverflow(f"{name} overflows binary64 below index {K}; use rational mode or a shorter horizon")
    else:
        theta = ar.coerce(theta, mode)
        mu_tail = measures.tail(mu, max(d - 1, 0))
        nu_tail = measures.tail(params.nu, max(dn - 1, 0))
        if theta != 1:
            mu_tail = mu_tail * ar.asarray([theta ** i for i in range(d)], mode)
            nu_tail = nu_tail * ar.asarray([theta ** i for i in range(dn)], mode)
        dW = ar.zeros(K + 1, mode)
        W = ar.zeros(K + 1, mode)
        dW[0] = 1 / (alpha * mu0)
        W[0] = dW[0]
        kill = p / alpha * theta
        for k in range(K):
            s = ar.zero(mode)
            for j in range(max(k + 2 - d, 0), k + 1):
                s += dW[j] * mu_tail[k - j + 1]
            dW[k + 1] = (s + kill * W[k]) / mu0
            W[k + 1] = theta * W[k] + dW[k + 1]
        kappa = beta * measures.convolve(dW, nu_tail, K) + q * W
        pi = _exact_recursion(kappa * theta, 1, K)
        varpi = _exact_recursion(kappa * theta, -1, K)
    return {"dW": dW, "W": W, "kappa": kappa, "pi": pi, "varpi": varpi}


# -- classification ---------------------------------------------------------------


def endpoint_exponent(params: MbiParams):
    """``2 beta nu'(1) / psi''(1)``: the power of ``(1 - v)`` in ``varpi*[v]`` at a critical point."""
    psi2 = params.alpha * sum((j * (j - 1) * w for j, w in params.mu.probs.items()), 0)
    return float(2 * params.beta * params.nu.mean() / psi2) if psi2 else math.inf


def _classify(params, s0, d0):
    """Return ``(label, method, note)`` for the transient/recurrent/MBP split."""
    if params.beta == 0 and params.q == 0:
        return MBP, "exact", "no immigration and no constant killing"
    if params.q > 0:
        return TRANSIENT, "exact", "positive constant killing"
    if s0 < 1:
        return TRANSIENT, "analytic", "s0 < 1: varpi*/psi has an integrable power singularity at s0"
    if d0 < 0:
        return RECURRENT, "analytic", "s0 = 1, psi'(1) < 0: varpi*/psi has a nonintegrable pole at 1"
    return None, "series-heuristic", (
        f"critical branching with immigration; endpoint exponent {endpoint_exponent(params):.6g} "
        "(transient iff the I(0) series converges; no proven detection threshold)"
    )


# -- tables -------------------------------------------------------------------------


@dataclass(frozen=True)
class IntegralI:
    value: float
    terms: int
    tail_correction: float
    partial_sum: float
    tol: float
    method: str = "series"


@dataclass(frozen=True)
class MbiTables:
    params: MbiParams
    psi_coeffs: np.ndarray
    phi_coeffs: np.ndarray
    s0: object
    psi_prime_s0: object
    dW: np.ndarray
    W: np.ndarray
    kappa: np.ndarray
    pi: np.ndarray
    varpi: np.ndarray
    classification: str
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def horizon(self) -> int:
        return len(self.W) - 1

    @property
    def mode(self):
        return self.params.mode

    def ensure(self, K: int) -> "MbiTables":
        """Tables whose sequences reach index ``K``; ``self`` is left unchanged."""
        if K <= self.horizon:
            return self
        seq = lemma_sequences(self.params, max(K, 2 * self.horizon))
        return replace(self, **seq)

    def w(self, z):
        return self.W[z] if z >= 0 else ar.zero(self.mode)

    def w_sum(self, upto):
        return sum(self.W[: upto + 1], ar.zero(self.mode)) if upto >= 0 else ar.zero(self.mode)

    @cached_property
    def omega(self) -> np.ndarray:
        """``W * varpi`` up to the horizon."""
        return measures.convolve(self.W, self.varpi, self.horizon)

    @cached_property
    def _series(self) -> dict:
        # grown on demand by integral_I; holds the rescaled omega
        return {}

    @cached_property
    def mechanisms(self) -> "_Mechanisms":
        return _Mechanisms(self)

    @cached_property
    def _exact(self) -> dict:
        return {}

    def window(self, K: int) -> "MbiTables":
        """Tables on which finite-window identities up to index ``K`` are evaluated.

        Those identities subtract large, nearly equal multiples of the
        sequences, and binary64 loses up to ~1e-9 on supercritical
        instances. Float tables therefore delegate windows up to
        ``EXACT_WINDOW`` to an exact copy built from the decimal values of
        the parameters; callers round the exact result once.
        """
        if self.mode == ar.RATIONAL or K > EXACT_WINDOW:
            return self.ensure(K)
        cached = self._exact.get("tables")
        if cached is None or cached.horizon < K:
            size = max(K, 64, 2 * cached.horizon if cached is not None else 0)
            params = self.params.rational_image()
            seq = lemma_sequences(params, min(size, EXACT_WINDOW))
            cached = replace(self, params=params, **seq)
            self._exact["tables"] = cached
        return cached


def build_tables(params: MbiParams, K: int = 64, classification: str | None = None) -> MbiTables:
    """Lemma sequences to index ``K`` and the transient/recurrent/MBP label.

    ``classification`` overrides the automatic decision, which for
    critical branching with immigration and no constant killing is only
    a numerical heuristic (see ``diagnostics``).
    """
    if K < 0:
        raise ModelError("horizon must be nonnegative")
    bp = params.branching()
    s0, d0 = cpp.find_s0(bp)
    seq = lemma_sequences(params, K)
    label, method, note = _classify(params, s0, d0)
    diag = {"classification_method": method, "classification_note": note}
    tables = MbiTables(params, cpp.psi_coeffs(params.alpha, params.mu, params.p), phi_coeffs(params),
                       s0, d0, classification=label or TRANSIENT, diagnostics=diag, **seq)
    if classification is not None:
        if classification not in (TRANSIENT, RECURRENT, MBP):
            raise ModelError(f"unknown classification {classification!r}")
        diag["classification_method"] = "override"
        return replace(tables, classification=classification)
    if label is None:
        try:
            integral_I(tables, 0)
            label = TRANSIENT
        except NonConvergent:
            label = RECURRENT
        diag["classification_note"] += f"; decided {label}"
        tables = replace(tables, classification=label)
    return tables


# -- kernel H -------------------------------------------------------------------------


def script_H_row(tables: MbiTables, x: int, upto: int) -> np.ndarray:
    """``(H^[y(x))_{y=0..upto}``, i.e. ``H^[y(x) = (pi * u_x)(y - x - 1)``
    with ``u_x(l) = (W * varpi)(l) / (l + x + 1)``."""
    t = tables.ensure(upto)
    out = ar.zeros(upto + 1, t.mode)
    n = upto - x - 1
    if n < 0:
        return out
    u = t.omega[: n + 1] / np.arange(x + 1, x + n + 2)
    out[x + 1:] = measures.convolve(t.pi, u, n)
    return out


def script_H(tables: MbiTables, x: int, y: int):
    if x < 0 or y < 0:
        raise ModelError("states must be nonnegative")
    if y <= x:
        return ar.zero(tables.mode)
    t = tables.ensure(y)
    l = np.arange(y - x)
    return np.dot(t.pi[y - x - 1 - l], t.omega[: y - x] / (l + x + 1))



def script_H_gf_residual(tables: MbiTables, x: int, s: float, upto: int = 400) -> float:
    """Relative gap between ``sum_{y <= upto} H^[y(x) s^y`` and
    ``int_0^s v^x / psi(v) exp(int_v^s phi/psi) dv`` by quadrature.

    Meant for ``s`` well inside ``[0, s0)``, where the truncated series is
    accurate long before ``upto``.
    """
    mech = tables.mechanisms
    if not 0 <= s < mech.s0:
        raise ModelError(f"need 0 <= s < s0 = {mech.s0}")
    row = ar.to_float(script_H_row(tables, x, upto))
    series = float(np.polynomial.polynomial.polyval(s, row))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.integrate.IntegrationWarning)
        val, _ = scipy.integrate.quad(
            lambda v: v ** x / mech.psi(v) * math.exp(mech.phi_psi_integral(v, s)),
            0.0, s, epsabs=1e-15, epsrel=1e-13, limit=200)
    return abs(series - val) / max(abs(val), 1e-300)

# -- the integral I(x) ----------------------------------------------------------------


def _first_quiet_run(terms, partial, tol):
    """Index ending the first run of ``RUN_LENGTH`` terms below ``tol * |partial|``."""
    quiet = np.abs(terms) < tol * np.abs(partial)
    if len(quiet) < RUN_LENGTH:
        return None
    runs = np.convolve(quiet.astype(np.int64), np.ones(RUN_LENGTH, dtype=np.int64), mode="valid")
    hit = np.flatnonzero(runs == RUN_LENGTH)
    return int(hit[0]) + RUN_LENGTH - 1 if len(hit) else None


def _scaled_omega(tables: MbiTables, L: int) -> np.ndarray:
    cache = tables._series
    if cache.get("L", -1) < L:
        params = tables.params.astype(ar.FLOAT)
        seq = lemma_sequences(params, L, theta=float(tables.s0))
        cache["omega"] = _long_convolve(seq["W"], seq["varpi"], L)
        cache["L"] = L
    return cache["omega"][: L + 1]


def tail_exponents(tables: MbiTables):
    """Exponents ``e`` in the expansion ``I - S_L ~ sum_k B_k L^{-e_k}`` of the series tail.

    Near ``s0`` the integrand behaves like ``(s0 - v)^a`` times an analytic
    factor, with ``a = c - 1`` for a simple root (``c = phi(s0)/|psi'(s0)|``)
    and ``a = c' - 2`` at a critical point without constant killing
    (``c'`` from :func:`endpoint_exponent`). The tail then expands in
    ``L^{-(a+1)}, L^{-(a+2)}, ...``. Returns ``None`` when the decay is
    faster than any power.
    """
    if float(tables.psi_prime_s0) < 0:
        e = tables.mechanisms.c
    elif tables.params.q > 0:
        return None
    else:
        e = endpoint_exponent(tables.params) - 1.0
    return (e, e + 1.0, e + 2.0)


def _richardson(terms, L, exps):
    """Limit of the partial sums fitted at ``L, 2L, 4L, 8L`` with known exponents."""
    rows = [[1.0] + [2.0 ** (-i * e) for e in exps] for i in range(4)]
    sums = [math.fsum(terms[: (L << i) + 1]) for i in range(4)]
    return float(np.linalg.solve(np.array(rows), np.array(sums))[0])


def integral_I(tables: MbiTables, x: int, tol: float = 1e-12, cap: int = SERIES_CAP) -> IntegralI:
    """``I(x) = int_0^{s0} v^x varpi*[v] / psi(v) dv`` by its power series.

    The series is ``s0^{x+1} sum_l omega~(l) / (x + l + 1)`` with
    ``omega~(l) = s0^l (W * varpi)(l)``. It is cut after the first run of
    ten consecutive terms below ``tol`` times the partial sum; when the
    tail decays like ``L^{-e}`` the leading estimate ``term * (x + L + 1) / e``
    is then added.
    Terms that decay only like a power of ``l`` may never meet that rule
    within the cap, so the partial sums at ``L, 2L, 4L, 8L`` are also
    extrapolated with the known tail exponents (see
    :func:`tail_exponents`); two successive extrapolants agreeing to
    ``10 tol`` are accepted. At a critical point with constant killing the
    integrand vanishes faster than any power at ``s0`` and its float
    coefficients lose all accuracy to cancellation; if the series has not
    settled in the first pass the value comes from
    :func:`integral_I_quad` instead.
    """
    if tables.classification == RECURRENT:
        raise RecurrentChain("I(x) is infinite when all states are recurrent")
    if tables.classification == MBP:
        raise ModelError("I(x) is not defined for a branching process without immigration")
    s0 = float(tables.s0)
    scale = s0 ** (x + 1)
    exps = tail_exponents(tables)
    N = SERIES_START
    while True:
        N = min(N, cap)
        omega = _scaled_omega(tables, N)
        terms = omega / np.arange(x + 1, x + N + 2)
        partial = np.cumsum(terms)
        stop = _first_quiet_run(terms, partial, tol)
        if stop is not None:
            total = float(partial[stop])
            correction = 0.0
            if exps is not None and exps[0] > 0:
                correction = float(terms[stop]) * (x + stop + 1) / exps[0]
            return IntegralI(scale * (total + correction), stop + 1, scale * correction,
                             scale * total, tol, "series")
        if exps is not None and exps[0] > 0 and N >= 16 * RUN_LENGTH:
            late = _richardson(terms, N // 8, exps)
            early = _richardson(terms, N // 16, exps)
            if abs(late - early) <= 10 * tol * abs(late):
                return IntegralI(scale * late, N + 1, scale * (late - float(partial[-1])),
                                 scale * float(partial[-1]), tol, "series+extrapolation")
        if exps is None:
            # essential singularity at s0: float coefficients are swamped by cancellation
            return IntegralI(integral_I_quad(tables, x), N + 1, 0.0, scale * float(partial[-1]), tol,
                             "quadrature")
        if N >= cap:
            raise NonConvergent(f"I({x}) series not settled after {cap} terms (recurrent or near-critical)")
        N *= 4


def _horner(c, u):
    acc = 0.0
    for a in reversed(c):
        acc = acc * u + a
    return acc


def _pad(c, n):
    out = np.zeros(n)
    out[: len(c)] = c
    return out


def _divide_root(c, root):
    """Quotient of the polynomial ``c`` (increasing powers) by ``(u - root)``."""
    n = len(c) - 1
    out = np.zeros(max(n, 1))
    acc = 0.0
    for k in range(n, 0, -1):
        acc = acc * root + c[k]
        out[k - 1] = acc
    return out


class _Split:
    """``numer/psi = a1/(s0 - u) + a2/(s0 - u)^2 + g(u)`` with ``g`` smooth on ``[0, s0]``."""

    def __init__(self, numer, chi_c, s0, order):
        n_s0 = _horner(numer, s0)
        chi_s0 = _horner(chi_c, s0)
        if order == 1:
            self.a1, self.a2 = n_s0 / chi_s0, 0.0
            lead = [self.a1]
        else:
            dn = _horner(np.polynomial.polynomial.polyder(numer), s0) if len(numer) > 1 else 0.0
            dchi = _horner(np.polynomial.polynomial.polyder(chi_c), s0) if len(chi_c) > 1 else 0.0
            self.a2 = n_s0 / chi_s0
            self.a1 = -(dn * chi_s0 - n_s0 * dchi) / chi_s0**2
            lead = [self.a2 + self.a1 * s0, -self.a1]
        size = max(len(numer), len(chi_c) + len(lead))
        N = _pad(numer, size) - _pad(np.polynomial.polynomial.polymul(chi_c, lead), size)
        for _ in range(order):
            N = _divide_root(N, s0)
        self.g_c = list((-1) ** order * N)
        self.chi_c = list(chi_c)
        self.s0 = s0

    def g(self, u):
        return _horner(self.g_c, u) / _horner(self.chi_c, u)

    def integral(self, a, b):
        """``int_a^b numer/psi du`` for ``0 <= a <= b < s0``."""
        with warnings.catch_warnings():
            # the smooth remainder is tiny next to the pole terms; round-off notices are expected
            warnings.simplefilter("ignore", scipy.integrate.IntegrationWarning)
            val, _ = scipy.integrate.quad(self.g, a, b, epsabs=1e-15, epsrel=1e-14, limit=200)
        s0 = self.s0
        return self.a1 * math.log((s0 - a) / (s0 - b)) + self.a2 * (1 / (s0 - b) - 1 / (s0 - a)) + val


class _Mechanisms:
    """Float evaluations of ``psi``, ``phi`` and the integrals built from them.

    Near ``s0`` write ``psi(u) = (s0 - u)^k chi(u)`` with ``k = 1`` for a
    simple root and ``k = 2`` at a critical point. The poles of ``1/psi``
    and ``phi/psi`` at ``s0`` are integrated in closed form, so the
    quadratures only see smooth integrands. ``c`` is the coefficient of
    ``1/(s0 - u)`` in ``phi/psi`` and ``a2`` that of ``1/(s0 - u)^2``
    (nonzero only at a critical point with constant killing).
    """

    def __init__(self, tables: MbiTables):
        self.s0 = float(tables.s0)
        self.psi_c = list(ar.to_float(tables.psi_coeffs))
        self.phi_c = list(ar.to_float(tables.phi_coeffs))
        self.simple = float(tables.psi_prime_s0) < 0
        self.order = 1 if self.simple else 2
        chi = np.array(self.psi_c)
        for _ in range(self.order):
            chi = _divide_root(chi, self.s0)
        self.chi_c = list((-1) ** self.order * chi)
        self.inv_psi_split = _Split([1.0], self.chi_c, self.s0, self.order)
        self.phi_psi_split = _Split(self.phi_c, self.chi_c, self.s0, self.order)
        self.c = self.phi_psi_split.a1
        self.a2 = self.phi_psi_split.a2

    def psi(self, u):
        return _horner(self.psi_c, u)

    def phi(self, u):
        return _horner(self.phi_c, u)

    def chi(self, u):
        return _horner(self.chi_c, u)

    def inv_psi_integral(self, a, b):
        """``int_a^b du / psi(u)`` for ``0 <= a, b < s0``."""
        if b < a:
            return -self.inv_psi_integral(b, a)
        return self.inv_psi_split.integral(a, b)

    def phi_psi_integral(self, a, b):
        """``int_a^b phi/psi du`` for ``0 <= a <= b < s0``."""
        return self.phi_psi_split.integral(a, b)


def integral_I_quad(tables: MbiTables, x: int) -> float:
    """Adaptive-quadrature value of ``I(x)``, independent of the series.

    After the closed-form poles are removed the integrand is
    ``(s0 - v)^(c - k) exp(-a2 v / (s0 (s0 - v)) - G(v)) v^x / chi(v)`` times
    ``s0^(-c)``, with ``G`` the integral of the smooth remainder. Without
    the exponential factor the power is handled by an algebraic-weight rule.
    """
    if tables.classification != TRANSIENT:
        raise ModelError("I(x) is finite only for transient instances")
    mech = tables.mechanisms
    s0, c, a2, split = mech.s0, mech.c, mech.a2, mech.phi_psi_split
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.integrate.IntegrationWarning)

        def smooth(v):
            G, _ = scipy.integrate.quad(split.g, 0.0, v, epsabs=1e-15, epsrel=1e-14, limit=200)
            return v ** x * math.exp(-G) / mech.chi(v)

        if a2 == 0:
            val, _ = scipy.integrate.quad(smooth, 0.0, s0, weight="alg", wvar=(0.0, c - mech.order),
                                          epsabs=1e-14, epsrel=1e-12, limit=200)
            return s0 ** (-c) * val

        def damped(v):
            if v >= s0:
                return 0.0
            e = -a2 * v / (s0 * (s0 - v)) + (c - mech.order) * math.log(s0 - v)
            return math.exp(e) * smooth(v) if e > -745 else 0.0

        val, _ = scipy.integrate.quad(damped, 0.0, s0, epsabs=1e-14, epsrel=1e-12, limit=400)
    return float(s0 ** (-c) * val)


# -- identities -------------------------------------------------------------------------


def _mix(*vals):
    if any(isinstance(v, float) for v in vals):
        return tuple(float(v) for v in vals)
    return vals


def resolvent_G(tables: MbiTables, x: int, y: int, tol: float = 1e-12):
    if tables.classification == RECURRENT:
        raise RecurrentChain("all states recurrent: the resolvent is infinite")
    if tables.classification == MBP:
        if y == 0:
            raise MbpAtZero("state 0 absorbs a branching process; G(x, 0) is infinite")
        t = tables.ensure(y)
        s0, w1, w2 = _mix(t.s0, t.w(y - 1), t.w(y - x - 1))
        return (s0 ** x * w1 - w2) / y
    t = tables.ensure(y)
    return float(t.pi[y]) * integral_I(t, x, tol).value - float(script_H(t, x, y))


def hit_prob(tables: MbiTables, x: int, y: int, tol: float = 1e-12):
    """``P_x(T_y < zeta)``."""
    if x == y:
        return ar.one(tables.mode)
    if tables.classification == RECURRENT:
        return ar.one(tables.mode)
    t = tables.ensure(max(x, y))
    if t.classification == MBP:
        if y == 0:
            return t.s0 ** x
        s0, w1, w2 = _mix(t.s0, t.w(y - 1), t.w(y - x - 1))
        return (s0 ** x * w1 - w2) / (s0 ** y * w1)
    Ix = integral_I(t, x, tol).value
    Iy = integral_I(t, y, tol).value
    if x > y:
        return Ix / Iy
    pi_y = float(t.pi[y])
    return (pi_y * Ix - float(script_H(t, x, y))) / (pi_y * Iy)


def _check_window(x, a, b):
    if not 0 <= a <= x <= b - 1:
        raise ModelError(f"need 0 <= a <= x <= b - 1, got a={a}, x={x}, b={b}")


def _rounded(tables: MbiTables, value):
    return float(value) if tables.mode == ar.FLOAT else value


def two_sided_exit(tables: MbiTables, x: int, a: int, b: int):
    """``P_x(T_a < T_[b ^ zeta)``."""
    _check_window(x, a, b)
    t = tables.window(b)
    return _rounded(tables, script_H(t, x, b) / script_H(t, a, b))


def exit_interval_prob(tables: MbiTables, x: int, a: int, b: int):
    """``P_x(T_{(a,b)^c} < zeta)``."""
    _check_window(x, a, b)
    t = tables.window(b)
    p, q = t.params.p, t.params.q
    if p == 0 and q == 0:
        return ar.one(tables.mode)
    hx = script_H_row(t, x, b)
    ha = script_H_row(t, a, b)
    z = np.arange(a + 1, b)
    ratio = hx[b] / ha[b]
    kill = ar.asarray([t.params.kill_rate(int(v)) for v in z], t.mode)
    return _rounded(tables, 1 - np.dot(kill, ratio * ha[a + 1: b] - hx[a + 1: b]))


def passage_up_prob(tables: MbiTables, x: int, b: int):
    """``P_x(T_[b < zeta)``."""
    if x >= b:
        return ar.one(tables.mode)
    if x < 0:
        raise ModelError("states must be nonnegative")
    t = tables.window(b)
    pr = t.params
    if pr.beta > 0 or pr.q > 0:
        hx = script_H_row(t, x, b)
        kill = ar.asarray([pr.kill_rate(z) for z in range(b)], t.mode)
        return _rounded(tables, 1 - np.dot(kill, t.pi[:b] / t.pi[b] * hx[b] - hx[:b]))
    p = pr.p
    return _rounded(tables, 1 + p * t.w_sum(b - x - 2)
                    - t.w(b - x - 1) / t.w(b - 1) * (1 + p * t.w_sum(b - 2)))


# -- transient generating function and stationarity ------------------------------------


def _gf_series(params, theta, which, cap):
    """``pi*[theta]`` or ``varpi*[theta]`` by the rescaled series."""
    if theta == 0:
        return 1.0
    L = 256
    while True:
        seq = lemma_sequences(params, L, theta=theta)[which]
        partial = np.cumsum(seq)
        stop = _first_quiet_run(seq, partial, GF_TOL)
        if stop is not None:
            return float(partial[stop])
        if L >= cap:
            raise SeriesTruncation(f"{which}* at {theta} needs more than {cap} terms")
        L = min(4 * L, cap)


def flow(tables: MbiTables, t: float, s: float) -> float:
    """``Psi_t(s)``: the solution of ``int_s^v du / psi(u) = t`` in ``[s, s0)``."""
    mech = tables.mechanisms
    s0 = mech.s0
    if not 0 <= s < s0:
        raise ModelError(f"need 0 <= s < s0 = {s0}")
    if t < 0:
        raise ModelError("time must be nonnegative")
    if t == 0:
        return float(s)
    lo, hi = float(s), s0
    v = s
    for _ in range(200):
        F = mech.inv_psi_integral(s, v) - t
        if F < 0:
            lo = v
        else:
            hi = v
        if F == 0:
            return v
        step = v - F * float(mech.psi(v))
        nxt = step if lo < step < hi else 0.5 * (lo + hi)
        if nxt == v or not lo < nxt < hi:
            break
        v = nxt
    return v


def transient_gf(tables: MbiTables, x: int, t: float, s: float, cap: int = 1 << 20) -> float:
    """``E_x[s^{X_t} 1{t < zeta}] = Psi_t(s)^x Phi_t(s)`` with
    ``Phi_t(s) = pi*[s] varpi*[Psi_t(s)]``."""
    psi_t = flow(tables, t, s)
    params = tables.params.astype(ar.FLOAT)
    phi_t = _gf_series(params, s, "pi", cap) * _gf_series(params, psi_t, "varpi", cap)
    return psi_t ** x * phi_t


def stationarity_residual(tables: MbiTables, grid, cap: int = 1 << 20) -> float:
    """Max relative deviation of ``pi*[Psi_t(s)] Phi_t(s)`` from ``pi*[s]`` over ``(t, s)`` pairs."""
    if tables.classification == MBP:
        raise ModelError("the stationary measure degenerates for a branching process without immigration")
    params = tables.params.astype(ar.FLOAT)
    worst = 0.0
    for t, s in grid:
        psi_t = flow(tables, t, s)
        pi_s = _gf_series(params, s, "pi", cap)
        lhs = _gf_series(params, psi_t, "pi", cap) * transient_gf(tables, 0, t, s, cap)
        worst = max(worst, abs(lhs - pi_s) / abs(pi_s))
    return worst


# -- coefficient identities ------------------------------------------------------------------


def coefficient_residuals(tables: MbiTables) -> dict:
    """Residuals of the generating-function identities, coefficient by coefficient.

    Float residuals are scaled by the sum of absolute products in each
    coefficient; rational residuals are exact.
    """
    t = tables
    K = t.horizon
    mode = t.mode
    one0 = ar.zeros(K + 1, mode)
    one0[0] = ar.one(mode)
    dw_target = one0.copy()
    if K >= 1:
        dw_target[1] = -ar.one(mode)
    phi_target = ar.zeros(K + 1, mode)
    n = min(len(t.phi_coeffs), K + 1)
    phi_target[:n] = t.phi_coeffs[:n]
    k = np.arange(K)
    checks = {
        "psi*dW": (t.psi_coeffs, t.dW, dw_target),
        "psi*W": (t.psi_coeffs, t.W, one0),
        "psi*kappa": (t.psi_coeffs, t.kappa, phi_target),
        "pi*varpi": (t.pi, t.varpi, one0),
    }
    out = {}
    for name, (f, g, target) in checks.items():
        out[name] = _residual(measures.convolve(f, g, K) - target, f, g, K, mode)
    pk = measures.convolve(t.pi, t.kappa, K)[:K]
    lhs = (k + 1) * t.pi[1:]
    out["pi-recursion"] = _residual(lhs - pk, t.pi, t.kappa, K - 1, mode, extra=lhs)
    return out


def _residual(diff, f, g, K, mode, extra=None):
    if mode == ar.RATIONAL:
        return max((abs(v) for v in diff), default=ar.zero(mode))
    scale = measures.convolve(np.abs(f), np.abs(g), K)[: len(diff)]
    if extra is not None:
        scale = np.maximum(scale, np.abs(extra))
    return float(np.max(np.abs(diff) / np.maximum(scale, 1e-300)))
