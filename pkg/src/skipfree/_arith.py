"""Scalar arithmetic modes: binary64 floats or exact rationals.

Float mode stores sequences and matrices as ``float64`` arrays. Rational
mode stores them as ``object`` arrays of :data:`Rational` values, so the
same numpy expressions (dot, convolve, slicing) work in both modes.
"""
from __future__ import annotations

import math
import numbers
from fractions import Fraction
from functools import reduce

import numpy as np
import scipy.linalg

from .errors import ConfigError, ModeError, SingularGenerator

try:
    from gmpy2 import lcm as _lcm
    from gmpy2 import mpq as Rational
    from gmpy2 import mpz as _Int
except ImportError:  # pragma: no cover
    Rational = Fraction
    _Int = int
    _lcm = math.lcm

FLOAT = "float"
RATIONAL = "rational"
MODES = (FLOAT, RATIONAL)


def is_rational(v) -> bool:
    return isinstance(v, (Fraction, numbers.Integral)) or type(v).__name__ == "mpq"


def parse_scalar(value, mode: str, pointer=None):
    """Convert a JSON scalar (number or ``"p/q"`` string) to the mode's type.

    In rational mode decimal literals are read exactly (``0.1`` is 1/10).
    """
    if mode not in MODES:
        raise ConfigError(f"unknown arithmetic mode {mode!r}", pointer)
    if isinstance(value, bool):
        raise ConfigError("boolean is not a scalar", pointer)
    try:
        if mode == FLOAT:
            if isinstance(value, str):
                return float(Fraction(value.strip()))
            return float(value)
        if isinstance(value, float):
            return Rational(Fraction(repr(value)))
        if isinstance(value, str):
            return Rational(Fraction(value.strip()))
        if is_rational(value):
            return Rational(value)
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise ConfigError(f"cannot parse scalar {value!r}: {exc}", pointer) from None
    raise ConfigError(f"cannot parse scalar {value!r}", pointer)


def format_scalar(v) -> str | float:
    """JSON-friendly rendering: rationals as ``"p/q"`` strings."""
    if is_rational(v) and not isinstance(v, bool):
        f = Fraction(int(v.numerator), int(v.denominator))
        return str(f)
    return float(v)


def mode_of(*values) -> str:
    """Arithmetic mode shared by ``values``; raises on a float/rational mix."""
    modes = set()
    for v in values:
        if isinstance(v, np.ndarray):
            modes.add(RATIONAL if v.dtype == object else FLOAT)
        elif is_rational(v):
            if not isinstance(v, numbers.Integral):
                modes.add(RATIONAL)
        else:
            modes.add(FLOAT)
    if len(modes) > 1:
        raise ModeError("float and rational scalars mixed in one computation")
    return modes.pop() if modes else RATIONAL


def coerce(v, mode: str):
    if mode == FLOAT:
        return float(v)
    if isinstance(v, float):
        raise ModeError("float value in rational-mode computation")
    return Rational(v)


def zero(mode: str):
    return 0.0 if mode == FLOAT else Rational(0)


def one(mode: str):
    return 1.0 if mode == FLOAT else Rational(1)


def zeros(n, mode: str) -> np.ndarray:
    if mode == FLOAT:
        return np.zeros(n)
    out = np.empty(n, dtype=object)
    out.fill(Rational(0))
    return out


def asarray(values, mode: str) -> np.ndarray:
    if mode == FLOAT:
        return np.asarray(values, dtype=float)
    arr = np.asarray(values, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = coerce(v, mode)
    return out


def identity(n, mode: str) -> np.ndarray:
    out = zeros((n, n), mode)
    for i in range(n):
        out[i, i] = one(mode)
    return out


def decimal_rational(v):
    """The rational written by the shortest decimal representation of ``v``."""
    return Rational(Fraction(repr(float(v)))) if isinstance(v, float) else Rational(v)


def to_float(v):
    if isinstance(v, np.ndarray):
        return v.astype(float)
    return float(v)


def finish(v):
    """Round an extended-precision working value back to binary64."""
    if isinstance(v, np.ndarray):
        return v.astype(float) if v.dtype == np.longdouble else v
    return float(v) if isinstance(v, np.floating) else v


def solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve ``A X = B``; exact Gauss-Jordan elimination for object arrays."""
    if A.shape[0] == 0:
        return B.copy()
    if A.dtype != object:
        try:
            return np.linalg.solve(A, B)
        except np.linalg.LinAlgError as exc:
            raise SingularGenerator(str(exc)) from None
    n = A.shape[0]
    vec = B.ndim == 1
    M = np.concatenate([A, B.reshape(n, -1)], axis=1).copy()
    for i in range(n):
        piv = next((r for r in range(i, n) if M[r, i] != 0), None)
        if piv is None:
            raise SingularGenerator("matrix is singular")
        if piv != i:
            M[[i, piv]] = M[[piv, i]]
        M[i] = M[i] / M[i, i]
        for r in range(n):
            if r != i and M[r, i] != 0:
                M[r] = M[r] - M[r, i] * M[i]
    X = M[:, n:]
    return X[:, 0].copy() if vec else X.copy()


def solve_refined(A: np.ndarray, B: np.ndarray, sweeps: int = 3) -> np.ndarray:
    """Solve ``A X = B`` with residuals accumulated in extended precision.

    Float inputs return a ``longdouble`` array accurate well beyond binary64,
    which keeps differences of nearly equal solutions meaningful. Rational
    inputs are solved exactly.
    """
    if A.dtype == object:
        return solve(A, B)
    if A.shape[0] == 0:
        return B.astype(np.longdouble)
    try:
        lu = scipy.linalg.lu_factor(A, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SingularGenerator(str(exc)) from None
    A_ext = A.astype(np.longdouble)
    B_ext = np.asarray(B, dtype=np.longdouble)
    X = scipy.linalg.lu_solve(lu, np.asarray(B, dtype=float)).astype(np.longdouble)
    for _ in range(sweeps):
        R = B_ext - A_ext @ X
        X += scipy.linalg.lu_solve(lu, R.astype(float))
    if not np.all(np.isfinite(X)):
        raise SingularGenerator("matrix is numerically singular")
    return X


def inv(A: np.ndarray) -> np.ndarray:
    mode = RATIONAL if A.dtype == object else FLOAT
    return solve(A, identity(A.shape[0], mode))


def horner(coeffs, s):
    """Evaluate ``sum coeffs[k] s**k``."""
    acc = coeffs[-1] * 0 if len(coeffs) else 0
    for c in coeffs[::-1]:
        acc = acc * s + c
    return acc


def _common_scale(values):
    """Integers ``N`` and a denominator ``D`` with ``values == N / D``."""
    den = reduce(_lcm, (_Int(v.denominator) for v in values), _Int(1))
    return [_Int(v.numerator) * (den // _Int(v.denominator)) for v in values], den


def _pack(ints, width):
    nbytes = width // 8
    pos = b"".join((v if v > 0 else 0).to_bytes(nbytes, "little") for v in ints)
    neg = b"".join((-v if v < 0 else 0).to_bytes(nbytes, "little") for v in ints)
    return _Int.from_bytes(pos, "little") - _Int.from_bytes(neg, "little")


def exact_convolve(f, g, upto: int) -> np.ndarray:
    """Exact ``(f * g)[0..upto]`` for rational sequences.

    Both inputs are scaled to integers over a common denominator and
    multiplied as one packed big integer (Kronecker substitution), so the
    work is a single large multiplication plus one normalisation per output
    entry instead of a rational product and sum per pair.
    """
    f, g = list(f[: upto + 1]), list(g[: upto + 1])
    out = zeros(upto + 1, RATIONAL)
    if not f or not g:
        return out
    F, df = _common_scale(f)
    G, dg = _common_scale(g)
    bound = max(abs(v) for v in F) * max(abs(v) for v in G) * min(len(F), len(G))
    if bound == 0:
        return out
    width = -(-(int(bound).bit_length() + 2) // 8) * 8
    n = min(upto + 1, len(F) + len(G) - 1)
    prod = _pack(F, width) * _pack(G, width)
    raw = prod.to_bytes(-(-(prod.bit_length() + 1) // 8) + n * width // 8, "little", signed=True)
    step, half, carry = width // 8, _Int(1) << (width - 1), 0
    den = df * dg
    for k in range(n):
        v = _Int.from_bytes(raw[k * step:(k + 1) * step], "little") + carry
        if v >= half:
            v -= _Int(1) << width
            carry = 1
        else:
            carry = 0
        out[k] = Rational(v, den)
    return out
