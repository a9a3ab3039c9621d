"""Finite-support probability measures on the nonnegative integers.

Sequences are dense numpy arrays indexed from 0, in either float or
exact rational mode (see :mod:`skipfree._arith`).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _arith as ar
from .errors import ConfigError, ModelError

SUM_TOL = 1e-12


@dataclass(frozen=True)
class ProbMeasure:
    """Probability weights on finitely many nonnegative integers."""

    probs: dict
    mode: str = ar.FLOAT

    def __post_init__(self):
        if not self.probs:
            raise ModelError("probability measure needs at least one atom")
        clean = {}
        for k, w in self.probs.items():
            k = int(k)
            if k < 0:
                raise ModelError(f"support point {k} is negative")
            w = ar.coerce(w, self.mode)
            if not w > 0:
                raise ModelError(f"weight at {k} must be strictly positive, got {w}")
            clean[k] = w
        total = sum(clean.values(), ar.zero(self.mode))
        if self.mode == ar.RATIONAL:
            if total != 1:
                raise ModelError(f"weights sum to {total}, not exactly 1")
        elif abs(total - 1.0) > SUM_TOL:
            raise ModelError(f"weights sum to {total!r}, not 1 within {SUM_TOL}")
        object.__setattr__(self, "probs", dict(sorted(clean.items())))

    @classmethod
    def from_json(cls, obj, mode=ar.FLOAT, pointer="probs"):
        if isinstance(obj, dict) and "probs" in obj:
            obj = obj["probs"]
        if not isinstance(obj, dict):
            raise ConfigError("expected an object mapping support points to weights", pointer)
        probs = {}
        for k, v in obj.items():
            try:
                key = int(k)
            except ValueError:
                raise ConfigError(f"support point {k!r} is not an integer", pointer) from None
            probs[key] = ar.parse_scalar(v, mode, f"{pointer}.{k}")
        try:
            return cls(probs, mode)
        except ModelError as exc:
            raise ConfigError(str(exc), pointer) from None

    def to_json(self):
        return {"probs": {str(k): ar.format_scalar(v) for k, v in self.probs.items()}}

    def mass(self, k):
        return self.probs.get(int(k), ar.zero(self.mode))

    @property
    def max_support(self) -> int:
        return max(self.probs)

    def as_array(self, upto: int | None = None) -> np.ndarray:
        """Dense weights on ``0..upto`` (defaults to the largest atom)."""
        n = self.max_support if upto is None else upto
        out = ar.zeros(n + 1, self.mode)
        for k, w in self.probs.items():
            if k <= n:
                out[k] = w
        return out

    def mean(self):
        return sum((k * w for k, w in self.probs.items()), ar.zero(self.mode))

    def astype(self, mode: str) -> "ProbMeasure":
        if mode == self.mode:
            return self
        if mode == ar.FLOAT:
            return ProbMeasure({k: float(v) for k, v in self.probs.items()}, mode)
        raise ModelError("cannot convert a float measure to rational mode")

    def rational_image(self) -> "ProbMeasure":
        """Exact measure read from the decimal form of each weight, renormalised to total 1."""
        if self.mode == ar.RATIONAL:
            return self
        w = {k: ar.decimal_rational(v) for k, v in self.probs.items()}
        total = sum(w.values(), ar.zero(ar.RATIONAL))
        return ProbMeasure({k: v / total for k, v in w.items()}, ar.RATIONAL)


def cumulative(m: ProbMeasure, upto: int) -> np.ndarray:
    return np.cumsum(m.as_array(upto)) if m.mode == ar.FLOAT else _exact_cumsum(m.as_array(upto))


def _exact_cumsum(a):
    out = ar.zeros(len(a), ar.RATIONAL)
    acc = ar.zero(ar.RATIONAL)
    for i, v in enumerate(a):
        acc = acc + v
        out[i] = acc
    return out


def tail(m: ProbMeasure, upto: int) -> np.ndarray:
    """Tail vector ``1 - sum_{j<=k} m(j)`` for ``k = 0..upto``.

    Entries at or beyond the largest atom are set to exactly zero so that
    float round-off does not leave spurious mass.
    """
    if upto < 0:
        raise ValueError("upto must be nonnegative")
    out = 1 - cumulative(m, upto)
    out[m.max_support:] = ar.zero(m.mode)
    if m.mode == ar.FLOAT:
        np.clip(out, 0.0, 1.0, out=out)
    return out


def convolve(f, g, upto: int) -> np.ndarray:
    """``(f * g)(x) = sum_{y<=x} f(x-y) g(y)`` for ``x = 0..upto``.

    Sequences shorter than ``upto + 1`` are zero-padded.
    """
    mode = ar.mode_of(np.asarray(f), np.asarray(g))
    f = _pad(np.asarray(f), upto, mode)
    g = _pad(np.asarray(g), upto, mode)
    if mode == ar.RATIONAL:
        return ar.exact_convolve(f, g, upto)
    return np.convolve(f, g)[: upto + 1]


def _pad(a, upto, mode):
    out = ar.zeros(upto + 1, mode)
    n = min(len(a), upto + 1)
    out[:n] = a[:n]
    return out


def gf_eval(f, s, upto: int):
    """Truncated generating function ``sum_{y=0}^{upto} s**y f(y)``."""
    return ar.horner(np.asarray(f)[: upto + 1], s)
