"""Path sampling and Monte Carlo estimates with reproducible per-path streams.

Path ``i`` draws its uniforms from a counter-based stream keyed by
``(seed, i)``, so the set of simulated paths does not depend on how they
are split across worker threads, and every reduction runs over the full
per-path arrays in index order.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .._backend import kernels
from ..errors import ConfigError, ExcessiveCapping, ModelError
from .model import compile_model

HIT_A, CROSSED_B, HIT_Y, KILLED, CAPPED, TIMED_OUT = range(6)
TERMINALS = ("HitTargetA", "CrossedB", "HitY", "Killed", "Capped", "TimedOut")

CAPPED_LIMIT = 0.01
MIN_CHUNK = 2048


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    n_paths: int = 100_000
    max_jumps: int = 1_000_000
    max_time: float = math.inf
    workers: int = 1

    def __post_init__(self):
        if not 0 <= self.seed < 1 << 64:
            raise ModelError("seed must be a 64-bit unsigned integer")
        if self.n_paths < 1 or self.max_jumps < 1 or self.workers < 1:
            raise ModelError("n_paths, max_jumps and workers must be positive")
        if not self.max_time > 0:
            raise ModelError("max_time must be positive")

    @classmethod
    def from_json(cls, obj, pointer="sim"):
        if not isinstance(obj, dict):
            raise ConfigError("simulation settings must be an object", pointer)
        unknown = set(obj) - {"seed", "n_paths", "max_jumps", "max_time", "workers"}
        if unknown:
            raise ConfigError(f"unknown fields {sorted(unknown)}", pointer)
        try:
            kw = {k: int(obj[k]) for k in ("seed", "n_paths", "max_jumps", "workers") if k in obj}
            if "max_time" in obj:
                kw["max_time"] = float(obj["max_time"])
            return cls(**kw)
        except (TypeError, ValueError, ModelError) as exc:
            raise ConfigError(str(exc), pointer) from None

    def to_json(self):
        out = asdict(self)
        if math.isinf(self.max_time):
            out["max_time"] = "inf"
        return out


@dataclass(frozen=True)
class Event:
    """Stopping rule of a path and which stops count as the event.

    * ``two_sided(a, b)``: reach ``a`` before ``[b``.
    * ``exit(a, b)``: leave ``(a, b)`` (either side).
    * ``passage_up(b)``: reach ``[b``.
    * ``hit(y)``: visit ``y``.

    ``floor``/``ceiling`` stop a path once it is at or below/above them and
    count that as a miss. They are needed when the event can remain
    pending forever (an unkilled walk drifting away); the caller is
    responsible for choosing them far enough out that the bias is negligible.
    """

    kind: str
    a: int | None = None
    b: int | None = None
    y: int | None = None

    @classmethod
    def two_sided(cls, a, b):
        return cls("two_sided", a=a, b=b)

    @classmethod
    def exit(cls, a, b):
        return cls("exit", a=a, b=b)

    @classmethod
    def passage_up(cls, b, floor=None):
        return cls("passage_up", a=floor, b=b)

    @classmethod
    def hit(cls, y, floor=None, ceiling=None):
        return cls("hit", a=floor, b=ceiling, y=y)

    def __post_init__(self):
        if self.kind not in ("two_sided", "exit", "passage_up", "hit"):
            raise ModelError(f"unknown event kind {self.kind!r}")
        if self.kind in ("two_sided", "exit") and (self.a is None or self.b is None or not self.a < self.b):
            raise ModelError("two-sided events need a < b")
        if self.kind == "passage_up" and self.b is None:
            raise ModelError("passage_up needs b")
        if self.kind == "hit":
            if self.y is None:
                raise ModelError("hit needs y")
            if self.a is not None and self.a >= self.y or self.b is not None and self.b <= self.y:
                raise ModelError("hit needs floor < y < ceiling")

    @property
    def success(self) -> tuple:
        return {"two_sided": (HIT_A,), "exit": (HIT_A, CROSSED_B),
                "passage_up": (CROSSED_B,), "hit": (HIT_Y,)}[self.kind]

    def kernel_args(self):
        a, b, y = self.a, self.b, self.y
        return (a is not None, a or 0, b is not None, b or 0, y is not None, y or 0)


@dataclass(frozen=True)
class PathOutcome:
    terminal: str
    hit_time: float
    weight: float
    jumps_used: int
    final_state: int


@dataclass(frozen=True)
class Estimate:
    """Mean of the per-path values with its standard error.

    Paths stopped by the jump cap while the event was still pending are
    counted in ``n_capped``; ``bounds`` brackets the estimate by scoring
    them as all misses or all hits (indicator events only).
    """

    p_hat: float
    std_err: float
    n_paths: int
    n_capped: int = 0
    bounds: tuple | None = None

    def within(self, value, k=3.0) -> bool:
        return abs(self.p_hat - float(value)) <= k * self.std_err

    def to_json(self):
        return {"p_hat": self.p_hat, "std_err": self.std_err, "n_paths": self.n_paths,
                "n_capped": self.n_capped, "bounds": list(self.bounds) if self.bounds else None}


def _run(model, x0, event, cfg, start, stop, weighting):
    km = compile_model(model)
    if not km.contains(x0):
        raise ModelError(f"start state {x0} is outside the state space")
    p_w, q_w = (float(weighting[0]), float(weighting[1])) if weighting else (0.0, 0.0)
    n = stop - start
    out = (np.empty(n, dtype=np.int8), np.empty(n), np.empty(n),
           np.empty(n, dtype=np.int64), np.empty(n, dtype=np.int64))
    chunk = max(MIN_CHUNK, -(-n // (4 * cfg.workers)))
    bounds = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]

    def block(span):
        lo, hi = span
        kernels.simulate_block(
            cfg.seed, start + lo, start + hi, x0, *km.kernel_args(), *event.kernel_args(),
            cfg.max_jumps, float(cfg.max_time), p_w, q_w, *(arr[lo:hi] for arr in out))

    if cfg.workers == 1 or len(bounds) == 1:
        for span in bounds:
            block(span)
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            list(pool.map(block, bounds))
    return out


def sample_path(model, x0: int, event: Event, cfg: SimConfig, index: int = 0,
                weighting=None) -> PathOutcome:
    """Simulate the path with stream index ``index``."""
    code, time, logw, jumps, final = _run(model, x0, event, cfg, index, index + 1, weighting)
    return PathOutcome(TERMINALS[code[0]], float(time[0]), math.exp(logw[0]), int(jumps[0]), int(final[0]))


def estimate(model, x0: int, event: Event, cfg: SimConfig, weighting=None, payoff=None) -> Estimate:
    """Monte Carlo estimate of ``E_x0[w f(X_T) 1{event}]``.

    ``weighting = (p_w, q_w)`` multiplies each path by
    ``exp(-q_w T - p_w int_0^T X ds)``; ``payoff`` (a function of the
    stopping state) defaults to 1. Paths that run out of time count as
    misses. Raises :class:`ExcessiveCapping` when more than 1% of paths hit
    the jump cap with the event undecided.
    """
    code, _, logw, _, final = _run(model, x0, event, cfg, 0, cfg.n_paths, weighting)
    n = cfg.n_paths
    hit = np.isin(code, event.success)
    capped = code == CAPPED
    n_capped = int(capped.sum())
    if n_capped > CAPPED_LIMIT * n:
        raise ExcessiveCapping(f"{n_capped} of {n} paths reached max_jumps={cfg.max_jumps} "
                               "with the event pending")
    weight = np.exp(logw) if weighting else np.ones(n)
    values = np.where(hit, weight, 0.0)
    if payoff is not None:
        f = np.vectorize(payoff, otypes=[float])
        values = values * np.where(hit, f(final), 0.0)
    mean = float(values.sum() / n)
    second = float((values * values).sum() / n)
    std_err = math.sqrt(max(second - mean * mean, 0.0) / n)
    bounds = None
    if n_capped and payoff is None:
        bounds = (mean, mean + float(weight[capped].sum() / n))
    return Estimate(mean, std_err, n, n_capped, bounds)
