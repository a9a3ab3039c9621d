"""Flatten the three model families into the arrays the path kernel reads."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _arith as ar
from ..chain import FiniteSkipFreeChain
from ..cpp import CppParams
from ..errors import ModelError
from ..mbi import MbiParams

TABLE, AFFINE = 0, 1

_EMPTY_F = np.zeros(0)
_EMPTY_I = np.zeros(0, dtype=np.int64)


@dataclass(frozen=True)
class KernelModel:
    """Arguments of ``simulate_block`` that describe the dynamics.

    ``kind == TABLE`` is a finite chain: the outgoing transitions of state
    ``lo + i`` occupy ``offsets[i]:offsets[i+1]`` of ``dest``/``cum``, where
    ``cum`` holds running sums of rates and a destination below ``lo``
    means the cemetery. ``kind == AFFINE`` is a compound Poisson process
    (``linear`` false) or a branching process with immigration (rates
    proportional to the state).
    """

    kind: int
    lo: int = 0
    hi: int | None = None
    offsets: np.ndarray = _EMPTY_I
    dest: np.ndarray = _EMPTY_I
    cum: np.ndarray = _EMPTY_F
    total: np.ndarray = _EMPTY_F
    linear: bool = False
    alpha: float = 0.0
    mu_cum: np.ndarray = _EMPTY_F
    mu_jump: np.ndarray = _EMPTY_I
    beta: float = 0.0
    nu_cum: np.ndarray = _EMPTY_F
    nu_jump: np.ndarray = _EMPTY_I
    p: float = 0.0
    q: float = 0.0

    def contains(self, x: int) -> bool:
        if self.kind == TABLE:
            return self.lo <= x <= self.hi
        return x >= 0 if self.linear else True

    def kernel_args(self):
        return (self.kind, self.lo, self.offsets, self.dest, self.cum, self.total,
                self.linear, self.alpha, self.mu_cum, self.mu_jump, self.beta,
                self.nu_cum, self.nu_jump, self.p, self.q)


def _law(measure, shift):
    probs = sorted(measure.probs.items())
    jumps = np.array([k + shift for k, _ in probs], dtype=np.int64)
    cum = np.cumsum([float(w) for _, w in probs])
    return cum, jumps


def _from_chain(c: FiniteSkipFreeChain) -> KernelModel:
    rates = ar.to_float(c.rates)
    kill = ar.to_float(c.kill)
    offsets, dest, cum, total = [0], [], [], []
    for i in range(c.n):
        run = 0.0
        for j in range(c.n):
            if j != i and rates[i, j] > 0:
                run += rates[i, j]
                dest.append(c.lo + j)
                cum.append(run)
        if kill[i] > 0:
            run += kill[i]
            dest.append(c.lo - 1)
            cum.append(run)
        offsets.append(len(dest))
        total.append(run)
    return KernelModel(TABLE, c.lo, c.hi, np.array(offsets, dtype=np.int64),
                       np.array(dest, dtype=np.int64), np.array(cum, dtype=float),
                       np.array(total, dtype=float))


def compile_model(model) -> KernelModel:
    """Kernel description of a finite chain, compound Poisson or branching model."""
    if isinstance(model, KernelModel):
        return model
    if isinstance(model, FiniteSkipFreeChain):
        return _from_chain(model)
    if isinstance(model, CppParams):
        mu_cum, mu_jump = _law(model.mu, -1)
        return KernelModel(AFFINE, linear=False, alpha=float(model.alpha), mu_cum=mu_cum,
                           mu_jump=mu_jump, p=float(model.p))
    if isinstance(model, MbiParams):
        mu_cum, mu_jump = _law(model.mu, -1)
        nu_cum, nu_jump = _law(model.nu, 0)
        return KernelModel(AFFINE, linear=True, alpha=float(model.alpha), mu_cum=mu_cum,
                           mu_jump=mu_jump, beta=float(model.beta), nu_cum=nu_cum,
                           nu_jump=nu_jump, p=float(model.p), q=float(model.q))
    raise ModelError(f"cannot simulate a {type(model).__name__}")
