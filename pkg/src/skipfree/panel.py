"""Random model draws and the randomized regression panels.

Every draw is built from small-denominator fractions and then cast to
the requested mode, so a seed yields the same instance in float and in
exact rational arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import _arith as ar
from . import boundary, chain, cpp, lumped, mbi
from . import simulate as sim
from .measures import ProbMeasure
from .report import Row

GOLDEN = 0x9E3779B97F4A7C15


def _cast(v: Fraction, mode):
    return float(v) if mode == ar.FLOAT else ar.Rational(v)


def _frac(rng, lo, hi, den):
    """Uniform draw from ``{lo/den, ..., hi/den}``."""
    return Fraction(int(rng.integers(lo, hi + 1)), den)


def random_measure(rng, mode, max_support, min_zero=Fraction(2, 5), max_zero=Fraction(3, 4)):
    """Measure with an atom at 0 in ``[min_zero, max_zero]`` and the rest on ``2..max_support``."""
    w0 = _frac(rng, int(min_zero * 20), int(max_zero * 20), 20)
    k = int(rng.integers(1, max_support))
    pts = sorted(int(v) for v in rng.choice(np.arange(2, max_support + 1), size=k, replace=False))
    raw = [int(v) for v in rng.integers(1, 6, size=k)]
    probs = {0: w0}
    for pt, r in zip(pts, raw):
        probs[pt] = (1 - w0) * Fraction(r, sum(raw))
    return ProbMeasure({j: _cast(w, mode) for j, w in probs.items()}, mode)


def random_immigration(rng, mode, max_support=4):
    k = int(rng.integers(1, max_support + 1))
    pts = sorted(int(v) for v in rng.choice(np.arange(1, max_support + 1), size=k, replace=False))
    raw = [int(v) for v in rng.integers(1, 6, size=k)]
    return ProbMeasure({pt: _cast(Fraction(r, sum(raw)), mode) for pt, r in zip(pts, raw)}, mode)


def random_chain(rng, mode=ar.FLOAT, n_states=None, lo=0) -> chain.FiniteSkipFreeChain:
    """Skip-free chain with 4-12 states, random upward rates and positive killing."""
    n = int(n_states or rng.integers(4, 13))
    off = ar.zeros((n, n), mode)
    for i in range(n):
        if i > 0:
            off[i, i - 1] = _cast(_frac(rng, 2, 16, 8), mode)
        for j in range(i + 1, n):
            if rng.random() < 0.5:
                off[i, j] = _cast(_frac(rng, 1, 8, 8), mode)
    kill = ar.asarray([_cast(_frac(rng, 1, 8, 16), mode) for _ in range(n)], mode)
    return chain.FiniteSkipFreeChain.from_rates(lo, off, kill)


def random_cpp(rng, mode=ar.FLOAT, max_support=6, killed=None) -> cpp.CppParams:
    """``alpha`` in ``[1/2, 2]``, ``mu(0) >= 2/5``, ``p`` zero or at most ``alpha/4``.

    ``killed`` forces ``p > 0`` (True) or ``p = 0`` (False); by default
    a third of the draws are unkilled.
    """
    alpha = _frac(rng, 2, 8, 4)
    mu = random_measure(rng, mode, max_support)
    if killed is None:
        killed = rng.random() >= 1 / 3
    p = alpha * _frac(rng, 1, 5, 20) if killed else Fraction(0)
    return cpp.CppParams(_cast(alpha, mode), mu, _cast(p, mode))


def random_mbi(rng, mode=ar.FLOAT, max_support=4, q_range=(0, 10), beta_zero=0.1,
               p_zero=1 / 3, max_mean=None) -> mbi.MbiParams:
    """Random branching process with immigration.

    ``q`` is drawn from ``{q_range[0]/20, ..., q_range[1]/20}``; ``max_mean``
    caps the offspring mean by redrawing ``mu``.
    """
    alpha = _frac(rng, 2, 8, 4)
    while True:
        mu = random_measure(rng, mode, max_support)
        if max_mean is None or float(mu.mean()) <= max_mean:
            break
    p = Fraction(0) if rng.random() < p_zero else alpha * _frac(rng, 1, 5, 20)
    beta = Fraction(0) if rng.random() < beta_zero else _frac(rng, 1, 8, 4)
    q = _frac(rng, q_range[0], q_range[1], 20)
    return mbi.MbiParams(_cast(alpha, mode), mu, _cast(p, mode), _cast(beta, mode),
                         random_immigration(rng, mode), _cast(q, mode))


# -- deterministic oracle panel --------------------------------------------------------


def _exact(mode):
    return mode == ar.RATIONAL


def chain_rows(c, rng, tol=1e-10):
    """Closed-form identities on a finite chain against boundary-value solves."""
    mode = c.mode
    pot = chain.Potential(c)
    rows = [Row("resolvent_factorization", {"n": c.n}, pot.resolvent_identity_residual(),
                ar.zero(mode) if _exact(mode) else 0.0, tol=1e-9, exact=_exact(mode))]
    states = list(c.states)
    x, y = (int(v) for v in rng.choice(states, size=2))
    rows.append(Row("hit", {"x": x, "y": y}, pot.hit_prob(x, y), boundary.hit_prob(c, x, y),
                    tol=tol, exact=_exact(mode)))
    a, b = sorted(int(v) for v in rng.choice(states, size=2, replace=False))
    x = int(rng.integers(a, b))
    rows.append(Row("two_sided", {"x": x, "a": a, "b": b}, pot.two_sided_exit(x, a, b),
                    boundary.two_sided_exit(c, x, a, b), tol=tol, exact=_exact(mode)))
    one = (lambda z: ar.one(mode))
    rows.append(Row("exit_interval", {"x": x, "a": a, "b": b}, pot.dynkin_exit(one, a, b, x),
                    boundary.exit_expectation(c, one, a, b, x), tol=tol, exact=_exact(mode)))
    rows.append(Row("passage_up", {"x": a, "b": b}, pot.passage_up_prob(a, b),
                    boundary.passage_up_prob(c, a, b), tol=tol, exact=_exact(mode)))
    return rows


def cpp_rows(params, rng, tol=1e-10, K=500):
    mode = params.mode
    t = cpp.build_tables(params, K)
    rows = [Row("gf_identity", {"K": K}, cpp.gf_residual(t), 0.0, tol=tol)]
    a = int(rng.integers(-5, 5))
    b = a + int(rng.integers(2, 16))
    x = int(rng.integers(a, b))
    c = lumped.cpp_window(params, a, b)
    rows.append(Row("two_sided", {"x": x, "a": a, "b": b}, cpp.two_sided_exit_down(t, x, a, b),
                    boundary.two_sided_exit(c, x, a, b), tol=tol, exact=_exact(mode)))
    one = (lambda z: ar.one(mode))
    rows.append(Row("exit_interval", {"x": x, "a": a, "b": b}, cpp.exit_interval_prob(t, x, a, b),
                    boundary.exit_expectation(c, one, a, b, x), tol=tol, exact=_exact(mode)))
    return rows


def mbi_rows(params, rng, tol=1e-10, K=200):
    mode = params.mode
    t = mbi.build_tables(params, K)
    res = mbi.coefficient_residuals(t)
    rows = [Row("lemma_identities", {"K": K}, max(res.values()), 0.0, tol=tol)]
    a = int(rng.integers(0, 6))
    b = a + int(rng.integers(2, 16))
    x = int(rng.integers(a, b))
    c = lumped.mbi_window(params, a, b)
    rows.append(Row("two_sided", {"x": x, "a": a, "b": b}, mbi.two_sided_exit(t, x, a, b),
                    boundary.two_sided_exit(c, x, a, b), tol=tol, exact=_exact(mode)))
    one = (lambda z: ar.one(mode))
    rows.append(Row("exit_interval", {"x": x, "a": a, "b": b}, mbi.exit_interval_prob(t, x, a, b),
                    boundary.exit_expectation(c, one, a, b, x), tol=tol, exact=_exact(mode)))
    cb = lumped.mbi_below(params, b)
    rows.append(Row("passage_up", {"x": x, "b": b}, mbi.passage_up_prob(t, x, b),
                    boundary.passage_up_prob(cb, x, b), tol=tol, exact=_exact(mode)))
    return rows


def oracle_panel(seed=0, mode=ar.FLOAT, chains=20, cpps=20, mbis=20, tol=1e-10):
    """Closed forms against linear-algebra oracles on random instances of each family."""
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(chains):
        rows += chain_rows(random_chain(rng, mode), rng, tol)
    for _ in range(cpps):
        rows += cpp_rows(random_cpp(rng, mode), rng, tol)
    for _ in range(mbis):
        rows += mbi_rows(random_mbi(rng, mode, p_zero=0.5), rng, tol)
    return rows


# -- Monte Carlo identity panel ---------------------------------------------------------


@dataclass
class McCheck:
    """One closed-form value and the simulation that should reproduce it."""

    family: str
    kind: str
    args: dict
    closed_form: float
    model: object
    x0: int
    event: sim.Event
    weighting: tuple | None = None
    payoff: object = None
    extra: dict = field(default_factory=dict)

    def run(self, cfg: sim.SimConfig) -> Row:
        est = sim.estimate(self.model, self.x0, self.event, cfg, self.weighting, self.payoff)
        return Row(f"{self.family}:{self.kind}", self.args, float(self.closed_form), mc=est)


def _chain_checks(rng):
    c = random_chain(rng, n_states=int(rng.integers(4, 9)))
    pot = chain.Potential(c)
    n = c.n
    a = int(rng.integers(0, n - 2))
    b = int(rng.integers(a + 2, n))
    x = int(rng.integers(a + 1, b))
    hi = int(rng.integers(1, n))
    lo = int(rng.integers(0, hi))
    yield McCheck("chain", "two_sided", {"x": x, "a": a, "b": b}, pot.two_sided_exit(x, a, b),
                  c, x, sim.Event.two_sided(a, b))
    yield McCheck("chain", "exit_interval", {"x": x, "a": a, "b": b},
                  pot.dynkin_exit(lambda z: 1.0, a, b, x), c, x, sim.Event.exit(a, b))
    yield McCheck("chain", "hit_down", {"x": hi, "y": lo}, pot.hit_prob(hi, lo), c, hi, sim.Event.hit(lo))
    yield McCheck("chain", "hit_up", {"x": lo, "y": hi}, pot.hit_prob(lo, hi), c, lo, sim.Event.hit(hi))
    yield McCheck("chain", "passage_up", {"x": x, "b": b}, pot.passage_up_prob(x, b),
                  c, x, sim.Event.passage_up(b))
    yield McCheck("chain", "exit_position", {"x": x, "a": a, "b": b},
                  pot.dynkin_exit(lambda z: float(z), a, b, x), c, x, sim.Event.exit(a, b),
                  payoff=float)


def _cpp_checks(rng):
    params = random_cpp(rng, killed=True)
    t = cpp.build_tables(params, 64)
    a = int(rng.integers(-3, 3))
    b = a + int(rng.integers(2, 9))
    x = int(rng.integers(a, b))
    yield McCheck("cpp", "two_sided", {"x": x, "a": a, "b": b}, cpp.two_sided_exit_down(t, x, a, b),
                  params, x, sim.Event.two_sided(a, b))
    yield McCheck("cpp", "exit_interval", {"x": x, "a": a, "b": b}, cpp.exit_interval_prob(t, x, a, b),
                  params, x, sim.Event.exit(a, b))
    yield McCheck("cpp", "hit_down", {"x": b, "y": a}, cpp.hit_prob(t, b, a), params, b, sim.Event.hit(a))
    yield McCheck("cpp", "passage_up", {"x": a, "b": b}, cpp.passage_up_prob(t, a, b),
                  params, a, sim.Event.passage_up(b))
    # the same event under extra constant killing q, simulated as a weight e^{-qT}
    q = float(_frac(rng, 1, 10, 20))
    tq = cpp.build_tables(cpp.CppParams(params.alpha, params.mu, params.p + q), 64)
    yield McCheck("cpp", "two_sided_laplace", {"x": x, "a": a, "b": b, "q": q},
                  cpp.two_sided_exit_down(tq, x, a, b), params, x, sim.Event.two_sided(a, b),
                  weighting=(0.0, q))


def _mbi_checks(rng):
    params = random_mbi(rng, q_range=(4, 12), beta_zero=0.0, max_mean=1.25)
    t = mbi.build_tables(params, 64)
    a = int(rng.integers(0, 4))
    b = a + int(rng.integers(2, 9))
    x = int(rng.integers(a, b))
    yield McCheck("mbi", "two_sided", {"x": x, "a": a, "b": b}, mbi.two_sided_exit(t, x, a, b),
                  params, x, sim.Event.two_sided(a, b))
    yield McCheck("mbi", "exit_interval", {"x": x, "a": a, "b": b}, mbi.exit_interval_prob(t, x, a, b),
                  params, x, sim.Event.exit(a, b))
    yield McCheck("mbi", "passage_up", {"x": x, "b": b}, mbi.passage_up_prob(t, x, b),
                  params, x, sim.Event.passage_up(b))
    yield McCheck("mbi", "hit_down", {"x": b, "y": a}, mbi.hit_prob(t, b, a), params, b, sim.Event.hit(a))
    # killing moved into pathwise weights e^{-qT - p int X} of the unkilled process
    free = mbi.MbiParams(params.alpha, params.mu, 0.0, params.beta, params.nu, 0.0)
    yield McCheck("mbi", "two_sided_weighted", {"x": x, "a": a, "b": b},
                  mbi.two_sided_exit(t, x, a, b), free, x, sim.Event.two_sided(a, b),
                  weighting=(float(params.p), float(params.q)))


def mc_checks(seed=0, n_checks=100):
    """``n_checks`` closed-form values, cycling through the three families."""
    rng = np.random.default_rng(seed)
    out = []
    makers = (_chain_checks, _cpp_checks, _mbi_checks)
    i = 0
    while len(out) < n_checks:
        out.extend(makers[i % 3](rng))
        i += 1
    return out[:n_checks]


def check_seed(seed: int, i: int) -> int:
    """Independent simulation seed for check ``i`` of a panel."""
    return (seed + (i + 1) * GOLDEN) % (1 << 64)


def mc_panel(seed=0, n_checks=100, cfg: sim.SimConfig | None = None):
    """Simulate every check of :func:`mc_checks` with its own stream seed."""
    cfg = cfg or sim.SimConfig(seed=seed)
    return [check.run(replace(cfg, seed=check_seed(cfg.seed, i)))
            for i, check in enumerate(mc_checks(seed, n_checks))]
