import math

import numpy as np
import pytest

from skipfree import _arith as ar
from skipfree import _kernels_py, mbi
from skipfree import simulate as sim
from skipfree._backend import COMPILED
from skipfree.chain import FiniteSkipFreeChain
from skipfree.cpp import CppParams
from skipfree.errors import ConfigError, ExcessiveCapping, ModelError
from skipfree.mbi import MbiParams
from skipfree.measures import ProbMeasure
from skipfree.simulate import engine

SYMMETRIC = CppParams(1.0, ProbMeasure({0: 0.5, 2: 0.5}), 0.0)
KILLED = MbiParams(1.0, ProbMeasure({0: 0.5, 2: 0.3, 3: 0.2}), p=0.2, beta=0.8,
                   nu=ProbMeasure({1: 0.5, 3: 0.5}), q=0.1)
CHAIN = FiniteSkipFreeChain(0, 2, np.array([[-2.0, 1.0, 0.0], [1.0, -3.0, 1.5], [0.5, 1.0, -2.0]]),
                            np.array([1.0, 0.5, 0.5]))


class TestConfig:
    def test_defaults_and_json(self):
        cfg = sim.SimConfig.from_json({"seed": 5, "n_paths": 10, "max_time": 2.5})
        assert cfg.seed == 5 and cfg.n_paths == 10 and cfg.workers == 1
        assert sim.SimConfig().to_json()["max_time"] == "inf"

    @pytest.mark.parametrize("bad", [{"n_paths": 0}, {"seed": -1}, {"paths": 3}, {"max_time": "x"}])
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            sim.SimConfig.from_json(bad)

    def test_events(self):
        with pytest.raises(ModelError):
            sim.Event.two_sided(3, 3)
        with pytest.raises(ModelError):
            sim.Event.hit(2, floor=2)
        with pytest.raises(ModelError):
            sim.Event("wander")


class TestBackends:
    @pytest.mark.skipif(not COMPILED, reason="compiled kernels not built")
    @pytest.mark.parametrize("model,event,x0", [
        (SYMMETRIC, sim.Event.two_sided(0, 6), 2),
        (KILLED, sim.Event.exit(1, 8), 3),
        (KILLED, sim.Event.passage_up(9), 0),
        (CHAIN, sim.Event.hit(0), 2),
    ])
    def test_bit_identical(self, monkeypatch, model, event, x0):
        cfg = sim.SimConfig(seed=99, n_paths=500, max_jumps=10_000)
        compiled = engine._run(model, x0, event, cfg, 0, cfg.n_paths, (0.1, 0.2))
        monkeypatch.setattr(engine, "kernels", _kernels_py)
        python = engine._run(model, x0, event, cfg, 0, cfg.n_paths, (0.1, 0.2))
        for a, b in zip(compiled, python):
            assert np.array_equal(a, b)

    @pytest.mark.skipif(not COMPILED, reason="compiled kernels not built")
    def test_sequences_match(self, monkeypatch):
        fast = mbi.lemma_sequences(KILLED, 600)
        monkeypatch.setattr(mbi, "kernels", _kernels_py)
        slow = mbi.lemma_sequences(KILLED, 600)
        for name in ("dW", "W", "kappa"):
            assert np.array_equal(fast[name], slow[name])
        # the recursion kernel sums in a different order on each backend
        assert np.allclose(fast["pi"], slow["pi"], rtol=1e-13, atol=0)
        assert np.all(np.abs(fast["varpi"] - slow["varpi"]) <= 1e-12 * fast["pi"])

    def test_stream_is_counter_based(self):
        a = _kernels_py._Stream(7, 3)
        b = _kernels_py._Stream(7, 3)
        assert [a.uniform() for _ in range(5)] == [b.uniform() for _ in range(5)]
        assert 0 < _kernels_py._Stream(0, 0).uniform() < 1


class TestEstimates:
    def test_workers_do_not_change_results(self):
        ev = sim.Event.exit(1, 8)
        one = sim.estimate(KILLED, 3, ev, sim.SimConfig(seed=4, n_paths=20_000))
        four = sim.estimate(KILLED, 3, ev, sim.SimConfig(seed=4, n_paths=20_000, workers=4))
        assert one == four

    def test_gamblers_ruin(self):
        est = sim.estimate(SYMMETRIC, 1, sim.Event.two_sided(0, 4), sim.SimConfig(seed=1, n_paths=40_000))
        assert est.within(0.75)
        assert est.std_err == pytest.approx(math.sqrt(0.75 * 0.25 / 40_000), rel=0.05)

    def test_start_on_boundary(self):
        out = sim.sample_path(SYMMETRIC, 0, sim.Event.two_sided(0, 4), sim.SimConfig())
        assert out.terminal == "HitTargetA" and out.hit_time == 0 and out.jumps_used == 0

    def test_certain_event(self):
        est = sim.estimate(SYMMETRIC, 5, sim.Event.exit(0, 10), sim.SimConfig(n_paths=2000))
        assert est.p_hat == 1.0 and est.std_err == 0.0

    def test_weighting_discounts(self):
        ev = sim.Event.two_sided(0, 4)
        cfg = sim.SimConfig(seed=2, n_paths=5000)
        plain = sim.estimate(SYMMETRIC, 2, ev, cfg)
        weighted = sim.estimate(SYMMETRIC, 2, ev, cfg, weighting=(0.0, 0.5))
        assert weighted.p_hat < plain.p_hat

    def test_excessive_capping(self):
        with pytest.raises(ExcessiveCapping):
            sim.estimate(SYMMETRIC, 50, sim.Event.two_sided(0, 100), sim.SimConfig(n_paths=200, max_jumps=5))

    def test_time_limit(self):
        zero = MbiParams(1.0, ProbMeasure({0: 0.5, 2: 0.5}))
        out = sim.sample_path(zero, 3, sim.Event.passage_up(1000), sim.SimConfig(max_time=1e-9))
        assert out.terminal in ("TimedOut", "HitTargetA")

    def test_killing_in_chain(self):
        out = sim.estimate(CHAIN, 1, sim.Event.exit(0, 2), sim.SimConfig(seed=3, n_paths=2000))
        assert 0 < out.p_hat < 1

    def test_outside_state_space(self):
        with pytest.raises(ModelError):
            sim.estimate(CHAIN, 7, sim.Event.hit(0), sim.SimConfig(n_paths=10))

    def test_payoff(self):
        est = sim.estimate(SYMMETRIC, 1, sim.Event.exit(0, 4), sim.SimConfig(seed=8, n_paths=20_000),
                           payoff=lambda z: float(z))
        # the walk is a martingale that exits at 0 or exactly at 4
        assert est.within(1.0)
