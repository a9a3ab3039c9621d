import numpy as np
import pytest

from skipfree import _arith as ar
from skipfree import boundary, chain, cpp, lumped
from skipfree.cpp import CppParams
from skipfree.errors import ConfigError, ModelError, RecurrentChain
from skipfree.measures import ProbMeasure

R = ar.Rational


def params(mu, p=0, alpha=1, mode=ar.RATIONAL):
    conv = R if mode == ar.RATIONAL else float
    measure = ProbMeasure({k: conv(v) for k, v in mu.items()}, mode)
    return CppParams(conv(alpha), measure, conv(p))


SYMMETRIC = {0: R(1, 2), 2: R(1, 2)}
UP = {0: R(1, 4), 2: R(3, 4)}
DOWN = {0: R(3, 4), 2: R(1, 4)}


class TestParams:
    def test_needs_down_step(self):
        with pytest.raises(ModelError):
            params({2: 1})

    def test_no_null_jump(self):
        with pytest.raises(ModelError):
            params({0: R(1, 2), 1: R(1, 2)})

    def test_negative_killing(self):
        with pytest.raises(ModelError):
            params(SYMMETRIC, p=-1)

    def test_from_json(self):
        p = CppParams.from_json({"alpha": 2, "mu": {"0": "1/2", "2": "1/2"}}, ar.RATIONAL)
        assert p.alpha == 2 and p.p == 0 and p.m == 1
        with pytest.raises(ConfigError):
            CppParams.from_json({"mu": {"0": 1}})
        with pytest.raises(ConfigError):
            CppParams.from_json({"alpha": 0, "mu": {"0": 1}})


class TestPsi:
    def test_values(self):
        sym = params(SYMMETRIC)
        assert cpp.psi_eval(sym, R(0)) == R(1, 2)
        assert cpp.psi_eval(sym, R(1)) == 0
        assert cpp.psi_eval(sym, R(1, 2)) == R(1, 8)
        assert cpp.psi_eval(params(SYMMETRIC, p=R(1, 10)), R(1)) == R(-1, 10)

    def test_s0(self):
        assert cpp.find_s0(params(SYMMETRIC)) == (1, 0)
        assert cpp.find_s0(params(UP)) == (R(1, 3), R(-1, 2))
        assert cpp.find_s0(params(DOWN)) == (1, R(-1, 2))
        s0, d0 = cpp.find_s0(params(SYMMETRIC, p=R(1, 10), mode=ar.FLOAT))
        assert abs(cpp.psi_eval(params(SYMMETRIC, p=0.1, mode=ar.FLOAT), s0)) < 1e-15
        assert 0 < s0 < 1 and d0 < 0

    def test_classify(self):
        assert cpp.classify(params(SYMMETRIC)) == cpp.RECURRENT_CRITICAL
        assert cpp.classify(params(UP)) == cpp.TRANSIENT_DRIFT
        assert cpp.classify(params(SYMMETRIC, p=1)) == cpp.TRANSIENT_KILLED


class TestScale:
    def test_symmetric(self):
        W = cpp.build_tables(params(SYMMETRIC), 20).W
        assert list(W) == [2 * (k + 1) for k in range(21)]

    def test_one_step(self):
        W = cpp.build_tables(params(UP), 3).W
        assert W[0] == 4 and W[1] == 16

    def test_ensure_extends_consistently(self):
        t = cpp.build_tables(params(UP, p=R(1, 5)), 10)
        grown = t.ensure(50)
        assert t.horizon == 10 and grown.horizon >= 50
        assert list(grown.W[:11]) == list(t.W)
        assert list(grown.W[:51]) == list(cpp.build_tables(t.params, 50).W)

    def test_gf_residual(self):
        assert cpp.gf_residual(cpp.build_tables(params(UP, p=R(1, 7)), 60)) == 0
        ft = cpp.build_tables(params(UP, p=R(1, 7), mode=ar.FLOAT), 60)
        assert cpp.gf_residual(ft) < 1e-12

    def test_horizon_guard(self):
        with pytest.raises(ModelError):
            cpp.build_tables(params(UP), 3).w(4)


class TestIdentities:
    def test_resolvent(self):
        t = cpp.build_tables(params(UP), 10)
        assert cpp.resolvent_G(t, 0, 0) == 2
        assert cpp.resolvent_G(t, 0, 1) == 2
        with pytest.raises(RecurrentChain):
            cpp.resolvent_G(cpp.build_tables(params(SYMMETRIC)), 0, 0)

    def test_hit(self):
        t = cpp.build_tables(params(UP), 10)
        assert cpp.hit_prob(t, 3, 3) == 1
        assert cpp.hit_prob(t, 1, 0) == R(1, 3)
        assert cpp.hit_prob(t, 5, 0) == R(1, 3) ** 5

    def test_gamblers_ruin(self):
        t = cpp.build_tables(params(SYMMETRIC), 10)
        assert cpp.two_sided_exit_down(t, 1, 0, 4) == R(3, 4)
        assert cpp.exit_interval_prob(t, 1, 0, 4) == 1
        with pytest.raises(ModelError):
            cpp.two_sided_exit_down(t, 4, 0, 4)

    def test_passage_up(self):
        t = cpp.build_tables(params(DOWN), 10)
        assert t.W[0] == R(4, 3)
        assert cpp.passage_up_prob(t, 0, 1) == R(1, 3)
        assert cpp.passage_up_prob(t, 2, 1) == 1
        assert cpp.passage_up_prob(cpp.build_tables(params(SYMMETRIC)), 0, 5) == 1

    def test_spatial_homogeneity(self):
        t = cpp.build_tables(params(UP, p=R(1, 3)), 30)
        for shift in (-7, 0, 11):
            assert cpp.two_sided_exit_down(t, 2 + shift, shift, 6 + shift) == cpp.two_sided_exit_down(t, 2, 0, 6)
            assert cpp.hit_prob(t, 3 + shift, shift) == cpp.hit_prob(t, 3, 0)

    @pytest.mark.parametrize("mu,p", [(SYMMETRIC, R(1, 10)), (UP, 0), (DOWN, R(1, 2)),
                                      ({0: R(1, 3), 2: R(1, 3), 4: R(1, 3)}, R(1, 4))])
    def test_against_lumped_window(self, mu, p):
        par = params(mu, p=p)
        t = cpp.build_tables(par, 20)
        a, b = 0, 6
        pot = chain.Potential(lumped.cpp_window(par, a, b))
        for x in range(a, b):
            assert cpp.two_sided_exit_down(t, x, a, b) == pot.two_sided_exit(x, a, b)
            assert cpp.exit_interval_prob(t, x, a, b) == pot.dynkin_exit(lambda z: R(1), a, b, x)

    @pytest.mark.parametrize("mu,p", [({0: 0.25, 2: 0.75}, 0.1), ({0: 0.5, 3: 0.5}, 0.3),
                                      ({0: 0.3, 2: 0.3, 5: 0.4}, 0.02)])
    def test_wide_windows_stay_accurate(self, mu, p):
        # W grows like s0^-n here; the identities must not subtract such terms in float
        par = params(mu, p=p, mode=ar.FLOAT)
        t = cpp.build_tables(par, 100)
        for x, b in [(0, 30), (-20, 40)]:
            c = lumped.cpp_below(par, x - 300, b)
            assert abs(cpp.passage_up_prob(t, x, b) - boundary.passage_up_prob(c, x, b)) < 1e-12
        c = lumped.cpp_window(par, 0, 40)
        for x in range(40):
            want = boundary.exit_expectation(c, np.ones(c.n), 0, 40, x)
            assert abs(cpp.exit_interval_prob(t, x, 0, 40) - want) < 1e-12

    def test_upward_hits_in_float(self):
        par = params({0: 0.25, 2: 0.75}, p=0.1, mode=ar.FLOAT)
        t = cpp.build_tables(par, 100)
        c = lumped.cpp_below(par, -300, 41)
        for x in (0, 10, 39):
            assert abs(cpp.hit_prob(t, x, 40) - boundary.hit_prob(c, x, 40)) < 1e-12
            assert cpp.resolvent_G(t, x, 40) == pytest.approx(-cpp.hit_prob(t, x, 40) / t.psi_prime_s0)

    def test_float_matches_rational(self):
        exact = cpp.build_tables(params(UP, p=R(1, 10)), 40)
        approx = cpp.build_tables(params(UP, p=R(1, 10), mode=ar.FLOAT), 40)
        for x in range(0, 10):
            for b in (x + 1, x + 5, 30):
                assert abs(float(cpp.passage_up_prob(exact, x, b)) - cpp.passage_up_prob(approx, x, b)) < 1e-12
                assert abs(float(cpp.hit_prob(exact, x, b)) - cpp.hit_prob(approx, x, b)) < 1e-12
