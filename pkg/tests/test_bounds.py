import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from banditlab import bounds as bd


def _inputs(**kw):
    base = dict(d=6, L=1.0, S=1.0, sigma=1.0, reg=1.0, delta=0.01, gap=0.5, max_gap=2.0,
                lambda_hls=0.25)
    base.update(kw)
    return bd.BoundInputs(**base)


# reference values from a 30-digit mpmath evaluation of the same formulas
PULLS_T1E4 = 1477847.68519748299977575228185
TAU_B1 = 64081190413.7089068381910559024
TAU_B2 = 189331.57481466391008795620778
TAU_B1_FINAL = 16020297603.4272267095477639756
REGRET_INF = 738923.842598741499887876140927
REGRET_TAU5000_M6 = 723279.689532840670501057557495
BETA_T1E4 = 8.32972203011238724527051726281


class TestSuboptimalPulls:
    def test_reference_value(self):
        np.testing.assert_allclose(bd.suboptimal_pulls_bound(_inputs(), 1e4), PULLS_T1E4,
                                   rtol=1e-12)

    def test_delta_one_drops_confidence_term(self):
        d, t = 4, 100.0
        p = _inputs(d=d, delta=1.0, gap=1.0, max_gap=1.0)
        expect = 32 * (d * math.log(1 + t / d)) ** 2
        np.testing.assert_allclose(bd.suboptimal_pulls_bound(p, t), expect, rtol=1e-14)

    def test_monotone_in_t(self):
        p = _inputs()
        vals = [bd.suboptimal_pulls_bound(p, t) for t in (1, 2, 4, 8, 1e3, 1e6)]
        assert np.all(np.diff(vals) > 0)

    def test_zero_gap_rejected(self):
        with pytest.raises(ValueError):
            bd.suboptimal_pulls_bound(_inputs(gap=0.0), 10)

    def test_t_below_one_rejected(self):
        with pytest.raises(ValueError):
            bd.suboptimal_pulls_bound(_inputs(), 0.5)


class TestTau:
    def test_branches_match_reference(self):
        b1, b2, clamped = bd.tau_hls_terms(_inputs())
        assert not clamped
        np.testing.assert_allclose(b1, TAU_B1, rtol=1e-12)
        np.testing.assert_allclose(b2, TAU_B2, rtol=1e-12)
        np.testing.assert_allclose(bd.tau_hls(_inputs()), TAU_B1, rtol=1e-12)

    def test_final_display_variant(self):
        b1, _, _ = bd.tau_hls_terms(_inputs(), final_display=True)
        np.testing.assert_allclose(b1, TAU_B1_FINAL, rtol=1e-12)
        # the variants differ by exactly one power of lambda_hls
        np.testing.assert_allclose(TAU_B1_FINAL / TAU_B1, 0.25, rtol=1e-12)

    @pytest.mark.parametrize("lam", [0.0, -1e-3])
    def test_non_hls_is_infinite(self, lam):
        assert bd.tau_hls(_inputs(lambda_hls=lam)) == math.inf

    def test_decreasing_in_lambda(self):
        lams = [1e-6, 1e-4, 1e-2, 0.1, 0.5]
        taus = [bd.tau_hls(_inputs(lambda_hls=x)) for x in lams]
        assert np.all(np.diff(taus) < 0)

    def test_halving_gap_quadruples_first_branch(self):
        b_full, _, _ = bd.tau_hls_terms(_inputs(gap=0.5))
        b_half, _, _ = bd.tau_hls_terms(_inputs(gap=0.25))
        assert b_half >= 4 * b_full

    def test_small_log_argument_is_clamped_and_flagged(self):
        p = _inputs(d=1, lambda_hls=1e6, gap=1e6, delta=1.0)
        _, _, clamped = bd.tau_hls_terms(p)
        assert clamped
        with pytest.warns(RuntimeWarning, match="clamped"):
            bd.tau_hls(p)

    def test_independent_plug_in(self):
        p = _inputs(d=6, L=3.7, S=1.0, sigma=1.0, reg=1.0, delta=0.01, gap=0.14,
                    max_gap=2.2, lambda_hls=0.0279)
        lh, sr = p.lambda_hls, math.sqrt(p.reg)
        first = (384 * p.d * p.L * p.S * p.sigma * sr / (lh * p.gap)
                 * math.log(64 * p.d ** 2 * p.L ** 3 * p.sigma * p.S * sr
                            / (math.sqrt(lh) * p.gap * p.delta))) ** 2
        second = 768 * p.L ** 4 / lh ** 2 * math.log(512 * p.d * p.L ** 4 / (p.delta * lh ** 2))
        np.testing.assert_allclose(bd.tau_hls(p), max(first, second), rtol=1e-12)


class TestRegretBound:
    def test_reference_values(self):
        p = _inputs()
        np.testing.assert_allclose(bd.regret_bound(p, 1e4), REGRET_INF, rtol=1e-12)
        np.testing.assert_allclose(bd.regret_bound(p, 1e4, tau=5000, m_reps=6),
                                   REGRET_TAU5000_M6, rtol=1e-12)

    def test_horizon_below_tau_ignores_tau(self):
        p = _inputs()
        assert bd.regret_bound(p, 100, tau=1e9) == bd.regret_bound(p, 100)

    def test_log_squared_growth_without_tau(self):
        p = _inputs(delta=1.0, gap=1.0, max_gap=1.0, d=1)
        n = 1e12
        expect = 32 * math.log(1 + n) ** 2
        np.testing.assert_allclose(bd.regret_bound(p, n), expect, rtol=1e-12)

    def test_m_equal_e_adds_two_inside_square(self):
        p = _inputs()
        scale = 32 * 4 / 0.5  # reg * max_gap^2 * S^2 * sigma^2 / gap
        inner = math.sqrt(bd.regret_bound(p, 1e4, m_reps=1) / scale)
        np.testing.assert_allclose(bd.regret_bound(p, 1e4, m_reps=math.e),
                                   scale * (inner + 2) ** 2, rtol=1e-12)

    def test_pulls_times_gap_below_regret(self):
        p = _inputs(max_gap=1.0, gap=0.5)
        n = 1e4
        assert bd.suboptimal_pulls_bound(p, n) * p.gap <= bd.regret_bound(p, n) * (1 + 1e-12)

    @pytest.mark.parametrize("kw", [dict(n=0.5), dict(n=10, m_reps=0)])
    def test_bad_arguments(self, kw):
        with pytest.raises(ValueError):
            bd.regret_bound(_inputs(), **kw)

    @settings(max_examples=60, deadline=None)
    @given(n1=st.floats(1, 1e8), n2=st.floats(1, 1e8), tau=st.floats(1, 1e8))
    def test_nondecreasing_and_flat_after_tau(self, n1, n2, tau):
        p = _inputs()
        lo, hi = sorted((n1, n2))
        assert bd.regret_bound(p, lo, tau) <= bd.regret_bound(p, hi, tau)
        if lo >= tau:
            assert bd.regret_bound(p, lo, tau) == bd.regret_bound(p, hi, tau)


class TestInputs:
    def test_small_constants_clamped_with_warning(self):
        with pytest.warns(RuntimeWarning, match="sigma"):
            p = _inputs(sigma=0.3, S=0.5)
        assert p.sigma == 1.0 and p.S == 1.0

    def test_no_warning_for_valid_inputs(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            _inputs()

    @pytest.mark.parametrize("kw", [dict(d=0), dict(delta=0.0), dict(delta=1.5), dict(L=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            _inputs(**kw)

    def test_beta_bound_reference(self):
        np.testing.assert_allclose(bd.beta_bound(_inputs(), 1e4), BETA_T1E4, rtol=1e-12)

    def test_envelope_takes_best_rep(self):
        good = _inputs(lambda_hls=0.25)
        bad = _inputs(lambda_hls=0.0)
        env = bd.leader_regret_envelope([good, bad], 1e13)
        assert env < bd.regret_bound(bad, 1e13, m_reps=2)
        with pytest.raises(ValueError):
            bd.leader_regret_envelope([], 10)
