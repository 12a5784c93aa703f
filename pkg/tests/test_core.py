import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from banditlab import core
from banditlab.catalog import THETA, separating_example
from banditlab.core import (ContextualProblem, FiniteRepresentation, HalfDiscContexts,
                            UnsupportedOperation)
from banditlab.repgen import preset_representation_set, random_problem


def _finite(mu, rho=None, reps=(), sigma=0.0):
    mu = np.asarray(mu, float)
    rho = np.full(mu.shape[0], 1.0 / mu.shape[0]) if rho is None else rho
    return ContextualProblem(noise_sigma=sigma, rho=rho, reward_table=mu, representations=reps)


class TestFiniteRepresentation:
    def test_bounds_inferred(self):
        rep = FiniteRepresentation.from_arrays(np.array([[[3.0, 4.0]]]), [0.1, 0.2])
        assert rep.feature_bound == 5.0
        assert rep.param_bound == 1.0
        assert rep.realizable and rep.misspec_level == 0.0

    def test_feature_bound_enforced(self):
        with pytest.raises(ValueError, match="exceeds"):
            FiniteRepresentation(np.ones((1, 1, 2)), [1.0, 0.0], 1.0, 1.0)

    def test_param_bound_enforced(self):
        with pytest.raises(ValueError):
            FiniteRepresentation(np.ones((1, 1, 2)), [3.0, 0.0], 2.0, 1.0)
        with pytest.raises(ValueError):
            FiniteRepresentation(np.ones((1, 1, 2)), [0.1, 0.0], 2.0, 0.5)

    def test_shape_checks(self):
        with pytest.raises(ValueError):
            FiniteRepresentation(np.ones((2, 2)), [1.0, 1.0], 2.0, 2.0)
        with pytest.raises(ValueError):
            FiniteRepresentation(np.ones((1, 2, 2)), [1.0], 2.0, 2.0)
        with pytest.raises(ValueError):
            FiniteRepresentation(np.ones((1, 2, 2)), [1.0, 0.0], 2.0, 1.0,
                                 misspec=np.zeros((2, 2)))

    def test_arrays_are_read_only(self):
        rep = FiniteRepresentation.from_arrays(np.ones((2, 2, 2)), [0.5, 0.5])
        with pytest.raises(ValueError):
            rep.features[0, 0, 0] = 3.0

    def test_misspec_adds_to_prediction(self):
        f = np.array([[0.5, -0.25]])
        rep = FiniteRepresentation.from_arrays(np.ones((1, 2, 1)), [1.0], misspec=f)
        np.testing.assert_array_equal(rep.predicted_rewards(), [[1.5, 0.75]])
        assert not rep.realizable
        assert rep.misspec_level == 0.5


class TestProblem:
    def test_rho_must_be_distribution(self):
        with pytest.raises(ValueError):
            _finite([[1, 0]], rho=[0.5])
        with pytest.raises(ValueError):
            _finite([[1, 0], [0, 1]], rho=[0.7, 0.7])
        with pytest.raises(ValueError):
            _finite([[1, 0], [0, 1]], rho=[1.5, -0.5])

    def test_realizability_enforced(self):
        rep = FiniteRepresentation.from_arrays(np.array([[[1.0], [0.0]]]), [1.0])
        _finite([[1.0, 0.0]], reps=[rep])
        with pytest.raises(ValueError, match="reproduce"):
            _finite([[1.0, 1e-6]], reps=[rep])

    def test_realizability_tolerance(self):
        rep = FiniteRepresentation.from_arrays(np.array([[[1.0], [0.0]]]), [1.0])
        _finite([[1.0 + 5e-10, 0.0]], reps=[rep])

    def test_continuous_properties(self):
        prob, _ = preset_representation_set("continuous")
        assert not prob.is_finite and prob.n_arms == 4
        with pytest.raises(UnsupportedOperation):
            prob.n_contexts

    def test_support_skips_zero_mass(self):
        prob = _finite([[1, 0], [0, 1], [1, 1]], rho=[0.5, 0.0, 0.5])
        np.testing.assert_array_equal(prob.support, [0, 2])


class TestReward:
    def test_cmb_example_value(self):
        prob = separating_example("cmb_not_hls")
        assert core.reward(prob, 0, 0, 0) == 2.0

    def test_zero_parameter(self):
        rep = FiniteRepresentation.from_arrays(np.ones((2, 3, 2)), [0.0, 0.0])
        prob = _finite(np.zeros((2, 3)), reps=[rep])
        assert all(core.reward(prob, 0, x, a) == 0.0 for x in range(2) for a in range(3))

    def test_matches_naive_dot_product(self):
        rng = np.random.default_rng(7)
        feats = rng.normal(size=(5, 4, 3))
        theta = rng.uniform(-1, 1, size=3)
        f = rng.normal(scale=0.1, size=(5, 4))
        rep = FiniteRepresentation.from_arrays(feats, theta, misspec=f)
        mu = np.array([[sum(feats[x, a, i] * theta[i] for i in range(3)) + f[x, a]
                        for a in range(4)] for x in range(5)])
        prob = _finite(mu, reps=[rep])
        pairs = rng.integers(0, [5, 4], size=(20, 2))
        got = [core.reward(prob, 0, x, a) for x, a in pairs]
        np.testing.assert_allclose(got, mu[pairs[:, 0], pairs[:, 1]], atol=1e-12)

    @pytest.mark.parametrize("args", [(1, 0, 0), (0, 2, 0), (0, 0, 5), (-1, 0, 0)])
    def test_index_errors(self, args):
        prob = separating_example("cmb_not_hls")
        with pytest.raises(IndexError):
            core.reward(prob, *args)

    def test_continuous_reward(self):
        prob, _ = preset_representation_set("continuous")
        x = np.array([-0.3, -0.4])
        for k in range(2):
            np.testing.assert_allclose(
                [core.reward(prob, k, x, a) for a in range(4)],
                prob.sampler.reward(x), atol=1e-12)


class TestSampling:
    def test_noiseless_reward_is_mean(self):
        prob = separating_example("hls_not_cmb", sigma=0.0)
        rng = np.random.default_rng(0)
        for _ in range(10):
            x, pull = core.sample_round(prob, rng)
            assert pull(1) == prob.reward_table[x, 1]

    def test_point_mass(self):
        prob = _finite(np.eye(3), rho=[1.0, 0.0, 0.0])
        rng = np.random.default_rng(1)
        assert np.all(core.sample_contexts(prob, rng, 1000) == 0)

    def test_uniform_frequencies(self):
        prob = _finite(np.zeros((20, 2)))
        n = 100_000
        x = core.sample_contexts(prob, np.random.default_rng(2), n)
        freq = np.bincount(x, minlength=20) / n
        sd = np.sqrt(0.05 * 0.95 / n)
        assert np.all(np.abs(freq - 0.05) <= 3 * sd)

    def test_seed_reproducible(self):
        prob = separating_example("bbk_not_hls", sigma=0.5)
        draws = []
        for _ in range(2):
            rng = np.random.default_rng(11)
            x, pull = core.sample_round(prob, rng)
            draws.append((x, pull(0), pull(1)))
        assert draws[0] == draws[1]

    def test_bad_arm(self):
        prob = separating_example("bbk_not_hls", sigma=0.5)
        _, pull = core.sample_round(prob, np.random.default_rng(0))
        with pytest.raises(IndexError):
            pull(2)

    def test_half_disc_support(self):
        x = HalfDiscContexts().sample(np.random.default_rng(3), 5000)
        assert x.shape == (5000, 2)
        assert np.all(x[:, 1] <= 0) and np.all(np.linalg.norm(x, axis=1) <= 1)
        # area-uniform: P(r <= 1/2) = 1/4
        frac = np.mean(np.linalg.norm(x, axis=1) <= 0.5)
        assert abs(frac - 0.25) < 3 * np.sqrt(0.25 * 0.75 / 5000)


class TestGapProfile:
    def test_two_by_two(self):
        prof = core.gap_profile(_finite([[2, 1], [1, 2]]))
        assert prof.min_gap == 1.0 and prof.max_gap == 1.0
        np.testing.assert_array_equal(prof.optimal_arm, [0, 1])
        assert not prof.tie_flags.any()

    def test_all_equal(self):
        prof = core.gap_profile(_finite(np.ones((3, 4))))
        assert prof.min_gap == 0.0
        assert prof.tie_flags.all()
        np.testing.assert_array_equal(prof.optimal_arm, [0, 0, 0])

    def test_zero_mass_context_ignored(self):
        prof = core.gap_profile(_finite([[1, 1], [3, 1]], rho=[0.0, 1.0]))
        assert prof.min_gap == 2.0

    def test_continuous_unsupported(self):
        prob, _ = preset_representation_set("continuous")
        with pytest.raises(UnsupportedOperation):
            core.gap_profile(prob)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_problem_unique_optima(self, seed):
        prob, _ = random_problem(20, 5, 6, np.random.default_rng(seed))
        prof = core.gap_profile(prob)
        brute = min(prob.reward_table[x].max() - prob.reward_table[x, a]
                    for x in range(20) for a in range(5)
                    if prob.reward_table[x, a] < prob.reward_table[x].max())
        assert prof.min_gap > 0 and not prof.tie_flags.any()
        assert prof.min_gap == brute

    def test_invariant_under_equivalent_representation(self):
        prob, reps = preset_representation_set("fig1")
        a = core.gap_profile(prob)
        b = core.gap_profile(prob.with_representations(reps[:1]))
        np.testing.assert_array_equal(a.gaps, b.gaps)

    @settings(max_examples=50, deadline=None)
    @given(hnp.arrays(float, hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=6),
                      elements=st.integers(-3, 3).map(float)))
    def test_optimal_arm_has_zero_gap(self, mu):
        prof = core.gap_profile(_finite(mu))
        rows = np.arange(mu.shape[0])
        np.testing.assert_array_equal(prof.gaps[rows, prof.optimal_arm], 0.0)
        assert (prof.min_gap > 0) == (not prof.tie_flags.any())


class TestSerialization:
    @pytest.mark.parametrize("name", ["fig1", "misspec_toy", "continuous"])
    def test_round_trip_is_lossless(self, name, tmp_path):
        prob, _ = preset_representation_set(name)
        path = core.save_problem(prob, tmp_path / "p.json")
        back = core.load_problem(path)
        assert core.problem_to_dict(back) == core.problem_to_dict(prob)
        for r0, r1 in zip(prob.representations, back.representations):
            np.testing.assert_array_equal(r0.param, r1.param)
            if hasattr(r0, "features"):
                np.testing.assert_array_equal(r0.features, r1.features)

    def test_format_header(self, tmp_path):
        prob = separating_example("cmb_not_hls")
        d = json.loads(core.save_problem(prob, tmp_path / "p.json").read_text())
        assert d["format"] == "banditlab-problem" and d["version"] == 1
        assert d["representations"][0]["features"]["shape"] == [2, 2, 2]

    def test_rejects_other_files(self):
        with pytest.raises(ValueError):
            core.problem_from_dict({"format": "other"})
        d = core.problem_to_dict(separating_example("cmb_not_hls"))
        d["version"] = 99
        with pytest.raises(ValueError):
            core.problem_from_dict(d)

    def test_theta_of_catalog(self):
        np.testing.assert_array_equal(separating_example("bbk_hls_wys").representations[0].param,
                                      THETA)
