import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import precaution as pc
from instances import random_garbling, random_joint


def model_from(joint, states=None):
    joint = np.asarray(joint, dtype=float)
    states = list(range(joint.shape[1])) if states is None else states
    return pc.JointSignalModel(joint, pc.StateSpace(states))


class TestDist:
    def test_valid(self):
        d = pc.Dist([0.25, 0.75])
        assert d.m == 2

    def test_negative_entry_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            pc.Dist([-0.1, 1.1])

    def test_normalization_rejected(self):
        with pytest.raises(ValueError, match="sum"):
            pc.Dist([0.5, 0.6])

    def test_states_strictly_increasing(self):
        with pytest.raises(ValueError):
            pc.StateSpace([1.0, 1.0])


class TestPosterior:
    def test_direct_bayes(self):
        m = model_from([[0.4, 0.1], [0.1, 0.4]])
        assert np.allclose(pc.posterior(m, 0).probs, [0.8, 0.2])

    def test_perfect_signal_point_mass(self):
        m = model_from([[0.5, 0.0], [0.0, 0.5]])
        assert np.allclose(pc.posterior(m, 0).probs, [1.0, 0.0])

    def test_independent_signal_returns_prior(self):
        m = model_from([[0.25, 0.25], [0.25, 0.25]])
        assert np.allclose(pc.posterior(m, 1).probs, [0.5, 0.5])

    def test_zero_marginal_is_error(self):
        m = model_from([[0.5, 0.5], [0.0, 0.0]])
        with pytest.raises(pc.ZeroMarginal):
            pc.posterior(m, 1)


class TestPriorOf:
    def test_column_sums(self):
        assert np.allclose(pc.prior_of(model_from([[0.4, 0.1], [0.1, 0.4]])).probs, [0.5, 0.5])

    def test_degenerate_one_signal(self):
        assert np.allclose(pc.prior_of(model_from([[1.0, 0.0]])).probs, [1.0, 0.0])

    def test_asymmetric(self):
        assert np.allclose(pc.prior_of(model_from([[0.2, 0.3], [0.1, 0.4]])).probs, [0.3, 0.7])

    def test_matches_posterior_average(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            m = random_joint(rng, int(rng.integers(2, 6)), int(rng.integers(1, 6)))
            nu = m.marginals
            mix = sum(nu[j] * pc.posterior(m, j).probs for j in range(m.n) if nu[j] > 0)
            assert np.allclose(pc.prior_of(m).probs, mix, atol=1e-12)


class TestGarble:
    def test_identity(self):
        m = model_from([[0.4, 0.1], [0.1, 0.4]])
        g = pc.garble(m, pc.Garbling((0, 1)))
        assert np.allclose(g.joint, m.joint)

    def test_all_to_one_is_no_info(self):
        m = model_from([[0.4, 0.1], [0.1, 0.4]])
        g = pc.garble(m, pc.Garbling((0, 0)))
        assert np.allclose(g.joint, pc.no_info(m).joint)

    def test_zero_row_absorption(self):
        m = model_from([[0.4, 0.1], [0.1, 0.4], [0.0, 0.0]])
        g = pc.garble(m, pc.Garbling((0, 1, 1)))
        assert np.allclose(g.joint, [[0.4, 0.1], [0.1, 0.4]])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000))
    def test_prior_invariance(self, seed):
        rng = np.random.default_rng(seed)
        m = random_joint(rng, int(rng.integers(2, 7)), int(rng.integers(1, 7)))
        g = random_garbling(rng, m.n)
        assert np.allclose(pc.prior_of(pc.garble(m, g)).probs, pc.prior_of(m).probs, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_garbled_posterior_is_mixture_of_fine(self, seed):
        rng = np.random.default_rng(seed)
        m = random_joint(rng, int(rng.integers(2, 6)), int(rng.integers(2, 6)))
        g = random_garbling(rng, m.n)
        coarse = pc.garble(m, g)
        nu = m.marginals
        for jc in range(coarse.n):
            members = [j for j in range(m.n) if g.map[j] == jc and nu[j] > 0]
            if not members:
                continue
            weight = sum(nu[j] for j in members)
            mix = sum(nu[j] * pc.posterior(m, j).probs for j in members) / weight
            assert np.allclose(pc.posterior(coarse, jc).probs, mix, atol=1e-12)


class TestNoInfoFullInfo:
    def test_no_info_row_is_prior(self):
        m = model_from([[0.4, 0.1], [0.1, 0.4]])
        ni = pc.no_info(m)
        assert ni.n == 1
        assert np.allclose(pc.posterior(ni, 0).probs, pc.prior_of(m).probs)

    def test_no_info_idempotent(self):
        m = model_from([[0.3, 0.7]])
        assert np.allclose(pc.no_info(m).joint, m.joint)

    def test_no_info_column_sums(self):
        assert np.allclose(pc.no_info(model_from([[0.2, 0.3], [0.1, 0.4]])).joint, [[0.3, 0.7]])

    def test_full_info_diagonal(self):
        fi = pc.full_info(pc.Dist([0.5, 0.5]), pc.StateSpace([0.0, 1.0]))
        assert np.allclose(fi.joint, [[0.5, 0.0], [0.0, 0.5]])

    def test_full_info_degenerate_prior(self):
        fi = pc.full_info(pc.Dist([1.0, 0.0]), pc.StateSpace([0.0, 1.0]))
        assert np.allclose(fi.joint, [[1.0, 0.0], [0.0, 0.0]])
        assert np.allclose(pc.posterior(fi, 0).probs, [1.0, 0.0])

    def test_full_info_point_mass_posteriors(self):
        fi = pc.full_info(pc.Dist([0.3, 0.7]), pc.StateSpace([0.0, 1.0]))
        for j in range(2):
            assert np.allclose(pc.posterior(fi, j).probs, np.eye(2)[j])


class TestBlackwell:
    def test_passes_for_coarsening(self):
        m = model_from([[0.3, 0.1, 0.05], [0.05, 0.2, 0.1], [0.05, 0.05, 0.1]])
        g = pc.garble(m, pc.Garbling((0, 1, 1)))
        assert pc.blackwell_sample_test(m, g, trials=100, pieces=4, seed=3).passed

    def test_identity_gap_zero(self):
        m = model_from([[0.4, 0.1], [0.1, 0.4]])
        rep = pc.blackwell_sample_test(m, m, trials=50, pieces=3, seed=1)
        assert rep.passed
        assert abs(rep.min_gap) <= 1e-12

    def test_full_vs_none_matches_enumeration(self):
        # gap for a fixed max-affine phi equals the exhaustive formula
        # sum_i p_i max_k lambda_k[i] - max_k <lambda_k, p>
        prior = pc.Dist([0.2, 0.5, 0.3])
        states = pc.StateSpace([0.0, 1.0, 2.0])
        fi = pc.full_info(prior, states)
        ni = pc.no_info(fi)
        pieces = np.asarray([[1.0, -0.3, 0.2], [0.0, 0.8, -0.5], [-0.2, 0.1, 0.9]])
        expected = sum(
            p * max(pieces[k, i] for k in range(3)) for i, p in enumerate(prior.probs)
        ) - max(float(pieces[k] @ prior.probs) for k in range(3))
        gap = pc.informativeness_gap(fi, ni, pieces)
        assert expected >= -1e-12
        assert gap == pytest.approx(expected, abs=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_passes_for_random_coarsenings(self, seed):
        rng = np.random.default_rng(seed)
        m = random_joint(rng, int(rng.integers(2, 7)), int(rng.integers(1, 7)))
        g = random_garbling(rng, m.n)
        rep = pc.blackwell_sample_test(m, pc.garble(m, g), trials=40, pieces=4, seed=seed)
        assert rep.passed, rep.min_gap

    def test_prior_mismatch(self):
        a = model_from([[0.4, 0.1], [0.1, 0.4]])
        b = model_from([[0.2, 0.3], [0.1, 0.4]])
        with pytest.raises(pc.PriorMismatch):
            pc.blackwell_sample_test(a, b, trials=5, pieces=2, seed=0)

    def test_failure_carries_witness(self):
        # no_info is strictly less informative the other way round
        m = model_from([[0.45, 0.05], [0.05, 0.45]])
        rep = pc.blackwell_sample_test(pc.no_info(m), m, trials=60, pieces=4, seed=2)
        assert not rep.passed
        assert rep.witness is not None
        assert rep.min_gap < -1e-9


class TestJson:
    def test_round_trip(self, tmp_path):
        doc = {"states": [0.0, 1.0], "joint": [[0.4, 0.1], [0.1, 0.4]]}
        path = tmp_path / "sig.json"
        path.write_text(json.dumps(doc))
        m = pc.load_joint_model(path)
        assert pc.dump_joint_model(m) == doc

    def test_error_names_row_and_column(self):
        with pytest.raises(ValueError, match="row 1 column 0"):
            pc.load_joint_model({"states": [0, 1], "joint": [[0.5, 0.5], [-0.1, 0.1]]})

    def test_ragged_row_named(self):
        with pytest.raises(ValueError, match="row 1"):
            pc.load_joint_model({"states": [0, 1], "joint": [[0.5, 0.5], [0.5]]})

    def test_missing_keys(self):
        with pytest.raises(ValueError, match="states"):
            pc.load_joint_model({"joint": [[1.0]]})


class TestImmutability:
    def test_arrays_frozen(self):
        m = model_from([[0.4, 0.1], [0.1, 0.4]])
        with pytest.raises(ValueError):
            m.joint[0, 0] = 0.9
        d = pc.Dist([0.5, 0.5])
        with pytest.raises(ValueError):
            d.probs[0] = 0.9

    def test_operations_return_valid_dists(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            m = random_joint(rng, 3, 4)
            for j in range(m.n):
                p = pc.posterior(m, j)
                assert np.all(p.probs >= 0) and abs(p.probs.sum() - 1) < 1e-9
            pr = pc.prior_of(m)
            assert abs(pr.probs.sum() - 1) < 1e-9
