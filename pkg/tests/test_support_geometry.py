import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import precaution as pc
from oracles import brute_star_difference, kink_verdict


def ps(*vecs):
    return pc.PayoffSet(np.asarray(vecs, dtype=float))


class TestSupportValue:
    def test_singleton_linear(self):
        assert pc.support_value(ps((2, 3)), pc.Dist([0.5, 0.5])) == pytest.approx(2.5)

    def test_symmetric(self):
        assert pc.support_value(ps((1, 0), (0, 1)), pc.Dist([0.5, 0.5])) == pytest.approx(0.5)

    def test_vertex_selection(self):
        assert pc.support_value(ps((1, 0), (0, 1)), pc.Dist([0.9, 0.1])) == pytest.approx(0.9)

    def test_dimension_mismatch(self):
        with pytest.raises(pc.DimensionMismatch):
            pc.support_value(ps((1, 0, 0)), pc.Dist([0.5, 0.5]))

    def test_downward_closure_neutrality(self):
        rng = np.random.default_rng(0)
        base = rng.uniform(-1, 1, size=(5, 3))
        dominated = base[2] - np.abs(rng.uniform(0, 1, 3))
        bigger = pc.PayoffSet(np.vstack([base, dominated]))
        for rho in pc.sample_simplex(3, 50, rng):
            assert pc.support_value(pc.PayoffSet(base), rho) == pytest.approx(
                pc.support_value(bigger, rho), abs=1e-12
            )


class TestMinkowskiSum:
    def test_singletons(self):
        assert np.allclose(pc.minkowski_sum(ps((1, 0)), ps((0, 1))).vectors, [[1, 1]])

    def test_zero_identity(self):
        lam = ps((0.25, -0.5), (1, 2))
        out = pc.minkowski_sum(ps((0, 0)), lam)
        assert np.allclose(np.sort(out.vectors, axis=0), np.sort(lam.vectors, axis=0))

    def test_translation(self):
        out = pc.minkowski_sum(ps((1, 0), (0, 1)), ps((1, 1)))
        assert np.allclose(np.sort(out.vectors, axis=0), [[1, 1], [2, 2]])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000))
    def test_support_additivity(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(2, 5))
        a = pc.PayoffSet(rng.uniform(-2, 2, size=(int(rng.integers(1, 6)), m)))
        b = pc.PayoffSet(rng.uniform(-2, 2, size=(int(rng.integers(1, 6)), m)))
        total = pc.minkowski_sum(a, b)
        for rho in pc.sample_simplex(m, 20, rng):
            lhs = pc.support_value(total, rho)
            rhs = pc.support_value(a, rho) + pc.support_value(b, rho)
            assert lhs == pytest.approx(rhs, abs=1e-12)


class TestStarDifference:
    def test_translation_gives_singleton(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            m = int(rng.integers(2, 5))
            lam = pc.PayoffSet(rng.uniform(-2, 2, size=(int(rng.integers(1, 6)), m)))
            c = rng.uniform(-1, 1, m)
            out = pc.star_difference(pc.PayoffSet(lam.vectors + c), lam)
            assert np.max(np.abs(out.vectors - c)) < 1e-9

    def test_self_difference_contains_zero(self):
        lam = ps((1, 0), (0, 1), (0.5, 0.6))
        out = pc.star_difference(lam, lam)
        assert any(np.allclose(k, 0, atol=1e-12) for k in out.vectors)

    def test_derived_example_vs_brute_force(self):
        lam0 = ps((0, 0), (1, -1))
        lam1 = ps((1, 0), (2, -1), (0, 2))
        out = pc.star_difference(lam1, lam0)
        oracle = brute_star_difference(lam1.vectors, lam0.vectors)
        assert np.allclose(out.vectors, oracle)
        assert np.allclose(oracle, [[-1, 2], [0, 1], [1, 0]])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_matches_selection_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(2, 4))
        v1 = rng.uniform(-2, 2, size=(int(rng.integers(1, 5)), m))
        v0 = rng.uniform(-2, 2, size=(int(rng.integers(1, 4)), m))
        out = pc.star_difference(pc.PayoffSet(v1), pc.PayoffSet(v0))
        oracle = brute_star_difference(v1, v0)
        assert out.vectors.shape == oracle.shape
        assert np.allclose(out.vectors, oracle, atol=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(pc.DimensionMismatch):
            pc.star_difference(ps((1, 0)), ps((1, 0, 0)))


class TestDecompositionCertificate:
    def test_translation_passes_with_zero_gap(self):
        rng = np.random.default_rng(2)
        lam = pc.PayoffSet(rng.uniform(-1, 1, size=(4, 3)))
        shifted = pc.PayoffSet(lam.vectors + np.asarray([0.5, -0.25, 1.0]))
        rep = pc.decomposition_certificate(shifted, lam, samples=500, seed=11)
        assert rep.passed
        assert rep.max_gap <= 1e-12

    def test_minkowski_construction_passes(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            m = int(rng.integers(2, 5))
            lam0 = pc.PayoffSet(rng.uniform(-1, 1, size=(int(rng.integers(2, 5)), m)))
            k = pc.PayoffSet(rng.uniform(-1, 1, size=(int(rng.integers(1, 4)), m)))
            lam1 = pc.minkowski_sum(lam0, k)
            rep = pc.decomposition_certificate(lam1, lam0, samples=400, seed=7)
            assert rep.passed, rep.max_gap

    def test_derived_two_point_example(self):
        # sigma difference is affine (= 4*s - 1 along the edge), so the
        # certificate passes exactly and the star-difference is a singleton
        rep = pc.decomposition_certificate(
            ps((1, 1), (-1, 3)), ps((0, 0), (2, -2)), samples=10_000, seed=42
        )
        assert rep.passed
        assert rep.max_gap <= 1e-12
        assert np.allclose(rep.k_star.vectors, [[-1, 3]])

    def test_failure_reports_worst_gap(self):
        # scaling a set is not a translation: the certificate must fail
        lam0 = ps((1, 0), (0, 1))
        lam1 = ps((2, 0), (0, 2))
        rep = pc.decomposition_certificate(lam1, lam0, samples=500, seed=5)
        assert not rep.passed
        # the true sup gap is 0.5 at the simplex midpoint; sampling gets close
        assert 0.4 < rep.max_gap <= 0.5 + 1e-12
        assert rep.worst_rho.shape == (2,)

    def test_pass_implies_probe_convex_or_affine(self):
        rng = np.random.default_rng(4)
        checked = 0
        for trial in range(12):
            m = int(rng.integers(2, 4))
            lam0 = pc.PayoffSet(rng.uniform(-1, 1, size=(int(rng.integers(1, 5)), m)))
            if rng.integers(0, 2):
                lam1 = pc.minkowski_sum(lam0, pc.PayoffSet(rng.uniform(-1, 1, size=(2, m))))
            else:
                lam1 = pc.PayoffSet(rng.uniform(-1, 1, size=(int(rng.integers(1, 5)), m)))
            rep = pc.decomposition_certificate(lam1, lam0, samples=300, seed=trial)
            if not rep.passed:
                continue
            checked += 1
            verdict = pc.convexity_probe(
                lambda rho: pc.support_value(lam1, rho) - pc.support_value(lam0, rho),
                m,
                trials=400,
                seed=trial,
            )
            assert verdict.is_convex_or_affine
        assert checked >= 3


class TestConvexityProbe:
    def test_support_function_is_convex(self):
        rng = np.random.default_rng(6)
        for trial in range(10):
            m = int(rng.integers(2, 5))
            lam = pc.PayoffSet(rng.uniform(-2, 2, size=(int(rng.integers(2, 7)), m)))
            verdict = pc.convexity_probe(
                lambda rho: pc.support_value(lam, rho), m, trials=300, seed=trial
            )
            assert verdict.kind in ("Convex", "Affine")

    def test_linear_is_affine(self):
        c = np.asarray([0.3, -1.2, 0.7])
        verdict = pc.convexity_probe(lambda rho: float(c @ rho), 3, trials=400, seed=9)
        assert verdict.kind == "Affine"

    def test_negated_support_is_concave(self):
        lam = ps((1, 0), (0, 1))
        verdict = pc.convexity_probe(
            lambda rho: -pc.support_value(lam, rho), 2, trials=400, seed=10
        )
        assert verdict.kind == "Concave"

    def test_derived_scaled_vertex_example(self):
        # difference of max(1-s, s) and max(1-s, 2s): slopes 0, -3, -1, so
        # the exact one-dimensional analysis says Neither
        lam1 = ps((1, 0), (0, 1))
        lam0 = ps((1, 0), (0, 2))
        assert kink_verdict(lam1.vectors, lam0.vectors) == "Neither"
        verdict = pc.convexity_probe(
            lambda rho: pc.support_value(lam1, rho) - pc.support_value(lam0, rho),
            2,
            trials=600,
            seed=12,
        )
        assert verdict.kind == "Neither"
        assert verdict.worst_above.violation > 1e-9
        assert -verdict.worst_below.violation > 1e-9

    def test_probe_agrees_with_kink_oracle(self):
        rng = np.random.default_rng(13)
        agree = 0
        for trial in range(25):
            v1 = np.round(rng.uniform(-2, 2, size=(int(rng.integers(2, 5)), 2)) * 4) / 4
            v0 = np.round(rng.uniform(-2, 2, size=(int(rng.integers(2, 5)), 2)) * 4) / 4
            lam1, lam0 = pc.PayoffSet(v1), pc.PayoffSet(v0)
            verdict = pc.convexity_probe(
                lambda rho: pc.support_value(lam1, rho) - pc.support_value(lam0, rho),
                2,
                trials=1500,
                seed=trial,
            )
            assert verdict.kind == kink_verdict(v1, v0)
            agree += 1
        assert agree == 25

    def test_serialization(self):
        verdict = pc.convexity_probe(lambda rho: float(rho[0] ** 2), 2, trials=50, seed=1)
        doc = verdict.as_dict()
        assert doc["kind"] == verdict.kind
        lam = ps((1, 0))
        assert pc.PayoffSet.from_dict(lam.as_dict()).vectors.tolist() == lam.vectors.tolist()
