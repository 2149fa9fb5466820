import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats
from scipy.special import expit

from lergm_stein import (
    BlockPartition,
    CapacityError,
    ParameterVector,
    SamplerConfig,
    SingularityError,
)
from lergm_stein.diagnostics import (
    ConcentrationInputs,
    MomentMatrices,
    ReplicateStats,
    clt_constant,
    concentration_bound,
    concentration_inputs,
    covering_integral,
    dimension_factor,
    empirical_coverage,
    estimate_moment_matrices,
    inv_sqrt_psd,
    normality_from_estimates,
    run_replicates,
    sample_subgraph_states,
    stein_identity_residual,
    wasserstein1_to_normal,
    wasserstein_bound_terms,
)
from lergm_stein.statistics import (
    WEIGHTED_DEGREE,
    ModelSpec,
    StatisticSpec,
    edges,
    eval_bits,
    gwd,
    gwd_bipartite,
    poch,
    poch_bipartite,
)


def all_kinds_spec(sizes):
    part = BlockPartition(tuple(sizes))
    L = part.M + 1
    return ModelSpec(
        part,
        [edges(), gwd(0.8, L), poch(1, 2, L)],
        [edges(), gwd_bipartite(1, 1.0, L), gwd_bipartite(2, 0.5, L), poch_bipartite(1, 2, 1, L)],
    )


class TestSteinIdentity:
    def test_three_vertex_edges(self):
        spec = ModelSpec(BlockPartition((3,)), [edges()], [])
        r = stein_identity_residual(spec, ParameterVector([1.0], []), (0, 0))
        assert np.max(np.abs(r)) < 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_four_vertex_edge_gwd(self, seed):
        rng = np.random.default_rng(seed)
        spec = ModelSpec(BlockPartition((4,)), [edges(), gwd(1.0, 5)], [])
        r = stein_identity_residual(spec, ParameterVector(rng.uniform(-2, 2, 2), []), (0, 0))
        assert np.max(np.abs(r)) < 1e-10

    def test_constant_test_function(self):
        spec = all_kinds_spec((3, 2))
        beta = ParameterVector([0.5, -1.0, 0.3], [0.1, 0.2, 0.3, 0.4])
        r = stein_identity_residual(spec, beta, (0, 1), test_fn=lambda b: np.ones(len(b)))
        np.testing.assert_array_equal(r, [0.0])

    def test_general_test_function(self):
        rng = np.random.default_rng(1)
        spec = all_kinds_spec((4, 3))
        beta = ParameterVector(rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 4))

        def f(bits):
            b = bits.astype(float)
            return np.stack([b[:, 0] * b[:, 1], np.sin(b.sum(axis=1)), b[:, -1]], axis=1)

        for pair in spec.partition.pairs():
            r = stein_identity_residual(spec, beta, pair, test_fn=f)
            assert np.max(np.abs(r)) < 1e-12

    def test_statistic_as_general_test_function(self):
        spec = all_kinds_spec((4, 2))
        beta = ParameterVector([0.4, -0.6, 1.1], [0.2, -0.3, 0.9, -1.5])
        for pair in spec.partition.pairs():
            a = stein_identity_residual(spec, beta, pair)
            b = stein_identity_residual(spec, beta, pair, test_fn=lambda x, p=pair: eval_bits(spec, p, x))
            np.testing.assert_allclose(a, b, atol=1e-13)

    def test_wrong_beta_is_detected(self):
        spec = ModelSpec(BlockPartition((4,)), [edges(), gwd(1.0, 5)], [])
        truth = ParameterVector([0.5, -1.0], [])
        wrong = ParameterVector([1.5, -1.0], [])
        from lergm_stein.diagnostics import _operator_on_stats
        from lergm_stein.sampler import enumerate_block_distribution, mask_bits

        masks, probs = enumerate_block_distribution(spec, truth, (0, 0))
        r = probs @ _operator_on_stats(spec, wrong, (0, 0), mask_bits(masks, 6))
        assert np.max(np.abs(r)) > 0.1

    def test_capacity(self):
        spec = ModelSpec(BlockPartition((8,)), [edges()], [])
        with pytest.raises(CapacityError):
            stein_identity_residual(spec, ParameterVector([0.0], []), (0, 0))

    def test_monte_carlo_rate(self):
        spec = ModelSpec(BlockPartition((5,)), [edges(), gwd(1.0, 6)], [])
        beta = ParameterVector([0.3, -0.7], [])
        cfg = SamplerConfig(burn_in=100, thinning=2, seed=3)
        small = stein_identity_residual(spec, beta, (0, 0), method="monte-carlo", n_samples=10_000, sampler_config=cfg)
        large = stein_identity_residual(spec, beta, (0, 0), method="monte-carlo", n_samples=40_000, sampler_config=cfg)
        assert np.linalg.norm(small) < 1.0
        assert np.linalg.norm(large) < 5 * np.linalg.norm(small) + 1e-3

    def test_unknown_method(self):
        spec = ModelSpec(BlockPartition((3,)), [edges()], [])
        with pytest.raises(ValueError):
            stein_identity_residual(spec, ParameterVector([0.0], []), (0, 0), method="magic")


class TestSubgraphSampling:
    def test_shapes_and_frequency(self):
        spec = ModelSpec(BlockPartition((2, 3)), [edges()], [edges()])
        beta = ParameterVector([0.0], [1.2])
        bits = sample_subgraph_states(spec, beta, (0, 1), 20_000, SamplerConfig(burn_in=10, seed=1))
        assert bits.shape == (20_000, 6)
        assert bits.mean() == pytest.approx(expit(1.2), abs=0.01)


class TestInvSqrt:
    @given(st.integers(0, 2**32 - 1), st.integers(1, 5))
    @settings(max_examples=40, deadline=None)
    def test_whitening(self, seed, d):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(d, d))
        A = A @ A.T + 0.1 * np.eye(d)
        S = inv_sqrt_psd(A)
        np.testing.assert_allclose(S @ A @ S, np.eye(d), atol=1e-8)

    def test_singular(self):
        with pytest.raises(SingularityError):
            inv_sqrt_psd(np.array([[1.0, 1.0], [1.0, 1.0]]))


class TestMomentMatrices:
    def test_bernoulli_block(self):
        beta = 0.8
        spec = ModelSpec(BlockPartition((4,)), [edges()], [])
        mm = estimate_moment_matrices(spec, ParameterVector([beta], []), method="exact")
        v = 6 * expit(beta) * (1 - expit(beta))
        np.testing.assert_allclose(mm.egg_w, [[v]], rtol=1e-12)
        np.testing.assert_allclose(mm.eGG_w, [[v]], rtol=1e-12)
        np.testing.assert_allclose(mm.q_w, [[math.sqrt(v)]], rtol=1e-12)
        assert mm.method == "exact-enumeration"

    def test_beta_zero_q(self):
        spec = ModelSpec(BlockPartition((4,)), [edges()], [])
        mm = estimate_moment_matrices(spec, ParameterVector([0.0], []))
        np.testing.assert_allclose(mm.q_w, [[math.sqrt(1.5)]], rtol=1e-12)
        assert mm.upsilon_w == pytest.approx(1.5)
        assert mm.xi_w == pytest.approx(6.0)

    def test_constant_statistic_singular(self):
        spec = ModelSpec(BlockPartition((4,)), [StatisticSpec(WEIGHTED_DEGREE, np.ones(5))], [])
        with pytest.raises(SingularityError):
            estimate_moment_matrices(spec, ParameterVector([0.0], []))
        mm = estimate_moment_matrices(spec, ParameterVector([0.0], []), require_q=False)
        assert mm.q_w is None

    def test_blocks_add_up(self):
        beta = ParameterVector([0.3, -0.5], [0.2])
        part = BlockPartition((4, 4, 3))
        spec = ModelSpec(part, [edges(), gwd(1.0, 5)], [edges()])
        mm = estimate_moment_matrices(spec, beta, method="exact")
        one = ModelSpec(BlockPartition((4,)), [edges(), gwd(1.0, 5)], [])
        three = ModelSpec(BlockPartition((3,)), [edges(), gwd(1.0, 5)], [])
        a = estimate_moment_matrices(one, ParameterVector([0.3, -0.5], []), method="exact")
        b = estimate_moment_matrices(three, ParameterVector([0.3, -0.5], []), method="exact")
        np.testing.assert_allclose(mm.egg_w, 2 * a.egg_w + b.egg_w, rtol=1e-12)
        np.testing.assert_allclose(mm.eGG_w, 2 * a.eGG_w + b.eGG_w, rtol=1e-12)
        assert mm.upsilon_w == pytest.approx(min(a.upsilon_w, b.upsilon_w))

    def test_psd_and_monte_carlo_close(self):
        spec = ModelSpec(BlockPartition((4, 3)), [edges(), gwd(1.0, 5)], [edges(), gwd_bipartite(1, 1.0, 5)])
        beta = ParameterVector([0.5, -1.0], [-0.3, 0.4])
        ex = estimate_moment_matrices(spec, beta, method="exact")
        mc = estimate_moment_matrices(
            spec, beta, method="monte-carlo", n_samples=20_000, sampler_config=SamplerConfig(burn_in=100, thinning=3, seed=4)
        )
        for f in ("W", "B"):
            e, m = ex.family(f), mc.family(f)
            assert np.linalg.eigvalsh(e.egg)[0] > 0
            np.testing.assert_allclose(e.egg, e.egg.T)
            np.testing.assert_allclose(m.egg, e.egg, rtol=0.1, atol=0.05 * np.abs(e.egg).max())
            np.testing.assert_allclose(m.eGG, e.eGG, rtol=0.1, atol=0.05 * np.abs(e.eGG).max())
        assert mc.method.startswith("monte-carlo")


class TestCltConstant:
    def test_value(self):
        val = clt_constant()
        closed = 8 + special_ei(4) - np.euler_gamma - math.log(4)
        assert val == pytest.approx(closed, abs=1e-10)
        assert 25.6 <= val <= 25.7

    def test_partials(self):
        val, partials = clt_constant(return_partials=True)
        assert partials[0] == 12.0
        assert np.all(np.diff(partials) > 0)
        assert len(partials) <= 40
        assert partials[-1] - partials[-2] < 1e-12


def special_ei(x):
    from scipy.special import expi

    return float(expi(x))


class TestConcentrationBound:
    def inputs(self, **kw):
        base = dict(K=4, M=4, d1=1, d2=1, R_W=2.0, R_B=2.0, L_W=1.0, L_B=1.0, C_W=0.0, C_B=0.0, xi_w=6.0, xi_b=16.0)
        base.update(kw)
        return ConcentrationInputs(**base)

    def test_covering_integral(self):
        assert covering_integral(1) == pytest.approx(3 * math.log(3) - 2 * math.log(2), rel=1e-10)
        val, _ = integrate.quad(lambda e: math.log1p(1 / e), 0, 2)
        assert covering_integral(1) == pytest.approx(val)
        assert covering_integral(2) == pytest.approx(math.pi)
        assert covering_integral(3) == pytest.approx(math.pi / math.sin(math.pi / 3))
        with pytest.raises(ValueError):
            covering_integral(0)

    def test_dimension_factor(self):
        d = 3
        expect = math.pi / math.sin(math.pi / 3) + math.sqrt(3) ** 1.5 * abs(2 - math.sqrt(3) / (math.e + 1) ** (1 / 3))
        assert dimension_factor(d) == pytest.approx(expect)

    def test_linear_in_p(self):
        a = concentration_bound(self.inputs(), 2)
        b = concentration_bound(self.inputs(), 4)
        assert b.bound_w == pytest.approx(2 * a.bound_w)
        assert b.bound_b == pytest.approx(2 * a.bound_b)

    def test_k_scaling(self):
        a = concentration_bound(self.inputs(K=4), 3)
        b = concentration_bound(self.inputs(K=8), 3)
        assert b.bound_w == pytest.approx(a.bound_w / math.sqrt(2))

    def test_small_instance_regression(self):
        spec = ModelSpec(BlockPartition.uniform(4, 4), [edges()], [])
        mm = estimate_moment_matrices(spec, ParameterVector([0.0], []), method="exact")
        assert mm.xi_w == pytest.approx(6.0)
        inp = concentration_inputs(spec, mm, 2.0, 2.0)
        rep = concentration_bound(inp, 2)
        expect = 0.5 / 6.0 * 4096 * math.sqrt(2) * dimension_factor(1) * 2 * 4**5 * math.exp(2)
        assert rep.bound_w == pytest.approx(expect, rel=1e-12)
        assert rep.bound_w == pytest.approx(2.6594125253e7, rel=1e-9)
        assert rep.bound_b == 0.0

    def test_overflow_is_inf(self):
        rep = concentration_bound(self.inputs(R_W=1e4, M=20), 2)
        assert rep.bound_w == math.inf

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            concentration_bound(self.inputs(xi_w=0.0), 2)
        with pytest.raises(ValueError):
            concentration_bound(self.inputs(), 0)

    @given(
        st.integers(1, 50), st.integers(2, 10), st.integers(1, 4), st.floats(0.1, 5), st.floats(0.1, 3),
        st.floats(0.01, 10), st.integers(1, 20),
    )
    @settings(max_examples=100)
    def test_monotone(self, K, M, d, R, L, xi, P):
        base = self.inputs(K=K, M=M, d1=d, R_W=R, L_W=L, xi_w=xi)
        b0 = concentration_bound(base, P).bound_w
        grow = [
            concentration_bound(base, P + 1).bound_w,
            concentration_bound(self.inputs(K=K, M=M + 1, d1=d, R_W=R, L_W=L, xi_w=xi), P).bound_w,
            concentration_bound(self.inputs(K=K, M=M, d1=d, R_W=R * 1.5, L_W=L, xi_w=xi), P).bound_w,
            concentration_bound(self.inputs(K=K, M=M, d1=d, R_W=R, L_W=L * 1.5, xi_w=xi), P).bound_w,
        ]
        shrink = [
            concentration_bound(self.inputs(K=K + 1, M=M, d1=d, R_W=R, L_W=L, xi_w=xi), P).bound_w,
            concentration_bound(self.inputs(K=K, M=M, d1=d, R_W=R, L_W=L, xi_w=xi * 1.5), P).bound_w,
        ]
        assert b0 > 0
        assert all(g >= b0 for g in grow)
        assert all(s <= b0 for s in shrink)


class TestCoverage:
    def test_vacuous_bound_full_coverage(self):
        spec = ModelSpec(BlockPartition.uniform(4, 6), [edges()], [])
        beta = ParameterVector([0.3], [])
        cfg = SamplerConfig(burn_in=20, seed=5, reject_degenerate=True)
        rep = empirical_coverage(spec, beta, 2, 10, cfg)
        assert rep.coverage_w == 1.0
        assert rep.coverage >= 0.5
        assert rep.n_replicates == 10 and rep.failures == 0
        assert math.isfinite(rep.bound.bound_w) and rep.bound.bound_w > 0

    def test_zero_replicates(self):
        spec = ModelSpec(BlockPartition((4,)), [edges()], [])
        with pytest.raises(ValueError):
            empirical_coverage(spec, ParameterVector([0.0], []), 2, 0, SamplerConfig())


class TestWasserstein:
    def test_point_mass(self):
        assert wasserstein1_to_normal(np.zeros(10)) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-12)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 30))
    @settings(max_examples=30, deadline=None)
    def test_against_quadrature(self, seed, n):
        x = np.random.default_rng(seed).normal(0.3, 1.5, n)
        xs = np.sort(x)

        def gap(t):
            return abs(np.searchsorted(xs, t, side="right") / n - stats.norm.cdf(t))

        lo, hi = min(xs[0], -12.0), max(xs[-1], 12.0)
        val, _ = integrate.quad(gap, lo, hi, points=list(xs), limit=500)
        assert wasserstein1_to_normal(x) == pytest.approx(val, rel=1e-6, abs=1e-8)

    def test_large_normal_sample_small(self):
        x = np.random.default_rng(0).normal(size=20_000)
        assert wasserstein1_to_normal(x) < 0.03

    def test_shift(self):
        assert wasserstein1_to_normal(np.random.default_rng(1).normal(2.0, 1.0, 50_000)) == pytest.approx(2.0, abs=0.03)


def _moments(q_w, q_b=None):
    q_w = np.atleast_2d(q_w)
    q_b = np.zeros((0, 0)) if q_b is None else np.atleast_2d(q_b)
    return MomentMatrices(
        egg_w=q_w @ q_w.T, eGG_w=q_w @ q_w.T, q_w=q_w, egg_b=q_b, eGG_b=q_b, q_b=q_b if q_b.size else None,
        upsilon_w=1.0, upsilon_b=math.inf, xi_w=1.0, xi_b=math.inf, method="test",
    )


class TestNormality:
    def test_all_at_truth(self):
        truth = ParameterVector([0.5], [])
        rep = normality_from_estimates(_moments([[2.0]]), [truth] * 20, truth)
        np.testing.assert_allclose(rep.ks_w, [0.5])
        np.testing.assert_allclose(rep.mean_w, [0.0])
        assert rep.w1_w[0] == pytest.approx(math.sqrt(2 / math.pi))
        assert rep.n_replicates == 20
        assert rep.ks_b.shape == (0,)

    def test_standardization(self):
        rng = np.random.default_rng(2)
        q = np.array([[2.0, 0.5], [0.0, 1.0]])
        truth = ParameterVector([0.1, -0.2], [])
        z = rng.normal(size=(2000, 2))
        est = [ParameterVector(truth.beta_w + np.linalg.solve(q, zi), []) for zi in z]
        rep = normality_from_estimates(_moments(q), est, truth)
        np.testing.assert_allclose(rep.standardized_w, z, atol=1e-12)
        assert np.all(rep.ks_w < 0.05)
        np.testing.assert_allclose(rep.cov_w, np.eye(2), atol=0.1)


class TestWassersteinTerms:
    def test_terms(self):
        spec = ModelSpec(BlockPartition.uniform(4, 5), [edges()], [])
        truth = ParameterVector([0.2], [])
        mm = estimate_moment_matrices(spec, truth, method="exact")
        exact = ReplicateStats.from_replicates([truth] * 5, truth, [0.0] * 5, [0.0] * 5)
        terms = dict(wasserstein_bound_terms(spec, truth, mm, exact))
        assert set(terms) == {"W_term1", "W_term2", "W_term3", "W_total"}
        assert terms["W_term2"] == 0.0
        assert terms["W_term3"] == 0.0
        assert terms["W_term1"] > 0
        assert terms["W_total"] == pytest.approx(terms["W_term1"])

    def test_term1_formula(self):
        spec = ModelSpec(BlockPartition.uniform(4, 5), [edges()], [])
        truth = ParameterVector([0.0], [])
        mm = estimate_moment_matrices(spec, truth, method="exact")
        stats_ = ReplicateStats.from_replicates([truth], truth, [0.0], [0.0])
        terms = dict(wasserstein_bound_terms(spec, truth, mm, stats_))
        ups = mm.upsilon_w
        C = clt_constant()
        expect = (math.sqrt(C) + math.sqrt(2)) * 1.0 / min(ups, ups**0.75) * 4**6 / math.sqrt(5)
        assert terms["W_term1"] == pytest.approx(expect, rel=1e-12)

    def test_replicate_run(self):
        spec = ModelSpec(BlockPartition.uniform(5, 6), [edges()], [])
        truth = ParameterVector([0.2], [])
        run = run_replicates(spec, truth, 6, SamplerConfig(burn_in=20, seed=1, reject_degenerate=True))
        assert len(run.estimates) == 6 and run.failures == 0
        assert run.converged.all()
        assert np.all(run.grad_norms_w < 1e-7)
        rs = ReplicateStats.from_replicates(run.estimates, truth, run.grad_norms_w, run.grad_norms_b)
        assert rs.mse4_w >= rs.mse2_w**2
        mm = estimate_moment_matrices(spec, truth, method="exact")
        terms = dict(wasserstein_bound_terms(spec, truth, mm, rs))
        assert terms["W_term2"] > 0
        assert terms["W_total"] == pytest.approx(terms["W_term1"] + terms["W_term2"] + terms["W_term3"])
