import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from pushdiging.certify import (
    InadmissibleLambdaError,
    NormBounds,
    SmallGainError,
    audit_gain_chain,
    audit_inexact_descent,
    certify,
    corollary_rate,
    evaluate_gains,
    lambda_constraints,
    lambda_norm,
    lambda_norm_profile,
    norm_bounds,
    rate_interval,
    report_to_text,
    small_gain_bound,
    small_gain_empirical_check,
    trace_omegas,
)
from pushdiging.engine import StepSizes, inexact_gd_run, run_push_diging
from pushdiging.graphs import Digraph, GraphSequence, make_periodic_partition, make_random_sequence, make_ring
from pushdiging.mixing import ConsensusConstants, PushSumSchedule, empirical_consensus_constants
from pushdiging.objectives import SENSOR_STEP_SIZES

from helpers import build_cycle, descent_setup, digraphs

SYN_NORMS = NormBounds(S_max=1.0, S_inv_max=1.0, JR_max=0.5, A_max=1.0, mode="synthetic", horizon=0)
SYN_CONSTS = ConsensusConstants(tau=0.1, Q1=1.0, delta=0.1, B=2, B0=1, n_agents=2, mode="empirical")
SYN_STATS = {"n_agents": 2, "L_hat": 1.0, "mu_hat": 1.0, "mu_bar": 1.0}


def fixed_point_oracle(gains, offsets, iters=20000):
    """Iterate the tight cyclic recursion from zero until it settles."""
    x = 0.0
    for _ in range(iters):
        y = x
        for g, w in zip(gains, offsets):
            y = g * y + w
        if abs(y - x) <= 1e-15 * max(1.0, abs(y)):
            return y
        x = y
    return x


class TestLambdaNorm:
    def test_geometric_sequence(self):
        lam = 0.7
        assert lambda_norm([lam**k for k in range(30)], lam, 29) == pytest.approx(1.0)

    def test_zero(self):
        assert lambda_norm(np.zeros(5), 0.5, 4) == 0.0

    def test_worked_example(self):
        assert lambda_norm([1, 0.3, 0.2], 0.5, 2) == pytest.approx(1.0)

    def test_requires_long_enough_sequence(self):
        with pytest.raises(ValueError):
            lambda_norm([1.0, 2.0], 0.5, 2)

    def test_vectors_use_euclidean_norm(self):
        assert lambda_norm([np.array([3.0, 4.0])], 0.9, 0) == pytest.approx(5.0)

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=40),
        st.floats(0.05, 0.999),
        st.floats(-10, 10, allow_nan=False),
    )
    def test_monotone_and_homogeneous(self, u, lam, c):
        prof = lambda_norm_profile(u, lam)
        assert np.all(np.diff(prof) >= 0)
        scaled = lambda_norm_profile([c * v for v in u], lam)
        np.testing.assert_allclose(scaled, abs(c) * prof, rtol=1e-12, atol=1e-300)


class TestSmallGain:
    def test_single_gain(self):
        assert small_gain_bound([0.5], [1.0]) == pytest.approx(2.0)

    def test_two_gains(self):
        assert small_gain_bound([0.5, 0.5], [1.0, 1.0]) == pytest.approx(2.0)

    def test_zero_offsets(self):
        assert small_gain_bound([0.9, 0.3, 2.0], [0, 0, 0]) == 0.0

    def test_rejects_product_at_least_one(self):
        with pytest.raises(SmallGainError, match="1.2"):
            small_gain_bound([2.0, 0.6], [1.0, 1.0])

    @settings(max_examples=200, deadline=None)
    @given(st.data())
    def test_matches_unrolled_recursion(self, data):
        m = data.draw(st.integers(1, 6))
        gains = data.draw(st.lists(st.floats(0.0, 3.0), min_size=m, max_size=m))
        assume(math.prod(gains) < 0.95)
        offsets = data.draw(st.lists(st.floats(0.0, 10.0), min_size=m, max_size=m))
        bound = small_gain_bound(gains, offsets)
        assert bound == pytest.approx(fixed_point_oracle(gains, offsets), rel=1e-12, abs=1e-12)

    def test_tight_construction_approaches_bound(self):
        gains, offsets = [0.5, 0.8], [1.0, 0.25]
        seqs = build_cycle(gains, offsets, 0.9, 200, None, tight=True)
        rep = small_gain_empirical_check(seqs, gains, offsets, 0.9, 200)
        assert rep["passed"]
        assert rep["closed_bound"]["measured"] == pytest.approx(rep["closed_bound"]["bound"], rel=1e-9)

    def test_zero_sequences_pass(self):
        rep = small_gain_empirical_check([np.zeros(5)] * 3, [0.5] * 3, [0.0] * 3, 0.5, 4)
        assert rep["passed"]

    def test_violating_arrow_flagged(self):
        rng = np.random.default_rng(0)
        seqs = build_cycle([0.5, 0.5], [1.0, 1.0], 0.9, 30, rng)
        seqs[1] = seqs[1] * 0 + 100.0
        rep = small_gain_empirical_check(seqs, [0.5, 0.5], [1.0, 1.0], 0.9, 30)
        assert not rep["arrows"][0]["passed"]
        assert not rep["passed"]


class TestNormBounds:
    def test_ring_is_balanced(self):
        nb = norm_bounds(make_ring(4))
        assert nb.S_max == pytest.approx(1.0) and nb.S_inv_max == pytest.approx(1.0)
        assert nb.JR_max == pytest.approx(1.0)
        assert nb.mode == "exact-over-period"

    def test_aperiodic_is_an_estimate(self):
        seq = GraphSequence(3, lambda k: make_ring(3)[0])
        assert norm_bounds(seq, 20).mode == "finite-horizon estimate"

    @settings(max_examples=40, deadline=None)
    @given(st.lists(digraphs(max_n=5), min_size=1, max_size=3))
    def test_projected_row_stochastic_norm_never_below_one(self, graphs):
        n = graphs[0].n_agents
        graphs = [g for g in graphs if g.n_agents == n]
        nb = norm_bounds(GraphSequence(n, graphs), 30, max_horizon=200)
        assert nb.JR_max >= 1.0 - 1e-12
        assert min(nb.S_max, nb.S_inv_max, nb.A_max) > 0


class TestGains:
    def test_output_gain_example(self):
        stats = {"n_agents": 2, "L_hat": 2.0, "mu_hat": 2.0, "mu_bar": 2.0}
        consts = ConsensusConstants(tau=0.1, Q1=1.0, delta=0.01, B=2, B0=1, n_agents=2)
        nb = NormBounds(1.0, 1.0, 0.3, 1.0, "synthetic", 0)
        g = evaluate_gains(stats, nb, StepSizes([0.05, 0.05]), consts, 0.5, 2.0, 1.0,
                           waive={"descent-floor"})
        assert g.gamma_4 == pytest.approx(6.0)

    def test_coordinated_steps_cancel_tracking_gain(self):
        g = evaluate_gains(SYN_STATS, SYN_NORMS, StepSizes([1e-3, 1e-3]), SYN_CONSTS, 0.9999, 2.0, 1.0)
        assert g.gamma_12 == 0.0

    def test_formulas(self):
        D = StepSizes([1e-3, 2e-3])
        lam, beta, eta = 0.9999, 2.0, 1.0
        g = evaluate_gains(SYN_STATS, SYN_NORMS, D, SYN_CONSTS, lam, beta, eta,
                           xbar0_error=0.5, x_tilde_prefix=[1.0, 2.0], h_tilde_prefix=[3.0, 4.0])
        r2 = math.sqrt(2)
        lb = lam**2
        assert g.gamma_11 == pytest.approx((1 + r2) * (1 + r2 / lam * math.sqrt(2 + 2)))
        assert g.gamma_12 == pytest.approx(math.sqrt(3 - 2e-3) / lam * 0.5)
        assert g.gamma_21 == pytest.approx(2e-3 / (lb - 0.1) * (0.1 + (lam - lb) / (1 - lam)))
        assert g.gamma_22 == 1.0
        assert g.gamma_3 == pytest.approx((1 + lam * (1 - lb) / ((lb - 0.1) * (1 - lam))) / (1 - 0.5 / lam))
        assert g.omega_1 == pytest.approx(2 * r2 * 0.5)
        assert g.omega_21 == pytest.approx(lb / (lb - 0.1) * (1.0 + 2.0 / lam))
        assert g.omega_3 == pytest.approx(lb / (lb - 0.1) * (3.0 + 4.0 / lam) / (1 - 0.5 / lam))
        assert g.omega_22 == 0.0 and g.omega_4 == 0.0
        assert g.params["lambda"] == lam and g.params["B"] == 2

    def test_alternative_tracking_branch(self):
        D = StepSizes([1e-3, 3e-3])
        g = evaluate_gains(SYN_STATS, SYN_NORMS, D, SYN_CONSTS, 0.9999, 2.0, 1.0, y_branch="alpha_bar")
        ab = 2e-3
        expect = math.sqrt(3 - ab) / (ab * math.sqrt(2) * 0.9999) * math.sqrt(2e-6)
        assert g.gamma_12 == pytest.approx(expect)

    def test_names_every_violated_constraint(self):
        nb = NormBounds(1.0, 1.0, 1.2, 1.0, "synthetic", 0)
        with pytest.raises(InadmissibleLambdaError) as info:
            evaluate_gains(SYN_STATS, nb, StepSizes([1e-3, 1e-3]), SYN_CONSTS, 0.2, 2.0, 1.0)
        assert {"descent-floor", "contraction-root", "projection-norm"} <= set(info.value.violations)

    def test_rejects_large_step(self):
        bad = lambda_constraints(0.99, 0.9, SYN_STATS, SYN_CONSTS, SYN_NORMS, 2.0, 1.0)
        assert "step-range" in bad

    def test_half_floor(self):
        assert "half" in lambda_constraints(0.4, 1e-3, SYN_STATS, SYN_CONSTS, SYN_NORMS, 2.0, 1.0, enforce_half=True)

    def test_waived_projection_leaves_arrow_undefined(self):
        nb = NormBounds(1.0, 1.0, 1.2, 1.0, "synthetic", 0)
        g = evaluate_gains(SYN_STATS, nb, StepSizes([1e-3, 1e-3]), SYN_CONSTS, 0.9999, 2.0, 1.0,
                           waive={"projection-norm"})
        assert math.isnan(g.gamma_3) and math.isnan(g.product)


class TestCertificate:
    def test_valid_synthetic(self):
        cert = certify(SYN_STATS, SYN_NORMS, SYN_CONSTS, StepSizes([1e-4, 1e-4]))
        assert cert.valid, cert.reasons
        assert cert.lam < 1 and cert.gain_product < 1
        assert cert.lam >= max(v for v in cert.lambda_terms.values())
        assert cert.H == 0.0

    def test_constants(self):
        D = StepSizes([1e-4, 2e-4])
        cert = certify(SYN_STATS, SYN_NORMS, SYN_CONSTS, D)
        r2 = math.sqrt(2)
        assert cert.F == 1.0 and cert.C == 0.5 and cert.K == 2.0
        assert cert.G == pytest.approx(2 * (1 + r2) * (1 + 4 * r2) * (0.1 + 1.0))
        assert cert.H == pytest.approx(-4 * math.sqrt(3) * 0.5)

    def test_step_cap_empty_names_condition(self):
        cert = certify(SYN_STATS, SYN_NORMS, SYN_CONSTS, StepSizes([1e-4, 0.5e-4]))
        assert not cert.valid
        assert any("k_D bound violated" in r for r in cert.reasons)

    def test_row_projection_defect_reported(self):
        nb = NormBounds(1.0, 1.0, 1.0, 1.0, "synthetic", 0)
        cert = certify(SYN_STATS, nb, SYN_CONSTS, StepSizes([1e-4, 1e-4]))
        assert not cert.valid and any("C = 1 - ||JR||_max" in r for r in cert.reasons)

    def test_rate_can_exceed_one_inside_step_cap(self):
        cert = certify(SYN_STATS, SYN_NORMS, SYN_CONSTS, StepSizes([5e-3, 5e-3]))
        assert cert.alpha_max < cert.alpha_max_bound
        assert cert.lam > 1 and not cert.valid

    def test_half_floor_noted(self):
        stats = {"n_agents": 2, "L_hat": 1.0, "mu_hat": 1.0, "mu_bar": 2.9}
        nb = NormBounds(1.0, 1.0, 0.1, 1.0, "synthetic", 0)
        consts = ConsensusConstants(tau=0.1, Q1=1.0, delta=1e-6, B=1, B0=1, n_agents=2)
        cert = certify(stats, nb, consts, StepSizes([0.9, 0.9]))
        assert cert.lam >= 0.5
        assert any("0.5" in n for n in cert.notes)

    @settings(max_examples=150, deadline=None)
    @given(
        st.floats(0.05, 0.9), st.floats(0.0, 0.5), st.floats(1.0, 3.0), st.integers(1, 5),
        st.floats(1e-6, 1e-2), st.floats(1.0, 1.5), st.floats(0.2, 2.0),
    )
    def test_sub_unit_rate_implies_small_gain(self, jr, delta, q1, B, alpha, kd, mu):
        stats = {"n_agents": 3, "L_hat": 2.0, "mu_hat": 2.0, "mu_bar": mu}
        nb = NormBounds(1.2, 1.5, jr, 1.1, "synthetic", 0)
        consts = ConsensusConstants(tau=0.1, Q1=q1, delta=delta, B=B, B0=1, n_agents=3)
        cert = certify(stats, nb, consts, StepSizes([alpha / kd, alpha]))
        others = [r for r in cert.reasons if "gain product" not in r]
        if not others and cert.lam < 1:
            assert cert.gain_product < 1

    def test_report_is_diff_stable(self):
        cert = certify(SYN_STATS, SYN_NORMS, SYN_CONSTS, StepSizes([1e-4, 1e-4]))
        text = report_to_text(cert)
        assert text == report_to_text(cert)
        doc = json.loads(text)
        assert list(doc) == sorted(doc)

    def test_nan_serializes_as_text(self):
        assert json.loads(report_to_text({"x": float("nan")})) == {"x": "nan"}


COROLLARY = dict(F=2.0, G=10.0, C=0.5, H=-0.01, K=20.0, delta=0.3, B=3, mu_bar=1.8)


@st.composite
def corollary_constants(draw):
    c = dict(
        F=draw(st.floats(0.5, 3.0)), G=draw(st.floats(1.0, 50.0)), C=draw(st.floats(0.1, 0.9)),
        H=-draw(st.floats(0.0, 0.01)), K=draw(st.floats(1.0, 30.0)), delta=draw(st.floats(0.0, 0.8)),
        B=draw(st.integers(1, 8)), mu_bar=draw(st.floats(0.2, 3.0)),
    )
    chf = c["C"] + c["H"] * c["F"]
    upper = (chf * (1 - c["delta"]) ** 2 + c["H"] * c["K"] * (1 - c["delta"])) / (c["G"] * (c["F"] + c["K"]))
    assume(chf > 0 and upper > 1e-9)
    return c, upper


class TestExplicitRate:
    def test_branches_meet_at_crossover(self):
        M = corollary_rate(**COROLLARY, alpha_max=1e-6)["M"]
        out = corollary_rate(**COROLLARY, alpha_max=M)
        l1, l2 = out["candidates"]
        assert abs(l1 - l2) <= 1e-9
        assert out["lambda"] == pytest.approx(out["lambda_mid"], abs=1e-9)

    def test_small_step_rate_tends_to_one(self):
        out = corollary_rate(**COROLLARY, alpha_max=1e-12)
        assert out["branch"] == 1 and 1 - out["lambda"] < 1e-11

    def test_upper_end_is_not_geometric(self):
        upper = corollary_rate(**COROLLARY, alpha_max=1e-6)["alpha_upper"]
        out = corollary_rate(**COROLLARY, alpha_max=upper)
        assert out["branch"] == 2 and out["lambda"] == pytest.approx(1.0, abs=1e-12)

    def test_rejects_outside_interval(self):
        upper = corollary_rate(**COROLLARY, alpha_max=1e-6)["alpha_upper"]
        with pytest.raises(ValueError):
            corollary_rate(**COROLLARY, alpha_max=upper * 1.01)
        with pytest.raises(ValueError):
            corollary_rate(**COROLLARY, alpha_max=0.0)

    def test_rejects_non_contracting_delta(self):
        with pytest.raises(ValueError):
            corollary_rate(**{**COROLLARY, "delta": 1.0}, alpha_max=1e-6)

    @settings(max_examples=200, deadline=None)
    @given(corollary_constants(), st.floats(1e-3, 0.999))
    def test_interval_holds_and_branches_agree(self, cu, frac):
        c, upper = cu
        out = corollary_rate(**c, alpha_max=upper * frac)
        assert out["interval_ok"]
        assert 0 < out["lambda"] < 1
        at_m = corollary_rate(**c, alpha_max=out["M"])
        assert abs(at_m["candidates"][0] - at_m["candidates"][1]) <= 1e-9
        lo, hi = rate_interval(out["lambda"], **c)
        assert lo <= hi * (1 + 1e-9) + 1e-15

    @settings(max_examples=100, deadline=None)
    @given(corollary_constants(), st.floats(0.01, 0.98))
    def test_first_branch_decreasing(self, cu, frac):
        c, upper = cu
        M = corollary_rate(**c, alpha_max=upper * 1e-3)["M"]
        top = min(M, upper)
        a, b = top * frac * 0.5, top * frac
        la, lb = corollary_rate(**c, alpha_max=a), corollary_rate(**c, alpha_max=b)
        assert la["branch"] == lb["branch"] == 1
        assert lb["lambda"] < la["lambda"]


class TestInexactDescentAudit:
    def test_noiseless(self, suite5):
        theta = 0.1
        vs, r = inexact_gd_run(suite5, theta, np.zeros((80, 1)), lambda k, v: np.repeat(v[None, :], 5, 0), [2.0], 80)
        u = np.repeat(vs[:-1, None, :], 5, axis=1)
        rep = audit_inexact_descent(vs, r, theta, 0.99, suite5.stats(), u, np.zeros((80, 1)), beta=2.0)
        assert rep["passed"]
        assert rep["rhs_at_min"] == pytest.approx(2 * r[0])

    def test_start_at_optimum(self, suite5):
        xs = 0.7329887165
        vs, r = inexact_gd_run(suite5, 0.1, np.zeros((20, 1)), lambda k, v: np.repeat(v[None, :], 5, 0), [xs], 20)
        u = np.repeat(vs[:-1, None, :], 5, axis=1)
        rep = audit_inexact_descent(vs, r, 0.1, 0.99, suite5.stats(), u, np.zeros((20, 1)), beta=2.0)
        assert rep["passed"] and np.max(r) < 1e-8

    @pytest.mark.parametrize("seed", range(10))
    def test_noisy_runs(self, suite5, seed):
        vs, r, theta, lam, st_, u, e, beta = descent_setup(suite5, seed)
        assert audit_inexact_descent(vs, r, theta, lam, st_, u, e, beta=beta)["passed"]

    def test_rejects_hypothesis_violations(self, suite5):
        vs, r, theta, lam, st_, u, e, beta = descent_setup(suite5, 0)
        with pytest.raises(InadmissibleLambdaError, match="theta"):
            audit_inexact_descent(vs, r, 5.0, lam, st_, u, e, beta=beta)
        with pytest.raises(InadmissibleLambdaError, match="lambda"):
            audit_inexact_descent(vs, r, theta, 0.1, st_, u, e, beta=beta)
        with pytest.raises(InadmissibleLambdaError, match="beta"):
            audit_inexact_descent(vs, r, theta, lam, st_, u, e, beta=1.0)


def _chain_inputs(suite5, seed=0, B=6):
    seq = make_periodic_partition(5, 2, seed=seed)
    sched = PushSumSchedule(seq)
    D = StepSizes(SENSOR_STEP_SIZES)
    tr = run_push_diging(seq, suite5, D, np.random.default_rng(seed).uniform(0, 1, 5), 300,
                         record_aux=True, schedule=sched)
    consts = empirical_consensus_constants(seq, B, 300, schedule=sched)
    nb = norm_bounds(seq, 300, sched)
    st_ = suite5.stats()
    beta = 2 * st_["L_hat"] / st_["mu_hat"]
    floor = math.sqrt(1 - D.alpha_max * st_["mu_bar"] * beta / (2 * (beta + 1)))
    lo = max(floor, consts.delta ** (1 / B), 0.5)
    lam = lo + 0.01 * (1 - lo)
    return tr, D, consts, nb, st_, beta, lam


class TestGainChainAudit:
    def test_applicable_arrows_hold(self, suite5):
        tr, D, consts, nb, st_, beta, lam = _chain_inputs(suite5)
        g = evaluate_gains(st_, nb, D, consts, lam, beta, 1.0, waive={"projection-norm"}, **trace_omegas(tr, consts.B))
        rep = audit_gain_chain(tr, g, nb, consts, st_["L_hat"])
        assert rep["passed"] and rep["violations"] == 0
        names = {a["name"]: a["status"] for a in rep["arrows"]}
        assert names["3: z -> h"] == "not-applicable"
        assert not rep["all_arrows_established"]
        assert all(s["status"] == "pass" for s in rep["sub_inequalities"])

    def test_pointwise_arrows_hold_for_any_lambda(self, suite5):
        # output and tracking arrows are pointwise bounds, valid for every lambda
        tr, D, consts, nb, st_, beta, _ = _chain_inputs(suite5, seed=1)
        g = evaluate_gains(st_, nb, D, consts, 0.3, beta, 1.0,
                           waive={"projection-norm", "descent-floor", "contraction-root"},
                           **trace_omegas(tr, consts.B))
        rep = audit_gain_chain(tr, g, nb, consts, st_["L_hat"])
        status = {a["name"]: a["status"] for a in rep["arrows"]}
        assert status["2b: h -> y"] == "pass" and status["4: q -> z"] == "pass"

    def test_refuses_non_finite_trace(self, suite5):
        tr, D, consts, nb, st_, beta, lam = _chain_inputs(suite5)
        g = evaluate_gains(st_, nb, D, consts, lam, beta, 1.0, waive={"projection-norm"}, **trace_omegas(tr, consts.B))
        tr.h[5, 0, 0] = np.inf
        with pytest.raises(ValueError, match="non-finite"):
            audit_gain_chain(tr, g, nb, consts, st_["L_hat"])

    def test_requires_auxiliary_record(self, suite5):
        tr, D, consts, nb, st_, beta, lam = _chain_inputs(suite5)
        g = evaluate_gains(st_, nb, D, consts, lam, beta, 1.0, waive={"projection-norm"})
        tr.z = None
        with pytest.raises(ValueError, match="auxiliary"):
            audit_gain_chain(tr, g, nb, consts, st_["L_hat"])
