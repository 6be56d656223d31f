import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import halving_ode_spec, lag_spec, positive_kernel_spec, sign_change_spec
from impulsive_dde.analysis import (
    INV_E,
    EstimateReport,
    HypothesesNotMet,
    decay_exponent,
    estimate_k,
    exponential_constants,
    fit_decay,
    gronwall_bound,
    induction_bound_holds,
    input_probe,
    positivity_functional,
    positivity_test,
    solution_bound,
    theorem2_report,
    theorem3_constants,
    theorem3_report,
    verify_exponential_estimate,
)
from impulsive_dde.fundamental import fundamental_function, fundamental_solution
from impulsive_dde.integrator import MeshOptions
from impulsive_dde.model import DelayTerm, DeviationDescriptor, FunctionDescriptor, ImpulseSchedule, ProblemSpec

OPTS = MeshOptions(1e-2)


def halving_X(t):
    return 2.0 ** -np.floor(t) * np.exp(-t)


class TestPositivity:
    @pytest.mark.parametrize(
        "a, d, verdict",
        [(1.0, 1 / 3, "pass"), (1.0, 0.5, "inconclusive"), (0.0, 0.5, "pass"), (0.5, 0.3, "pass")],
    )
    def test_constant_cases(self, a, d, verdict):
        res = positivity_test(lag_spec(a, d), 3.0)
        assert res.verdict == verdict
        assert res.max_value == pytest.approx(a * d)
        assert res.threshold == INV_E

    def test_functional_ramps_up_from_zero(self):
        spec = lag_spec(1.0, 1 / 3)
        assert positivity_functional(spec, 0.1) == pytest.approx(0.1)
        assert positivity_functional(spec, 2.0) == pytest.approx(1 / 3)

    def test_negative_coefficient_ignored(self):
        spec = lag_spec(-3.0, 1.0)
        assert positivity_test(spec, 2.0).max_value == 0.0

    def test_sums_over_terms(self):
        terms = tuple(DelayTerm(FunctionDescriptor.constant(0.2), DeviationDescriptor.lag(d)) for d in (0.5, 1.0))
        assert positivity_functional(ProblemSpec(terms=terms), 2.0) == pytest.approx(0.3)


class TestEstimateK:
    def test_no_impulses(self):
        assert estimate_k(lag_spec(1.0, 0.0), 5.0, options=OPTS) == 1.0 + 1e-9

    def test_geometric_oracle(self):
        # at t = n the sum is sum_{m < n} (1 / (2e))^m, the largest value on [0, 10]
        q = 1 / (2 * math.e)
        oracle = (1 - q**10) / (1 - q)
        assert estimate_k(halving_ode_spec(), 10.0, options=MeshOptions(1e-3)) == pytest.approx(oracle, abs=1e-6)

    def test_sign_change_not_met(self):
        with pytest.raises(HypothesesNotMet):
            estimate_k(sign_change_spec(), 2.0, options=OPTS)

    def test_positive_kernel(self):
        k = estimate_k(positive_kernel_spec(), 10.0, options=OPTS)
        assert k > 1.0


class TestConstants:
    @pytest.mark.parametrize(
        "k, sigma, nu",
        [(2.0, 1.0, math.log(2)), (1.5, 0.5, math.log(3) / 0.5)],
    )
    def test_decay_exponent(self, k, sigma, nu):
        assert decay_exponent(k, sigma) == pytest.approx(nu)

    def test_ln3_value(self):
        assert decay_exponent(1.5, 0.5) == pytest.approx(2.197225, abs=1e-6)

    @pytest.mark.parametrize("k, sigma", [(1.0, 1.0), (0.5, 1.0), (2.0, 0.0)])
    def test_rejects(self, k, sigma):
        with pytest.raises(ValueError):
            decay_exponent(k, sigma)

    @settings(max_examples=50, deadline=None)
    @given(k=st.floats(1.001, 1e4), factor=st.floats(1.01, 10.0), sigma=st.floats(0.1, 5.0))
    def test_nu_decreases_with_k(self, k, factor, sigma):
        assert decay_exponent(k * factor, sigma) < decay_exponent(k, sigma)

    def test_theorem2(self):
        rep = exponential_constants(2.0, 1.0, 0.5, 3.0)
        assert rep.provenance == "theorem-2"
        assert rep.nu == pytest.approx(math.log(2))
        assert rep.N == pytest.approx(max(0.5 * 8, 3.0))

    def test_theorem3_collapse(self):
        k = 3.0
        for M, Q, m in [(0.0, 0.0, 1), (0.0, 2.0, 0)]:
            rep = theorem3_constants(k, 0.7, M, Q, m)
            assert rep.N == pytest.approx(k**3 / (k - 1) ** 2)

    def test_theorem3_example(self):
        rep = theorem3_constants(2.0, 1.0, 1 / 6, 1.0, 1)
        assert rep.nu == pytest.approx(math.log(2))
        assert rep.N == pytest.approx(7 / 6 * 8 * math.e)
        assert rep.N == pytest.approx(25.37, abs=5e-3)

    @settings(max_examples=50, deadline=None)
    @given(
        k=st.floats(1.01, 50.0),
        sigma=st.floats(0.1, 3.0),
        M=st.floats(0.0, 5.0),
        Q=st.floats(0.0, 2.0),
        m=st.integers(0, 3),
    )
    def test_theorem3_dominates_core(self, k, sigma, M, Q, m):
        rep = theorem3_constants(k, sigma, M, Q, m)
        core = (1 + M) * math.exp(m * Q * sigma) * k**3 / (k - 1) ** 2
        assert rep.N >= core * (1 - 1e-12)
        assert rep.nu == pytest.approx(math.log(k / (k - 1)) / sigma)

    def test_theorem3_rejects_negative(self):
        with pytest.raises(ValueError):
            theorem3_constants(2.0, 1.0, -1.0, 0.0, 1)


class TestGronwall:
    def test_example(self):
        assert gronwall_bound(sign_change_spec(), 0.4, 0.6) == pytest.approx(7 / 6 * math.exp(0.2))
        # (7/6) e^0.2 = 1.4249699 (the rounded 1.424838 sometimes quoted is off in the fourth place)
        assert gronwall_bound(sign_change_spec(), 0.4, 0.6) == pytest.approx(1.4249699, abs=1e-7)

    def test_zero_coefficient(self):
        spec = lag_spec(0.0, 0.2, ImpulseSchedule((1.0,), (-3.0,)))
        assert gronwall_bound(spec, 0.2, 0.9) == 4.0

    def test_no_later_impulse(self):
        assert gronwall_bound(lag_spec(1.0, 0.2), 0.0, 1.0) == pytest.approx(math.e)

    def test_straddle_rejected(self):
        with pytest.raises(ValueError, match="straddle"):
            gronwall_bound(sign_change_spec(), 0.2, 0.5)

    def test_bounds_worked_example_column(self):
        spec = sign_change_spec()
        G = fundamental_function(spec, 0.4, 1.0, MeshOptions(1e-3))
        for t in np.linspace(0.4, 2 / 3, 30):
            side = "left" if t == 2 / 3 else "right"
            assert abs(G(t, side)) <= gronwall_bound(spec, 0.4, t)

    @settings(max_examples=50, deadline=None)
    @given(s=st.floats(0.34, 0.66), a=st.floats(0, 1), b=st.floats(0, 1))
    def test_monotone_in_t(self, s, a, b):
        spec = sign_change_spec()
        t1, t2 = sorted((s + a * (2 / 3 - s), s + b * (2 / 3 - s)))
        assert gronwall_bound(spec, s, t1) <= gronwall_bound(spec, s, t2)


class TestVerification:
    def test_exact_exponential(self):
        spec = lag_spec(1.0, 0.0)
        rep = EstimateReport(1.0 + 1e-9, 1.0, 1.0, "fitted")
        res = verify_exponential_estimate(spec, rep, 5.0, np.linspace(0, 5, 51), MeshOptions(1e-3))
        assert res.passed
        assert abs(res.worst_margin) <= 1e-12

    def test_theorem2_chain_closed_form(self):
        spec = halving_ode_spec()
        rep = theorem2_report(spec, 10.0, MeshOptions(1e-2))
        res = verify_exponential_estimate(spec, rep, 10.0, np.linspace(0, 10, 101), MeshOptions(1e-2))
        assert res.passed
        X = fundamental_solution(spec, 10.0, MeshOptions(1e-2))
        np.testing.assert_allclose(X(np.linspace(0, 9.95, 50)), halving_X(np.linspace(0, 9.95, 50)), rtol=1e-9)

    def test_inflated_nu_fails(self):
        spec = halving_ode_spec()
        rep = theorem2_report(spec, 10.0, OPTS)
        res = verify_exponential_estimate(spec, replace(rep, nu=10 * rep.nu), 10.0, options=OPTS)
        assert not res.passed
        assert res.worst_margin < 0

    def test_theorem3_chain(self):
        spec = positive_kernel_spec()
        rep = theorem3_report(spec, 10.0, OPTS)
        assert rep.provenance == "theorem-3"
        assert verify_exponential_estimate(spec, rep, 10.0, options=OPTS).passed

    def test_report_requires_impulses(self):
        with pytest.raises(HypothesesNotMet):
            theorem2_report(lag_spec(1.0, 0.0), 3.0, OPTS)

    def test_induction_bound(self):
        spec = halving_ode_spec()
        k = estimate_k(spec, 10.0, options=OPTS)
        X = fundamental_solution(spec, 10.0, OPTS)
        assert induction_bound_holds([X(float(j)) for j in range(1, 11)], k)

    def test_induction_bound_detects_growth(self):
        assert not induction_bound_holds([1.0, 1.0, 1.0], 2.0)


class TestFitDecay:
    def test_exponential(self):
        t = np.linspace(0, 10, 50)
        N, nu = fit_decay(np.column_stack([t, np.exp(-t)]))
        assert nu == pytest.approx(1.0, abs=1e-6)
        assert N == pytest.approx(1.0, abs=1e-6)

    def test_halving_closed_form(self):
        t = np.arange(0.0, 11.0)
        _, nu = fit_decay(np.column_stack([t, halving_X(t)]))
        assert nu == pytest.approx(1 + math.log(2), abs=1e-9)

    def test_constant(self):
        _, nu = fit_decay([(t, 3.0) for t in range(12)])
        assert nu == pytest.approx(0.0, abs=1e-12)

    def test_all_below_floor(self):
        with pytest.raises(ValueError):
            fit_decay([(t, 0.0) for t in range(12)])


class TestProbes:
    def test_zero_inputs(self):
        spec = lag_spec(0.5, 0.3, ImpulseSchedule.periodic(1.0, 20, 1.0))
        for cls in ("bounded", "vanishing"):
            res = input_probe(spec, cls, trials=3, horizon=5.0, options=OPTS, zero_inputs=True)
            assert res.verdict
            assert np.all(res.sup_abs == 0.0)

    def test_bounded_class(self):
        spec = lag_spec(0.5, 0.3, ImpulseSchedule.periodic(1.0, 20, 1.0))
        res = input_probe(spec, "bounded", trials=50, horizon=20.0, options=MeshOptions(2e-2))
        assert res.verdict and res.label == "bounded"
        assert np.all(np.isfinite(res.sup_abs))

    def test_vanishing_class(self):
        res = input_probe(positive_kernel_spec(), "vanishing", trials=5, horizon=30.0, options=MeshOptions(2e-2))
        assert res.label == "decaying"

    def test_exponential_class(self):
        spec = lag_spec(0.5, 0.3, ImpulseSchedule.periodic(1.0, 20, 1.0))
        res = input_probe(spec, "exponential", trials=5, horizon=20.0, options=MeshOptions(2e-2))
        assert res.verdict
        assert all(lam > 0 for _, lam in res.fits)

    def test_seed_reproducible(self):
        spec = positive_kernel_spec()
        a = input_probe(spec, "bounded", trials=3, horizon=4.0, seed=5, options=OPTS)
        b = input_probe(spec, "bounded", trials=3, horizon=4.0, seed=5, options=OPTS)
        np.testing.assert_array_equal(a.sup_abs, b.sup_abs)
        assert a.as_lines()[2] == "seed = 5"

    def test_unknown_class(self):
        with pytest.raises(ValueError):
            input_probe(positive_kernel_spec(), "periodic", trials=1)


def test_solution_bound_arithmetic():
    rep = EstimateReport(2.0, 0.5, 4.0, "theorem-3")
    b = solution_bound(rep, 2.0, sup_r=1.0, sup_alpha=1.0, x0=0.5, sup_phi=1.0, sup_A_near_zero=0.5, delta=0.2, m=1)
    assert b == pytest.approx(4 * 0.5 + 4 / 0.5 + 2.0 + 0.5 * (4 / 0.5) * math.exp(0.1))
