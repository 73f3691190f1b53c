import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchdwell.bounds import estimate_min_adt
from switchdwell.certify import (
    ComparisonFunction,
    NonlinearCertificate,
    NotFound,
    QuadraticCertificate,
    SampleEvaluationError,
    certificate_from_json,
    certificate_to_json,
    check_adt_quadratic,
    check_dwell_quadratic,
    check_nonlinear_sampled,
    default_samples,
    gamma_transform,
    psi_eps,
    search_dwell_quadratic,
)
from switchdwell.linalg import SpdMatrix, expm, gen_eig_max, lyap_solve, symmetric_eigs
from switchdwell.signals import SignalClassSpec, SwitchingSignal, sample_signal
from switchdwell.sim import SwitchedSystem, flow_linear, switch_counts

RHO = 0.001
TAU = 2.1


@pytest.fixture(scope="module")
def searched(ex1_system):
    return search_dwell_quadratic(ex1_system, RHO, TAU)


def sq_norm_cert(coefs, rho_c=1.0, chi_c=1.0):
    return NonlinearCertificate(
        V=[(lambda x, c=c: c * float(x @ x)) for c in coefs],
        grad=[(lambda x, c=c: 2.0 * c * x) for c in coefs],
        alpha1=ComparisonFunction.power(min(coefs), 2.0),
        alpha2=ComparisonFunction.power(max(coefs), 2.0),
        rho_fn=ComparisonFunction.linear(rho_c),
        chi=ComparisonFunction.linear(chi_c),
    )


class TestQuadraticCertificate:
    def test_alpha_zero_needs_unit_gain(self):
        with pytest.raises(ValueError, match="common"):
            QuadraticCertificate([np.eye(2)], 0.1, 0.0, 1.5, 1.0)

    def test_rejects_nonpositive_rho(self):
        with pytest.raises(ValueError):
            QuadraticCertificate([np.eye(2)], 0.0, 0.1, 1.0, 1.0)

    def test_overshoot(self):
        cert = QuadraticCertificate([np.diag([1.0, 4.0]), np.diag([2.0, 9.0])], 0.1, 0.1, 3.0, 20.0)
        assert cert.overshoot == 3.0

    def test_json_round_trip(self, ex1_dwell_cert):
        back = certificate_from_json(certificate_to_json(ex1_dwell_cert))
        assert back.kind == "dwell"
        for a, b in zip(back.P, ex1_dwell_cert.P):
            np.testing.assert_array_equal(a.matrix, b.matrix)

    def test_json_nested_and_malformed(self, ex1_dwell_cert):
        assert certificate_from_json({"certificate": certificate_to_json(ex1_dwell_cert)}).tau == TAU
        with pytest.raises(ValueError):
            certificate_from_json({"P": [], "tau": 1.0})


class TestDwell:
    def test_single_mode(self):
        sys = SwitchedSystem.linear([-np.eye(2)])
        assert check_dwell_quadratic(sys, [np.eye(2)], 0.5, 1.0)

    def test_identity_fails_on_flow_of_first_mode(self, ex1_system):
        # A1^T + A1 + 2 rho I has eigenvalues -0.198 +- 1: the first flow
        # condition fails; every jump condition holds
        v = check_dwell_quadratic(ex1_system, [np.eye(2), np.eye(2)], RHO, TAU)
        assert not v
        assert (v.condition, v.pair) == ("flow", (1, 1))
        assert v.margin == pytest.approx(1.0 - 0.2 + 2 * RHO, abs=1e-8)
        assert [f[0] for f in v.failures] == ["flow"]

    def test_fixture_certified(self, ex1_system, ex1_dwell_cert):
        assert check_dwell_quadratic(ex1_system, ex1_dwell_cert.P, RHO, TAU)

    def test_search_finds_normalized(self, ex1_system, searched):
        assert isinstance(searched, QuadraticCertificate)
        assert check_dwell_quadratic(ex1_system, searched.P, RHO, TAU)
        for p in searched.P:
            lo, hi = p.eig_bounds()
            assert lo >= 1.0 - 1e-9 and hi <= 100.0 + 1e-9

    @pytest.mark.parametrize("tau", [0.1, 0.5, 1.5])
    def test_search_not_found(self, ex1_system, tau):
        res = search_dwell_quadratic(ex1_system, RHO, tau)
        assert isinstance(res, NotFound)
        assert not res
        # the cutting-plane bound proves infeasibility inside the box
        assert res.lower_bound > 0

    def test_search_single_mode(self):
        sys = SwitchedSystem.linear([[[-1.0, 3.0], [0.0, -2.0]]])
        res = search_dwell_quadratic(sys, 0.1, 0.7)
        assert check_dwell_quadratic(sys, res.P, 0.1, 0.7)

    def test_search_rejects_slow_mode(self, ex1_system):
        with pytest.raises(ValueError):
            search_dwell_quadratic(ex1_system, 0.05, TAU)

    def test_source_indexed_jump(self, ex1_system, searched):
        # the certified condition flows in the source mode then measures with v_j
        e1 = expm(ex1_system.matrices[0], TAU)
        p1, p2 = (p.matrix for p in searched.P)
        assert symmetric_eigs(e1.T @ p2 @ e1 - math.exp(-2 * RHO * TAU) * p1)[-1] < 0

    def test_trajectory_contraction(self, ex1_system, searched):
        # v decays along each interval and contracts over each full dwell interval
        ps = [p.matrix for p in searched.P]
        for seed in range(10):
            sig = sample_signal(SignalClassSpec.dwell(TAU), 60.0, seed, 2)
            traj = flow_linear(ex1_system, sig, [1.0, -0.5], 60.0, dt=0.25)
            for k in range(len(traj) - 1):
                t0, t1 = traj.times[k], traj.times[k + 1]
                md = traj.modes[k]
                v0 = math.sqrt(traj.states[k] @ ps[md - 1] @ traj.states[k])
                x1 = traj.states[k + 1]
                v1 = math.sqrt(x1 @ ps[md - 1] @ x1)
                assert v1 <= math.exp(-RHO * (t1 - t0)) * v0 * (1 + 1e-9)


class TestAdt:
    def test_common_lyapunov(self):
        sys = SwitchedSystem.linear([-np.eye(2), -2 * np.eye(2)])
        for tau in (0.01, 1.0, 100.0):
            cert = QuadraticCertificate([np.eye(2), np.eye(2)], 0.5, 0.0, 1.0, tau)
            assert check_adt_quadratic(sys, cert)

    def test_alpha_zero_distinct_matrices_fail(self):
        sys = SwitchedSystem.linear([-np.eye(2), -2 * np.eye(2)])
        cert = QuadraticCertificate([np.eye(2), 1.5 * np.eye(2)], 0.5, 0.0, 1.0, 1.0)
        v = check_adt_quadratic(sys, cert)
        assert not v
        assert v.condition == "gain"

    @pytest.mark.parametrize("alpha", np.geomspace(1e-3, 0.0299, 15))
    def test_example1_sweep_fails_at_short_tau(self, ex1_system, alpha):
        ps = [lyap_solve(a + (alpha + 1e-6) * np.eye(2), np.eye(2)) for a in ex1_system.matrices]
        mu = max(gen_eig_max(ps[0], ps[1]), gen_eig_max(ps[1], ps[0]))
        cert = QuadraticCertificate(ps, 1e-6, alpha, math.sqrt(mu), TAU)
        v = check_adt_quadratic(ex1_system, cert)
        assert not v
        assert v.condition == "tau"

    def test_example1_random_candidates_fail(self, ex1_system, rng):
        for _ in range(200):
            ps = []
            for _ in range(2):
                b = rng.standard_normal((2, 2))
                ps.append(b @ b.T + 0.1 * np.eye(2))
            alpha = rng.uniform(1e-3, 1.0)
            nu = math.exp(alpha * TAU)
            cert = QuadraticCertificate(ps, 1e-3, alpha, nu, TAU)
            assert not check_adt_quadratic(ex1_system, cert)

    def test_estimated_certificate_round_trip(self, ex1_system):
        report = estimate_min_adt(ex1_system, 1e-6)
        assert check_adt_quadratic(ex1_system, report.certificate)
        back = certificate_from_json(report.summary())
        assert check_adt_quadratic(ex1_system, back)

    def test_multiplicative_bound_for_unconstrained_signals(self, ex1_system):
        report = estimate_min_adt(ex1_system, 1e-6)
        cert = report.certificate
        ps = [p.matrix for p in cert.P]
        rng = np.random.default_rng(0)
        for _ in range(20):
            gaps = rng.exponential(0.7, 60)
            times = np.concatenate([[0.0], np.cumsum(gaps)])
            modes = [1 + (k % 2) for k in range(len(times))]
            sig = SwitchingSignal(times, modes)
            x0 = rng.standard_normal(2)
            traj = flow_linear(ex1_system, sig, x0, 30.0, dt=0.1)
            n = switch_counts(traj)
            v0 = math.sqrt(x0 @ ps[traj.modes[0] - 1] @ x0)
            for t, md, x, nn in zip(traj.times, traj.modes, traj.states, n):
                # at a switching instant the state is measured in the incoming mode
                extra = 1 if t > 0 and t in sig.breakpoints else 0
                v = math.sqrt(x @ ps[md - 1] @ x)
                bound = math.exp(cert.alpha * cert.tau * (max(nn, 1) + extra - 1) - (cert.rho + cert.alpha) * t) * v0
                assert v <= bound * (1 + 1e-9)


class TestComparison:
    def test_linear_and_power(self):
        f = ComparisonFunction.power(2.0, 3.0)
        assert f(2.0) == 16.0
        assert f.inv(16.0) == pytest.approx(2.0, rel=1e-15)
        assert f.deriv(1.0) == 6.0
        assert f.validate()

    def test_bisection_inverse_and_central_difference(self):
        f = ComparisonFunction(lambda s: s + s**3, "Kinf")
        ys = np.array([0.0, 0.3, 5.0, 1e4])
        np.testing.assert_allclose(f(f.inv(ys)), ys, rtol=1e-13)
        assert f.deriv(0.7) == pytest.approx(1 + 3 * 0.49, rel=1e-8)

    def test_bounded_k_is_not_kinf(self):
        f = ComparisonFunction(lambda s: s / (1 + s), "Kinf", name="sat")
        with pytest.raises(ValueError, match="unbounded"):
            f.validate()
        assert ComparisonFunction(lambda s: s / (1 + s), "K").validate()

    def test_not_increasing(self):
        with pytest.raises(ValueError):
            ComparisonFunction(lambda s: np.sin(s), "K").validate()

    def test_nonzero_origin(self):
        with pytest.raises(ValueError):
            ComparisonFunction(lambda s: s + 1.0, "K").validate()


class TestPsi:
    def test_identity_rho(self):
        t = np.array([0.0, 0.5, 3.0, 40.0])
        np.testing.assert_allclose(psi_eps(lambda s: s, 1.0, t), t, rtol=1e-15)

    def test_square_rho(self):
        assert psi_eps(lambda s: s**2, 1.0, 1.0) == pytest.approx(0.75, abs=1e-14)

    def test_zero(self):
        assert psi_eps(lambda s: s**2 + s, 3.0, 0.0) == 0.0

    def test_rejects_negative_t(self):
        with pytest.raises(ValueError):
            psi_eps(lambda s: s, 1.0, -1.0)

    @settings(max_examples=200)
    @given(st.floats(0.1, 5), st.floats(0.5, 3), st.floats(0, 20), st.floats(0, 20))
    def test_lipschitz_and_upper_bound(self, eps, p, t1, t2):
        rho = lambda s: np.power(s, p)  # noqa: E731
        a, b = psi_eps(rho, eps, t1), psi_eps(rho, eps, t2)
        assert abs(a - b) <= eps * abs(t1 - t2) * (1 + 1e-9) + 1e-12
        assert a <= min(t1**p, eps * t1) + 1e-12

    @settings(max_examples=200)
    @given(st.floats(0.5, 3), st.floats(0.01, 10))
    def test_matches_closed_form(self, c, t):
        # rho(s) = c s^2, eps = 1: minimiser s = 1/(2c) when inside [0, t]
        s_star = min(t, 1.0 / (2.0 * c))
        exact = c * s_star**2 + (t - s_star)
        assert psi_eps(lambda s: c * s**2, 1.0, t) == pytest.approx(exact, rel=1e-12, abs=1e-14)


class TestGamma:
    def test_identity_case(self):
        g = gamma_transform(lambda s: 1.5 * s, 1.5, 0.5)
        s = np.array([1e-3, 0.2, 1.0, 7.0, 300.0])
        np.testing.assert_allclose(g(s), s, rtol=1e-9)
        assert g(1.0) == 1.0
        assert g(0.0) == 0.0

    def test_power_law(self):
        # Psi(r) = c r when c <= eps, so gamma(s) = s^((1 + alpha) / c)
        g = gamma_transform(lambda s: 0.5 * s, 2.0, 1.0)
        s = np.array([0.1, 0.5, 2.0, 10.0])
        np.testing.assert_allclose(g(s), s**4, rtol=1e-9)
        np.testing.assert_allclose(g.deriv(s), 4 * s**3, rtol=1e-9)

    def test_jump_gain_attached(self):
        assert gamma_transform(lambda s: s, 1.0, 0.3, tau=2.0).jump_gain == pytest.approx(math.exp(0.6))

    def test_validation(self):
        with pytest.raises(ValueError):
            gamma_transform(lambda s: s, 0.0, 1.0)
        with pytest.raises(ValueError):
            gamma_transform(lambda s: s, 1.0, -1.0)

    def test_increasing_and_jump_bound(self):
        # nonlinear decay rate: rho(s) = s + s^3, eps = 1, chi linear
        alpha, tau = 0.4, 1.5
        rho = lambda s: s + s**3  # noqa: E731
        g = gamma_transform(rho, 1.0, alpha)
        grid = np.geomspace(1e-3, 1e2, 60)
        vals = g(grid)
        assert np.all(np.diff(vals) > 0)
        # jump gain chi(s) = exp(tau') s, with tau' chosen so tau* = alpha tau / (1 + alpha)
        tau_star = alpha * tau / (1 + alpha)
        chi = lambda s: math.exp(tau_star) * s  # noqa: E731
        for s in np.geomspace(1e-2, 10, 25):
            assert g(chi(g.inv(s))) <= math.exp(alpha * tau) * s * (1 + 1e-6)

    def test_transformed_decay(self):
        # V = |x|^2 for x' = -x gives D V = -2 V; with rho(s) = 2 s the
        # transformed W = gamma(V) must decay at rate (1 + alpha)
        alpha = 0.25
        g = gamma_transform(lambda s: 2.0 * s, 2.0, alpha)
        for x in default_samples(2)[::7]:
            v = float(x @ x)
            dw = g.deriv(v) * (-2.0 * v)
            assert dw <= -(1 + alpha) * g(v) * (1 - 1e-9)


class TestNonlinearSampled:
    def test_trivial_consistent(self):
        sys = SwitchedSystem.nonlinear([lambda x: -x], 2)
        assert check_nonlinear_sampled(sys, sq_norm_cert([1.0]))

    def test_jump_violation(self):
        sys = SwitchedSystem.nonlinear([lambda x: -x, lambda x: -x], 2)
        v = check_nonlinear_sampled(sys, sq_norm_cert([1.0, 2.0]))
        assert not v
        assert (v.condition, v.pair) == ("jump", (2, 1))
        assert v.to_json()["verdict"] == "violated"

    def test_flow_violation_by_quotient(self):
        sys = SwitchedSystem.nonlinear([lambda x: -0.1 * x], 2)
        cert = sq_norm_cert([1.0])
        cert = NonlinearCertificate(cert.V, cert.alpha1, cert.alpha2, cert.rho_fn, cert.chi)  # no gradient
        v = check_nonlinear_sampled(sys, cert)
        assert v.condition == "flow"

    def test_sandwich_violation(self):
        sys = SwitchedSystem.nonlinear([lambda x: -x], 2)
        cert = sq_norm_cert([1.0])
        cert = NonlinearCertificate(cert.V, ComparisonFunction.power(2.0, 2.0), cert.alpha2, cert.rho_fn, cert.chi)
        assert check_nonlinear_sampled(sys, cert).condition == "sandwich"

    def test_evaluation_error(self):
        sys = SwitchedSystem.nonlinear([lambda x: -x], 2)
        cert = sq_norm_cert([1.0])

        def broken(x):
            raise ZeroDivisionError("boom")

        cert = NonlinearCertificate([broken], cert.alpha1, cert.alpha2, cert.rho_fn, cert.chi)
        with pytest.raises(SampleEvaluationError):
            check_nonlinear_sampled(sys, cert)

    def test_rejects_origin(self):
        sys = SwitchedSystem.nonlinear([lambda x: -x], 2)
        with pytest.raises(ValueError):
            check_nonlinear_sampled(sys, sq_norm_cert([1.0]), samples=[[0.0, 0.0]])

    def test_default_samples(self):
        assert default_samples(2).shape == (9 * 64, 2)
        assert default_samples(3).shape == (9 * 200, 3)

    @pytest.mark.parametrize("with_grad", [True, False])
    def test_quadratic_translation(self, ex1_system, with_grad):
        cert = estimate_min_adt(ex1_system, 1e-6).certificate
        nl = NonlinearCertificate.from_quadratic(cert)
        if not with_grad:
            nl = NonlinearCertificate(nl.V, nl.alpha1, nl.alpha2, nl.rho_fn, nl.chi, nl.epsilon)
        assert check_nonlinear_sampled(ex1_system, nl)

    def test_translation_of_failed_cert_is_flagged(self, ex1_system):
        bad = QuadraticCertificate([np.eye(2), np.eye(2)], 1e-3, 0.01, 1.0, 1.0)
        assert not check_adt_quadratic(ex1_system, bad)
        assert not check_nonlinear_sampled(ex1_system, NonlinearCertificate.from_quadratic(bad))

    def test_spd_wrapped_inputs(self, ex1_system, ex1_dwell_cert):
        ps = [SpdMatrix(p.matrix) for p in ex1_dwell_cert.P]
        assert check_dwell_quadratic(ex1_system, ps, RHO, TAU)
