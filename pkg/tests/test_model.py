import math

import numpy as np
import pytest

from gallop.model import (DimensionalParams, ModelParams, NormalFormParams,
                          State, cf, cf_prime, energy, galloping_field,
                          jacobian, nondimensionalize, normal_form_jacobian,
                          normal_form_rhs, potential, potential_grad, rhs)
from gallop.equilibria import classify_matrix, find_equilibria, hopf_velocity
from gallop.integrator import IntegratorConfig, integrate

Q_REF = ModelParams(b=0.5, e=-0.01, v=1.875)


def central_diff(f, x, h):
    return (f(x + h) - f(x - h)) / (2.0 * h)


class TestForceCoefficient:
    def test_zero_at_origin(self):
        assert cf(0.0) == 0.0

    def test_unit_polynomial_value(self):
        # P(1) = 2/15 + 1/3 - 1/10 - 1/15 = 3/10 by rational arithmetic
        assert cf(0.125) == pytest.approx(0.3, abs=1e-15)
        assert cf(-0.125) == pytest.approx(-0.3, abs=1e-15)

    def test_odd_for_random_arguments(self):
        rng = np.random.default_rng(7)
        y = rng.uniform(-2.0, 2.0, size=1000)
        np.testing.assert_allclose(cf(-y), -cf(y), rtol=0, atol=1e-15)

    def test_slope_at_zero_is_16_over_15(self):
        assert cf_prime(0.0) == 16.0 / 15.0
        # the paper rounds it to 1.067
        assert cf_prime(0.0) == pytest.approx(1.067, abs=5e-4)

    def test_derivative_is_even(self):
        assert cf_prime(0.1) == cf_prime(-0.1)

    def test_derivative_matches_central_difference(self):
        fd = central_diff(cf, 0.05, 1e-5)
        assert cf_prime(0.05) == pytest.approx(fd, abs=1e-6)

    def test_one_sided_slopes_agree_at_zero(self):
        # C^1 through the origin: both one-sided limits equal 16/15
        assert cf_prime(1e-12) == pytest.approx(16.0 / 15.0, abs=1e-10)
        assert cf_prime(-1e-12) == pytest.approx(16.0 / 15.0, abs=1e-10)

    def test_array_broadcasting(self):
        y = np.array([-0.125, 0.0, 0.125])
        np.testing.assert_allclose(cf(y), [-0.3, 0.0, 0.3], atol=1e-15)


class TestRhs:
    def test_perfect_origin_is_equilibrium(self):
        for b, v in [(0.5, 1.0), (-0.2, 0.0), (0.1, 3.0)]:
            q = ModelParams(b=b, e=0.0, v=v)
            np.testing.assert_array_equal(rhs((0.0, 0.0), q), [0.0, 0.0])

    def test_imperfect_origin_value(self):
        # x'' = -(1.5)(-0.01)(1) + 0 = 0.015 at the origin
        out = rhs((0.0, 0.0), Q_REF)
        assert out[0] == 0.0
        assert out[1] == pytest.approx(0.015, abs=1e-15)

    def test_equilibrium_condition(self):
        q = ModelParams(b=0.5, e=-0.01, v=1.2)
        for eq in find_equilibria(q):
            np.testing.assert_allclose(rhs(eq.state, q), 0.0, atol=1e-11)

    def test_equivariance_for_perfect_system(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            q = ModelParams(b=rng.uniform(-0.5, 1.0), e=0.0,
                            v=rng.uniform(0.0, 3.0))
            s = rng.uniform(-1.2, 1.2, size=2)
            np.testing.assert_allclose(rhs(-s, q), -rhs(s, q), atol=1e-14)

    def test_equilibria_independent_of_wind(self):
        xs = None
        for v in (0.5, 1.875, 3.0):
            q = ModelParams(b=0.5, e=-0.01, v=v)
            found = [eq.x for eq in find_equilibria(q)]
            if xs is None:
                xs = found
            np.testing.assert_allclose(found, xs, atol=1e-12)


class TestJacobian:
    def test_first_row_structure(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            q = ModelParams(b=rng.uniform(-0.5, 1), e=rng.uniform(-0.05, 0.05),
                            v=rng.uniform(0, 3))
            J = jacobian(rng.uniform(-1, 1, 2), q)
            assert J[0, 0] == 0.0
            assert J[0, 1] == 1.0

    def test_trace_vanishes_at_hopf_speed(self):
        q = ModelParams(b=0.5, e=0.0, v=hopf_velocity(ModelParams(0.5, 0.0, 1.0)))
        J = jacobian((0.0, 0.0), q)
        assert abs(J[0, 0] + J[1, 1]) < 1e-12

    def test_matches_finite_differences_at_sample_point(self):
        q = ModelParams(b=0.5, e=-0.01, v=1.0)
        s = np.array([0.3, -0.2])
        h = 1e-6
        J = jacobian(s, q)
        for j in range(2):
            dp, dm = s.copy(), s.copy()
            dp[j] += h
            dm[j] -= h
            fd = (rhs(dp, q) - rhs(dm, q)) / (2 * h)
            np.testing.assert_allclose(J[:, j], fd, atol=1e-6)

    def test_matches_finite_differences_random_sample(self):
        rng = np.random.default_rng(42)
        h = 1e-6
        for _ in range(100):
            q = ModelParams(b=rng.uniform(-0.5, 1.0),
                            e=rng.uniform(-0.05, 0.05),
                            v=rng.uniform(0.1, 3.0))
            s = rng.uniform(-1.2, 1.2, size=2)
            J = jacobian(s, q)
            for j in range(2):
                dp, dm = s.copy(), s.copy()
                dp[j] += h
                dm[j] -= h
                fd = (rhs(dp, q) - rhs(dm, q)) / (2 * h)
                np.testing.assert_allclose(J[:, j], fd, atol=1e-5)


class TestPotential:
    def test_flat_at_perfect_origin(self):
        assert potential_grad(0.0, ModelParams(b=0.5, e=0.0, v=0.0)) == 0.0

    def test_gradient_matches_finite_difference(self):
        q = ModelParams(b=0.5, e=-0.01, v=0.0)
        fd = central_diff(lambda x: potential(x, q), 0.5, 1e-6)
        assert potential_grad(0.5, q) == pytest.approx(fd, abs=1e-8)

    def test_gradient_is_static_restoring_term(self):
        q = ModelParams(b=0.5, e=-0.01, v=0.0)
        x = 0.5
        expected = (1 + q.b) * (q.e + math.sin(x)) * math.cos(x) - math.sin(x)
        assert potential_grad(x, q) == pytest.approx(expected, abs=1e-15)

    def test_negative_imperfection_lowers_right_barrier(self):
        q = ModelParams(b=0.5, e=-0.01, v=0.0)
        eqs = find_equilibria(q)
        left, right = eqs[0].x, eqs[2].x
        assert potential(right, q) < potential(left, q)

    def test_energy_conserved_without_damping_or_wind(self):
        q = ModelParams(b=0.5, e=-0.01, v=0.0, r=0.0)
        field = galloping_field(q)
        cfg = IntegratorConfig(rel_tol=1e-9, abs_tol=1e-11, t_max=100.0)
        traj = integrate(field.rhs, (0.3, 0.0), cfg=cfg)
        e0 = energy(traj.states[0], q)
        drift = max(abs(energy(s, q) - e0) for s in traj.states)
        assert drift < 1e-7


class TestNormalForm:
    def test_equilibrium_roots(self):
        n = NormalFormParams(w=0.3, p_nf=-0.25)
        out = normal_form_rhs((0.0, 0.0), n)
        np.testing.assert_array_equal(out, [0.0, 0.0])
        root = math.sqrt(0.25)
        np.testing.assert_allclose(normal_form_rhs((root, 0.0), n), 0.0,
                                   atol=1e-15)
        # no nontrivial roots for p_nf > 0
        n2 = NormalFormParams(w=0.3, p_nf=0.25)
        assert abs(normal_form_rhs((root, 0.0), n2)[1]) > 0.1

    def test_field_is_odd(self):
        rng = np.random.default_rng(5)
        n = NormalFormParams(w=-0.4, p_nf=0.7)
        for _ in range(20):
            s = rng.uniform(-1, 1, 2)
            np.testing.assert_allclose(normal_form_rhs(-s, n),
                                       -normal_form_rhs(s, n), atol=1e-15)

    def test_origin_attracting_in_third_quadrant(self):
        n = NormalFormParams(w=-1.0, p_nf=-1.0)
        eigs, kind = classify_matrix(normal_form_jacobian((0.0, 0.0), n))
        assert all(z.real < 0 for z in eigs)

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        n = NormalFormParams(w=0.2, p_nf=-0.3)
        s = rng.uniform(-1, 1, 2)
        h = 1e-6
        J = normal_form_jacobian(s, n)
        for j in range(2):
            dp, dm = s.copy(), s.copy()
            dp[j] += h
            dm[j] -= h
            fd = (normal_form_rhs(dp, n) - normal_form_rhs(dm, n)) / (2 * h)
            np.testing.assert_allclose(J[:, j], fd, atol=1e-6)


class TestNondimensionalize:
    def test_identity_scaling(self):
        # g = L1 numerically makes the load parameter already unity
        d = DimensionalParams(m=2.0, g=3.0, k=5.0, L1=3.0, L2=1.5, y0=-0.015,
                              V=4.5, rho=0.4, a=0.25)
        q = nondimensionalize(d, r=0.1)
        B = d.k * d.L2**2 / (d.m * d.L1**2)
        assert q.b == pytest.approx(B - 1.0, abs=1e-15)
        assert q.v == pytest.approx(d.V / d.L1, abs=1e-15)
        assert q.e == pytest.approx(d.y0 / d.L2, abs=1e-15)
        assert q.p == pytest.approx(d.rho * d.a * d.L1 / d.m, abs=1e-15)
        assert q.r == pytest.approx(0.1, abs=1e-15)

    def test_imperfection_sign_preserved(self):
        d = DimensionalParams(m=1, g=9.81, k=40, L1=1, L2=0.5, y0=0.003,
                              V=2, rho=1.2, a=0.1)
        assert nondimensionalize(d).e > 0
        d2 = DimensionalParams(m=1, g=9.81, k=40, L1=1, L2=0.5, y0=-0.003,
                               V=2, rho=1.2, a=0.1)
        assert nondimensionalize(d2).e < 0

    def test_stronger_gravity_lowers_stiffness_margin(self):
        base = dict(m=1.0, k=40.0, L1=1.0, L2=0.5, y0=0.0, V=2.0, rho=1.2,
                    a=0.1)
        b1 = nondimensionalize(DimensionalParams(g=9.81, **base)).b
        b2 = nondimensionalize(DimensionalParams(g=19.62, **base)).b
        assert b2 < b1

    def test_rejects_nonpositive_geometry(self):
        with pytest.raises(ValueError):
            DimensionalParams(m=-1, g=9.81, k=1, L1=1, L2=1, y0=0, V=1,
                              rho=1, a=1)
        with pytest.raises(ValueError):
            DimensionalParams(m=1, g=9.81, k=1, L1=0.0, L2=1, y0=0, V=1,
                              rho=1, a=1)

    def test_time_rescaling_consistency(self):
        # the returned point must reproduce the original dynamics: compare
        # accelerations of eq (1) divided by m L1^2 A against the rescaled rhs
        d = DimensionalParams(m=1.7, g=11.0, k=60.0, L1=0.8, L2=0.45,
                              y0=-0.002, V=3.1, rho=1.1, a=0.21)
        q = nondimensionalize(d, r=0.0)
        A = d.g / d.L1
        x, xdot_tau = 0.21, -0.34           # rate in rescaled time
        xdot_t = xdot_tau * math.sqrt(A)    # rate in original time
        lhs = (-d.k * d.L2 * (d.y0 + d.L2 * math.sin(x)) * math.cos(x)
               + d.m * d.g * d.L1 * math.sin(x)
               + 0.5 * d.rho * d.a * d.V**2 * d.L1
               * cf(xdot_t * d.L1 / d.V)) / (d.m * d.L1**2)
        assert rhs((x, xdot_tau), q)[1] == pytest.approx(lhs / A, rel=1e-12)


class TestState:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            State(float("nan"), 0.0)

    def test_as_array(self):
        np.testing.assert_array_equal(State(0.25, -1.0).as_array(), [0.25, -1.0])


class TestModelParams:
    def test_defaults(self):
        q = ModelParams(b=0.5, e=0.0, v=1.0)
        assert q.p == 0.1 and q.r == 0.1

    def test_validation(self):
        with pytest.raises(ValueError):
            ModelParams(b=0.5, e=0.0, v=-1.0)
        with pytest.raises(ValueError):
            ModelParams(b=0.5, e=0.0, v=1.0, p=0.0)
        with pytest.raises(ValueError):
            ModelParams(b=float("inf"), e=0.0, v=1.0)
