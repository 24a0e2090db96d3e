import math

import numpy as np
import pytest

from gallop.errors import FocusLost
from gallop.model import ModelParams, NormalFormParams, normal_form_field
from gallop.equilibria import EqKind, hopf_velocity
from gallop.connections import classify_portrait_field, EscapeClass
from gallop.experiments import (RampOutcome, basin_map_ic, basin_map_ramp,
                                cyclic_fold_transect, ellipsoid_point,
                                ellipsoid_scan, envelope_predict,
                                normal_form_chart, normal_form_equilibria,
                                normal_form_miss, normal_form_s_point,
                                ramp_envelope, ramp_run)

Q_RAMP = ModelParams(b=0.5, e=-0.01, v=0.0)          # Hopf speed 1.875
Q_BASIN = ModelParams(b=0.5, e=-0.01, v=0.0, r=0.2)  # Hopf speed 3.75


class TestEllipsoidPoint:
    def test_pure_stiffness_direction(self):
        q = ellipsoid_point(0.5, 0.0, R=0.2)
        assert q.v == pytest.approx(1.875, abs=1e-15)
        assert q.b == pytest.approx(0.2, abs=1e-15)
        assert q.e == pytest.approx(0.0, abs=1e-15)

    def test_pure_imperfection_pole(self):
        q = ellipsoid_point(0.0, 1.0, R=0.2)
        assert q.v == pytest.approx(1.875, abs=1e-12)
        assert q.b == pytest.approx(0.0, abs=1e-12)
        assert q.e == pytest.approx(0.008, abs=1e-15)

    def test_pure_speed_direction(self):
        q = ellipsoid_point(0.0, 0.0, R=0.2)
        assert q.v == pytest.approx(1.915, abs=1e-15)
        assert q.b == 0.0 and q.e == 0.0

    def test_imperfection_sign_follows_psi(self):
        for psi in (-0.7, -0.2, 0.2, 0.7):
            q = ellipsoid_point(0.3, psi, R=0.2)
            assert math.copysign(1.0, q.e) == math.copysign(1.0, psi)

    def test_domain_validation(self):
        with pytest.raises(ValueError):
            ellipsoid_point(1.5, 0.0)
        with pytest.raises(ValueError):
            ellipsoid_point(0.0, 0.0, R=-0.1)


@pytest.fixture(scope="module")
def small_chart():
    return ellipsoid_scan(R=0.2, n_phi=13, n_psi=13, workers=2, refine=True)


class TestEllipsoidScan:
    def test_grid_resolved(self, small_chart):
        ch = small_chart
        assert (ch.codes >= 0).all()

    def test_psi_reflection_symmetry(self, small_chart):
        ch = small_chart
        n = len(ch.psis)
        for i in range(n):
            j = n - 1 - i
            for k in range(len(ch.phis)):
                sig = ch.signatures[ch.codes[i, k]]
                mir = ch.signatures[ch.codes[j, k]]
                if EqKind.DEGENERATE in sig[1] or EqKind.DEGENERATE in mir[1]:
                    continue  # marginal cell on an arc
                assert mir[0] == sig[0] and mir[2] == sig[2]
                esc_swap = {EscapeClass.LEFT_ONLY: EscapeClass.RIGHT_ONLY,
                            EscapeClass.RIGHT_ONLY: EscapeClass.LEFT_ONLY}
                assert mir[4] == esc_swap.get(sig[4], sig[4])

    def test_hopf_arc_on_half_meridian(self, small_chart):
        pts = small_chart.arcs["hopf"]
        assert pts
        for phi, _psi in pts:
            assert abs(abs(phi) - 0.5) < 1e-3

    def test_fold_arc_cusp_trend(self, small_chart):
        pts = small_chart.arcs["fold"]
        assert pts
        # the fold arc collapses onto the pitchfork points as psi -> 0
        by_abs_psi = {}
        for phi, psi in pts:
            by_abs_psi.setdefault(round(abs(psi), 6), []).append(phi)
        psis = sorted(by_abs_psi)
        inner = [min(min(abs(p), abs(1 - p), abs(1 + p))
                     for p in by_abs_psi[a]) for a in psis]
        assert inner[0] < inner[-1]

    def test_one_sided_escapes_follow_imperfection_sign(self, small_chart):
        ch = small_chart
        for i, psi in enumerate(ch.psis):
            for k in range(len(ch.phis)):
                sig = ch.signatures[ch.codes[i, k]]
                if sig[4] is EscapeClass.LEFT_ONLY:
                    assert psi > 0
                elif sig[4] is EscapeClass.RIGHT_ONLY:
                    assert psi < 0


class TestCyclicFoldTransect:
    def test_fold_adjacent_to_homoclinic(self):
        res = cyclic_fold_transect(0.5, R=0.2, phi_bracket=(0.7, 0.95))
        assert res["v_fold"] < res["v_hom"]
        assert 0.0 < res["gap"] < 0.05


class TestRampRun:
    def test_tunnelling_positive(self):
        res = ramp_run(Q_RAMP, gamma=0.01, v0=0.9375)
        assert res.tunnelling > 0
        assert res.outcome is not RampOutcome.CAPTURED
        assert res.v_jump >= res.v0

    def test_tunnelling_grows_with_earlier_starts(self):
        v_h = hopf_velocity(Q_RAMP)
        tun = [ramp_run(Q_RAMP, gamma=0.01, v0=v0).tunnelling
               for v0 in (v_h / 2, v_h / 4, v_h / 8)]
        assert tun[0] < tun[1] < tun[2]

    def test_quasi_static_limit(self):
        jumps = [ramp_run(Q_RAMP, gamma=g, v0=1.86).v_jump - 1.875
                 for g in (3e-3, 1e-3, 3e-4)]
        assert all(j > 0 for j in jumps)
        assert jumps[0] > jumps[1] > jumps[2]

    def test_ramp_speed_recorded(self):
        res = ramp_run(Q_RAMP, gamma=0.01, v0=1.0)
        traj = res.trajectory
        np.testing.assert_allclose(traj.v_of_t, 1.0 + 0.01 * traj.t,
                                   atol=1e-12)

    def test_rejects_nonpositive_rate(self):
        with pytest.raises(ValueError):
            ramp_run(Q_RAMP, gamma=0.0, v0=1.0)


class TestEnvelope:
    def test_initial_value(self):
        pred = envelope_predict(Q_RAMP, 0.01, 0.9375, 0.05, 3.0)
        assert pred.d[0] == pytest.approx(0.05, abs=1e-15)

    def test_log_symmetry_about_hopf(self):
        v_h = hopf_velocity(Q_RAMP)
        pred = envelope_predict(Q_RAMP, 0.01, v_h - 0.2, 0.05, v_h + 0.2,
                                n=401)
        for delta in (0.05, 0.12, 0.1875):
            lo = np.interp(v_h - delta, pred.nu, np.log(pred.d))
            hi = np.interp(v_h + delta, pred.nu, np.log(pred.d))
            assert abs(hi - lo) / abs(math.log(0.05)) < 0.05

    def test_simulation_match_in_linear_regime(self):
        res = ramp_run(Q_RAMP, gamma=0.01, v0=0.9375)
        nu_pk, amp = ramp_envelope(res, Q_RAMP)
        pred = envelope_predict(Q_RAMP, 0.01, 0.9375, 0.05, 3.4, n=200)
        dp = np.interp(nu_pk, pred.nu, pred.d)
        mask = (amp > 1e-6) & (amp < 0.1) & (nu_pk > 1.0) & (nu_pk < 3.4)
        assert mask.sum() > 20
        rel = np.abs(np.log(amp[mask]) - np.log(dp[mask])) / np.abs(np.log(dp[mask]))
        assert rel.max() < 0.10

    def test_focus_lost_far_from_onset(self):
        with pytest.raises(FocusLost):
            envelope_predict(Q_RAMP, 0.01, 1.0, 0.05, 40.0, n=120)


class TestBasinMaps:
    def test_ramp_rows_show_both_outcomes(self):
        v0s = np.linspace(0.4, 3.7, 24)
        gammas = [2.0 ** k for k in range(-5, 1)]
        bm = basin_map_ramp(Q_BASIN, v0s, gammas, workers=2)
        assert bm.outcomes.shape == (6, 24)
        for row in bm.outcomes:
            assert (row == 0).any() and (row == 1).any()
            assert not (row == 2).any()

    def test_bitwise_deterministic(self):
        v0s = np.linspace(1.0, 3.5, 10)
        gammas = [0.25, 1.0]
        a = basin_map_ramp(Q_BASIN, v0s, gammas, workers=2)
        b = basin_map_ramp(Q_BASIN, v0s, gammas, workers=1)
        assert np.array_equal(a.outcomes, b.outcomes)

    def test_ic_map_outcomes_and_far_field(self):
        xs = np.linspace(-1.1, 1.1, 12)
        ys = np.linspace(-0.6, 0.6, 9)
        bm = basin_map_ic(Q_BASIN, xs, ys, v0=1.875, gamma=0.01, workers=2)
        assert (bm.outcomes == 0).any() and (bm.outcomes == 1).any()
        # beyond a hilltop, with no inward velocity, escape is immediate on
        # that side
        outward_left = ys <= 0.0
        outward_right = ys >= 0.0
        assert (bm.outcomes[outward_left, 0] == 0).all()
        assert (bm.outcomes[outward_right, -1] == 1).all()

    def test_neighbouring_cells_can_differ(self):
        v0s = np.linspace(1.0, 2.0, 32)
        bm = basin_map_ramp(Q_BASIN, v0s, [0.25], workers=2)
        flips = np.count_nonzero(np.diff(bm.outcomes[0]))
        assert flips >= 1


class TestNormalFormChart:
    def test_quadrant_equilibrium_counts(self):
        for (w, p), n_expect in [((-0.5, -0.5), 3), ((0.5, -0.5), 3),
                                 ((-0.5, 0.5), 1), ((0.5, 0.5), 1)]:
            eqs = normal_form_equilibria(NormalFormParams(w, p))
            assert len(eqs) == n_expect

    def test_saddle_positions(self):
        eqs = normal_form_equilibria(NormalFormParams(-0.3, -0.49))
        assert eqs[0].x == pytest.approx(-0.7, abs=1e-12)
        assert eqs[2].x == pytest.approx(0.7, abs=1e-12)
        assert eqs[0].kind is EqKind.SADDLE and eqs[2].kind is EqKind.SADDLE

    def test_no_cycle_attractors_for_negative_w(self):
        ws = np.linspace(-0.9, -0.1, 3)
        ps = np.linspace(-0.9, 0.9, 5)
        chart = normal_form_chart(ws, ps, workers=2)
        assert not chart.failures
        for code in np.unique(chart.codes):
            sig = chart.signatures[code]
            assert True not in sig[3]  # no stable cycles anywhere at w < 0

    def test_chart_cells_symmetric(self):
        ws = np.linspace(-0.6, 0.6, 3)
        ps = np.linspace(-0.8, 0.8, 3)
        chart = normal_form_chart(ws, ps, workers=1)
        for code in np.unique(chart.codes[chart.codes >= 0]):
            sig = chart.signatures[code]
            assert tuple(reversed(sig[1])) == sig[1]
            assert sig[4] in (EscapeClass.BOUNDED, EscapeClass.INDETERMINATE)

    def test_s_point_location_and_effect(self):
        p_star = normal_form_s_point(-0.1, (-0.9, -0.3))
        # Melnikov estimate for the connection: p = 5 w
        assert p_star == pytest.approx(-0.5, abs=0.01)
        assert p_star == pytest.approx(-0.498517518, abs=1e-6)
        for p, n_expect in ((p_star - 0.15, 1), (p_star + 0.15, 0)):
            n = NormalFormParams(-0.1, p)
            pc = classify_portrait_field(normal_form_field(n),
                                         normal_form_equilibria(n))
            assert pc.n_cycles == n_expect
            if n_expect:
                assert pc.cycle_stability == (False,)

    def test_miss_requires_saddle_pair(self):
        from gallop.errors import GallopError
        with pytest.raises(GallopError):
            normal_form_miss(NormalFormParams(-0.1, 0.2))


class TestArcRoundTrip:
    def test_refined_points_separate_classes(self, small_chart):
        from gallop.connections import classify_portrait
        ch = small_chart
        # a Hopf arc point: central stability flips within twice the
        # refinement tolerance
        phi, psi = ch.arcs["hopf"][0]
        lo = classify_portrait(ellipsoid_point(phi - 2e-4, psi, ch.R))
        hi = classify_portrait(ellipsoid_point(phi + 2e-4, psi, ch.R))
        assert lo.eq_kinds[1] != hi.eq_kinds[1]
        # a heteroclinic arc point: the escape class changes across it
        if ch.arcs["heteroclinic"]:
            phi, psi = ch.arcs["heteroclinic"][0]
            lo = classify_portrait(ellipsoid_point(phi - 1e-4, psi, ch.R))
            hi = classify_portrait(ellipsoid_point(phi + 1e-4, psi, ch.R))
            assert lo.escape != hi.escape


class TestEnvelopeClosedForm:
    def test_quadrature_matches_analytic_integral(self):
        # the decay/growth rate is linear in wind speed here, so the
        # exponent integrates in closed form: int c = (-r nu/2 + p nu^2 * (16/15)/8)
        q = Q_RAMP
        gamma, nu0, d0, nu1 = 0.01, 0.9375, 0.05, 3.0
        pred = envelope_predict(q, gamma, nu0, d0, nu1, n=61)

        def antiderivative(nu):
            return 0.5 * (-q.r * nu + 0.25 * q.p * (16.0 / 15.0) * nu ** 2)

        exact = d0 * np.exp((antiderivative(pred.nu) - antiderivative(nu0))
                            / gamma)
        np.testing.assert_allclose(pred.d, exact, rtol=1e-10)
