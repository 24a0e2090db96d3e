import numpy as np
import pytest

from gallop.errors import NoSignChange
from gallop.model import ModelParams
from gallop.equilibria import EqKind, central_equilibrium, find_equilibria
from gallop.cycles import cycle_scan
from gallop.connections import (ConnectionKind, ConnectionSpec, EscapeClass,
                                ManifoldKind, Side, classify_portrait,
                                find_connection, manifold_branch,
                                miss_distance)
from gallop.integrator import EventKind

# the portrait-sequence family: small imperfection, moderate stiffness
B, E = 0.175, 0.003
HOM = ConnectionSpec(ConnectionKind.HOMOCLINIC, Side.LEFT)
HET = ConnectionSpec(ConnectionKind.HETEROCLINIC, Side.LEFT)


def fam(v):
    return ModelParams(b=B, e=E, v=v)


@pytest.fixture(scope="module")
def connections():
    hom = find_connection(fam, (0.5, 1.0), HOM)
    het = find_connection(fam, (1.0, 1.4), HET)
    return hom, het


class TestMissDistance:
    def test_sign_change_across_homoclinic(self):
        assert miss_distance(fam(0.8), HOM).value > 0
        assert miss_distance(fam(0.95), HOM).value < 0

    def test_escape_sentinel_far_from_connection(self):
        m = miss_distance(fam(0.5), HOM)
        assert m.escaped
        assert abs(m.value) >= 1e3

    def test_near_zero_at_connection(self, connections):
        hom, _ = connections
        m = miss_distance(fam(hom.parameter_value), HOM)
        assert abs(m.value) < 1e-6

    def test_symmetric_connections_coincide(self):
        # the perfect system has no one-sided loop; its connection event is
        # the pair of saddle-to-saddle orbits, which the equivariance makes
        # simultaneous on the two sides
        left = find_connection(lambda v: ModelParams(b=B, e=0.0, v=v),
                               (0.5, 1.4),
                               ConnectionSpec(ConnectionKind.HETEROCLINIC,
                                              Side.LEFT))
        right = find_connection(lambda v: ModelParams(b=B, e=0.0, v=v),
                                (0.5, 1.4),
                                ConnectionSpec(ConnectionKind.HETEROCLINIC,
                                               Side.RIGHT))
        assert left.parameter_value == pytest.approx(right.parameter_value,
                                                     abs=1e-12)

    def test_bracket_without_sign_change_rejected(self):
        with pytest.raises(NoSignChange):
            find_connection(fam, (1.3, 1.5), HOM)


class TestFindConnection:
    def test_bracket_widths(self, connections):
        hom, het = connections
        assert hom.bracket_width <= 1e-8
        assert het.bracket_width <= 1e-8

    def test_ordering_below_hopf(self, connections):
        hom, het = connections
        assert hom.parameter_value < het.parameter_value < 1.875

    def test_regression_values(self, connections):
        hom, het = connections
        assert hom.parameter_value == pytest.approx(0.893482435, abs=5e-7)
        assert het.parameter_value == pytest.approx(1.215408202, abs=5e-7)

    def test_offset_halving_stability(self, connections):
        hom, _ = connections
        refined = find_connection(fam, (0.5, 1.0), HOM, delta=5e-7)
        assert refined.parameter_value == pytest.approx(hom.parameter_value,
                                                        abs=1e-6)


class TestManifoldBranch:
    def test_no_wind_outset_falls_into_focus(self):
        q = ModelParams(b=0.5, e=0.0, v=0.0)
        eqs = find_equilibria(q)
        central = central_equilibrium(eqs)
        br = manifold_branch(eqs[2], ManifoldKind.UNSTABLE, side=-1, q=q,
                             target=central.state.as_array())
        ev = br.trajectory.terminating_event()
        assert ev.kind is EventKind.CONVERGED

    def test_mirror_equivariance_of_branches(self):
        q = ModelParams(b=0.5, e=0.0, v=1.0)
        eqs = find_equilibria(q)
        left, right = eqs[0], eqs[2]
        # inner branches map onto each other under (x, x') -> (-x, -x')
        bu_r = manifold_branch(right, ManifoldKind.UNSTABLE, side=-1, q=q)
        bu_l = manifold_branch(left, ManifoldKind.UNSTABLE, side=+1, q=q)
        n = min(len(bu_r.trajectory.t), len(bu_l.trajectory.t))
        np.testing.assert_allclose(bu_r.trajectory.states[:n],
                                   -bu_l.trajectory.states[:n], atol=1e-12)

    def test_offset_halving_consistency(self):
        q = fam(1.0)
        eqs = find_equilibria(q)
        central = central_equilibrium(eqs)
        from gallop.connections import _first_section_crossing
        from gallop.model import galloping_field
        from gallop.connections import _saddle_eigvecs, MANIFOLD_CFG
        field = galloping_field(q)
        vu, _ = _saddle_eigvecs(field, eqs[0])
        out = []
        for delta in (1e-6, 5e-7):
            y0 = eqs[0].state.as_array() + delta * vu
            status, st = _first_section_crossing(field, y0, False, central.x,
                                                 1, MANIFOLD_CFG)
            assert status == "ok"
            out.append(st[1])
        assert abs(out[0] - out[1]) < 1e-5


class TestClassifyPortrait:
    def test_quiet_wind_portrait(self):
        pc = classify_portrait(fam(0.5))
        assert pc.n_equilibria == 3
        assert pc.eq_kinds[1] is EqKind.STABLE_FOCUS
        assert pc.n_cycles == 0
        assert pc.escape is EscapeClass.BOUNDED

    def test_one_sided_escape_with_unstable_cycle(self, connections):
        hom, het = connections
        v = 0.5 * (hom.parameter_value + het.parameter_value)
        pc = classify_portrait(fam(v))
        assert pc.n_cycles == 1
        assert pc.cycle_stability == (False,)
        assert pc.escape is EscapeClass.LEFT_ONLY

    def test_indeterminate_after_heteroclinic(self, connections):
        _, het = connections
        pc = classify_portrait(fam(het.parameter_value + 0.1))
        assert pc.escape is EscapeClass.INDETERMINATE
        assert pc.eq_kinds[1] is EqKind.STABLE_FOCUS

    def test_unstable_centre_past_hopf(self):
        pc = classify_portrait(fam(2.1))
        assert pc.eq_kinds[1] is EqKind.UNSTABLE_FOCUS
        assert pc.n_cycles == 0
        assert pc.escape is EscapeClass.INDETERMINATE

    def test_deterministic(self):
        a = classify_portrait(fam(1.0))
        b = classify_portrait(fam(1.0))
        assert a.signature() == b.signature()
        assert a.cycles == b.cycles
        assert a.gates == b.gates

    def test_mirror_signature(self):
        pc = classify_portrait(fam(1.0))
        mirrored = classify_portrait(ModelParams(b=B, e=-E, v=1.0))
        assert mirrored.signature() == pc.mirrored_signature()


class TestCycleStabilityNearHomoclinic:
    def test_unstable_cycle_multiplier(self, connections):
        hom, het = connections
        v = 0.5 * (hom.parameter_value + het.parameter_value)
        q = fam(v)
        eqs = find_equilibria(q)
        c = central_equilibrium(eqs)
        cycles = cycle_scan(q, x_lo=c.x + 2e-3, x_hi=eqs[2].x - 1e-3)
        assert len(cycles) == 1
        assert cycles[0].multiplier > 1.0

    def test_connection_born_cycle_is_stable(self, connections):
        # between the cyclic fold and the homoclinic two cycles coexist;
        # the outer one (born at the connection) is attracting
        hom, _ = connections
        q = fam(hom.parameter_value - 0.01)
        eqs = find_equilibria(q)
        c = central_equilibrium(eqs)
        cycles = cycle_scan(q, x_lo=c.x + 2e-3, x_hi=eqs[2].x - 1e-3, n=24)
        assert len(cycles) == 2
        inner, outer = sorted(cycles, key=lambda cc: cc.x_max)
        assert not inner.stable
        assert outer.stable
        assert outer.multiplier < 1.0
