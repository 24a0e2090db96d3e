"""Limit cycles: Poincare shooting, Floquet multipliers, branch continuation.

The Poincare section is the set of upper turning points (x' = 0 with
x'' < 0), so the section coordinate coincides with the cycle's maximum
deflection.  The return map is evaluated in two half-swings (upper
turning -> lower turning -> upper turning), which keeps the event logic
away from the degenerate crossing at launch.  Integrating the flow
divergence along the orbit gives the nontrivial Floquet multiplier of a
planar cycle, exp(integral of div f dt); the finite-difference slope of
the return map provides an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContinuationStall, NewtonDiverged, NoReturn
from .integrator import (EventKind, EventSpec, IntegratorConfig,
                         escape_events, integrate)
from .model import ModelParams, PlanarField, State, as_state_array, galloping_field
from . import equilibria as eqmod

__all__ = [
    "LimitCycle",
    "CycleBranch",
    "poincare_return",
    "find_cycle",
    "cycle_scan",
    "continue_branch",
    "branch_extrema",
]

# Return maps need event-located states well below the 1e-9 cycle
# residual; these are the shooting defaults (grids use coarser ones).
SHOOT_CFG = IntegratorConfig(rel_tol=1e-11, abs_tol=1e-13, t_max=500.0)
SCAN_CFG = IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10, t_max=500.0)

MARGINAL_BAND = 1e-6    # |multiplier - 1| below this is flagged marginal
FD_STEP = 1e-7          # one-sided FD step on the section coordinate
PERIOD_CAP = 200.0      # branch termination proxy for a connection approach


@dataclass(frozen=True)
class LimitCycle:
    """A periodic orbit anchored at its upper turning point."""

    section_state: State
    period: float
    multiplier: float          # nontrivial Floquet multiplier (divergence integral)
    stable: bool
    v: float
    x_max: float
    x_min: float
    residual: float
    marginal: bool = False
    multiplier_fd: float | None = None   # return-map slope cross-check
    multiplier_var: float | None = None  # variational-equation cross-check

    @property
    def amplitude(self) -> float:
        return self.x_max - self.x_min


@dataclass
class CycleBranch:
    cycles: list
    folds: list              # indices where v reverses along arclength
    origin: str              # "hopf" or "seeded"
    termination: str = ""


@dataclass(frozen=True)
class _Return:
    x_ret: float
    period: float
    x_min: float
    log_mult: float
    slope_var: float | None = None


def _augmented(field: PlanarField, variational: bool = False):
    f, div = field.rhs, field.div
    if not variational:

        def f3(t, y):
            d = f(t, y[:2])
            return np.array([d[0], d[1], div(y)])

        return f3

    jac = field.jac

    def f5(t, y):
        d = f(t, y[:2])
        J = jac(y[:2])
        return np.array([d[0], d[1], div(y),
                         J[0][0] * y[3] + J[0][1] * y[4],
                         J[1][0] * y[3] + J[1][1] * y[4]])

    return f5


def _half_swing(f3, y0, direction, cfg, field):
    spec = EventSpec(func=lambda t, y: y[1], direction=direction, terminal=True,
                     kind=EventKind.SECTION_CROSS, label="turn")
    traj = integrate(f3, y0, cfg=cfg, events=[spec] + escape_events(field))
    ev = traj.terminating_event()
    if ev is None or ev.kind is not EventKind.SECTION_CROSS:
        raise NoReturn("no section return before escape or t_max", event=ev)
    return ev


def return_map(field: PlanarField, x0: float, cfg: IntegratorConfig,
               variational: bool = False) -> _Return:
    """One full return of the upper-turning-point map from (x0, 0).

    With ``variational=True`` the first column of the fundamental matrix
    is propagated along the orbit; its x-component at the return gives
    the map derivative directly (the section leaves x' = 0, so the
    return-time correction drops out), an independent check on the
    finite-difference slope.
    """
    fa = _augmented(field, variational)
    y0 = (np.array([x0, 0.0, 0.0, 1.0, 0.0]) if variational
          else np.array([x0, 0.0, 0.0]))
    low = _half_swing(fa, y0, +1, cfg, field)
    up = _half_swing(fa, low.state, -1, cfg, field)
    return _Return(x_ret=float(up.state[0]), period=float(low.t + up.t),
                  x_min=float(low.state[0]), log_mult=float(up.state[2]),
                  slope_var=float(up.state[3]) if variational else None)


def poincare_return(s, q: ModelParams, cfg: IntegratorConfig | None = None):
    """Next same-direction section crossing and the elapsed time.

    ``s`` must lie on the section: x' = 0 with x'' < 0 (upper turning
    point).  Raises :class:`NoReturn` when the trajectory escapes or
    times out first.
    """
    y = as_state_array(s)
    field = galloping_field(q)
    if abs(y[1]) > 1e-8:
        raise ValueError("state is not on the section x' = 0")
    if field.rhs(0.0, y)[1] >= 0.0:
        raise ValueError("section requires x'' < 0 (upper turning point)")
    r = return_map(field, float(y[0]), cfg or SHOOT_CFG)
    return State(r.x_ret, 0.0), r.period


def _diff_map(field, x, cfg, base: _Return | None = None):
    """Return map value and one-sided FD derivative at a section point."""
    r0 = base if base is not None else return_map(field, x, cfg)
    r1 = return_map(field, x + FD_STEP, cfg)
    slope = (r1.x_ret - r0.x_ret) / FD_STEP
    return r0, slope


def find_cycle(guess, q: ModelParams | None = None, *, field: PlanarField | None = None,
               x_center: float | None = None, cfg: IntegratorConfig | None = None,
               tol: float = 1e-10, max_iter: int = 30,
               amp_floor: float = 1e-4, v_label: float | None = None,
               variational: bool = False) -> LimitCycle:
    """Newton on the section return map P(x) - x from a nearby guess.

    ``guess`` may be a section x value or a State on the section.  The
    period comes from the converged return time and the multiplier from
    the divergence integral along the orbit.  Iterates that collapse
    onto the central equilibrium (amplitude below ``amp_floor``) are
    rejected as divergence rather than reported as zero-amplitude
    cycles.
    """
    cfg = cfg or SHOOT_CFG
    if field is None:
        if q is None:
            raise ValueError("provide ModelParams or a PlanarField")
        field = galloping_field(q)
    if x_center is None:
        if q is None:
            raise ValueError("x_center required with a bare field")
        central = eqmod.central_equilibrium(eqmod.find_equilibria(q))
        x_center = central.x if central is not None else 0.0
    x = float(guess.x) if isinstance(guess, State) else float(np.atleast_1d(guess)[0])

    r0 = None
    for _ in range(max_iter):
        if x - x_center < amp_floor:
            raise NewtonDiverged("iterate collapsed onto the equilibrium")
        r0, slope = _diff_map(field, x, cfg)
        g = r0.x_ret - x
        dg = slope - 1.0
        if abs(g) < tol:
            break
        if abs(dg) < 1e-13 or not math.isfinite(dg):
            raise NewtonDiverged("singular return-map derivative")
        step = -g / dg
        step = math.copysign(min(abs(step), 0.2), step)
        x += step
    else:
        raise NewtonDiverged(f"no convergence after {max_iter} iterations")

    r_fin = return_map(field, x, cfg, variational=variational)
    mult = math.exp(r_fin.log_mult)
    _, slope = _diff_map(field, x, cfg, base=r_fin)
    if q is not None:
        v = q.v
    else:
        v = v_label if v_label is not None else 0.0
    return LimitCycle(section_state=State(x, 0.0), period=r_fin.period,
                      multiplier=mult, stable=abs(mult) < 1.0, v=v,
                      x_max=x, x_min=r_fin.x_min,
                      residual=abs(r_fin.x_ret - x),
                      marginal=abs(mult - 1.0) < MARGINAL_BAND,
                      multiplier_fd=slope, multiplier_var=r_fin.slope_var)


def cycle_scan(q: ModelParams | None = None, *, field: PlanarField | None = None,
               x_center: float | None = None, x_lo: float, x_hi: float,
               n: int = 16, scan_cfg: IntegratorConfig | None = None,
               polish_cfg: IntegratorConfig | None = None,
               max_cycles: int = 2, densify: int = 3,
               v_label: float | None = None) -> list[LimitCycle]:
    """Census of cycles crossing the section between x_lo and x_hi.

    Evaluates the displacement map d(x) = P(x) - x on a uniform scan
    (points whose trajectory escapes before returning are skipped),
    brackets each sign change, bisects to a narrow bracket and polishes
    with :func:`find_cycle`.  Cycles are reported innermost first, at
    most ``max_cycles`` (the model exhibits at most two coexisting).
    """
    scan_cfg = scan_cfg or SCAN_CFG
    if field is None:
        field = galloping_field(q)
    if x_center is None:
        central = eqmod.central_equilibrium(eqmod.find_equilibria(q))
        x_center = central.x if central is not None else 0.0
    if x_hi <= x_lo:
        return []

    def d_of(x):
        try:
            return return_map(field, x, scan_cfg).x_ret - x
        except NoReturn:
            return None

    xs = list(np.linspace(x_lo, x_hi, n))
    ds = [d_of(x) for x in xs]
    # Sharpen the defined/undefined edge: outside an unstable cycle the
    # map may be undefined immediately (orbits escape before returning),
    # so the edge itself approaches the cycle.  Bisect the edge and keep
    # the intermediate samples.
    edge = None
    for i in range(len(xs) - 1):
        if ds[i] is not None and ds[i + 1] is None:
            a, da, bnd = xs[i], ds[i], xs[i + 1]
            ins_x, ins_d = [], []
            for _ in range(12):
                m = 0.5 * (a + bnd)
                dm = d_of(m)
                if dm is None:
                    bnd = m
                else:
                    ins_x.append(m)
                    ins_d.append(dm)
                    a, da = m, dm
                if bnd - a < 1e-4:
                    break
            order = np.argsort(ins_x)
            xs[i + 1:i + 1] = [ins_x[k] for k in order]
            ds[i + 1:i + 1] = [ins_d[k] for k in order]
            edge = (a, da)
            break

    cycles: list[LimitCycle] = []
    for i in range(len(xs) - 1):
        if len(cycles) >= max_cycles:
            break
        da, db = ds[i], ds[i + 1]
        if da is None or db is None or da == 0.0 or da * db > 0.0:
            continue
        a, b = xs[i], xs[i + 1]
        fa = da
        while b - a > 1e-3:
            m = 0.5 * (a + b)
            fm = d_of(m)
            if fm is None:
                b = m  # treat as outside; shrink toward the defined side
                continue
            if fa * fm <= 0.0:
                b = m
            else:
                a, fa = m, fm
        try:
            cyc = find_cycle(0.5 * (a + b), q, field=field, x_center=x_center,
                             cfg=polish_cfg, v_label=v_label)
            if not any(abs(cyc.x_max - c.x_max) < 1e-6 for c in cycles):
                cycles.append(cyc)
        except (NewtonDiverged, NoReturn):
            continue
    # A cycle can coincide with the edge of definedness (escape starts
    # right outside an unstable orbit); Newton from the innermost edge
    # sample finds it when the residual there is already small.
    if edge is not None and len(cycles) < max_cycles and abs(edge[1]) < 0.02 \
            and not any(abs(edge[0] - c.x_max) < 0.05 for c in cycles):
        try:
            cyc = find_cycle(edge[0], q, field=field, x_center=x_center,
                             cfg=polish_cfg, v_label=v_label)
            if not any(abs(cyc.x_max - c.x_max) < 1e-6 for c in cycles):
                cycles.append(cyc)
        except (NewtonDiverged, NoReturn):
            pass
    cycles.sort(key=lambda c: c.x_max)
    return cycles


# ---------------------------------------------------------------------------
# Branch continuation in (section x, v)
# ---------------------------------------------------------------------------

def _hopf_seed(q: ModelParams, delta_v: float = 1e-3,
               cfg: IntegratorConfig | None = None):
    """Small cycle just below the Hopf speed, found by a ladder scan."""
    v_h = eqmod.hopf_velocity(q)
    q1 = q.with_v(v_h - delta_v)
    eqs = eqmod.find_equilibria(q1)
    central = eqmod.central_equilibrium(eqs)
    if central is None:
        raise NewtonDiverged("no central equilibrium for Hopf seeding")
    saddles = [e for e in eqs if e.kind is eqmod.EqKind.SADDLE and e.x > central.x]
    x_hill = saddles[0].x if saddles else central.x + 0.8
    field = galloping_field(q1)
    amps = np.geomspace(1e-3, 0.8 * (x_hill - central.x), 24)
    prev_x, prev_d = None, None
    for amp in amps:
        x = central.x + amp
        try:
            d = return_map(field, x, SCAN_CFG).x_ret - x
        except NoReturn:
            break
        if prev_d is not None and prev_d * d <= 0.0:
            cyc = find_cycle(0.5 * (prev_x + x), q1, field=field,
                             x_center=central.x, cfg=cfg)
            return cyc, q1, central, x_hill
        prev_x, prev_d = x, d
    raise NewtonDiverged("no small-amplitude cycle bracketed below the Hopf point")


def continue_branch(q: ModelParams, v_range=(0.0, 4.0), start="hopf",
                    ds0: float = 5e-3, ds_min: float = 1e-9, ds_max: float = 0.04,
                    max_points: int = 600, period_cap: float = PERIOD_CAP,
                    hilltop_margin: float = 1e-9,
                    cfg: IntegratorConfig | None = None) -> CycleBranch:
    """Pseudo-arclength continuation of a cycle branch in (section x, v).

    ``start="hopf"`` seeds a small cycle just below the Hopf speed on
    the subcritical side; a :class:`LimitCycle` may be passed instead.
    The branch terminates when the period exceeds ``period_cap`` (a
    saddle-connection approach), when the cycle's maximum deflection
    reaches the hilltop saddle, or when v leaves ``v_range``.  A branch
    whose period has clearly started its connection divergence may also
    end at the double-precision floor of the saddle approach; that is
    reported as the ``precision_floor`` termination rather than an
    error.  Folds are flagged where v reverses along arclength.
    """
    cfg = cfg or SHOOT_CFG
    eqs0 = eqmod.find_equilibria(q)
    central = eqmod.central_equilibrium(eqs0)
    x_c = central.x if central is not None else 0.0
    saddles = [e for e in eqs0 if e.kind is eqmod.EqKind.SADDLE and e.x > x_c]
    x_hill = saddles[0].x if saddles else math.inf

    if start == "hopf":
        c0, q_cur, central, x_hill = _hopf_seed(q, cfg=cfg)
        origin = "hopf"
        u_prev = np.array([central.x, eqmod.hopf_velocity(q)])  # zero-amplitude point
        u = np.array([c0.x_max, q_cur.v])
    elif isinstance(start, LimitCycle):
        c0 = start
        origin = "seeded"
        u = np.array([c0.x_max, c0.v])
        c1 = find_cycle(c0.x_max, q.with_v(c0.v - ds0), cfg=cfg)
        u_prev = np.array([c1.x_max, c0.v - ds0])
        u_prev, u = u, u_prev  # march away from the perturbed point
    else:
        raise ValueError("start must be 'hopf' or a LimitCycle")

    def eval_map(x, v):
        return return_map(galloping_field(q.with_v(v)), x, cfg)

    def cycle_at(x, v, r: _Return) -> LimitCycle:
        mult = math.exp(r.log_mult)
        return LimitCycle(section_state=State(x, 0.0), period=r.period,
                          multiplier=mult, stable=abs(mult) < 1.0, v=v,
                          x_max=x, x_min=r.x_min, residual=abs(r.x_ret - x),
                          marginal=abs(mult - 1.0) < MARGINAL_BAND)

    r0 = eval_map(u[0], u[1])
    cycles = [cycle_at(u[0], u[1], r0)]
    termination = "max_points"
    ds = ds0
    h = FD_STEP

    for _ in range(max_points):
        tau = u - u_prev
        norm = np.linalg.norm(tau)
        if norm == 0.0:
            raise ContinuationStall("zero tangent", last_point=cycles[-1])
        tau /= norm

        converged = False
        while ds >= ds_min:
            pred = u + ds * tau
            un = pred.copy()
            r_n = None
            ok = False
            for _ in range(8):
                try:
                    r_n = eval_map(un[0], un[1])
                except NoReturn:
                    break
                g1 = r_n.x_ret - un[0]
                g2 = float(tau @ (un - pred))
                if abs(g1) < 1e-9 and abs(g2) < 1e-11:
                    ok = True
                    break
                try:
                    rx = eval_map(un[0] + h, un[1])
                    rv = eval_map(un[0], un[1] + h)
                except NoReturn:
                    break
                J = np.array([[(rx.x_ret - r_n.x_ret) / h - 1.0,
                               (rv.x_ret - r_n.x_ret) / h],
                              [tau[0], tau[1]]])
                try:
                    dd = np.linalg.solve(J, [-g1, -g2])
                except np.linalg.LinAlgError:
                    break
                if not np.all(np.isfinite(dd)):
                    break
                un += dd
                if un[0] - x_c < 1e-4:
                    break  # collapsed onto the equilibrium
            if ok:
                converged = True
                break
            ds *= 0.4
        if not converged:
            # The corrector loses residual accuracy once the orbit passes
            # exponentially close to the saddle; hand the final approach
            # to the geometric march toward the hilltop.
            if (cycles and math.isfinite(x_hill)
                    and cycles[-1].period > 1.3 * cycles[0].period):
                tail, termination = _tail_march(q, x_hill, cycles[-1], cfg,
                                                period_cap)
                cycles.extend(tail)
                break
            raise ContinuationStall("corrector failed at minimum step",
                                    last_point=cycles[-1])

        u_prev, u = u, un
        cycles.append(cycle_at(un[0], un[1], r_n))
        cyc = cycles[-1]
        ds = min(ds * 1.3, ds_max)

        if cyc.period > period_cap:
            termination = "period_cap"
            break
        if cyc.x_max >= x_hill - hilltop_margin:
            termination = "hilltop"
            break
        if not (v_range[0] <= cyc.v <= v_range[1]):
            termination = "v_range"
            break

    vs = [c.v for c in cycles]
    fold_v_tol = 1e-7  # ignore v reversals at the solver noise level
    folds = [i for i in range(1, len(vs) - 1)
             if (vs[i] - vs[i - 1]) * (vs[i + 1] - vs[i]) < 0.0
             and abs(vs[i] - vs[i - 1]) > fold_v_tol
             and abs(vs[i + 1] - vs[i]) > fold_v_tol]
    return CycleBranch(cycles=cycles, folds=folds, origin=origin,
                       termination=termination)


def _tail_march(q: ModelParams, x_hill: float, last: LimitCycle,
                cfg: IntegratorConfig, period_cap: float,
                max_steps: int = 200):
    """Final connection approach of a cycle branch.

    Marches the section coordinate toward its supremum on the branch (the
    saddle itself when the loop closes over the nearer hilltop, or the
    right turning point of the loop when it closes over the other side)
    and solves the branch speed v at each station by a secant on
    P(x; v) - x.  Convergence is judged on the v-step rather than the
    residual: the saddle pass amplifies integration noise in the residual
    and in its v-slope equally, so the root stays well-conditioned long
    after a fixed residual target has become unreachable.  Ends at
    ``period_cap`` or at the resolution floor of the approach.
    """
    cycles: list[LimitCycle] = []
    x, v = last.x_max, last.v
    step = 0.3 * (x_hill - x)
    dv_scale = 1e-5
    termination = "precision_floor"

    def solve_at(x_st, v_guess, dv):
        v0, v1 = v_guess, v_guess + dv
        g0 = None
        try:
            g0 = return_map(galloping_field(q.with_v(v0)), x_st, cfg).x_ret - x_st
        except NoReturn:
            pass
        best = None
        for _ in range(30):
            try:
                r1 = return_map(galloping_field(q.with_v(v1)), x_st, cfg)
            except NoReturn:
                if g0 is None:
                    return None
                v1 = 0.5 * (v0 + v1)
                continue
            g1 = r1.x_ret - x_st
            if best is None or abs(g1) < abs(best[1]):
                best = (v1, g1, r1)
            if g0 is None:
                v0, g0 = v1, g1
                v1 = v1 + dv
                continue
            if g1 == g0:
                break
            v_next = v1 - g1 * (v1 - v0) / (g1 - g0)
            v0, g0, v1 = v1, g1, v_next
            if abs(v1 - v0) < max(1e-13, 1e-12 * abs(v1)):
                break
        return best

    for _ in range(max_steps):
        if step < 1e-13:
            break
        x_trial = min(x + step, x_hill - 1e-13)
        best = solve_at(x_trial, v, dv_scale)
        accept = (best is not None and abs(best[1]) < 2e-3
                  and best[2].period > last.period)
        if not accept:
            step *= 0.3
            continue
        v, _, r1 = best
        x = x_trial
        dv_scale = max(abs(v - last.v) * 0.3, 1e-9)
        mult = math.exp(r1.log_mult)
        cycles.append(LimitCycle(section_state=State(x, 0.0), period=r1.period,
                                 multiplier=mult, stable=abs(mult) < 1.0,
                                 v=v, x_max=x, x_min=r1.x_min,
                                 residual=abs(r1.x_ret - x),
                                 marginal=abs(mult - 1.0) < MARGINAL_BAND))
        last = cycles[-1]
        if r1.period > period_cap:
            termination = "period_cap"
            break
        step = min(step * 1.4, 0.5 * (x_hill - x))
    return cycles, termination


def branch_extrema(branch: CycleBranch) -> np.ndarray:
    """Plot table: rows of (v, x_max, x_min, period, multiplier, stable)."""
    if not branch.cycles:
        raise ValueError("empty branch")
    return np.array([[c.v, c.x_max, c.x_min, c.period, c.multiplier,
                      1.0 if c.stable else 0.0] for c in branch.cycles])


def locate_fold(q: ModelParams, branch: CycleBranch, fold_index: int,
                cfg: IntegratorConfig | None = None,
                tol: float = 1e-4) -> LimitCycle:
    """Refine a flagged cyclic fold to the multiplier-1 crossing.

    Along the branch the section coordinate is monotone through the
    fold, so the fold solves dP/dx = 1 there; this bisects the
    return-map slope minus one in x, solving for v on the branch at each
    trial x.  The returned cycle carries the fold speed and a
    divergence-integral multiplier within ``tol`` of unity.
    """
    cfg = cfg or SHOOT_CFG
    field_of = lambda v: galloping_field(q.with_v(v))
    i = fold_index
    lo = branch.cycles[max(i - 1, 0)]
    hi = branch.cycles[min(i + 1, len(branch.cycles) - 1)]

    def on_branch(x, v_guess):
        v = v_guess
        for _ in range(40):
            r = return_map(field_of(v), x, cfg)
            g = r.x_ret - x
            if abs(g) < 1e-10:
                return v, r
            rv = return_map(field_of(v + FD_STEP), x, cfg)
            dgdv = (rv.x_ret - r.x_ret) / FD_STEP
            if abs(dgdv) < 1e-14:
                break
            v -= g / dgdv
        raise NewtonDiverged("could not solve for v on the branch")

    def slope_minus_one(x, v_guess):
        v, r = on_branch(x, v_guess)
        r1 = return_map(field_of(v), x + FD_STEP, cfg)
        return (r1.x_ret - r.x_ret) / FD_STEP - 1.0, v, r

    xa, xb = lo.x_max, hi.x_max
    va, vb = lo.v, hi.v
    fa, va, _ = slope_minus_one(xa, va)
    fb, vb, _ = slope_minus_one(xb, vb)
    if fa * fb > 0:
        raise NewtonDiverged("fold bracket does not straddle multiplier 1")
    for _ in range(60):
        xm = 0.5 * (xa + xb)
        fm, vm, rm = slope_minus_one(xm, 0.5 * (va + vb))
        if abs(fm) < tol or abs(xb - xa) < 1e-12:
            mult = math.exp(rm.log_mult)
            return LimitCycle(section_state=State(xm, 0.0), period=rm.period,
                              multiplier=mult, stable=abs(mult) < 1.0, v=vm,
                              x_max=xm, x_min=rm.x_min,
                              residual=abs(rm.x_ret - xm),
                              marginal=abs(mult - 1.0) < 1e-3,
                              multiplier_fd=fm + 1.0)
        if fa * fm <= 0:
            xb, vb, fb = xm, vm, fm
        else:
            xa, va, fa = xm, vm, fm
    raise NewtonDiverged("fold refinement did not converge")
