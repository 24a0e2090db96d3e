"""High-level studies: unfolding chart, ramped runs, basins, envelopes.

The codimension-3 unfolding is explored on an ellipsoidal surface around
the compound bifurcation point (Hopf speed, zero stiffness margin, zero
imperfection), parameterized by polar coordinates (phi, psi):

    v = v_H + R^2 cos(pi phi) cos(pi psi / 2)
    b = b0  + R   sin(pi phi) cos(pi psi / 2)
    e = e0  + R^3 sin(pi psi / 2)

Ramped-velocity runs integrate the nonautonomous field with
v(t) = v0 + gamma t and report the escape outcome, the jump-off speed
and the resulting delay past the stationary stability threshold.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field, replace
from enum import Enum

import numpy as np
from scipy.integrate import quad

from .errors import FocusLost, GallopError, NoSignChange
from .integrator import (EventKind, IntegratorConfig, escape_event,
                         integrate_nonautonomous, speed_event)
from .model import (ModelParams, NormalFormParams, State,
                    normal_form_field, ramped_galloping_field)
from . import equilibria as eqmod
from .equilibria import EqKind, Equilibrium, classify_matrix
from .connections import (ClassifyOptions, ConnectionKind, ConnectionSpec,
                          MissResult, Side, _miss_field, classify_portrait,
                          classify_portrait_field, find_connection)
from .cycles import continue_branch, locate_fold
from .model import normal_form_jacobian

__all__ = [
    "ellipsoid_point",
    "EllipsoidChart",
    "ellipsoid_scan",
    "cyclic_fold_transect",
    "RampOutcome",
    "RampResult",
    "ramp_run",
    "BasinMap",
    "basin_map_ramp",
    "basin_map_ic",
    "EnvelopePrediction",
    "envelope_predict",
    "ramp_envelope",
    "normal_form_equilibria",
    "NormalFormChart",
    "normal_form_chart",
    "normal_form_s_point",
]

CENTER_DEFAULT = (1.875, 0.0, 0.0)  # (v_H, b0, e0) at p = r = 0.1
RAMP_CFG = IntegratorConfig(rel_tol=1e-9, abs_tol=1e-11, t_max=1e6)
GRID_CFG = IntegratorConfig(rel_tol=1e-6, abs_tol=1e-9, t_max=1e6)


# ---------------------------------------------------------------------------
# Ellipsoid chart
# ---------------------------------------------------------------------------

def ellipsoid_point(phi: float, psi: float, R: float = 0.2,
                    center=CENTER_DEFAULT, p: float = 0.1,
                    r: float = 0.1) -> ModelParams:
    """Parameter point on the unfolding ellipsoid at (phi, psi)."""
    if not (-1.0 <= phi <= 1.0 and -1.0 <= psi <= 1.0):
        raise ValueError("phi and psi must lie in [-1, 1]")
    if not R > 0:
        raise ValueError("R must be positive")
    v_c, b0, e0 = center
    cpsi = math.cos(0.5 * math.pi * psi)
    return ModelParams(
        b=b0 + R * math.sin(math.pi * phi) * cpsi,
        e=e0 + R**3 * math.sin(0.5 * math.pi * psi),
        v=v_c + R**2 * math.cos(math.pi * phi) * cpsi,
        p=p, r=r)


@dataclass
class EllipsoidChart:
    R: float
    center: tuple
    phis: np.ndarray
    psis: np.ndarray
    codes: np.ndarray               # codes[i_psi, i_phi]
    signatures: list                # code -> portrait signature
    arcs: dict                      # tag -> list of (phi, psi)
    failures: list
    transects: list = dc_field(default_factory=list)

    def signature_at(self, i_psi: int, i_phi: int):
        return self.signatures[self.codes[i_psi, i_phi]]


def _chart_cell(args):
    phi, psi, R, center, p, r, opts = args
    q = ellipsoid_point(phi, psi, R, center, p, r)
    try:
        pc = classify_portrait(q, opts)
        return pc.signature(), None
    except GallopError as exc:
        return None, str(exc)


def _central_re(q: ModelParams) -> float:
    eqs = eqmod.find_equilibria(q)
    c = eqmod.central_equilibrium(eqs)
    if c is None:
        raise GallopError("no central equilibrium")
    return max(z.real for z in c.eigenvalues)


def _bisect_scalar(f, a, b, xtol):
    fa, fb = f(a), f(b)
    if fa * fb > 0:
        raise NoSignChange("no sign change")
    while b - a > xtol:
        m = 0.5 * (a + b)
        fm = f(m)
        if fa * fm <= 0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def _bisect_count(count, a, b, xtol):
    ca, cb = count(a), count(b)
    if ca == cb:
        raise NoSignChange("no count change")
    while b - a > xtol:
        m = 0.5 * (a + b)
        if count(m) == ca:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def ellipsoid_scan(R: float = 0.2, n_phi: int = 181, n_psi: int = 181,
                   center=CENTER_DEFAULT, p: float = 0.1, r: float = 0.1,
                   opts: ClassifyOptions | None = None, workers: int = 1,
                   refine: bool = True, refine_tol: float = 1e-4,
                   connection_tol: float = 1e-8,
                   transect_psis=()) -> EllipsoidChart:
    """Classify portraits over the (phi, psi) grid and refine the arcs.

    Neighbors along phi with differing portrait signatures are resolved
    into bifurcation arcs: equilibrium-count changes bisect to the static
    fold, central stability flips bisect to the Hopf meridian, and
    connection-type changes are refined with the manifold-shooting
    bisection.  Per-cell failures are recorded and the scan continues.
    ``transect_psis`` requests cycle-branch fold detection next to the
    homoclinic arc on those psi rows.
    """
    opts = opts or ClassifyOptions()
    phis = np.linspace(-1.0, 1.0, n_phi)
    psis = np.linspace(-1.0, 1.0, n_psi)
    cells = [(phi, psi, R, center, p, r, opts) for psi in psis for phi in phis]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_chart_cell, cells,
                                    chunksize=max(1, len(cells) // (8 * workers))))
    else:
        results = [_chart_cell(c) for c in cells]

    signatures: list = []
    code_of: dict = {}
    codes = np.full((n_psi, n_phi), -1, dtype=np.int32)
    failures: list = []
    for idx, (sig, err) in enumerate(results):
        i_psi, i_phi = divmod(idx, n_phi)
        if sig is None:
            failures.append((float(phis[i_phi]), float(psis[i_psi]), err))
            continue
        if sig not in code_of:
            code_of[sig] = len(signatures)
            signatures.append(sig)
        codes[i_psi, i_phi] = code_of[sig]

    arcs = {"fold": [], "hopf": [], "homoclinic": [], "heteroclinic": [],
            "cyclic_fold": [], "cusp": [(0.0, 0.0), (1.0, 0.0)],
            "symmetry_line": [(float(phi), 0.0) for phi in phis]}

    if refine:
        for i_psi, psi in enumerate(psis):
            for i_phi in range(n_phi - 1):
                c0, c1 = codes[i_psi, i_phi], codes[i_psi, i_phi + 1]
                if c0 < 0 or c1 < 0 or c0 == c1:
                    continue
                s0, s1 = signatures[c0], signatures[c1]
                lo, hi = float(phis[i_phi]), float(phis[i_phi + 1])
                point = (0.5 * (lo + hi), float(psi))
                if s0[0] == s1[0] == 1:
                    continue  # single-equilibrium classes; no arc to refine
                try:
                    if s0[0] != s1[0]:
                        phi_star = _bisect_count(
                            lambda ph: len(eqmod.find_equilibria(
                                ellipsoid_point(ph, psi, R, center, p, r))),
                            lo, hi, refine_tol)
                        arcs["fold"].append((phi_star, float(psi)))
                    elif _stability_flip(s0, s1):
                        phi_star = _bisect_scalar(
                            lambda ph: _central_re(
                                ellipsoid_point(ph, psi, R, center, p, r)),
                            lo, hi, refine_tol)
                        arcs["hopf"].append((phi_star, float(psi)))
                    elif s0[2] != s1[2] or s0[4] != s1[4]:
                        kind, tag = _connection_change(s0, s1)
                        if kind is None:
                            arcs["cyclic_fold"].append(point)
                            continue
                        source = Side.LEFT if psi >= 0.0 else Side.RIGHT
                        cp = find_connection(
                            lambda ph: ellipsoid_point(ph, psi, R, center, p, r),
                            (lo, hi), ConnectionSpec(kind, source),
                            xtol=connection_tol)
                        arcs[tag].append((cp.parameter_value, float(psi)))
                    else:
                        failures.append((lo, float(psi), f"unresolved {s0} vs {s1}"))
                except (GallopError, ValueError) as exc:
                    failures.append((lo, float(psi), f"refine failed: {exc}"))

    transects = []
    for psi in transect_psis:
        try:
            transects.append(cyclic_fold_transect(psi, R=R, center=center,
                                                  p=p, r=r))
        except GallopError as exc:
            failures.append((None, float(psi), f"transect failed: {exc}"))

    return EllipsoidChart(R=R, center=center, phis=phis, psis=psis,
                          codes=codes, signatures=signatures, arcs=arcs,
                          failures=failures, transects=transects)


def _stability_flip(s0, s1) -> bool:
    """Central equilibrium flips stability (the middle of three)."""
    if s0[0] != 3 or s1[0] != 3:
        return False
    k0, k1 = s0[1][1], s1[1][1]
    flip = {EqKind.STABLE_FOCUS: EqKind.UNSTABLE_FOCUS,
            EqKind.UNSTABLE_FOCUS: EqKind.STABLE_FOCUS,
            EqKind.STABLE_NODE: EqKind.UNSTABLE_NODE,
            EqKind.UNSTABLE_NODE: EqKind.STABLE_NODE}
    return flip.get(k0) == k1 or EqKind.DEGENERATE in (k0, k1)


def _connection_change(s0, s1):
    """Map a signature change to the connection kind that explains it."""
    esc0, esc1 = s0[4], s1[4]
    n0, n1 = s0[2], s1[2]
    one_sided = {"left_only", "right_only"}
    if {esc0.value, esc1.value} <= one_sided | {"indeterminate"} and esc0 != esc1 \
            and n0 == n1:
        return ConnectionKind.HETEROCLINIC, "heteroclinic"
    if abs(n0 - n1) == 1 and {n0, n1} == {1, 2}:
        return None, None  # cyclic fold: a cycle pair appears
    if n0 != n1:
        return ConnectionKind.HOMOCLINIC, "homoclinic"
    return ConnectionKind.HETEROCLINIC, "heteroclinic"


def cyclic_fold_transect(psi: float, R: float = 0.2, center=CENTER_DEFAULT,
                         p: float = 0.1, r: float = 0.1,
                         phi_bracket=(0.5, 1.0),
                         connection_tol: float = 1e-8) -> dict:
    """Locate the cycle-branch fold next to the homoclinic on one row.

    Finds the homoclinic along phi at this psi, then continues the cycle
    branch in v at the (b, e) of that chart point and reports the fold
    nearest the homoclinic speed.  The fold must sit just below the
    homoclinic, which is the signature of a cycle born stable at the
    connection and immediately folding.
    """
    source = Side.LEFT if psi >= 0.0 else Side.RIGHT
    # keep the search inside the three-equilibrium region: the static fold
    # bounds it from the high-phi side
    lo, hi = float(phi_bracket[0]), float(phi_bracket[1])
    if len(eqmod.find_equilibria(ellipsoid_point(hi, psi, R, center, p, r))) != 3:
        hi = _bisect_count(
            lambda ph: len(eqmod.find_equilibria(
                ellipsoid_point(ph, psi, R, center, p, r))),
            lo, hi, 1e-6) - 1e-4
    cp = find_connection(
        lambda ph: ellipsoid_point(ph, psi, R, center, p, r),
        (lo, hi), ConnectionSpec(ConnectionKind.HOMOCLINIC, source),
        xtol=connection_tol, prescan=12)
    q_hom = ellipsoid_point(cp.parameter_value, psi, R, center, p, r)
    v_hom_chart = q_hom.v
    # refine the homoclinic speed in v at fixed (b, e)
    v_h = eqmod.hopf_velocity(q_hom)
    cp_v = find_connection(lambda v: q_hom.with_v(v),
                           (max(v_hom_chart - 0.05, 1e-3), v_h - 1e-6),
                           ConnectionSpec(ConnectionKind.HOMOCLINIC, source),
                           xtol=connection_tol)
    branch = continue_branch(q_hom, v_range=(0.0, v_h + 0.5))
    # the fold is where the multiplier crosses unity along the branch; the
    # v-reversal itself can sit below resolution when the fold hugs the
    # connection, so bracket on the multiplier and refine on the slope
    idx = None
    for i in range(1, len(branch.cycles)):
        m0 = branch.cycles[i - 1].multiplier
        m1 = branch.cycles[i].multiplier
        if (m0 - 1.0) * (m1 - 1.0) < 0.0:
            idx = i
            break
    if idx is None:
        raise GallopError("cycle branch shows no fold on this transect")
    fold = locate_fold(q_hom, branch, idx)
    return {"psi": float(psi), "phi_hom": cp.parameter_value,
            "b": q_hom.b, "e": q_hom.e, "v_hom": cp_v.parameter_value,
            "v_fold": float(fold.v),
            "gap": float(cp_v.parameter_value - fold.v)}


# ---------------------------------------------------------------------------
# Ramped-velocity runs
# ---------------------------------------------------------------------------

class RampOutcome(Enum):
    ESCAPE_LEFT = "escape_left"
    ESCAPE_RIGHT = "escape_right"
    CAPTURED = "captured"


@dataclass
class RampResult:
    v0: float
    gamma: float
    init: State
    trajectory: object
    outcome: RampOutcome
    v_jump: float
    tunnelling: float


def ramp_run(q: ModelParams, gamma: float, init=None, v0: float | None = None,
             cfg: IntegratorConfig | None = None, jump_factor: float = 10.0,
             v_cap: float | None = None) -> RampResult:
    """Integrate with v(t) = v0 + gamma t until escape or the ramp cap.

    ``init`` defaults to the central equilibrium displaced by -0.05 in x.
    The jump-off speed ``v_jump`` is the ramp value at the first sample
    past the stationary threshold where the distance from the
    equilibrium exceeds ``jump_factor`` times its running minimum (the
    threshold is a configuration value, not a physical constant).
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    v0 = q.v if v0 is None else float(v0)
    v_h = eqmod.hopf_velocity(q)
    if v_cap is None:
        v_cap = 2.4 * v_h
    cfg = cfg or RAMP_CFG
    # fast ramps cross the cap long before the instability has grown;
    # allow extra time (v keeps ramping) so every run resolves its escape
    t_span = max((v_cap - v0) / gamma, 1.0) + 600.0
    cfg = replace(cfg, t_max=t_span)

    eqs = eqmod.find_equilibria(q.with_v(0.0))
    central = eqmod.central_equilibrium(eqs)
    if central is None:
        raise GallopError("no central equilibrium to perturb")
    eq_arr = central.state.as_array()
    if init is None:
        init = State(central.x - 0.05, 0.0)
    elif not isinstance(init, State):
        init = State(float(init[0]), float(init[1]))

    f, v_of_t = ramped_galloping_field(q, v0, gamma)
    traj = integrate_nonautonomous(f, init, cfg=cfg,
                                   events=[escape_event(0.5 * math.pi),
                                           speed_event(6.0 + v_cap)],
                                   v_of_t=v_of_t)
    ev = traj.terminating_event()
    if ev is not None and ev.kind is EventKind.ESCAPE:
        side = ev.state[0] if ev.label == "escape" else ev.state[1]
        outcome = (RampOutcome.ESCAPE_RIGHT if side > 0
                   else RampOutcome.ESCAPE_LEFT)
    else:
        outcome = RampOutcome.CAPTURED

    d = np.linalg.norm(traj.states[:, :2] - eq_arr, axis=1)
    vs = traj.v_of_t
    run_min = np.minimum.accumulate(d)
    past = (vs > v_h) & (d > jump_factor * run_min)
    if np.any(past):
        v_jump = float(vs[int(np.argmax(past))])
    elif outcome is not RampOutcome.CAPTURED:
        v_jump = float(vs[-1])
    else:
        v_jump = float(vs[-1])
    return RampResult(v0=v0, gamma=gamma, init=init, trajectory=traj,
                      outcome=outcome, v_jump=v_jump, tunnelling=v_jump - v_h)


@dataclass
class BasinMap:
    """Outcome raster: 0 = escape left, 1 = escape right, 2 = captured."""

    axes: tuple
    coords: tuple
    outcomes: np.ndarray
    params: dict


_OUTCOME_CODE = {RampOutcome.ESCAPE_LEFT: 0, RampOutcome.ESCAPE_RIGHT: 1,
                 RampOutcome.CAPTURED: 2}


def _ramp_cell(args):
    q, gamma, x0, xd0, v0, rel_tol, abs_tol, v_cap = args
    cfg = IntegratorConfig(rel_tol=rel_tol, abs_tol=abs_tol, t_max=1e6)
    res = ramp_run(q, gamma, init=(x0, xd0), v0=v0, cfg=cfg, v_cap=v_cap)
    return _OUTCOME_CODE[res.outcome]


def _parallel_cells(cells, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_ramp_cell, cells,
                                 chunksize=max(1, len(cells) // (8 * workers))))
    return [_ramp_cell(c) for c in cells]


def basin_map_ramp(q: ModelParams, v0_values, gammas, init_offset: float = -0.05,
                   cfg: IntegratorConfig | None = None, workers: int = 1,
                   v_cap: float | None = None) -> BasinMap:
    """Ramp outcomes over a (v0, gamma) grid at a fixed initial offset.

    Rows follow ``gammas``; the initial state is the central equilibrium
    displaced by ``init_offset`` in x with zero rate.  Deterministic:
    cells are independent integrations, results ordered by cell index.
    """
    cfg = cfg or GRID_CFG
    eqs = eqmod.find_equilibria(q.with_v(0.0))
    central = eqmod.central_equilibrium(eqs)
    x0 = central.x + init_offset
    v0_values = np.asarray(list(v0_values), dtype=float)
    gammas = np.asarray(list(gammas), dtype=float)
    cells = [(q, float(g), float(x0), 0.0, float(v0), cfg.rel_tol, cfg.abs_tol,
              v_cap) for g in gammas for v0 in v0_values]
    codes = _parallel_cells(cells, workers)
    out = np.asarray(codes, dtype=np.int8).reshape(len(gammas), len(v0_values))
    return BasinMap(axes=("v0", "gamma"), coords=(v0_values, gammas),
                    outcomes=out,
                    params={"b": q.b, "e": q.e, "p": q.p, "r": q.r,
                            "init_offset": init_offset,
                            "rel_tol": cfg.rel_tol, "abs_tol": cfg.abs_tol})


def basin_map_ic(q: ModelParams, x0_values, xdot0_values, v0: float,
                 gamma: float, cfg: IntegratorConfig | None = None,
                 workers: int = 1, v_cap: float | None = None) -> BasinMap:
    """Ramp outcomes over the initial-condition plane at fixed v0, gamma."""
    cfg = cfg or GRID_CFG
    x0_values = np.asarray(list(x0_values), dtype=float)
    xdot0_values = np.asarray(list(xdot0_values), dtype=float)
    cells = [(q, float(gamma), float(x0), float(xd0), float(v0),
              cfg.rel_tol, cfg.abs_tol, v_cap)
             for xd0 in xdot0_values for x0 in x0_values]
    codes = _parallel_cells(cells, workers)
    out = np.asarray(codes, dtype=np.int8).reshape(len(xdot0_values),
                                                   len(x0_values))
    return BasinMap(axes=("x0", "xdot0"), coords=(x0_values, xdot0_values),
                    outcomes=out,
                    params={"b": q.b, "e": q.e, "p": q.p, "r": q.r,
                            "v0": v0, "gamma": gamma,
                            "rel_tol": cfg.rel_tol, "abs_tol": cfg.abs_tol})


# ---------------------------------------------------------------------------
# Slow-passage envelope prediction
# ---------------------------------------------------------------------------

@dataclass
class EnvelopePrediction:
    nu: np.ndarray
    d: np.ndarray
    c: np.ndarray
    d0: float
    nu0: float


def envelope_predict(q: ModelParams, gamma: float, nu0: float, d0: float,
                     nu_end: float, n: int = 201) -> EnvelopePrediction:
    """Amplitude envelope d(nu) = d0 exp(int c / gamma) along a slow ramp.

    ``c(nu)`` is the real part of the central equilibrium's complex
    eigenvalue pair at wind speed nu (the equilibrium position does not
    move with nu, so the decay/growth rate is the only drifting
    quantity).  Raises :class:`FocusLost` if the pair becomes real
    anywhere on the grid.
    """
    eqs = eqmod.find_equilibria(q.with_v(0.0))
    central = eqmod.central_equilibrium(eqs)
    if central is None:
        raise GallopError("no central equilibrium")
    y = central.state.as_array()

    def c_of(nu: float) -> float:
        from .model import jacobian
        eigs, _ = classify_matrix(jacobian(y, q.with_v(nu)))
        if abs(eigs[0].imag) < 1e-12:
            raise FocusLost(f"eigenvalues real at nu={nu}")
        return eigs[0].real

    nu = np.linspace(nu0, nu_end, n)
    c = np.array([c_of(float(x)) for x in nu])
    cum = np.zeros(n)
    for i in range(1, n):
        seg, _ = quad(c_of, nu[i - 1], nu[i], epsabs=1e-12, epsrel=1e-10)
        cum[i] = cum[i - 1] + seg
    d = d0 * np.exp(cum / gamma)
    return EnvelopePrediction(nu=nu, d=d, c=c, d0=d0, nu0=nu0)


def ramp_envelope(result: RampResult, q: ModelParams):
    """Displacement-amplitude peaks of a ramped run: (nu_k, A_k) arrays.

    Peaks of |x - x_eq| sample the rotation-free amplitude envelope the
    prediction formula describes.
    """
    eqs = eqmod.find_equilibria(q.with_v(0.0))
    central = eqmod.central_equilibrium(eqs)
    dx = np.abs(result.trajectory.states[:, 0] - central.x)
    vs = result.trajectory.v_of_t
    peaks = [i for i in range(1, len(dx) - 1)
             if dx[i] >= dx[i - 1] and dx[i] > dx[i + 1]]
    return vs[peaks], dx[peaks]


# ---------------------------------------------------------------------------
# Normal-form chart
# ---------------------------------------------------------------------------

def normal_form_equilibria(n: NormalFormParams) -> list[Equilibrium]:
    """Analytic equilibria of the normal form: 0 and +-sqrt(-p_nf)."""
    xs = [0.0]
    if n.p_nf < 0.0:
        root = math.sqrt(-n.p_nf)
        xs = [-root, 0.0, root]
    out = []
    for x in xs:
        eigs, kind = classify_matrix(normal_form_jacobian((x, 0.0), n))
        out.append(Equilibrium(state=State(x, 0.0), eigenvalues=eigs,
                               kind=kind, residual=0.0))
    return out


@dataclass
class NormalFormChart:
    w: np.ndarray
    p: np.ndarray
    codes: np.ndarray
    signatures: list
    failures: list


def _nf_cell(args):
    w, p, opts = args
    n = NormalFormParams(w=w, p_nf=p)
    try:
        field = normal_form_field(n)
        eqs = normal_form_equilibria(n)
        pc = classify_portrait_field(field, eqs, opts)
        return pc.signature(), None
    except GallopError as exc:
        return None, str(exc)


def normal_form_chart(w_values, p_values, opts: ClassifyOptions | None = None,
                      workers: int = 1) -> NormalFormChart:
    """Portrait classes of the normal form over a (w, p) grid."""
    opts = opts or ClassifyOptions()
    w_values = np.asarray(list(w_values), dtype=float)
    p_values = np.asarray(list(p_values), dtype=float)
    cells = [(float(w), float(p), opts) for p in p_values for w in w_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_nf_cell, cells))
    else:
        results = [_nf_cell(c) for c in cells]
    signatures, code_of = [], {}
    codes = np.full((len(p_values), len(w_values)), -1, dtype=np.int32)
    failures = []
    for idx, (sig, err) in enumerate(results):
        i_p, i_w = divmod(idx, len(w_values))
        if sig is None:
            failures.append((float(w_values[i_w]), float(p_values[i_p]), err))
            continue
        if sig not in code_of:
            code_of[sig] = len(signatures)
            signatures.append(sig)
        codes[i_p, i_w] = code_of[sig]
    return NormalFormChart(w=w_values, p=p_values, codes=codes,
                           signatures=signatures, failures=failures)


def normal_form_miss(n: NormalFormParams,
                     cfg: IntegratorConfig | None = None,
                     delta: float = 1e-6) -> MissResult:
    """Symmetric heteroclinic miss distance of the normal form.

    Compares the left saddle's unstable inner branch against the right
    saddle's stable inner branch on the section x = 0, upper leg; by the
    odd symmetry the mirrored connection occurs simultaneously.
    """
    if n.p_nf >= 0.0:
        raise GallopError("saddle pair requires p_nf < 0")
    field = normal_form_field(n)
    eqs = normal_form_equilibria(n)
    left, _, right = eqs
    from .connections import MANIFOLD_CFG
    return _miss_field(field, left, right, 0.0, 1, delta, cfg or MANIFOLD_CFG)


def normal_form_s_point(w: float, p_bracket, xtol: float = 1e-8) -> float:
    """Saddle-connection parameter on a p-sweep at fixed w (curve S)."""
    a, b = float(p_bracket[0]), float(p_bracket[1])
    fa = normal_form_miss(NormalFormParams(w=w, p_nf=a)).value
    fb = normal_form_miss(NormalFormParams(w=w, p_nf=b)).value
    if fa * fb > 0:
        raise NoSignChange(f"heteroclinic miss keeps its sign on [{a}, {b}]")
    while b - a > xtol:
        m = 0.5 * (a + b)
        fm = normal_form_miss(NormalFormParams(w=w, p_nf=m)).value
        if fa * fm <= 0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    return 0.5 * (a + b)
