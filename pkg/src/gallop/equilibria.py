"""Equilibria: location, linear classification, Hopf locus and statics.

Static equilibria solve (1+b)(e + sin x) cos x = sin x on (-pi/2, pi/2).
Their positions are independent of the wind speed (the aerodynamic term
vanishes with x'), so the Hopf condition reduces to a trace-zero
condition on the damping entries and can be located both analytically
and by eigenvalue bisection.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .errors import GallopError, NoConvergence, NoSignChange, ResidualTooLarge
from .model import (ModelParams, State, _CF_SLOPE0, as_state_array,
                    jacobian, rhs)

__all__ = [
    "EqKind",
    "Equilibrium",
    "find_equilibria",
    "central_equilibrium",
    "eigen_classify",
    "classify_matrix",
    "hopf_velocity",
    "hopf_velocity_numeric",
    "StaticPath",
    "static_path",
    "fold_point",
    "imperfection_sensitivity",
]

DEGENERACY_BAND = 1e-9  # |Re lambda| below this is flagged degenerate


class EqKind(Enum):
    STABLE_FOCUS = "stable_focus"
    UNSTABLE_FOCUS = "unstable_focus"
    STABLE_NODE = "stable_node"
    UNSTABLE_NODE = "unstable_node"
    SADDLE = "saddle"
    DEGENERATE = "degenerate"

    @property
    def is_stable(self) -> bool:
        return self in (EqKind.STABLE_FOCUS, EqKind.STABLE_NODE)

    @property
    def is_unstable(self) -> bool:
        return self in (EqKind.UNSTABLE_FOCUS, EqKind.UNSTABLE_NODE, EqKind.SADDLE)


@dataclass(frozen=True)
class Equilibrium:
    state: State
    eigenvalues: tuple
    kind: EqKind
    residual: float

    @property
    def x(self) -> float:
        return self.state.x


def classify_matrix(J, band: float = DEGENERACY_BAND):
    """Eigenvalues and linear type of a 2x2 real matrix.

    The eigenpair comes from the trace/determinant closed form, so the
    sum/product identities hold to rounding.  Real parts within ``band``
    of zero are flagged degenerate rather than forced into a call.
    """
    tr = float(J[0][0] + J[1][1])
    det = float(J[0][0] * J[1][1] - J[0][1] * J[1][0])
    disc = tr * tr - 4.0 * det
    s = cmath.sqrt(complex(disc, 0.0))
    lam1, lam2 = 0.5 * (tr - s), 0.5 * (tr + s)
    eigs = tuple(sorted((lam1, lam2), key=lambda z: (z.real, z.imag)))

    if abs(det) < 1e-14:
        return eigs, EqKind.DEGENERATE
    if det < 0.0:
        return eigs, EqKind.SADDLE
    if abs(tr) < 2.0 * band:
        return eigs, EqKind.DEGENERATE
    if disc < 0.0:
        return eigs, EqKind.STABLE_FOCUS if tr < 0.0 else EqKind.UNSTABLE_FOCUS
    return eigs, EqKind.STABLE_NODE if tr < 0.0 else EqKind.UNSTABLE_NODE


def classify_field_state(field, y):
    """Classify a state of any planar field by its analytic Jacobian."""
    return classify_matrix(field.jac(np.asarray(y, dtype=float)))


def eigen_classify(state, q: ModelParams, residual_tol: float = 1e-10) -> Equilibrium:
    """Classify an equilibrium state of the galloping field.

    Raises :class:`ResidualTooLarge` when the state does not satisfy the
    equilibrium condition to ``residual_tol``.
    """
    y = as_state_array(state)
    res = float(np.max(np.abs(rhs(y, q))))
    if res > residual_tol:
        raise ResidualTooLarge(
            f"|rhs| = {res:.3e} exceeds {residual_tol:.1e} at x={y[0]!r}")
    eigs, kind = classify_matrix(jacobian(y, q))
    return Equilibrium(state=State(float(y[0]), float(y[1])), eigenvalues=eigs,
                       kind=kind, residual=res)


# ---------------------------------------------------------------------------
# Root finding for the static equation
# ---------------------------------------------------------------------------

def _static_g(x: float, b: float, e: float) -> float:
    return (1.0 + b) * (e + math.sin(x)) * math.cos(x) - math.sin(x)


def _static_gx(x: float, b: float, e: float) -> float:
    return (1.0 + b) * (math.cos(2.0 * x) - e * math.sin(x)) - math.cos(x)


def _newton_polish(x0: float, b: float, e: float, tol: float = 1e-14,
                   max_iter: int = 50) -> float:
    x = x0
    for _ in range(max_iter):
        g = _static_g(x, b, e)
        if abs(g) < tol:
            return x
        gx = _static_gx(x, b, e)
        if gx == 0.0:
            break
        x -= g / gx
    if abs(_static_g(x, b, e)) < 1e-11:
        return x
    raise NoConvergence(f"Newton stalled near x={x0!r} (b={b}, e={e})")


def find_equilibria(q: ModelParams, n_scan: int = 2000) -> list[Equilibrium]:
    """All equilibria on (-pi/2, pi/2), classified, sorted by x.

    Sign scan on ``n_scan`` subintervals followed by Brent bracketing and
    a Newton polish; at the parameter scales studied the static equation
    has at most three roots, well separated at this resolution.
    """
    half = 0.5 * math.pi
    xs = np.linspace(-half, half, n_scan + 1)
    vals = np.array([_static_g(x, q.b, q.e) for x in xs])
    roots: list[float] = []
    for i in range(n_scan):
        a, fb_a = xs[i], vals[i]
        c, fb_c = xs[i + 1], vals[i + 1]
        if fb_a == 0.0:
            roots.append(float(a))
            continue
        if fb_a * fb_c < 0.0:
            xr = brentq(_static_g, a, c, args=(q.b, q.e), xtol=1e-14, rtol=8.9e-16)
            roots.append(_newton_polish(xr, q.b, q.e))
    if vals[-1] == 0.0:
        roots.append(float(xs[-1]))
    # dedupe (an exact grid-point zero can also terminate a bracket)
    out: list[float] = []
    for xr in sorted(roots):
        if not out or abs(xr - out[-1]) > 1e-10:
            out.append(xr)
    if q.e == 0.0:
        # enforce the exact equivariance of the perfect system so mirrored
        # launches stay bitwise mirrored downstream
        pos = [x for x in out if x > 1e-12]
        out = [-x for x in reversed(pos)]
        if any(abs(x) <= 1e-12 for x in roots) or 0.0 in roots:
            out.append(0.0)
        out.extend(pos)
        out.sort()
    return [eigen_classify(State(xr, 0.0), q, residual_tol=1e-10) for xr in out]


def central_equilibrium(eqs) -> Equilibrium | None:
    """The non-saddle equilibrium at the bottom of the well, if present."""
    non_saddle = [eq for eq in eqs if eq.kind is not EqKind.SADDLE]
    if not non_saddle:
        return None
    if len(non_saddle) > 1:  # degenerate scans may misclassify; take middle
        non_saddle.sort(key=lambda eq: abs(eq.x))
    return non_saddle[0]


# ---------------------------------------------------------------------------
# Hopf locus
# ---------------------------------------------------------------------------

def hopf_velocity(q: ModelParams) -> float:
    """Wind speed where the effective linear damping vanishes.

    v_H = 2 r / (p * Cf'(0)) with Cf'(0) = 16/15; independent of b and e
    because the equilibrium position does not move with v.
    """
    return 2.0 * q.r / (q.p * _CF_SLOPE0)


def hopf_velocity_numeric(q: ModelParams, v_hi: float | None = None,
                          xtol: float = 1e-10) -> float:
    """Hopf speed by bisecting the central equilibrium's eigenvalue real
    part in v; agrees with :func:`hopf_velocity` to solver precision."""
    if not (q.p > 0 and q.r > 0):
        raise GallopError("numeric Hopf detection needs p > 0 and r > 0")
    eqs = find_equilibria(q)
    central = central_equilibrium(eqs)
    if central is None:
        raise GallopError("no central (non-saddle) equilibrium at these parameters")
    y = central.state.as_array()

    def re_part(v: float) -> float:
        eigs, _ = classify_matrix(jacobian(y, q.with_v(v)))
        return max(z.real for z in eigs)

    if v_hi is None:
        v_hi = 2.5 * hopf_velocity(q) + 0.5
    f_lo, f_hi = re_part(0.0), re_part(v_hi)
    if f_lo * f_hi > 0.0:
        raise NoSignChange(f"no stability change on v in [0, {v_hi}]")
    return brentq(re_part, 0.0, v_hi, xtol=xtol, rtol=8.9e-16)


# ---------------------------------------------------------------------------
# Static continuation (post-buckling path, folds, imperfection law)
# ---------------------------------------------------------------------------

def _static_gb(x: float, e: float) -> float:
    return (e + math.sin(x)) * math.cos(x)


def _static_gxx(x: float, b: float, e: float) -> float:
    return (1.0 + b) * (-2.0 * math.sin(2.0 * x) - e * math.cos(x)) + math.sin(x)


def _static_gxb(x: float, e: float) -> float:
    return math.cos(2.0 * x) - e * math.sin(x)


@dataclass
class StaticPath:
    """Continuation output: load-deflection points with stability flags."""

    b: np.ndarray
    x: np.ndarray
    stable: np.ndarray
    folds: list
    branch_points: list


def fold_point(e: float, x_guess: float, b_guess: float,
               tol: float = 1e-13, max_iter: int = 60):
    """Polish a static fold by Newton on the bordered system
    (G = 0, G_x = 0); quadratically convergent from a nearby guess."""
    x, b = x_guess, b_guess
    for _ in range(max_iter):
        g = _static_g(x, b, e)
        gx = _static_gx(x, b, e)
        if abs(g) < tol and abs(gx) < tol:
            return float(b), float(x)
        J = np.array([[gx, _static_gb(x, e)],
                      [_static_gxx(x, b, e), _static_gxb(x, e)]])
        try:
            dx, db = np.linalg.solve(J, [-g, -gx])
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular bordered system at x={x}, b={b}") from exc
        x += dx
        b += db
    raise NoConvergence(f"fold polish stalled at x={x}, b={b} (e={e})")


def static_path(e: float, b_start: float = 1.0, b_min: float = -0.5,
                seed: tuple | None = None, ds0: float = 2e-3,
                ds_max: float = 2e-2, max_points: int = 20000,
                x_stop: float = 1.5, b_stop_high: float | None = None) -> StaticPath:
    """Pseudo-arclength continuation of the static equilibrium path in (b, x).

    Starts from the loaded (central) equilibrium at ``b_start`` and follows
    the path toward decreasing b, around any fold, and up the post-buckling
    branch.  ``seed = (x0, b0)`` overrides the start, which is how the
    perfect post-buckling path (e = 0, nontrivial branch) is traced.
    Folds are polished on the bordered system; a pitchfork on the trivial
    path (G_x sign change with G_b ~ 0) is recorded as a branch point.
    """
    if seed is None:
        q0 = ModelParams(b=b_start, e=e, v=0.0)
        eqs = find_equilibria(q0)
        central = central_equilibrium(eqs)
        if central is None:
            raise NoConvergence(f"no central equilibrium at b={b_start}, e={e}")
        x0, b0 = central.x, b_start
    else:
        x0, b0 = seed
        x0 = _newton_polish(x0, b0, e)

    if b_stop_high is None:
        b_stop_high = b_start + 1.0

    pts_b, pts_x = [b0], [x0]
    tau = None
    ds = ds0
    folds: list = []
    branch_points: list = []

    def tangent(x, b, prev):
        gx, gb = _static_gx(x, b, e), _static_gb(x, e)
        t = np.array([-gb, gx])
        n = np.linalg.norm(t)
        if n == 0.0:
            raise NoConvergence("singular tangent on static path")
        t /= n
        if prev is None:
            if t[1] > 0:  # choose decreasing b initially (t = (dx, db))
                t = -t
        elif float(np.dot(t, prev)) < 0.0:
            t = -t
        return t

    x, b = x0, b0
    tau = tangent(x, b, None)
    for _ in range(max_points):
        # predictor / corrector
        for attempt in range(40):
            xp, bp = x + ds * tau[0], b + ds * tau[1]
            xn, bn = xp, bp
            ok = False
            for _ in range(12):
                g = _static_g(xn, bn, e)
                cc = tau[0] * (xn - xp) + tau[1] * (bn - bp)
                if abs(g) < 1e-13 and abs(cc) < 1e-13:
                    ok = True
                    break
                J = np.array([[_static_gx(xn, bn, e), _static_gb(xn, e)],
                              [tau[0], tau[1]]])
                try:
                    dxy = np.linalg.solve(J, [-g, -cc])
                except np.linalg.LinAlgError:
                    break
                xn += dxy[0]
                bn += dxy[1]
            if ok:
                break
            ds *= 0.5
            if ds < 1e-12:
                raise NoConvergence("static continuation step underflow")
        else:
            raise NoConvergence("static continuation failed to correct")

        tau_new = tangent(xn, bn, tau)
        # fold: the b-component of the tangent reverses
        if tau[1] * tau_new[1] < 0.0 and abs(_static_gb(xn, e)) > 1e-8:
            folds.append(fold_point(e, xn, bn))
        # pitchfork on the trivial path: G_x crosses zero with G_b ~ 0
        gx_old = _static_gx(x, b, e)
        gx_new = _static_gx(xn, bn, e)
        if gx_old * gx_new < 0.0 and abs(_static_gb(xn, e)) < 1e-8:
            bcross = brentq(lambda bb: _static_gx(xn, bb, e),
                            min(b, bn), max(b, bn), xtol=1e-14)
            branch_points.append((float(bcross), float(xn)))

        x, b, tau = xn, bn, tau_new
        pts_b.append(b)
        pts_x.append(x)
        ds = min(ds * 1.4, ds_max)
        if b < b_min or b > b_stop_high or abs(x) > x_stop:
            break

    b_arr = np.asarray(pts_b)
    x_arr = np.asarray(pts_x)
    stable = np.array([_static_gx(xx, bb, e) > 0.0
                       for xx, bb in zip(x_arr, b_arr)])
    return StaticPath(b=b_arr, x=x_arr, stable=stable, folds=folds,
                      branch_points=branch_points)


@dataclass
class SensitivityResult:
    e: np.ndarray
    b_fold: np.ndarray
    slope: float


def imperfection_sensitivity(e_values, b_start: float = 1.0) -> SensitivityResult:
    """Fold load for each imperfection and the log-log power-law slope.

    The fold load drop is measured from the perfect critical point b = 0,
    so the drop equals the fold's b value itself; its log-log slope
    against |e| recovers the two-thirds power law.
    """
    e_arr = np.asarray(list(e_values), dtype=float)
    if np.any(e_arr == 0.0):
        raise ValueError("imperfection values must be nonzero")
    if np.any(np.sign(e_arr) != np.sign(e_arr[0])):
        raise ValueError("imperfection values must share a sign")
    b_folds = []
    for e in e_arr:
        path = static_path(float(e), b_start=b_start)
        if not path.folds:
            raise NoConvergence(f"no fold found for e={e}")
        b_folds.append(path.folds[0][0])
    b_folds = np.asarray(b_folds)
    slope = float(np.polyfit(np.log(np.abs(e_arr)), np.log(b_folds), 1)[0])
    return SensitivityResult(e=e_arr, b_fold=b_folds, slope=slope)
