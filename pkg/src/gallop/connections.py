"""Saddle connections and symbolic phase-portrait classification.

Homoclinic and heteroclinic connections are detected by shooting: the
relevant unstable-manifold branch is launched a small offset along the
saddle's eigenvector and integrated to a fixed cross-section (the
vertical line through the central equilibrium), the target stable-
manifold branch is obtained the same way in reversed time, and their
signed separation on the section changes sign across a connection.

Portrait classification composes the equilibrium census, a limit-cycle
census on the turning-point section, and an escape-channel probe: a
hilltop's escape gate is open exactly when the inner branch of its
stable manifold stays bounded in backward time (it then spirals onto
the unstable set, so disturbances of that set can leave through the
gate).  Two open gates make the outcome indeterminate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from enum import Enum

import numpy as np

from .errors import GallopError, NoSignChange
from .integrator import (ConvergenceSpec, EventKind, EventSpec,
                         IntegratorConfig, escape_events, integrate)
from .model import ModelParams, PlanarField, galloping_field
from .cycles import LimitCycle, cycle_scan
from . import equilibria as eqmod
from .equilibria import EqKind, Equilibrium

__all__ = [
    "Side",
    "ConnectionKind",
    "ConnectionSpec",
    "ManifoldKind",
    "ManifoldBranch",
    "MissResult",
    "ConnectionPoint",
    "EscapeClass",
    "PortraitClass",
    "ClassifyOptions",
    "manifold_branch",
    "miss_distance",
    "find_connection",
    "classify_portrait",
    "classify_portrait_field",
]

MISS_BIG = 1e3          # sentinel magnitude when a branch escapes pre-section
MANIFOLD_DELTA = 1e-6   # launch offset along the saddle eigenvector

MANIFOLD_CFG = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12, t_max=400.0)
PROBE_CFG = IntegratorConfig(rel_tol=1e-6, abs_tol=1e-9, t_max=400.0)


class Side(Enum):
    LEFT = -1
    RIGHT = 1


class ConnectionKind(Enum):
    HOMOCLINIC = "homoclinic"
    HETEROCLINIC = "heteroclinic"


class ManifoldKind(Enum):
    UNSTABLE = "unstable"
    STABLE = "stable"


@dataclass(frozen=True)
class ConnectionSpec:
    """Which connection to measure: the source saddle's inner unstable
    branch against the inner stable branch of itself (homoclinic) or of
    the opposite saddle (heteroclinic)."""

    kind: ConnectionKind
    source: Side = Side.LEFT


@dataclass
class ManifoldBranch:
    saddle: Equilibrium
    kind: ManifoldKind
    side: int
    trajectory: object


@dataclass(frozen=True)
class MissResult:
    value: float
    escaped: bool
    u_state: np.ndarray | None = None
    s_state: np.ndarray | None = None


@dataclass(frozen=True)
class ConnectionPoint:
    kind: ConnectionKind
    parameter_value: float
    bracket_width: float


class EscapeClass(Enum):
    BOUNDED = "bounded"
    LEFT_ONLY = "left_only"
    RIGHT_ONLY = "right_only"
    INDETERMINATE = "indeterminate"


# ---------------------------------------------------------------------------
# Manifold branches
# ---------------------------------------------------------------------------

def _saddle_eigvecs(field: PlanarField, eq: Equilibrium):
    """(unstable eigvec, stable eigvec), each normalized with positive
    x-component.  The companion structure of the Jacobian makes the
    eigenvector for eigenvalue lam exactly (1, lam)."""
    J = field.jac(eq.state.as_array())
    tr = J[0][0] + J[1][1]
    det = J[0][0] * J[1][1] - J[0][1] * J[1][0]
    disc = tr * tr - 4.0 * det
    if det >= 0.0 or disc <= 0.0:
        raise GallopError("state is not a saddle")
    s = math.sqrt(disc)
    lam_u, lam_s = 0.5 * (tr + s), 0.5 * (tr - s)
    vu = np.array([1.0, lam_u])
    vs = np.array([1.0, lam_s])
    return vu / np.linalg.norm(vu), vs / np.linalg.norm(vs)


def _reversed(field: PlanarField):
    f = field.rhs
    return lambda t, y: -f(t, y)


def manifold_branch(saddle: Equilibrium, kind: ManifoldKind, side: int,
                    q: ModelParams | None = None, *, field: PlanarField | None = None,
                    cfg: IntegratorConfig | None = None, delta: float = MANIFOLD_DELTA,
                    target=None, section_x: float | None = None,
                    max_crossings: int | None = None) -> ManifoldBranch:
    """Integrate one branch of a saddle's invariant manifold.

    The branch is launched ``delta`` along the corresponding eigenvector
    on the given side (+1 toward positive x); stable branches run in the
    reversed field.  Integration stops on escape, on convergence to
    ``target`` (held for a unit of time), after ``max_crossings`` of the
    line x = section_x, or at t_max.
    """
    cfg = cfg or MANIFOLD_CFG
    if field is None:
        field = galloping_field(q)
    vu, vs = _saddle_eigvecs(field, saddle)
    vec = vu if kind is ManifoldKind.UNSTABLE else vs
    y0 = saddle.state.as_array() + delta * side * vec
    f = field.rhs if kind is ManifoldKind.UNSTABLE else _reversed(field)
    events = escape_events(field)
    if section_x is not None and max_crossings is not None:
        events.append(EventSpec(func=lambda t, y: y[0] - section_x, direction=0,
                                max_count=max_crossings,
                                kind=EventKind.SECTION_CROSS, label="section"))
    conv = None
    if target is not None:
        conv = ConvergenceSpec(target=np.asarray(target, dtype=float))
    traj = integrate(f, y0, cfg=cfg, events=events, convergence=conv)
    return ManifoldBranch(saddle=saddle, kind=kind, side=side, trajectory=traj)


def _first_section_crossing(field, y0, reverse: bool, section_x: float,
                            forward_sign: int, cfg: IntegratorConfig):
    """State at the first crossing of x = section_x whose forward-time
    direction of motion matches ``forward_sign`` (+1 rightward / upward
    leg, -1 leftward / downward leg).  Returns ('escaped', side) or
    ('timeout', None) when no such crossing occurs."""
    f = _reversed(field) if reverse else field.rhs
    # In reversed time x decreases where xdot > 0, so the event slope flips.
    direction = -forward_sign if reverse else forward_sign
    cross = EventSpec(func=lambda t, y: y[0] - section_x, direction=direction,
                      terminal=True, kind=EventKind.SECTION_CROSS, label="section")
    traj = integrate(f, y0, cfg=cfg, events=[cross] + escape_events(field))
    ev = traj.terminating_event()
    if ev is None:
        return "timeout", None
    if ev.kind is EventKind.ESCAPE:
        return "escaped", 1 if ev.state[0] > 0 else -1
    if ev.kind is EventKind.TIMEOUT:
        return "timeout", None
    return "ok", ev.state


def _miss_field(field: PlanarField, src: Equilibrium, tgt: Equilibrium,
                section_x: float, crossing_sign: int, delta: float,
                cfg: IntegratorConfig) -> MissResult:
    vu_src, _ = _saddle_eigvecs(field, src)
    _, vs_tgt = _saddle_eigvecs(field, tgt)
    side_u = 1 if src.x < section_x else -1
    side_s = 1 if tgt.x < section_x else -1

    yu = src.state.as_array() + delta * side_u * vu_src
    status_u, res_u = _first_section_crossing(field, yu, False, section_x,
                                              crossing_sign, cfg)
    ys = tgt.state.as_array() + delta * side_s * vs_tgt
    status_s, res_s = _first_section_crossing(field, ys, True, section_x,
                                              crossing_sign, cfg)

    if status_u == "escaped":
        return MissResult(value=MISS_BIG * res_u, escaped=True)
    if status_s == "escaped":
        return MissResult(value=-MISS_BIG * res_s, escaped=True)
    if status_u != "ok" or status_s != "ok":
        raise GallopError("manifold branch timed out before the section")
    return MissResult(value=float(res_u[1] - res_s[1]), escaped=False,
                      u_state=res_u, s_state=res_s)


def _connection_geometry(spec: ConnectionSpec):
    """Crossing direction for the comparison leg of each connection type.

    A left saddle's inner unstable branch leaves rightward (upper leg);
    its homoclinic closes on the returning lower leg (leftward, sign -1)
    while the left-to-right heteroclinic runs along the upper leg
    (sign +1).  Right-sourced connections mirror both signs.
    """
    if spec.source is Side.LEFT:
        return -1 if spec.kind is ConnectionKind.HOMOCLINIC else 1
    return 1 if spec.kind is ConnectionKind.HOMOCLINIC else -1


def _saddle_triplet(eqs):
    if len(eqs) != 3:
        raise GallopError(f"expected 3 equilibria, found {len(eqs)}")
    left, central, right = eqs
    if left.kind is not EqKind.SADDLE or right.kind is not EqKind.SADDLE:
        raise GallopError("outer equilibria are not saddles")
    return left, central, right


def miss_distance(q: ModelParams, spec: ConnectionSpec,
                  cfg: IntegratorConfig | None = None,
                  delta: float = MANIFOLD_DELTA) -> MissResult:
    """Signed separation of the connection's manifold pair on the section.

    Measured as the difference of the x' values where the unstable and
    stable branches first cross the line x = x_central on the comparison
    leg; positive means the unstable branch passes above the stable one.
    A branch that escapes before the section yields a sign-carrying
    sentinel of magnitude ``MISS_BIG`` with ``escaped`` set.
    """
    field = galloping_field(q)
    eqs = eqmod.find_equilibria(q)
    left, central, right = _saddle_triplet(eqs)
    src = left if spec.source is Side.LEFT else right
    tgt = src if spec.kind is ConnectionKind.HOMOCLINIC else \
        (right if spec.source is Side.LEFT else left)
    return _miss_field(field, src, tgt, central.x, _connection_geometry(spec),
                       delta, cfg or MANIFOLD_CFG)


def find_connection(family, bracket, spec: ConnectionSpec,
                    xtol: float = 1e-8, cfg: IntegratorConfig | None = None,
                    delta: float = MANIFOLD_DELTA,
                    prescan: int = 0) -> ConnectionPoint:
    """Bisect the free parameter of ``family`` to a connection.

    ``family`` maps the free parameter to :class:`ModelParams` (for
    example ``lambda v: q.with_v(v)``).  The miss distance must change
    sign over ``bracket``; bisection stops at width ``xtol``.  With
    ``prescan`` > 0 the bracket is first narrowed to a sign change
    between two non-escaped evaluations, which skips the sentinel zone
    where a manifold branch leaves before the section.
    """
    a, b = float(bracket[0]), float(bracket[1])
    if prescan > 1:
        xs = np.linspace(a, b, prescan)
        vals = [miss_distance(family(float(x)), spec, cfg=cfg, delta=delta)
                for x in xs]
        for i in range(prescan - 1):
            m0, m1 = vals[i], vals[i + 1]
            if (not m0.escaped and not m1.escaped
                    and m0.value * m1.value <= 0.0):
                a, b = float(xs[i]), float(xs[i + 1])
                break
        else:
            raise NoSignChange(
                f"no clean miss sign change among {prescan} samples")
    fa = miss_distance(family(a), spec, cfg=cfg, delta=delta).value
    fb = miss_distance(family(b), spec, cfg=cfg, delta=delta).value
    if fa == 0.0:
        return ConnectionPoint(spec.kind, a, 0.0)
    if fb == 0.0:
        return ConnectionPoint(spec.kind, b, 0.0)
    if fa * fb > 0.0:
        raise NoSignChange(f"miss distance does not change sign on [{a}, {b}]")
    while b - a > xtol:
        m = 0.5 * (a + b)
        fm = miss_distance(family(m), spec, cfg=cfg, delta=delta).value
        if fm == 0.0:
            a = b = m
            break
        if fa * fm < 0.0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    return ConnectionPoint(spec.kind, 0.5 * (a + b), b - a)


# ---------------------------------------------------------------------------
# Portrait classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassifyOptions:
    scan_cfg: IntegratorConfig = dc_field(
        default_factory=lambda: IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10,
                                                 t_max=500.0))
    probe_cfg: IntegratorConfig = dc_field(default_factory=lambda: PROBE_CFG)
    n_scan: int = 16
    amp_min: float = 2e-3
    hill_margin: float = 1e-3
    gate_time: float = 150.0
    delta: float = MANIFOLD_DELTA
    probe_eps: float = 1e-4
    max_cycles: int = 2


@dataclass(frozen=True)
class PortraitClass:
    """Symbolic summary of a phase portrait."""

    n_equilibria: int
    eq_kinds: tuple
    n_cycles: int
    cycle_stability: tuple
    escape: EscapeClass
    equilibria: tuple = ()
    cycles: tuple = ()
    gates: tuple | None = None
    flags: tuple = ()

    def signature(self):
        return (self.n_equilibria, self.eq_kinds, self.n_cycles,
                self.cycle_stability, self.escape)

    def mirrored_signature(self):
        """Signature after the x -> -x relabeling (e -> -e equivariance)."""
        esc = {EscapeClass.LEFT_ONLY: EscapeClass.RIGHT_ONLY,
               EscapeClass.RIGHT_ONLY: EscapeClass.LEFT_ONLY}.get(self.escape,
                                                                  self.escape)
        return (self.n_equilibria, tuple(reversed(self.eq_kinds)),
                self.n_cycles, self.cycle_stability, esc)


def _gate_open(field: PlanarField, saddle: Equilibrium, section_x: float,
               opts: ClassifyOptions) -> bool:
    """True when the saddle's inner stable branch is bounded in backward
    time (the escape channel over this hilltop reaches the unstable set)."""
    _, vs = _saddle_eigvecs(field, saddle)
    side = 1 if saddle.x < section_x else -1
    y0 = saddle.state.as_array() + opts.delta * side * vs
    cfg = IntegratorConfig(rel_tol=opts.probe_cfg.rel_tol,
                           abs_tol=opts.probe_cfg.abs_tol,
                           t_max=opts.gate_time,
                           state_cap=opts.probe_cfg.state_cap)
    traj = integrate(_reversed(field), y0, cfg=cfg,
                     events=escape_events(field))
    ev = traj.terminating_event()
    return ev is None or ev.kind is not EventKind.ESCAPE


def _probe_escapes(field: PlanarField, y0, opts: ClassifyOptions):
    traj = integrate(field.rhs, y0, cfg=opts.probe_cfg,
                     events=escape_events(field))
    ev = traj.terminating_event()
    if ev is not None and ev.kind is EventKind.ESCAPE:
        side = ev.state[0] if ev.label == "escape" else ev.state[1]
        return 1 if side > 0 else -1
    return 0


def _escape_from_votes(votes):
    left = any(v < 0 for v in votes)
    right = any(v > 0 for v in votes)
    if left and right:
        return EscapeClass.INDETERMINATE
    if left:
        return EscapeClass.LEFT_ONLY
    if right:
        return EscapeClass.RIGHT_ONLY
    return EscapeClass.BOUNDED


def classify_portrait_field(field: PlanarField, eqs,
                            opts: ClassifyOptions | None = None,
                            v_label: float | None = None) -> PortraitClass:
    """Classify the portrait of any planar field given its equilibria."""
    opts = opts or ClassifyOptions()
    eqs = sorted(eqs, key=lambda e: e.x)
    kinds = tuple(e.kind for e in eqs)
    flags = []

    cycles: list[LimitCycle] = []
    if len(eqs) == 3:
        left, central, right = _saddle_triplet(eqs)
        try:
            cycles = cycle_scan(field=field, x_center=central.x,
                                x_lo=central.x + opts.amp_min,
                                x_hi=right.x - opts.hill_margin,
                                n=opts.n_scan, scan_cfg=opts.scan_cfg,
                                max_cycles=opts.max_cycles, v_label=v_label)
        except GallopError as exc:
            flags.append(f"cycle_census_failed:{exc}")

        unstable_set = None
        if central.kind.is_unstable or central.kind is EqKind.DEGENERATE:
            unstable_set = "equilibrium"
        elif any(not c.stable for c in cycles):
            unstable_set = "cycle"

        if unstable_set is None:
            escape = EscapeClass.BOUNDED
            gates = None
        else:
            gates = (_gate_open(field, left, central.x, opts),
                     _gate_open(field, right, central.x, opts))
            if gates[0] and gates[1]:
                escape = EscapeClass.INDETERMINATE
            elif gates[0]:
                escape = EscapeClass.LEFT_ONLY
            elif gates[1]:
                escape = EscapeClass.RIGHT_ONLY
            else:
                escape = EscapeClass.BOUNDED
    elif len(eqs) == 1:
        eq = eqs[0]
        gates = None
        if eq.kind is EqKind.SADDLE:
            vu, _ = _saddle_eigvecs(field, eq)
            votes = [_probe_escapes(field, eq.state.as_array() + s * opts.probe_eps * vu,
                                    opts) for s in (+1, -1)]
            escape = _escape_from_votes(votes)
        elif eq.kind.is_stable:
            escape = EscapeClass.BOUNDED
        else:
            # unstable focus/node: probe both signs of the dominant direction
            J = field.jac(eq.state.as_array())
            eigs, _ = eqmod.classify_matrix(J)
            lam = max(eigs, key=lambda z: z.real)
            vec = np.array([1.0, lam.real])
            vec /= np.linalg.norm(vec)
            votes = [_probe_escapes(field, eq.state.as_array() + s * opts.probe_eps * vec,
                                    opts) for s in (+1, -1)]
            escape = _escape_from_votes(votes)
    else:
        raise GallopError(f"unexpected equilibrium count {len(eqs)}")

    if any(e.kind is EqKind.DEGENERATE for e in eqs):
        flags.append("degenerate_equilibrium")
    if any(c.marginal for c in cycles):
        flags.append("marginal_cycle")

    return PortraitClass(n_equilibria=len(eqs), eq_kinds=kinds,
                         n_cycles=len(cycles),
                         cycle_stability=tuple(c.stable for c in cycles),
                         escape=escape, equilibria=tuple(eqs),
                         cycles=tuple(cycles), gates=gates, flags=tuple(flags))


def classify_portrait(q: ModelParams,
                      opts: ClassifyOptions | None = None) -> PortraitClass:
    """Symbolic portrait of the galloping field at one parameter point.

    Deterministic: identical inputs produce identical output (no
    randomness anywhere in the census or the probes).
    """
    return classify_portrait_field(galloping_field(q), eqmod.find_equilibria(q),
                                   opts, v_label=q.v)
