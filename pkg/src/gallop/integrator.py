"""Adaptive integration of planar fields with events and dense output.

Backed by scipy's embedded Runge-Kutta 5(4) pair (Dormand-Prince) with
quartic dense output.  This module adds the event/termination semantics
the rest of the toolkit relies on: section crossings with a direction
convention, escape guards, blow-up guards, timeout, and a "converged"
event that requires the state to stay inside a ball around a target for
a full hold time before it fires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp

from .errors import NonFiniteState, StepSizeUnderflow
from .model import State

__all__ = [
    "IntegratorConfig",
    "EventKind",
    "Event",
    "EventSpec",
    "ConvergenceSpec",
    "Trajectory",
    "integrate",
    "integrate_nonautonomous",
    "escape_event",
    "section_event",
]

GOLDEN_TOL = dict(rel_tol=1e-9, abs_tol=1e-11)   # golden-file computations
BASIN_TOL = dict(rel_tol=1e-6, abs_tol=1e-9)     # basin/chart grids (speed)


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and limits for one integration run."""

    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = math.inf
    t_max: float = 1000.0
    state_cap: float = 1e8  # |y| beyond this counts as non-finite blow-up

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")


class EventKind(Enum):
    SECTION_CROSS = "section_cross"
    ESCAPE = "escape"
    CONVERGED = "converged"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    t: float
    state: np.ndarray
    direction: int = 0
    label: str = ""


@dataclass(frozen=True)
class EventSpec:
    """Zero-crossing event on g(t, y).

    ``direction`` restricts crossings (+1 rising, -1 falling, 0 both).
    ``terminal`` stops the run; ``max_count`` >= 1 stops after that many
    occurrences instead.
    """

    func: callable
    direction: int = 0
    terminal: bool = False
    max_count: int | None = None
    kind: EventKind = EventKind.SECTION_CROSS
    label: str = ""


@dataclass(frozen=True)
class ConvergenceSpec:
    """Declare the run converged once ||y - target|| stays below
    ``radius`` for a full ``hold_time``."""

    target: np.ndarray
    radius: float = 1e-6
    hold_time: float = 1.0
    label: str = "converged"


@dataclass
class Trajectory:
    """Integration output: step samples, events, optional interpolants."""

    t: np.ndarray
    states: np.ndarray
    events: list = field(default_factory=list)
    v_of_t: np.ndarray | None = None
    _interpolants: list = field(default_factory=list, repr=False)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_time(self) -> float:
        return float(self.t[-1])

    def at(self, t: float) -> np.ndarray:
        """Dense-output evaluation at a time inside the integration window."""
        for t_lo, t_hi, sol in self._interpolants:
            if t_lo - 1e-12 <= t <= t_hi + 1e-12:
                return np.asarray(sol(t), dtype=float)
        raise ValueError(f"t={t} outside the integrated window")

    def terminating_event(self):
        return self.events[-1] if self.events else None


def escape_event(threshold: float) -> EventSpec:
    """Terminal event firing when |x| crosses ``threshold`` outward."""
    return EventSpec(func=lambda t, y: abs(y[0]) - threshold, direction=1,
                     terminal=True, kind=EventKind.ESCAPE, label="escape")


def speed_event(threshold: float) -> EventSpec:
    """Terminal event firing when |x'| crosses ``threshold`` outward."""
    return EventSpec(func=lambda t, y: abs(y[1]) - threshold, direction=1,
                     terminal=True, kind=EventKind.ESCAPE, label="escape_speed")


def escape_events(field) -> list:
    """Both escape guards of a planar field (position and runaway speed)."""
    evs = [escape_event(field.escape_x)]
    if math.isfinite(field.escape_xdot):
        evs.append(speed_event(field.escape_xdot))
    return evs


def section_event(direction: int, terminal: bool = True, label: str = "xdot=0") -> EventSpec:
    """Turning-point section x' = 0 with a crossing direction."""
    return EventSpec(func=lambda t, y: y[1], direction=direction,
                     terminal=terminal, kind=EventKind.SECTION_CROSS, label=label)


def _scipy_event(spec: EventSpec):
    g = spec.func

    def ev(t, y):
        return g(t, y)

    ev.direction = float(spec.direction)
    if spec.max_count is not None:
        ev.terminal = int(spec.max_count)
    else:
        ev.terminal = bool(spec.terminal)
    return ev


def _run_chunk(f, t0, y0, t_end, cfg, specs):
    evs = [_scipy_event(s) for s in specs]
    sol = solve_ivp(f, (t0, t_end), y0, method="RK45", rtol=cfg.rel_tol,
                    atol=cfg.abs_tol, max_step=cfg.max_step,
                    dense_output=True, events=evs)
    if sol.status == -1:
        y_last = sol.y[:, -1] if sol.y.size else y0
        if not np.all(np.isfinite(y_last)):
            raise NonFiniteState("state left the finite range",
                                 t=sol.t[-1] if sol.t.size else t0, state=y_last)
        raise StepSizeUnderflow(sol.message, t=sol.t[-1] if sol.t.size else t0,
                                state=y_last)
    return sol


def _collect_events(sol, specs):
    """All fired events of a chunk in time order, with the index of the
    spec that produced each."""
    out = []
    for i, spec in enumerate(specs):
        for t_e, y_e in zip(sol.t_events[i], sol.y_events[i]):
            out.append((float(t_e), i, np.asarray(y_e, dtype=float), spec))
    out.sort(key=lambda item: item[0])
    return out


def integrate(f, s0, cfg: IntegratorConfig | None = None, events=(),
              convergence: ConvergenceSpec | None = None, t0: float = 0.0,
              v_of_t=None) -> Trajectory:
    """Integrate y' = f(t, y) from ``s0`` until a terminal event or t_max.

    Event times are located by root-finding across the bracketing step
    (scipy's brentq at machine precision in t).  Raises
    :class:`StepSizeUnderflow` or :class:`NonFiniteState` on solver
    failure; a run that reaches ``t_max`` gets a TIMEOUT event instead.
    """
    cfg = cfg or IntegratorConfig()
    if isinstance(s0, State):
        y = s0.as_array()
    else:
        y = np.asarray(s0, dtype=float)
    if not np.all(np.isfinite(y)):
        raise NonFiniteState("initial state not finite", t=t0, state=y)

    specs = list(events)
    guard = EventSpec(func=lambda t, yy: cfg.state_cap - float(np.max(np.abs(yy))),
                      direction=-1, terminal=True, kind=EventKind.ESCAPE,
                      label="_state_cap")
    specs.append(guard)
    conv_idx = None
    if convergence is not None:
        tgt = np.asarray(convergence.target, dtype=float)
        rad = convergence.radius
        enter = EventSpec(func=lambda t, yy: float(np.linalg.norm(yy - tgt)) - rad,
                          direction=-1, terminal=True, kind=EventKind.CONVERGED,
                          label=convergence.label)
        specs.append(enter)
        conv_idx = len(specs) - 1

    ts, ys, interps, fired = [], [], [], []
    t_cur, y_cur = float(t0), y
    t_end = t0 + cfg.t_max

    while True:
        sol = _run_chunk(f, t_cur, y_cur, t_end, cfg, specs)
        ts.append(sol.t)
        ys.append(sol.y.T)
        interps.append((sol.t[0], sol.t[-1], sol.sol))

        chunk_events = _collect_events(sol, specs)
        stop_event = None
        for t_e, i, y_e, spec in chunk_events:
            if spec.label == "_state_cap":
                raise NonFiniteState("state exceeded the finite-range cap",
                                     t=t_e, state=y_e)
            if i == conv_idx:
                # Hold check: must stay inside the ball for hold_time.
                hold = convergence.hold_time
                tgt = np.asarray(convergence.target, dtype=float)
                exit_spec = EventSpec(
                    func=lambda t, yy: float(np.linalg.norm(yy - tgt)) - convergence.radius,
                    direction=1, terminal=True, kind=EventKind.CONVERGED,
                    label="_conv_exit")
                hsol = _run_chunk(f, t_e, y_e, min(t_e + hold, t_end), cfg,
                                  [exit_spec])
                ts.append(hsol.t)
                ys.append(hsol.y.T)
                interps.append((hsol.t[0], hsol.t[-1], hsol.sol))
                exited = len(hsol.t_events[0]) > 0
                if not exited and hsol.t[-1] >= min(t_e + hold, t_end) - 1e-12:
                    if hsol.t[-1] >= t_end - 1e-12 and hsol.t[-1] - t_e < hold - 1e-9:
                        stop_event = Event(EventKind.TIMEOUT, float(hsol.t[-1]),
                                           hsol.y[:, -1].copy(), 0, "t_max")
                    else:
                        stop_event = Event(EventKind.CONVERGED, float(hsol.t[-1]),
                                           hsol.y[:, -1].copy(), 0, convergence.label)
                    break
                # left the ball: resume the main run from the exit point
                t_cur = float(hsol.t_events[0][0]) if exited else float(hsol.t[-1])
                y_cur = (hsol.y_events[0][0].copy() if exited
                         else hsol.y[:, -1].copy())
                stop_event = "resume"
                break
            ev = Event(spec.kind, t_e, y_e.copy(), spec.direction, spec.label)
            fired.append(ev)
            terminal_hit = spec.terminal or (
                spec.max_count is not None
                and sum(1 for e in fired if e.label == spec.label) >= spec.max_count)
            if terminal_hit:
                stop_event = ev
                break

        if stop_event == "resume":
            continue
        if stop_event is not None and not isinstance(stop_event, str):
            if stop_event.kind in (EventKind.CONVERGED, EventKind.TIMEOUT):
                fired.append(stop_event)
            break
        if sol.status == 0:  # reached t_end with no terminal event
            fired.append(Event(EventKind.TIMEOUT, float(sol.t[-1]),
                               sol.y[:, -1].copy(), 0, "t_max"))
            break
        if sol.status == 1 and stop_event is None:
            # scipy stopped on a terminal event we already recorded above;
            # defensive: stop anyway at the solver end point.
            break

    t_all = np.concatenate(ts)
    y_all = np.vstack(ys)
    keep = np.concatenate(([True], np.diff(t_all) > 0.0))
    t_all, y_all = t_all[keep], y_all[keep]
    traj = Trajectory(t=t_all, states=y_all, events=fired,
                      _interpolants=interps)
    if v_of_t is not None:
        traj.v_of_t = np.asarray([v_of_t(tt) for tt in t_all], dtype=float)
    return traj


def integrate_nonautonomous(f, s0, cfg: IntegratorConfig | None = None,
                            events=(), convergence: ConvergenceSpec | None = None,
                            t0: float = 0.0, v_of_t=None) -> Trajectory:
    """Integrate an explicitly time-dependent field.

    Same contracts as :func:`integrate`; when ``v_of_t`` is given the
    instantaneous ramp value is recorded alongside the samples.
    """
    return integrate(f, s0, cfg=cfg, events=events, convergence=convergence,
                     t0=t0, v_of_t=v_of_t)
