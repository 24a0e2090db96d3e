"""Vector fields, parameter sets and statics of the oscillator.

The structural model is a rigid rod on an elastic support that buckles
subcritically under gravity, driven by a quasi-static aerodynamic force
on a bluff 2:1 rectangular prism.  Everything downstream integrates or
linearizes the nondimensional equation of motion

    x'' + r x' + (1 + b)(e + sin x) cos x = sin x + (p/2) v^2 Cf(x'/v)

with combined stiffness ``b`` (distance above the buckling threshold),
imperfection ``e``, wind speed ``v``, aerodynamic prefactor ``p`` and
structural damping ``r``.  At ``v = 0`` the aerodynamic term is defined
as zero (its physical limit), which avoids the 0/0 in ``Cf(x'/v)``.

A symmetric Hopf-pitchfork normal form is included as a second vector
field; the unfolding machinery is exercised against it as a known case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "DimensionalParams",
    "ModelParams",
    "NormalFormParams",
    "State",
    "cf",
    "cf_prime",
    "rhs",
    "jacobian",
    "divergence",
    "potential",
    "potential_grad",
    "normal_form_rhs",
    "normal_form_jacobian",
    "nondimensionalize",
    "PlanarField",
    "galloping_field",
    "ramped_galloping_field",
    "normal_form_field",
]


@dataclass(frozen=True)
class DimensionalParams:
    """Physical rig parameters (SI or any coherent unit system).

    m: prism mass, g: gravity, k: support spring stiffness,
    L1: pivot-to-mass arm, L2: pivot-to-spring arm, y0: spring shortfall
    (manufacturing imperfection), V: fluid speed, rho: fluid density,
    a: frontal area.
    """

    m: float
    g: float
    k: float
    L1: float
    L2: float
    y0: float
    V: float
    rho: float
    a: float

    def __post_init__(self):
        for name in ("m", "L1", "L2", "a", "rho"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.g > 0:
            raise ValueError("g must be positive (time rescaling needs g/L1 > 0)")
        if self.k < 0:
            raise ValueError("k must be nonnegative")
        if self.V < 0:
            raise ValueError("V must be nonnegative")


@dataclass(frozen=True)
class ModelParams:
    """Nondimensional parameter point (b, e, v, p, r).

    ``b`` measures stiffness in excess of the static buckling threshold
    (b = 0 at the pitchfork, b > 0 on the stable trivial path), ``e`` is
    the symmetry-breaking imperfection, ``v`` the wind speed parameter.
    ``p`` and ``r`` default to 0.1, the values used throughout the
    reference studies.
    """

    b: float
    e: float
    v: float
    p: float = 0.1
    r: float = 0.1

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("p must be positive")
        if self.r < 0:
            raise ValueError("r must be nonnegative")
        if self.v < 0:
            raise ValueError("v must be nonnegative")
        for name in ("b", "e", "v", "p", "r"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def with_v(self, v: float) -> "ModelParams":
        return replace(self, v=v)


@dataclass(frozen=True)
class NormalFormParams:
    """Unfolding parameters (w, p_nf) of the symmetric normal form."""

    w: float
    p_nf: float

    def __post_init__(self):
        if not (math.isfinite(self.w) and math.isfinite(self.p_nf)):
            raise ValueError("normal form parameters must be finite")


@dataclass(frozen=True)
class State:
    """Phase-space point: rod angle ``x`` and angular rate ``xdot``."""

    x: float
    xdot: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.xdot)):
            raise ValueError("state must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.xdot], dtype=float)


def as_state_array(s) -> np.ndarray:
    """Coerce a State, tuple or array to a float array of shape (2,)."""
    if isinstance(s, State):
        return s.as_array()
    arr = np.asarray(s, dtype=float)
    if arr.shape != (2,):
        raise ValueError(f"expected a planar state, got shape {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# Aerodynamic force coefficient
# ---------------------------------------------------------------------------

_CF_SLOPE0 = 16.0 / 15.0  # d Cf / d(arg) at arg = 0


def _cf_scalar(alpha: float) -> float:
    y = 8.0 * alpha
    ay = abs(y)
    mag = (2.0 / 15.0) * ay + ay**3 / 3.0 - ay**4 / 10.0 - ay**5 / 15.0
    return mag if y >= 0.0 else -mag


def _cf_prime_scalar(alpha: float) -> float:
    ay = abs(8.0 * alpha)
    return 8.0 * (2.0 / 15.0 + ay**2 - 0.4 * ay**3 - ay**4 / 3.0)


def cf(alpha):
    """Lateral force coefficient at angle-of-attack ratio ``alpha = x'/v``.

    Odd piecewise-polynomial fit to quasi-static wind-tunnel data for a
    2:1 rectangular section; smooth (C^1) through zero with slope 16/15.
    Accepts scalars or arrays.
    """
    if np.isscalar(alpha):
        return _cf_scalar(float(alpha))
    y = 8.0 * np.asarray(alpha, dtype=float)
    ay = np.abs(y)
    mag = (2.0 / 15.0) * ay + ay**3 / 3.0 - ay**4 / 10.0 - ay**5 / 15.0
    return np.where(y >= 0.0, mag, -mag)


def cf_prime(alpha):
    """Derivative of :func:`cf` with respect to its argument (even)."""
    if np.isscalar(alpha):
        return _cf_prime_scalar(float(alpha))
    ay = np.abs(8.0 * np.asarray(alpha, dtype=float))
    return 8.0 * (2.0 / 15.0 + ay**2 - 0.4 * ay**3 - ay**4 / 3.0)


# ---------------------------------------------------------------------------
# Galloping-buckling vector field
# ---------------------------------------------------------------------------

def _accel(x: float, xdot: float, q: ModelParams) -> float:
    stat = -(1.0 + q.b) * (q.e + math.sin(x)) * math.cos(x) + math.sin(x)
    aero = 0.0 if q.v == 0.0 else 0.5 * q.p * q.v * q.v * _cf_scalar(xdot / q.v)
    return -q.r * xdot + stat + aero


def rhs(s, q: ModelParams) -> np.ndarray:
    """Time derivative (x', x'') of the galloping-buckling field."""
    x, xd = as_state_array(s)
    return np.array([xd, _accel(x, xd, q)])


def jacobian(s, q: ModelParams) -> np.ndarray:
    """Analytic Jacobian of :func:`rhs` at a state."""
    x, xd = as_state_array(s)
    # d/dx of (1+b)(e+sin x)cos x - sin x
    gx = (1.0 + q.b) * (math.cos(2.0 * x) - q.e * math.sin(x)) - math.cos(x)
    if q.v == 0.0:
        d_xd = -q.r
    else:
        d_xd = -q.r + 0.5 * q.p * q.v * _cf_prime_scalar(xd / q.v)
    return np.array([[0.0, 1.0], [-gx, d_xd]])


def divergence(s, q: ModelParams) -> float:
    """Trace of the Jacobian (the only damping-like quantity of the flow)."""
    _, xd = as_state_array(s)
    if q.v == 0.0:
        return -q.r
    return -q.r + 0.5 * q.p * q.v * _cf_prime_scalar(xd / q.v)


def potential(x, q: ModelParams):
    """Static potential U(x); dU/dx equals the static restoring term.

    U(x) = (1+b)(e sin x + sin^2 x / 2) + cos x, with no added constant
    (barrier comparisons use differences only).
    """
    x = np.asarray(x, dtype=float)
    u = (1.0 + q.b) * (q.e * np.sin(x) + 0.5 * np.sin(x) ** 2) + np.cos(x)
    return float(u) if u.ndim == 0 else u


def potential_grad(x, q: ModelParams):
    """dU/dx = (1+b)(e + sin x) cos x - sin x (the static restoring term)."""
    x = np.asarray(x, dtype=float)
    g = (1.0 + q.b) * (q.e + np.sin(x)) * np.cos(x) - np.sin(x)
    return float(g) if g.ndim == 0 else g


def energy(s, q: ModelParams) -> float:
    """Mechanical energy x'^2/2 + U(x); conserved when r = v = 0."""
    x, xd = as_state_array(s)
    return 0.5 * xd * xd + potential(x, q)


# ---------------------------------------------------------------------------
# Symmetric Hopf-pitchfork normal form
# ---------------------------------------------------------------------------

def normal_form_rhs(s, n: NormalFormParams) -> np.ndarray:
    """Time derivative of the symmetric normal form field.

    x'' = w x' + x^2 x' + p x + x^3; odd in (x, x') for all parameters.
    """
    x, xd = as_state_array(s)
    return np.array([xd, n.w * xd + x * x * xd + n.p_nf * x + x**3])


def normal_form_jacobian(s, n: NormalFormParams) -> np.ndarray:
    x, xd = as_state_array(s)
    return np.array([[0.0, 1.0], [n.p_nf + 3.0 * x * x + 2.0 * x * xd, n.w + x * x]])


# ---------------------------------------------------------------------------
# Dimensional -> nondimensional conversion
# ---------------------------------------------------------------------------

def nondimensionalize(d: DimensionalParams, r: float = 0.1) -> ModelParams:
    """Map rig parameters to the nondimensional set with unit load.

    Forms A = g/L1, B = k L2^2 / (m L1^2), e = y0/L2, v = V/L1 and
    p = rho a L1 / m, then rescales time by sqrt(A) so the returned
    parameters describe the same dynamics with A = 1:

        b = B/A - 1,  v -> v/sqrt(A),  r -> r/sqrt(A),  p unchanged.

    ``r`` is the structural damping in the pre-rescaling time unit (it
    has no dimensional counterpart in the rig description).
    """
    A = d.g / d.L1
    B = d.k * d.L2**2 / (d.m * d.L1**2)
    sA = math.sqrt(A)
    return ModelParams(
        b=B / A - 1.0,
        e=d.y0 / d.L2,
        v=(d.V / d.L1) / sA,
        p=d.rho * d.a * d.L1 / d.m,
        r=r / sA,
    )


# ---------------------------------------------------------------------------
# Field adapters for the integrator and the generic cycle/connection code
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlanarField:
    """A planar autonomous vector field with the callbacks the solvers need.

    ``rhs(t, y)`` is integrator-shaped (t ignored for autonomous fields),
    ``jac(y)`` and ``div(y)`` are state-only.  A trajectory counts as
    escaped once |x| crosses ``escape_x`` outward or |x'| exceeds
    ``escape_xdot`` (the force coefficient's quintic tail lets runaway
    orbits blow up in x' before x leaves the window).
    """

    rhs: callable
    jac: callable
    div: callable
    escape_x: float
    escape_xdot: float = math.inf
    name: str = "field"


def galloping_field(q: ModelParams) -> PlanarField:
    """Integrator-ready adapter for the galloping-buckling field."""
    b1, e, v, p, r = 1.0 + q.b, q.e, q.v, q.p, q.r
    if v > 0.0:
        aero_amp = 0.5 * p * v * v
        half_pv = 0.5 * p * v

        def f(t, y):
            x, xd = y[0], y[1]
            acc = (-r * xd - b1 * (e + math.sin(x)) * math.cos(x) + math.sin(x)
                   + aero_amp * _cf_scalar(xd / v))
            return np.array([xd, acc])

        def div(y):
            return -r + half_pv * _cf_prime_scalar(y[1] / v)
    else:

        def f(t, y):
            x, xd = y[0], y[1]
            acc = -r * xd - b1 * (e + math.sin(x)) * math.cos(x) + math.sin(x)
            return np.array([xd, acc])

        def div(y):
            return -r

    return PlanarField(rhs=f, jac=lambda y: jacobian(y, q), div=div,
                       escape_x=0.5 * math.pi, escape_xdot=6.0 + q.v,
                       name="galloping")


def ramped_galloping_field(q: ModelParams, v0: float, gamma: float):
    """Time-dependent field with v(t) = v0 + gamma t; returns (f, v_of_t).

    ``q.v`` is ignored; the ramp law supplies the wind speed.
    """
    b1, e, p, r = 1.0 + q.b, q.e, q.p, q.r

    def v_of_t(t):
        return v0 + gamma * t

    # term grouping matches the autonomous closure exactly, so a zero-rate
    # ramp reproduces the autonomous integration bit for bit
    def f(t, y):
        x, xd = y[0], y[1]
        v = v0 + gamma * t
        if v > 0.0:
            acc = (-r * xd - b1 * (e + math.sin(x)) * math.cos(x)
                   + math.sin(x) + 0.5 * p * v * v * _cf_scalar(xd / v))
        else:
            acc = -r * xd - b1 * (e + math.sin(x)) * math.cos(x) + math.sin(x)
        return np.array([xd, acc])

    return f, v_of_t


def normal_form_field(n: NormalFormParams, escape_x: float | None = None) -> PlanarField:
    """Integrator-ready adapter for the normal-form field.

    The default escape threshold sits well outside the outer saddles at
    ``x = +-sqrt(-p_nf)`` so bounded orbits are never misread as escapes.
    """
    w, p = n.w, n.p_nf
    if escape_x is None:
        escape_x = 1.0 + 2.0 * math.sqrt(max(-p, 0.0))

    def f(t, y):
        x, xd = y[0], y[1]
        return np.array([xd, w * xd + x * x * xd + p * x + x**3])

    return PlanarField(rhs=f, jac=lambda y: normal_form_jacobian(y, n),
                       div=lambda y: w + y[0] * y[0], escape_x=escape_x,
                       escape_xdot=2.0 + abs(p), name="normal_form")
