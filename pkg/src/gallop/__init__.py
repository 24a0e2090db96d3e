"""Simulation and bifurcation analysis of a galloping oscillator with a
buckling-prone elastic support.

The package covers the stationary picture (equilibria, the Hopf onset of
galloping, imperfection-sensitive static folds), the periodic one (limit
cycle branches with Floquet stability and cyclic folds), global objects
(homoclinic and heteroclinic saddle connections, symbolic phase
portraits, the codimension-3 unfolding chart), and nonstationary runs
(ramped wind speed, delayed jump-off, indeterminate escape basins).
"""

from .errors import (ConfigError, ContinuationStall, FocusLost, GallopError,
                     NewtonDiverged, NoConvergence, NonFiniteState, NoReturn,
                     NoSignChange, ResidualTooLarge, StepSizeUnderflow)
from .model import (DimensionalParams, ModelParams, NormalFormParams, State,
                    cf, cf_prime, energy, galloping_field, jacobian,
                    nondimensionalize, normal_form_field, normal_form_rhs,
                    potential, potential_grad, rhs)
from .integrator import (ConvergenceSpec, Event, EventKind, EventSpec,
                         IntegratorConfig, Trajectory, integrate,
                         integrate_nonautonomous)
from .equilibria import (EqKind, Equilibrium, StaticPath, eigen_classify,
                         find_equilibria, hopf_velocity, hopf_velocity_numeric,
                         imperfection_sensitivity, static_path)
from .cycles import (CycleBranch, LimitCycle, branch_extrema, continue_branch,
                     cycle_scan, find_cycle, locate_fold, poincare_return)
from .connections import (ClassifyOptions, ConnectionKind, ConnectionPoint,
                          ConnectionSpec, EscapeClass, ManifoldKind,
                          PortraitClass, Side, classify_portrait,
                          find_connection, manifold_branch, miss_distance)
from .experiments import (BasinMap, EllipsoidChart, EnvelopePrediction,
                          RampOutcome, RampResult, basin_map_ic,
                          basin_map_ramp, ellipsoid_point, ellipsoid_scan,
                          envelope_predict, normal_form_chart,
                          normal_form_s_point, ramp_run)

__version__ = "0.1.0"
