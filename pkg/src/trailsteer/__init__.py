"""Smooth sliding-mode path tracking for car-like vehicles.

A bang-bang Dubins curvature law is applied to the outermost wheel of a
fictive trailer chain, which makes the real steering angle n-smooth with
implicitly bounded derivatives. The package bundles the controller, the
parametrization machinery, kinematic/kinetic plant models, two comparison
baselines and a scenario harness with a CLI.
"""

from ._backend import BACKEND
from .chain import ChainState, ControllerParams, TrackingController, control_c0, control_c1, control_cn, lift_chain
from .errors import CorridorExceeded, DomainViolation, Infeasible, InvalidSpec, NoSolution, TrailsteerError
from .refpath import Arc, Line, PathProjection, RefPath, build_arc_sequence, build_lane_change, project
from .sliding import WheelError, dubins_kappa, flatness_c0, flatness_ddelta, hosm_zeta, invariant_bounds, lift_front, sliding_sigma

__version__ = "0.1.0"
