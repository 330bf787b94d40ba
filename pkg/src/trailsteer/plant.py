"""Vehicle simulators: ideal kinematic single track in the arc-length domain
and a kinetic single track with magic-formula tires plus a third-order
low-pass steering actuator in the time domain, with disturbance injection.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import DomainViolation, InvalidSpec
from .sliding import WheelError, wrap_pi


@dataclass
class KinematicState:
    x: float = 0.0
    y: float = 0.0
    psi: float = 0.0
    delta_veh: float = 0.0
    s: float = 0.0


@dataclass
class KineticState:
    x: float = 0.0          # center of gravity
    y: float = 0.0
    psi: float = 0.0
    delta_veh: float = 0.0
    s: float = 0.0
    t: float = 0.0
    v: float = 0.0          # longitudinal speed (prescribed)
    yaw_rate: float = 0.0
    side_slip: float = 0.0
    actuator_states: tuple = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class VehicleParams:
    """Kinetic single-track defaults; the values are conventional mid-size-car
    numbers and fully configurable."""

    mass: float = 1500.0
    yaw_inertia: float = 2500.0
    wheelbase: float = 2.7
    weight_split: float = 0.5        # front-axle share of the static load
    delta_max: float = 0.5
    mu: float = 1.0
    pacejka_b: float = 10.0
    pacejka_c: float = 1.9
    pacejka_e: float = 0.97
    actuator_cutoff_hz: float = 5.0
    gravity: float = 9.81

    @property
    def lf(self):
        return self.wheelbase * (1.0 - self.weight_split)

    @property
    def lr(self):
        return self.wheelbase * self.weight_split

    def kernel_params(self):
        omega = 2.0 * math.pi * self.actuator_cutoff_hz
        return (self.mass, self.yaw_inertia, self.lf, self.lr, self.mu,
                self.pacejka_b, self.pacejka_c, self.pacejka_e, omega, self.gravity)


@dataclass
class DisturbanceSpec:
    """Matched curvature disturbance plus seeded measurement noise.

    One instance owns one noise stream; give each simulation run its own
    (same seed -> identical sequence).
    """

    matched_kappa_d: float = 0.0
    e_noise_std: float = 0.0
    psi_noise_std: float = 0.0
    seed: int = 0
    _rng: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.e_noise_std < 0.0 or self.psi_noise_std < 0.0:
            raise InvalidSpec("noise stds must be >= 0")

    def rng(self):
        if self._rng is None:
            self._rng = np.random.default_rng(self.seed)
        return self._rng

    def reset(self):
        self._rng = None

    def sample_noise(self):
        if self.e_noise_std == 0.0 and self.psi_noise_std == 0.0:
            return 0.0, 0.0
        ne, npsi = self.rng().normal(0.0, 1.0, 2)
        return ne * self.e_noise_std, npsi * self.psi_noise_std

    def fresh(self):
        return DisturbanceSpec(self.matched_kappa_d, self.e_noise_std,
                               self.psi_noise_std, self.seed)


class KinematicPlant:
    """Ideal kinematic single track; the steering angle follows the command."""

    def __init__(self, wheelbase=2.7, delta_max=0.5):
        self.wheelbase = wheelbase
        self.delta_max = delta_max

    def initial_state(self, x=0.0, y=0.0, psi=0.0, delta=0.0):
        return KinematicState(x=x, y=y, psi=psi, delta_veh=delta, s=0.0)

    def step(self, state, delta_cmd, ds):
        if ds <= 0.0:
            raise DomainViolation("ds must be > 0")
        if abs(delta_cmd) > self.delta_max + 1e-12:
            raise DomainViolation(f"|delta_cmd| = {abs(delta_cmd):.4f} exceeds {self.delta_max}")
        x, y, psi = _backend.kin_rk4(state.x, state.y, state.psi, delta_cmd,
                                     self.wheelbase, ds)
        return KinematicState(x=x, y=y, psi=psi, delta_veh=delta_cmd, s=state.s + ds)

    def rear_position(self, state):
        return state.x, state.y

    def front_position(self, state):
        return (state.x + self.wheelbase * math.cos(state.psi),
                state.y + self.wheelbase * math.sin(state.psi))


def step_kinematic(state, delta_cmd, ds, wheelbase=2.7, delta_max=0.5):
    """Functional form of KinematicPlant.step."""
    return KinematicPlant(wheelbase, delta_max).step(state, delta_cmd, ds)


class KineticPlant:
    """Kinetic single track; (x, y) is the center of gravity.

    Longitudinal speed is prescribed by a speed profile v(t); lateral dynamics
    use magic-formula tire forces and the steering command passes through
    three cascaded first-order filter stages (unity DC gain).
    """

    def __init__(self, params=None, speed_profile=None):
        self.params = params or VehicleParams()
        self.speed_profile = speed_profile

    def initial_state(self, x=0.0, y=0.0, psi=0.0, delta=0.0, v=None):
        if v is None:
            v = self.speed_profile.v(0.0) if self.speed_profile else 0.0
        return KineticState(x=x, y=y, psi=psi, delta_veh=delta, s=0.0, t=0.0,
                            v=v, yaw_rate=0.0, side_slip=0.0,
                            actuator_states=(delta, delta, delta))

    def step(self, state, delta_cmd, dt):
        if dt <= 0.0:
            raise DomainViolation("dt must be > 0")
        p = self.params
        delta_cmd = min(max(delta_cmd, -p.delta_max), p.delta_max)
        v = self.speed_profile.v(state.t) if self.speed_profile else state.v
        v = max(v, 1e-6)
        vy = v * math.tan(state.side_slip)
        a1, a2, a3 = state.actuator_states
        out = _backend.kinetic_rk4(
            (state.x, state.y, state.psi, vy, state.yaw_rate, a1, a2, a3),
            delta_cmd, v, dt, p.kernel_params(),
        )
        x, y, psi, vy, r, a1, a2, a3 = out
        t = state.t + dt
        v_next = self.speed_profile.v(t) if self.speed_profile else state.v
        return KineticState(
            x=x, y=y, psi=psi, delta_veh=a3, s=state.s + v * dt, t=t,
            v=v_next, yaw_rate=r, side_slip=math.atan2(vy, v),
            actuator_states=(a1, a2, a3),
        )

    def rear_position(self, state):
        return (state.x - self.params.lr * math.cos(state.psi),
                state.y - self.params.lr * math.sin(state.psi))

    def front_position(self, state):
        return (state.x + self.params.lf * math.cos(state.psi),
                state.y + self.params.lf * math.sin(state.psi))


def step_kinetic(state, delta_cmd, dt, plant):
    """Functional form of KineticPlant.step."""
    return plant.step(state, delta_cmd, dt)


def observe(state, path, disturbance, plant=None):
    """Rear-wheel tracking error seen by the controller, with seeded noise."""
    if plant is not None:
        px, py = plant.rear_position(state)
    else:
        px, py = state.x, state.y
    proj = path.project((px, py))
    ne, npsi = disturbance.sample_noise() if disturbance is not None else (0.0, 0.0)
    return WheelError.wrapped(proj.e + ne, wrap_pi(state.psi - proj.theta) + npsi)
