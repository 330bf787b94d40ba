"""Fictive trailer chain: state lifting, back-propagation and the controller.

The chain puts n wheels ahead of the rear wheel (wheel 1 is the real front
axle, wheels 2..n are fictive). The bang-bang curvature law acts on the
outermost wheel and is back-propagated through the joint kinematics to the
n-th path derivative of the real steering angle, which the controller
integrates internally (explicit Euler at the controller step).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import DomainViolation, InvalidSpec
from .refpath import wrap_angle
from .sliding import HALF_PI, WheelError, dubins_kappa, lift_front, sliding_sigma

__all__ = [
    "ControllerParams",
    "ChainState",
    "Jet",
    "control_c0",
    "control_c1",
    "control_cn",
    "fictive_chain",
    "lift_chain",
    "TrackingController",
    "StepResult",
]


@dataclass(frozen=True)
class ControllerParams:
    """Parameters of the chain controller.

    kappa_bar bounds the curvature of the outermost wheel; lambdas lists the
    wheelbases from the rear outward (length = smoothness order n).
    """

    kappa_bar: float
    lambdas: tuple
    k_rob: float = 0.0
    sign_zero: float = 0.0
    limits: object = None  # optional ActuatorLimits, attached by the tuner

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        if not self.lambdas:
            raise InvalidSpec("need at least one wheelbase")
        if any(lam <= 0.0 for lam in self.lambdas):
            raise InvalidSpec("all wheelbases must be > 0 (forward driving)")
        if self.kappa_bar <= 0.0:
            raise InvalidSpec("kappa_bar must be > 0")
        if self.k_rob >= 1.0 or self.k_rob < 0.0:
            raise InvalidSpec("k_rob must be in [0, 1)")
        if self.kappa_bar * self.lambdas[-1] > 1.0:
            raise InvalidSpec("kappa_bar * lambda_n must be <= 1 (invariant set vanishes)")

    @property
    def n(self):
        return len(self.lambdas)

    def kappa_bounds(self):
        """Per-wheel curvature bounds (kappa_bar_1 .. kappa_bar_n), outermost given.

        Walking inward, wheel i-1's curvature is tan(delta_i)/lambda_i, maximal
        at the edge of wheel i's invariant set.
        """
        bounds = [0.0] * self.n
        bounds[-1] = self.kappa_bar
        for i in range(self.n - 1, 0, -1):
            x = bounds[i] * self.lambdas[i]
            if x > 1.0:
                raise InvalidSpec("chained invariant set vanishes")
            bounds[i - 1] = math.tan(math.asin(x)) / self.lambdas[i]
        return tuple(bounds)

    def invariant_sets(self):
        """Half-widths arcsin(kappa_bar_i * lambda_i) of each steering invariant set."""
        out = []
        for kb, lam in zip(self.kappa_bounds(), self.lambdas):
            x = kb * lam
            if x > 1.0:
                raise InvalidSpec("invariant set vanishes for an inner wheel")
            out.append(math.asin(x))
        return tuple(out)


@dataclass
class ChainState:
    """Snapshot of the controller state.

    fictive lists (delta_i, lambda_i) for the wheels ahead of the rear, front
    first; delta duplicates fictive[0][0] for convenience. delta_derivs holds
    the internally integrated path derivatives delta', ..., delta^(n-1).
    """

    rear: WheelError
    delta: float
    fictive: tuple = ()
    delta_derivs: tuple = ()

    def __post_init__(self):
        if np.any(np.abs(self.delta) >= HALF_PI):
            raise DomainViolation("|delta| must be < pi/2")
        for d, _lam in self.fictive:
            if np.any(np.abs(d) >= HALF_PI):
                raise DomainViolation("every fictive steering angle must be < pi/2")

    @classmethod
    def build(cls, rear, delta, delta_derivs, params):
        """Construct the snapshot, deriving the fictive angles from the chain."""
        fic = fictive_chain(delta, delta_derivs, params.lambdas)
        return cls(rear=rear, delta=delta, fictive=fic, delta_derivs=tuple(delta_derivs))


_FACT = [math.factorial(k) for k in range(16)]


class Jet:
    """Truncated Taylor series in arc length; coefficient k is f^(k)/k!.

    Coefficients may be floats or numpy arrays (broadcast elementwise), which
    lets the generalized control law run vectorized over state batches.
    """

    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = list(coeffs)

    @classmethod
    def from_derivs(cls, derivs):
        return cls([d / _FACT[k] for k, d in enumerate(derivs)])

    @property
    def order(self):
        return len(self.c) - 1

    def value(self):
        return self.c[0]

    def deriv_value(self, k):
        """k-th derivative value."""
        return self.c[k] * _FACT[k]

    def deriv(self):
        """Jet of the derivative (one order lower)."""
        return Jet([(k + 1) * ck for k, ck in enumerate(self.c[1:])])

    def _coerce(self, other, order):
        if isinstance(other, Jet):
            return other.c[: order + 1]
        return [other] + [0.0] * order

    def __add__(self, other):
        m = min(self.order, other.order) if isinstance(other, Jet) else self.order
        oc = self._coerce(other, m)
        return Jet([a + b for a, b in zip(self.c[: m + 1], oc)])

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        m = min(self.order, other.order) if isinstance(other, Jet) else self.order
        oc = self._coerce(other, m)
        return Jet([a - b for a, b in zip(self.c[: m + 1], oc)])

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet([ck * other for ck in self.c])
        m = min(self.order, other.order)
        out = []
        for k in range(m + 1):
            acc = self.c[0] * other.c[k]
            for j in range(1, k + 1):
                acc = acc + self.c[j] * other.c[k - j]
            out.append(acc)
        return Jet(out)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet([ck / other for ck in self.c])
        m = min(self.order, other.order)
        out = []
        for k in range(m + 1):
            acc = self.c[k]
            for j in range(1, k + 1):
                acc = acc - other.c[j] * out[k - j]
            out.append(acc / other.c[0])
        return Jet(out)

    def sin_cos(self):
        m = self.order
        s = [np.sin(self.c[0])]
        c = [np.cos(self.c[0])]
        for k in range(1, m + 1):
            sa = 0.0
            ca = 0.0
            for j in range(1, k + 1):
                sa = sa + j * self.c[j] * c[k - j]
                ca = ca + j * self.c[j] * s[k - j]
            s.append(sa / k)
            c.append(-ca / k)
        return Jet(s), Jet(c)

    def sin(self):
        return self.sin_cos()[0]

    def cos(self):
        return self.sin_cos()[1]

    def tan(self):
        s, c = self.sin_cos()
        return s / c

    def atan(self):
        m = self.order
        w = self * self + 1.0
        out = [np.arctan(self.c[0])]
        if m >= 1:
            q = self.deriv() / w  # order m-1
            for k in range(1, m + 1):
                out.append(q.c[k - 1] / k)
        return Jet(out)


def _wheel_jets(delta, delta_derivs, lambdas, top):
    """Jets of every wheel's steering angle given the real-steering jet.

    `top` is the value substituted for the unknown delta^(n). Returns the
    jet list (front first) and the outermost wheel's own-arc-length curvature.
    """
    n = len(lambdas)
    j1 = Jet.from_derivs([delta, *delta_derivs, top])
    jets = [j1]
    dpsi = j1.tan() / lambdas[0]
    cprod = None
    kappa_n = None
    for i in range(n):
        ji = jets[i]
        dpsi = dpsi + ji.deriv()
        ci = ji.cos()
        cprod = ci if cprod is None else cprod * ci
        k_i = dpsi * cprod
        if i + 1 < n:
            jets.append((k_i * lambdas[i + 1]).atan())
        else:
            kappa_n = k_i.value()
    return jets, kappa_n


def fictive_chain(delta, delta_derivs, lambdas):
    """(delta_i, lambda_i) for wheels 1..n derived from the steering jet."""
    n = len(lambdas)
    if len(delta_derivs) != n - 1:
        raise InvalidSpec(f"need {n - 1} steering derivatives for order {n}")
    jets, _ = _wheel_jets(delta, delta_derivs, lambdas, 0.0)
    return tuple((j.value(), lam) for j, lam in zip(jets, lambdas))


def _check_angles(*angles):
    for a in angles:
        if np.any(np.abs(a) >= HALF_PI):
            raise DomainViolation("steering angle left (-pi/2, pi/2)")


def _outer_error_straight(rear, angles, lambdas):
    err = rear
    for d, lam in zip(angles, lambdas):
        err = lift_front(err, d, lam)
    return err


def control_c0(state, params, outer_err=None):
    """Steering rate of the C0-smooth law (order n = 1)."""
    if params.n != 1:
        raise InvalidSpec("control_c0 needs a single wheelbase")
    lam = params.lambdas[0]
    _check_angles(state.delta)
    err_f = outer_err if outer_err is not None else lift_front(state.rear, state.delta, lam)
    sigma = sliding_sigma(err_f, params.kappa_bar, params.k_rob)
    kappa_f = dubins_kappa(sigma, params.kappa_bar, params.sign_zero)
    out = kappa_f / np.cos(state.delta) - np.tan(state.delta) / lam
    return float(out) if np.ndim(out) == 0 else out


def control_c1(state, params, outer_err=None):
    """Steering acceleration of the C1-smooth law (order n = 2)."""
    if params.n != 2:
        raise InvalidSpec("control_c1 needs two wheelbases")
    lam, lam_l = params.lambdas
    delta = state.delta
    ddelta = state.delta_derivs[0]
    delta_l = np.arctan((np.tan(delta) / lam + ddelta) * lam_l * np.cos(delta))
    _check_angles(delta, delta_l)
    if outer_err is None:
        outer_err = _outer_error_straight(state.rear, (delta, delta_l), params.lambdas)
    sigma = sliding_sigma(outer_err, params.kappa_bar, params.k_rob)
    kappa_l = dubins_kappa(sigma, params.kappa_bar, params.sign_zero)
    cd = np.cos(delta)
    cdl = np.cos(delta_l)
    ddelta_l = kappa_l / (cd * cdl) - np.tan(delta) / lam - ddelta
    out = ddelta_l / (cdl * cdl * cd * lam_l) - ddelta / lam \
        + ddelta * ddelta * np.tan(delta)
    return float(out) if np.ndim(out) == 0 else out


def control_cn(state, params, outer_err=None):
    """n-th steering derivative of the generalized law, any order n >= 1.

    Back-propagates the outermost curvature command through the joint
    relations via truncated Taylor jets; the command enters the top order
    linearly, so two evaluations pin it down exactly.
    """
    lambdas = params.lambdas
    derivs = tuple(state.delta_derivs)
    if len(derivs) != params.n - 1:
        raise InvalidSpec(f"state carries {len(derivs)} derivatives, order {params.n} needs {params.n - 1}")
    jets0, kap_a = _wheel_jets(state.delta, derivs, lambdas, 0.0)
    _, kap_b = _wheel_jets(state.delta, derivs, lambdas, 1.0)
    angles = [j.value() for j in jets0]
    _check_angles(*angles)
    gain = kap_b - kap_a
    if np.any(np.abs(gain) < 1e-12):
        raise DomainViolation("chain back-propagation is singular")
    if outer_err is None:
        outer_err = _outer_error_straight(state.rear, angles, lambdas)
    sigma = sliding_sigma(outer_err, params.kappa_bar, params.k_rob)
    kappa_n = dubins_kappa(sigma, params.kappa_bar, params.sign_zero)
    out = (kappa_n - kap_a) / gain
    return float(out) if np.ndim(out) == 0 else out


def lift_chain(state, path, rear_pose):
    """Per-wheel tracking errors along the chain.

    On straight paths this is the closed-form lift; on curved paths every
    wheel's global position is built from the pose chain and projected onto
    the path independently, taking e and the path tangent from the projection.
    """
    if path is None or path.straight_heading is not None:
        errs = [state.rear]
        err = state.rear
        for d, lam in state.fictive:
            err = lift_front(err, d, lam)
            errs.append(err)
        return errs
    x, y, heading = rear_pose
    proj = path.project((x, y))
    errs = [WheelError.wrapped(proj.e, heading - proj.theta)]
    h = heading
    for d, lam in state.fictive:
        x += lam * math.cos(h)
        y += lam * math.sin(h)
        h += d
        proj = path.project((x, y))
        errs.append(WheelError.wrapped(proj.e, h - proj.theta))
    return errs


@dataclass
class StepResult:
    delta_cmd: float
    derivs: tuple          # derivatives used over the interval (pre-update)
    highest: float         # freshly computed delta^(n)
    sigma: float
    kappa_cmd: float
    wheels: list = field(default_factory=list)   # rear first, outermost last
    fictive: tuple = ()

    @property
    def ddelta(self):
        return self.derivs[0] if self.derivs else self.highest


class TrackingController:
    """Stateful wrapper: measures, evaluates the law, integrates its chain.

    The real steering angle is re-anchored from plant feedback every step;
    the higher derivatives are the controller's own integrator chain. A
    controller instance is single-threaded; run one per simulation.
    """

    def __init__(self, params, path=None):
        self.params = params
        self.path = path
        self._derivs = [0.0] * (params.n - 1)
        self._delta_cmd = None   # integral of the commanded rates

    def reset(self, derivs=None):
        self._delta_cmd = None
        if derivs is None:
            self._derivs = [0.0] * (self.params.n - 1)
        else:
            if len(derivs) != self.params.n - 1:
                raise InvalidSpec("wrong number of derivatives")
            self._derivs = [float(d) for d in derivs]

    @property
    def derivs(self):
        return tuple(self._derivs)

    def chain_state(self, rear_err, delta):
        return ChainState.build(rear_err, delta, tuple(self._derivs), self.params)

    def wheel_errors(self, rear_err, delta, pose=None):
        state = self.chain_state(rear_err, delta)
        if self.path is not None and self.path.straight_heading is None:
            if pose is None:
                raise InvalidSpec("curved-path operation needs the rear pose")
            return lift_chain(state, self.path, pose), state
        return lift_chain(state, None, None), state

    def step(self, rear_err, delta, ds, pose=None, kappa_dist=0.0):
        """One controller period: evaluate the law and advance the chain by ds."""
        p = self.params
        n = p.n
        wheels, state = self.wheel_errors(rear_err, delta, pose)
        outer = wheels[-1]
        sigma = sliding_sigma(outer, p.kappa_bar, p.k_rob)
        kappa_cmd = dubins_kappa(sigma, p.kappa_bar, p.sign_zero) + kappa_dist
        if n == 1:
            highest = _backend.c0_backout(kappa_cmd, delta, p.lambdas[0])
        elif n == 2:
            delta_l = state.fictive[1][0]
            _, highest = _backend.c1_backout(
                kappa_cmd, delta, self._derivs[0], delta_l, p.lambdas[0], p.lambdas[1]
            )
        else:
            jets0, kap_a = _wheel_jets(delta, tuple(self._derivs), p.lambdas, 0.0)
            _, kap_b = _wheel_jets(delta, tuple(self._derivs), p.lambdas, 1.0)
            gain = kap_b - kap_a
            if abs(gain) < 1e-12:
                raise DomainViolation("chain back-propagation is singular")
            highest = (kappa_cmd - kap_a) / gain

        derivs_used = tuple(self._derivs)
        rates = list(self._derivs) + [highest]
        # the command is the controller's own integrator chain; the measured
        # delta re-anchors only the law inputs (an actuator lag between command
        # and plant must not bleed into the commanded rate)
        if self._delta_cmd is None:
            self._delta_cmd = float(delta)
        delta_cmd = self._delta_cmd + rates[0] * ds
        cap = p.limits.delta_max if p.limits is not None else 0.98 * HALF_PI
        delta_cmd = min(max(delta_cmd, -cap), cap)
        self._delta_cmd = delta_cmd
        for i in range(n - 1):
            self._derivs[i] += rates[i + 1] * ds
        return StepResult(
            delta_cmd=delta_cmd,
            derivs=derivs_used,
            highest=highest,
            sigma=sigma,
            kappa_cmd=kappa_cmd,
            wheels=wheels,
            fictive=state.fictive,
        )
