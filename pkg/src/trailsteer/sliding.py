"""Sliding variable, bang-bang curvature law and the wheel-lift algebra.

Everything here is written against plain floats or numpy arrays, so the same
functions serve the scalar controller and the vectorized oracle checks.
Heading errors follow the convention psi = vehicle heading minus path tangent,
wrapped to (-pi, pi]; lateral offsets are positive to the left of travel.
"""

import math
from typing import NamedTuple

import numpy as np

from .errors import DomainViolation, InvalidSpec

HALF_PI = 0.5 * math.pi


def wrap_pi(a):
    """Wrap an angle (scalar or array) to (-pi, pi]."""
    r = np.mod(np.asarray(a) + math.pi, 2.0 * math.pi) - math.pi
    r = np.where(r == -math.pi, math.pi, r)
    return float(r) if np.ndim(a) == 0 else r


def sign_with_zero(x, sign_zero=0.0):
    """sign(x) with a configurable value at exactly 0."""
    s = np.sign(x)
    if sign_zero != 0.0:
        s = np.where(np.asarray(x) == 0.0, sign_zero, s)
    return float(s) if np.ndim(x) == 0 else s


class WheelError(NamedTuple):
    """Signed lateral offset [m] and heading error [rad] of one wheel."""

    e: float
    psi: float

    @classmethod
    def wrapped(cls, e, psi):
        return cls(e, wrap_pi(psi))


def sliding_sigma(err, kappa_bar, k_rob=0.0):
    """Sliding variable whose zero set is the optimal reaching curve.

    sigma = -e - (1 - cos psi) / ((1 - k_rob) * kappa_bar) * sign(sin psi)
    """
    if k_rob >= 1.0:
        raise InvalidSpec("k_rob must be < 1")
    e, psi = err
    sp = np.sin(psi)
    term = (1.0 - np.cos(psi)) / ((1.0 - k_rob) * kappa_bar)
    out = -e - term * np.sign(sp)
    return float(out) if np.ndim(out) == 0 else out


def dubins_kappa(sigma, kappa_bar, sign_zero=0.0):
    """Bang-bang curvature command kappa_bar * sign(sigma)."""
    out = kappa_bar * sign_with_zero(sigma, sign_zero)
    return float(out) if np.ndim(out) == 0 else out


def lift_front(err, delta, lam):
    """Error of the wheel one wheelbase ahead: (e + sin(psi) * lam, psi + delta)."""
    e, psi = err
    return WheelError.wrapped(e + np.sin(psi) * lam, psi + delta)


def invariant_bounds(kappa_bar, lam):
    """Half-width arcsin(kappa_bar * lam) of the steering-angle invariant set."""
    if lam <= 0.0:
        raise InvalidSpec("wheelbase must be > 0")
    x = kappa_bar * lam
    if x > 1.0:
        raise InvalidSpec(f"invariant set vanishes: kappa_bar * lam = {x} > 1")
    return math.asin(x)


def flatness_ddelta(e, de, dde, ddde, lam):
    """Steering rate from the flat-output states (wheelbase-normalized form).

    Valid as written for arc length measured in units of the wheelbase; the
    pipeline in flatness_c0 handles the normalization. `e` is part of the flat
    state but does not enter the inversion.
    """
    de = np.asarray(de, dtype=float) if np.ndim(de) else de
    if np.any(np.abs(de) >= 1.0):
        raise DomainViolation("flat-output slope |e'| must be < 1")
    den = 1.0 - np.square(de)
    out = (ddde + de * np.square(dde) / den) * np.sqrt(den) \
        / (np.square(lam * dde) + den)
    return float(out) if np.ndim(out) == 0 else out


def hosm_zeta(sigma_u, dsigma_u, kappa_bar_f, k_rob=0.0):
    """Prescribed-convergence switching function in the (e_f, de_f) chart.

    Equals sliding_sigma evaluated at the front wheel for |psi_f| < pi/2,
    since 1 - sqrt(1 - sin^2) = 1 - cos there.
    """
    if np.any(np.abs(dsigma_u) > 1.0):
        raise DomainViolation("|dsigma_u| must be <= 1")
    term = (1.0 - np.sqrt(1.0 - np.square(dsigma_u))) / ((1.0 - k_rob) * kappa_bar_f)
    out = -sigma_u - term * np.sign(dsigma_u)
    return float(out) if np.ndim(out) == 0 else out


def flatness_c0(e, psi, delta, lam, kappa_bar_f, k_rob=0.0, sign_zero=0.0):
    """Steering rate via the flat-output pipeline; equals the C0 trailer law.

    Works in wheelbase-normalized arc length: states are scaled so the
    wheelbase is 1, the Dubins target acceleration of the front wheel is
    formed there, and the inverted rate is scaled back. Requires
    |psi|, |psi + delta|, |delta| < pi/2.
    """
    if np.any(np.abs(delta) >= HALF_PI) or np.any(np.abs(psi) >= HALF_PI) \
            or np.any(np.abs(psi + delta) >= HALF_PI):
        raise DomainViolation("flatness pipeline needs |psi|, |delta|, |psi+delta| < pi/2")
    kap_n = lam * kappa_bar_f
    de = np.sin(psi)
    dde = np.cos(psi) * np.tan(delta)
    ef = np.asarray(e) / lam + de
    sf = np.sin(psi + delta)
    sigma = hosm_zeta(ef, sf, kap_n, k_rob)
    kf = dubins_kappa(sigma, kap_n, sign_zero)
    cd = np.cos(delta)
    # front-wheel lateral acceleration in the normalized rear arc length
    ef_dd = kf * np.cos(psi) / (cd * cd * cd) - sf * np.square(np.tan(delta)) / cd
    ddde = ef_dd - dde
    out = flatness_ddelta(ef, de, dde, ddde, 1.0) / lam
    return float(out) if np.ndim(out) == 0 else out
