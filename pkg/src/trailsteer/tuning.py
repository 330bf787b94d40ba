"""Parameter constraints, static maps of the steering-derivative maxima over
the invariant sets, and the velocity-dependent scheduling of (kappa_bar_l,
lambda_l, lambda).
"""

import math
from dataclasses import dataclass

import numpy as np

from .chain import ControllerParams
from .errors import Infeasible, InvalidSpec

KAPPA_BOUND_MARGIN = 1e-6       # the steering-angle bound is exclusive
LAMBDA_L_MIN_FRACTION = 0.05    # floor: lambda_l = 0 degenerates the chain
LAMBDA_L_MAX_FRACTION = 1.0 - 1e-3


@dataclass(frozen=True)
class ActuatorLimits:
    delta_max: float          # rad
    ddelta_dt_max: float      # rad/s
    dddelta_dt_max: float     # rad/s^2

    def __post_init__(self):
        if min(self.delta_max, self.ddelta_dt_max, self.dddelta_dt_max) <= 0.0:
            raise InvalidSpec("actuator limits must be positive")


def kappa_l_max(delta_max, lam, lam_l, formula_variant="derived"):
    """Exclusive upper bound on the lead-wheel curvature from |delta| <= delta_max.

    The 'derived' square-root form is dimensionally consistent and follows
    from chaining the two invariant sets; 'as-printed' keeps the quadratic
    denominator for comparison. Both coincide at lam = 1, lam_l = 0.
    """
    if lam <= 0.0:
        raise InvalidSpec("lam must be > 0")
    sd = math.sin(delta_max)
    if formula_variant == "derived":
        return sd / math.sqrt(lam * lam + lam_l * lam_l * sd * sd)
    if formula_variant == "as-printed":
        return sd / (lam * lam + lam_l * lam_l * sd * sd)
    raise InvalidSpec(f"unknown formula_variant {formula_variant!r}")


def k_rob_min(kappa_d, kappa_l_bar):
    """Robustness gain needed to reject a matched curvature disturbance."""
    if kappa_l_bar <= 0.0:
        raise InvalidSpec("kappa_l_bar must be > 0")
    k = kappa_d / kappa_l_bar
    if k >= 1.0:
        raise InvalidSpec("required k_rob >= 1: disturbance exceeds the authority")
    return k


def lambda_from_cornering(lambda_veh, lambda_l):
    """Fictive front wheelbase putting the lead wheel on the real front wheel's
    circle during stationary cornering."""
    if not 0.0 <= lambda_l < lambda_veh:
        raise InvalidSpec("need 0 <= lambda_l < lambda_veh")
    return math.sqrt(lambda_veh * lambda_veh - lambda_l * lambda_l)


def rate_accel_map(kappa_l_bar, lambda_l, lam, grid_resolution=101):
    """(max|delta'|, max|delta''|) over the invariant sets.

    Scans delta in Delta, delta_l in Delta_l and kappa_l in {-kb, +kb}. At
    lambda_l = 0 the chain degenerates: the rate maximum is the C0 value and
    the acceleration maximum is unbounded.
    """
    if kappa_l_bar < 0.0 or lambda_l < 0.0:
        raise InvalidSpec("kappa_l_bar and lambda_l must be >= 0")
    if kappa_l_bar * lambda_l > 1.0:
        raise InvalidSpec("kappa_l_bar * lambda_l must be <= 1")
    if kappa_l_bar == 0.0:
        return 0.0, 0.0
    if lambda_l == 0.0:
        kf = kappa_l_bar
        big_d = math.asin(min(kf * lam, 1.0))
        d = np.linspace(-big_d, big_d, grid_resolution)
        dd = kf / np.cos(d) + np.abs(np.tan(d)) / lam
        return float(dd.max()), math.inf
    x = kappa_l_bar * lambda_l
    kf_bar = kappa_l_bar / math.sqrt(1.0 - x * x) if x < 1.0 else math.inf
    if kf_bar * lam > 1.0:
        raise InvalidSpec("chained invariant set vanishes: kappa_f_bar * lam > 1")
    big_d = math.asin(kf_bar * lam)
    big_dl = math.asin(x)
    d = np.linspace(-big_d, big_d, grid_resolution)[:, None]
    dl = np.linspace(-big_dl, big_dl, grid_resolution)[None, :]
    cd = np.cos(d)
    cdl = np.cos(dl)
    ddelta = np.tan(dl) / (lambda_l * cd) - np.tan(d) / lam
    max_dd = float(np.abs(ddelta).max())
    max_ddd = 0.0
    for kap in (kappa_l_bar, -kappa_l_bar):
        ddelta_l = kap / (cd * cdl) - np.tan(dl) / (lambda_l * cd)
        dddelta = ddelta_l / (cdl * cdl * cd * lambda_l) - ddelta / lam \
            + ddelta * ddelta * np.tan(d)
        max_ddd = max(max_ddd, float(np.abs(dddelta).max()))
    return max_dd, max_ddd


@dataclass
class StaticMap:
    """Grid of the steering-derivative maxima over (lambda_l, kappa_l_bar)."""

    lambda_l_grid: np.ndarray
    kappa_grid: np.ndarray
    max_ddelta: np.ndarray     # shape (len(lambda_l), len(kappa))
    max_dddelta: np.ndarray
    lambda_veh: float

    @classmethod
    def build(cls, lambda_veh, lambda_l_grid, kappa_grid, grid_resolution=101):
        ll = np.asarray(lambda_l_grid, dtype=float)
        kk = np.asarray(kappa_grid, dtype=float)
        md = np.full((ll.size, kk.size), np.nan)
        ma = np.full((ll.size, kk.size), np.nan)
        for i, lam_l in enumerate(ll):
            lam = lambda_from_cornering(lambda_veh, lam_l)
            for j, kb in enumerate(kk):
                try:
                    md[i, j], ma[i, j] = rate_accel_map(kb, lam_l, lam, grid_resolution)
                except InvalidSpec:
                    continue
        return cls(ll, kk, md, ma, lambda_veh)

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("lambda_l,kappa_l_bar,max_ddelta,max_dddelta\n")
            for i, lam_l in enumerate(self.lambda_l_grid):
                for j, kb in enumerate(self.kappa_grid):
                    fh.write(f"{lam_l!r},{kb!r},{self.max_ddelta[i, j]!r},"
                             f"{self.max_dddelta[i, j]!r}\n")


def _bisect(fun, lo, hi, rel_tol=1e-4, max_iter=200):
    """Root of a monotone scalar function with fun(lo) and fun(hi) bracketing."""
    flo = fun(lo)
    fhi = fun(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise Infeasible("bisection endpoints do not bracket a root")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        if fm == 0.0 or (hi - lo) <= rel_tol * max(abs(mid), 1e-12):
            return mid
        if fm * flo > 0.0:
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class SchedulePoint:
    v: float
    params: ControllerParams
    region: int
    max_ddelta_dt: float      # predicted max steering rate at v
    max_dddelta_dt2: float    # predicted max steering acceleration at v
    clamped: bool = False


def schedule_point(v, limits, lambda_veh, k_rob=0.3, lambda_l_min=None,
                   grid_resolution=101, rel_tol=1e-4, sign_zero=0.0):
    """Velocity-optimal (kappa_l_bar, lambda_l, lambda) under the actuator limits.

    Priorities: respect the rate limit, respect the acceleration limit, then
    maximize kappa_l_bar, then minimize lambda_l. Constant velocity assumed.
    """
    if v <= 0.0:
        raise InvalidSpec("v must be > 0")
    if lambda_l_min is None:
        lambda_l_min = LAMBDA_L_MIN_FRACTION * lambda_veh
    lam_l_hi = LAMBDA_L_MAX_FRACTION * lambda_veh

    def kappa_bound(lam_l):
        lam = lambda_from_cornering(lambda_veh, lam_l)
        return (1.0 - KAPPA_BOUND_MARGIN) * kappa_l_max(limits.delta_max, lam, lam_l)

    def maxima(kb, lam_l):
        lam = lambda_from_cornering(lambda_veh, lam_l)
        md, ma = rate_accel_map(kb, lam_l, lam, grid_resolution)
        return md * v, ma * v * v

    def lambda_star(kb):
        """Acceleration-minimizing lead wheelbase at fixed kappa_l_bar."""
        lls = np.linspace(lambda_l_min, lam_l_hi, 41)
        vals = []
        for lam_l in lls:
            try:
                vals.append(maxima(kb, lam_l)[1])
            except InvalidSpec:
                vals.append(math.inf)
        i = int(np.argmin(vals))
        lo = lls[max(i - 1, 0)]
        hi = lls[min(i + 1, lls.size - 1)]
        for _ in range(40):
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            if maxima(kb, m1)[1] <= maxima(kb, m2)[1]:
                hi = m2
            else:
                lo = m1
        lam_l = 0.5 * (lo + hi)
        clamped = lam_l >= lam_l_hi - 1e-9
        return (lam_l_hi if clamped else lam_l), clamped

    def result(kb, lam_l, region, clamped=False):
        lam = lambda_from_cornering(lambda_veh, lam_l)
        rd, ra = maxima(kb, lam_l)
        if region == 3 and rd < 0.98 * limits.ddelta_dt_max:
            region = 4  # only the acceleration limit binds: lambda_l sits at its minimizer
        params = ControllerParams(kappa_bar=kb, lambdas=(lam, lam_l),
                                  k_rob=k_rob, sign_zero=sign_zero, limits=limits)
        return SchedulePoint(v=v, params=params, region=region,
                             max_ddelta_dt=rd, max_dddelta_dt2=ra, clamped=clamped)

    # region 1: full curvature authority, minimal lead wheelbase
    kb1 = kappa_bound(lambda_l_min)
    rd, ra = maxima(kb1, lambda_l_min)
    if rd <= limits.ddelta_dt_max and ra <= limits.dddelta_dt_max:
        return result(kb1, lambda_l_min, 1)

    # region 2: keep kappa at its bound, grow lambda_l until the acceleration
    # limit is met
    if ra > limits.dddelta_dt_max:
        def accel_res(lam_l):
            return maxima(kappa_bound(lam_l), lam_l)[1] - limits.dddelta_dt_max

        # find the minimizer of accel along the bound curve
        lls = np.linspace(lambda_l_min, lam_l_hi, 41)
        accs = [maxima(kappa_bound(x), x)[1] for x in lls]
        i_min = int(np.argmin(accs))
        lam_l_acc_min = lls[i_min]
        if accs[i_min] <= limits.dddelta_dt_max:
            lam_l2 = _bisect(accel_res, lambda_l_min, lam_l_acc_min, rel_tol)
            kb2 = kappa_bound(lam_l2)
            rd2, ra2 = maxima(kb2, lam_l2)
            if rd2 <= limits.ddelta_dt_max:
                return result(kb2, lam_l2, 2)

    # region 3: both limits bind; lower kappa, retune lambda_l per candidate
    def lambda_for_accel(kb):
        """Smallest lambda_l >= floor meeting the acceleration limit at kb."""
        def res(lam_l):
            return maxima(kb, lam_l)[1] - limits.dddelta_dt_max

        if res(lambda_l_min) <= 0.0:
            return lambda_l_min, False
        star, clamped = lambda_star(kb)
        if res(star) > 0.0:
            return None, clamped
        return _bisect(res, lambda_l_min, star, rel_tol), False

    def rate_residual(kb):
        lam_l, _ = lambda_for_accel(kb)
        if lam_l is None:
            return math.inf
        return maxima(kb, lam_l)[0] - limits.ddelta_dt_max

    kb_hi = kappa_bound(lambda_l_min)
    kb_lo = kb_hi * 1e-6
    if rate_residual(kb_lo) > 0.0:
        raise Infeasible(f"no admissible parameters at v = {v}")
    if rate_residual(kb_hi) > 0.0:
        kb3 = _bisect(rate_residual, kb_lo, kb_hi, rel_tol)
        lam_l3, clamped3 = lambda_for_accel(kb3)
        if lam_l3 is not None:
            return result(kb3, lam_l3, 3, clamped3)
    else:
        # the rate limit is slack everywhere: only the acceleration limit
        # binds, with kappa as large as possible (region 4 at the curve's
        # accel minimum, or region 2-like if the bound curve suffices)
        kb3 = kb_hi
        lam_l3, clamped3 = lambda_for_accel(kb3)
        if lam_l3 is not None:
            return result(kb3, lam_l3, 3, clamped3)

    # region 4: sit at the acceleration minimizer and shrink kappa
    def accel_at_star(kb):
        star, _ = lambda_star(kb)
        return maxima(kb, star)[1] - limits.dddelta_dt_max

    if accel_at_star(kb_lo) > 0.0:
        raise Infeasible(f"no admissible parameters at v = {v}")
    kb4 = _bisect(accel_at_star, kb_lo, kb_hi, rel_tol)
    star4, clamped4 = lambda_star(kb4)
    rd4, _ = maxima(kb4, star4)
    if rd4 > limits.ddelta_dt_max:
        def rate_res4(kb):
            star, _ = lambda_star(kb)
            return maxima(kb, star)[0] - limits.ddelta_dt_max

        kb4 = _bisect(rate_res4, kb_lo, kb4, rel_tol)
        star4, clamped4 = lambda_star(kb4)
    return result(kb4, star4, 4, clamped4)


def schedule(v, limits, lambda_veh, **kwargs):
    """ControllerParams for one velocity (see schedule_point for the policy)."""
    return schedule_point(v, limits, lambda_veh, **kwargs).params


def schedule_table(velocities, limits, lambda_veh, **kwargs):
    """SchedulePoints over a velocity grid."""
    return [schedule_point(v, limits, lambda_veh, **kwargs) for v in velocities]


def write_schedule_table(points, path):
    """Emit the schedule as a headered comma-separated table."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("v,kappa_l_bar,lambda_l,lambda,region,"
                 "max_ddelta_dt,max_dddelta_dt2,clamped\n")
        for p in points:
            fh.write(f"{p.v!r},{p.params.kappa_bar!r},{p.params.lambdas[1]!r},"
                     f"{p.params.lambdas[0]!r},{p.region},"
                     f"{p.max_ddelta_dt!r},{p.max_dddelta_dt2!r},{int(p.clamped)}\n")
