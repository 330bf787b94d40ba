"""Closed-loop orchestration: controller sampled at its rate with zero-order
hold, plant integrated at a finer fixed step, trace and metrics emission.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .baselines import HosmParams, OptimalReachSpec, hosm_control, optimal_reach
from .chain import ChainState, ControllerParams, TrackingController, lift_chain
from .errors import InvalidSpec
from .plant import DisturbanceSpec, KinematicPlant, KineticPlant, VehicleParams
from .sliding import WheelError, wrap_pi
from .tuning import ActuatorLimits, lambda_from_cornering, schedule

V_MIN_CONVERSION = 0.1   # guards the arc-length <-> time conversions

TRACE_COLUMNS = ("t", "s", "x", "y", "psi", "v", "delta_cmd", "delta_veh",
                 "delta_dot", "delta_ddot", "e", "e_f", "e_l", "beta")


@dataclass
class Trajectory:
    """Row-per-controller-step trace of a closed-loop run."""

    data: dict                    # column name -> np.ndarray
    diverged: bool = False
    meta: dict = field(default_factory=dict)

    def __getattr__(self, name):
        if name in TRACE_COLUMNS:
            return self.data[name]
        raise AttributeError(name)

    def __len__(self):
        return len(self.data["t"])

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            cols = [self.data[c] for c in TRACE_COLUMNS]
            for row in zip(*cols):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path):
        arr = np.genfromtxt(path, delimiter=",", names=True)
        data = {c: np.atleast_1d(arr[c]) for c in TRACE_COLUMNS}
        return cls(data=data)


@dataclass
class SpeedProfile:
    """Constant or linear-in-time ramp speed."""

    v0: float
    v1: float = None
    duration: float = None

    def v(self, t):
        if self.v1 is None or self.duration in (None, 0.0):
            return self.v0
        f = min(max(t / self.duration, 0.0), 1.0)
        return self.v0 + (self.v1 - self.v0) * f

    def vdot(self, t):
        if self.v1 is None or self.duration in (None, 0.0):
            return 0.0
        if 0.0 <= t <= self.duration:
            return (self.v1 - self.v0) / self.duration
        return 0.0


class HosmRateController:
    """Adapter running the HOSM steering-rate law in the harness loop."""

    def __init__(self, params, lam):
        self.params = params
        self.lam = lam
        self.n = 1
        self._delta_cmd = None

    def reset(self):
        self._delta_cmd = None

    def step(self, rear_err, delta, ds, pose=None, kappa_dist=0.0):
        u = hosm_control(rear_err, delta, self.params, self.lam)
        if self._delta_cmd is None:
            self._delta_cmd = float(delta)
        cap = self.params.delta_max
        self._delta_cmd = min(max(self._delta_cmd + u * ds, -cap), cap)
        return _SimpleStep(delta_cmd=self._delta_cmd, rates=(u, math.nan),
                           wheels=[rear_err], fictive=())


class OptimalProfileController:
    """Open-loop playback of the length-optimal reaching profile."""

    def __init__(self, spec, lam):
        self.spec = spec
        self.lam = lam
        self.result = optimal_reach(spec, lam)
        self._s = 0.0
        self._delta_cmd = None
        self.n = 1

    def reset(self):
        self._s = 0.0
        self._delta_cmd = None

    def step(self, rear_err, delta, ds, pose=None, kappa_dist=0.0):
        s = self._s
        acc = 0.0
        u = 0.0
        for v, ln in zip(self.result.values, self.result.lengths):
            if s < acc + ln:
                u = v * self.spec.ddelta_max
                break
            acc += ln
        self._s += ds
        if self._delta_cmd is None:
            self._delta_cmd = float(delta)
        cap = self.spec.delta_max
        self._delta_cmd = min(max(self._delta_cmd + u * ds, -cap), cap)
        return _SimpleStep(delta_cmd=self._delta_cmd, rates=(u, math.nan),
                           wheels=[rear_err], fictive=())


@dataclass
class _SimpleStep:
    delta_cmd: float
    rates: tuple
    wheels: list
    fictive: tuple


@dataclass
class Scenario:
    """Everything needed to reproduce one closed-loop run.

    See scenarios.py for the file schema and the built-in scenario builders.
    """

    path: object                  # RefPath
    plant_kind: str = "kinematic"
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    speed: SpeedProfile = field(default_factory=lambda: SpeedProfile(10.0))
    offset0: float = 0.0
    heading0: float = 0.0
    delta0: float = 0.0
    s0: float = 0.0
    controller_kind: str = "proposed-c1"
    controller_params: object = None      # ControllerParams / HosmParams / OptimalReachSpec
    rate_hz: float = 50.0
    substeps: int = 20
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    duration: float = None
    length: float = None
    abort_offset: float = 20.0
    eps_reach: float = 0.05
    name: str = "scenario"

    def budget_duration(self):
        if self.duration is not None:
            return self.duration
        if self.length is not None:
            # conservative time budget from the mean speed
            v_avg = 0.5 * (self.speed.v0 + (self.speed.v1 or self.speed.v0))
            return self.length / max(v_avg, V_MIN_CONVERSION)
        raise InvalidSpec("scenario needs a duration or length budget")


def build_controller(scenario):
    kind = scenario.controller_kind
    path = scenario.path
    if kind in ("proposed-c0", "proposed-c1", "proposed-cn"):
        params = scenario.controller_params
        if not isinstance(params, ControllerParams):
            raise InvalidSpec("proposed controllers need ControllerParams")
        return TrackingController(params, path=path)
    if kind == "hosm":
        params = scenario.controller_params
        if not isinstance(params, HosmParams):
            raise InvalidSpec("hosm controller needs HosmParams")
        return HosmRateController(params, params.lam)
    if kind == "optimal":
        if path.straight_heading is None:
            raise InvalidSpec("the optimal profile controller needs a straight path")
        spec = scenario.controller_params
        if not isinstance(spec, OptimalReachSpec):
            raise InvalidSpec("optimal controller needs an OptimalReachSpec")
        return OptimalProfileController(spec, scenario.vehicle.wheelbase)
    raise InvalidSpec(f"unknown controller kind {kind!r}")


def _initial_pose(scenario):
    x0, y0, theta = scenario.path.pose_at(scenario.s0)
    nx, ny = -math.sin(theta), math.cos(theta)
    return (x0 + scenario.offset0 * nx, y0 + scenario.offset0 * ny,
            wrap_pi(theta + scenario.heading0))


def _true_wheel_errors(controller, path, pose, err, delta):
    if isinstance(controller, TrackingController):
        state = controller.chain_state(err, delta)
        return lift_chain(state, path, pose)
    return [err]


def run_closed_loop(scenario):
    """Run one scenario to its budget; returns the Trajectory.

    Deterministic for a fixed seed. Divergence (|e| beyond the abort bound)
    truncates the trace and sets the flag.
    """
    path = scenario.path
    disturbance = scenario.disturbance.fresh()
    x0, y0, h0 = _initial_pose(scenario)
    if scenario.plant_kind == "kinematic":
        plant = KinematicPlant(scenario.vehicle.wheelbase, scenario.vehicle.delta_max)
        state = plant.initial_state(x=x0, y=y0, psi=h0, delta=scenario.delta0)
    elif scenario.plant_kind == "kinetic":
        plant = KineticPlant(scenario.vehicle, scenario.speed)
        state = plant.initial_state(x=x0 + scenario.vehicle.lr * math.cos(h0),
                                    y=y0 + scenario.vehicle.lr * math.sin(h0),
                                    psi=h0, delta=scenario.delta0)
    else:
        raise InvalidSpec(f"unknown plant kind {scenario.plant_kind!r}")

    controller = build_controller(scenario)
    controller.reset()
    straight = path.straight_heading is not None

    dt_ctrl = 1.0 / scenario.rate_hz
    dt_sub = dt_ctrl / scenario.substeps
    n_ctrl = int(round(scenario.budget_duration() / dt_ctrl))
    rows = {c: [] for c in TRACE_COLUMNS}
    diverged = False
    t = 0.0
    kd = disturbance.matched_kappa_d

    for _ in range(n_ctrl):
        v = scenario.speed.v(t) if scenario.plant_kind == "kinematic" else state.v
        v_eff = max(v, V_MIN_CONVERSION)
        rx, ry = plant.rear_position(state)
        proj = path.project((rx, ry))
        true_err = WheelError.wrapped(proj.e, state.psi - proj.theta)
        if abs(true_err.e) > scenario.abort_offset:
            diverged = True
            break
        ne, npsi = disturbance.sample_noise()
        meas_err = WheelError.wrapped(true_err.e + ne, true_err.psi + npsi)
        if straight:
            meas_pose = None
        else:
            px, py = path.point_at(proj.s_star)
            nx, ny = path.left_normal_at(proj.s_star)
            meas_pose = (px + meas_err.e * nx, py + meas_err.e * ny,
                         proj.theta + meas_err.psi)

        delta_meas = state.delta_veh
        ds_ctrl = v_eff * dt_ctrl
        res = controller.step(meas_err, delta_meas, ds_ctrl, pose=meas_pose,
                              kappa_dist=kd)
        delta_cmd = min(max(res.delta_cmd, -scenario.vehicle.delta_max),
                        scenario.vehicle.delta_max)

        if isinstance(res, _SimpleStep):
            rate1, rate2 = res.rates
        else:
            chain_rates = list(res.derivs) + [res.highest]
            rate1 = chain_rates[0]
            rate2 = chain_rates[1] if len(chain_rates) > 1 else 0.0
        vdot = scenario.speed.vdot(t)
        delta_dot = rate1 * v_eff
        delta_ddot = rate2 * v_eff * v_eff + rate1 * vdot

        wheels = _true_wheel_errors(controller, path, (rx, ry, state.psi),
                                    true_err, delta_meas)
        e_f = wheels[1].e if len(wheels) > 1 else wheels[0].e
        e_l = wheels[-1].e

        rows["t"].append(t)
        rows["s"].append(state.s)
        rows["x"].append(rx)
        rows["y"].append(ry)
        rows["psi"].append(state.psi)
        rows["v"].append(v)
        rows["delta_cmd"].append(delta_cmd)
        rows["delta_veh"].append(delta_meas)
        rows["delta_dot"].append(delta_dot)
        rows["delta_ddot"].append(delta_ddot)
        rows["e"].append(true_err.e)
        rows["e_f"].append(e_f)
        rows["e_l"].append(e_l)
        rows["beta"].append(getattr(state, "side_slip", 0.0))

        for _ in range(scenario.substeps):
            if scenario.plant_kind == "kinematic":
                ds = max(scenario.speed.v(t), 0.0) * dt_sub
                if ds > 0.0:
                    state = plant.step(state, delta_cmd, ds)
            else:
                state = plant.step(state, delta_cmd, dt_sub)
            t += dt_sub

    data = {c: np.asarray(rows[c], dtype=float) for c in TRACE_COLUMNS}
    return Trajectory(data=data, diverged=diverged,
                      meta={"name": scenario.name, "eps_reach": scenario.eps_reach})


@dataclass
class MetricsRecord:
    t_r: float
    reach_distance: float
    max_e_l_post: float
    std_ddelta_dt: float
    std_dddelta_dt2: float
    max_e: float
    max_e_f: float
    reached: bool = True
    label: str = ""

    INDICATORS = ("t_r", "max_e_l_post", "std_ddelta_dt", "std_dddelta_dt2")


def compute_metrics(traj, eps_reach=None):
    """Reaching time, post-reaching lead error, and actuation-effort stds.

    t_r is the first time after which |e_l| stays below eps_reach for the
    rest of the trace; the stds are population standard deviations over
    t > t_r.
    """
    if len(traj) == 0:
        raise InvalidSpec("empty trace")
    if eps_reach is None:
        eps_reach = traj.meta.get("eps_reach", 0.05)
    e_l = traj.e_l
    bad = np.flatnonzero(np.abs(e_l) >= eps_reach)
    if bad.size == 0:
        idx = 0
    elif bad[-1] == len(e_l) - 1:
        return MetricsRecord(t_r=math.nan, reach_distance=math.nan,
                             max_e_l_post=math.nan, std_ddelta_dt=math.nan,
                             std_dddelta_dt2=math.nan,
                             max_e=float(np.max(np.abs(traj.e))),
                             max_e_f=float(np.max(np.abs(traj.e_f))),
                             reached=False, label=traj.meta.get("name", ""))
    else:
        idx = bad[-1] + 1
    post = slice(idx, None)
    return MetricsRecord(
        t_r=float(traj.t[idx]),
        reach_distance=float(traj.s[idx]),
        max_e_l_post=float(np.max(np.abs(e_l[post]))),
        std_ddelta_dt=float(np.std(traj.delta_dot[post])),
        std_dddelta_dt2=float(np.std(traj.delta_ddot[post])),
        max_e=float(np.max(np.abs(traj.e))),
        max_e_f=float(np.max(np.abs(traj.e_f))),
        reached=True,
        label=traj.meta.get("name", ""),
    )


def radar_compare(records):
    """Per-indicator ratios against the first record (the baseline).

    Returns a list of dicts, one per record, with the raw values and the
    normalized ratios; feed to plotting.radar_plot or write_comparison.
    """
    if len(records) < 2:
        raise InvalidSpec("need at least two records to compare")
    base = records[0]
    out = []
    for rec in records:
        row = {"label": rec.label}
        for key in MetricsRecord.INDICATORS:
            val = getattr(rec, key)
            ref = getattr(base, key)
            row[key] = val
            row[key + "_ratio"] = val / ref if ref not in (0.0, math.nan) else math.inf
        out.append(row)
    return out


def write_comparison(rows, path):
    keys = ["label"] + [k for k in rows[0] if k != "label"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(keys) + "\n")
        for row in rows:
            fh.write(",".join(str(row[k]) for k in keys) + "\n")


def write_metrics(records, path):
    fields = ("label", "t_r", "reach_distance", "max_e_l_post", "std_ddelta_dt",
              "std_dddelta_dt2", "max_e", "max_e_f", "reached")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(fields) + "\n")
        for r in records:
            fh.write(",".join(str(getattr(r, f)) for f in fields) + "\n")
