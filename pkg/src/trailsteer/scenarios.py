"""Scenario construction and the plain-text (YAML) scenario file schema.

Top-level keys of a scenario file:

    name: free-form string
    path:
      segments: [[kappa, length], ...]        # curvature 0 encodes a line
      # or: lane_change: {offset: 3.5, sections: [12, 13.5, 11, 12.5, 12]}
    plant:
      kind: kinematic | kinetic
      wheelbase, delta_max                     # shared
      mass, yaw_inertia, weight_split, mu,     # kinetic only
      pacejka_b, pacejka_c, pacejka_e,
      actuator_cutoff_hz
    speed: {kind: constant, v: 10.0}           # or {kind: ramp, v0: .., v1: ..,
                                                #     duration: ..}  (defaults to
                                                #     the budget duration)
    initial: {offset, heading_error, delta0, s0}
    controller:
      kind: proposed-c0 | proposed-c1 | proposed-cn | hosm | optimal
      kappa_bar, lambda_l, k_rob, sign_zero    # proposed-c1 (lambda from the
                                               # cornering rule unless `lambda`
                                               # is given explicitly)
      lambdas: [..]                            # proposed-cn (all wheelbases)
      scheduled: true, design_speed: ..        # derive params from the tuner
      limits: {delta_max, ddelta_dt_max, dddelta_dt_max}
      psi_bar, ddelta_bar                      # hosm
      e0, psi0, delta0, ddelta_max, eps        # optimal
    rate_hz, substeps, abort_offset, eps_reach
    disturbance: {matched_kappa_d, e_noise_std, psi_noise_std, seed}
    budget: {duration: seconds}                # or {length: meters}
"""

import math

import yaml

from .baselines import HosmParams, OptimalReachSpec
from .chain import ControllerParams
from .errors import InvalidSpec
from .harness import Scenario, SpeedProfile
from .plant import DisturbanceSpec, VehicleParams
from .refpath import LANE_CHANGE_OFFSET, LANE_CHANGE_SECTIONS, build_arc_sequence, build_lane_change
from .tuning import ActuatorLimits, lambda_from_cornering, schedule

DEFAULT_LIMITS = ActuatorLimits(delta_max=0.5, ddelta_dt_max=0.6, dddelta_dt_max=6.0)


def _build_path(cfg):
    if "segments" in cfg:
        return build_arc_sequence(cfg["segments"])
    if "lane_change" in cfg:
        lc = cfg["lane_change"]
        return build_lane_change(lc.get("offset", LANE_CHANGE_OFFSET),
                                 lc.get("sections", LANE_CHANGE_SECTIONS))
    raise InvalidSpec("path needs 'segments' or 'lane_change'")


def _build_vehicle(cfg):
    keys = ("mass", "yaw_inertia", "wheelbase", "weight_split", "delta_max",
            "mu", "pacejka_b", "pacejka_c", "pacejka_e", "actuator_cutoff_hz")
    kwargs = {k: float(cfg[k]) for k in keys if k in cfg}
    return VehicleParams(**kwargs)


def _build_speed(cfg, duration):
    kind = cfg.get("kind", "constant")
    if kind == "constant":
        return SpeedProfile(float(cfg["v"]))
    if kind == "ramp":
        return SpeedProfile(float(cfg["v0"]), float(cfg["v1"]),
                            float(cfg.get("duration") or duration))
    raise InvalidSpec(f"unknown speed kind {kind!r}")


def controller_params_from_config(cfg, vehicle, design_speed=None):
    """ControllerParams / HosmParams / OptimalReachSpec from a config block."""
    kind = cfg.get("kind", "proposed-c1")
    if kind == "hosm":
        return kind, HosmParams(
            psi_bar=float(cfg.get("psi_bar", 0.45)),
            ddelta_bar=float(cfg.get("ddelta_bar", 0.4)),
            delta_max=vehicle.delta_max,
            lam=vehicle.wheelbase,
            boundary_layer=float(cfg.get("boundary_layer", 0.02)),
            normalized=bool(cfg.get("normalized", True)),
        )
    if kind == "optimal":
        return kind, OptimalReachSpec(
            e0=float(cfg["e0"]), psi0=float(cfg.get("psi0", 0.0)),
            delta0=float(cfg.get("delta0", 0.0)),
            delta_max=vehicle.delta_max,
            ddelta_max=float(cfg.get("ddelta_max", 0.4)),
        )
    if cfg.get("scheduled"):
        limits = ActuatorLimits(**cfg["limits"]) if "limits" in cfg else DEFAULT_LIMITS
        v_design = float(cfg.get("design_speed") or design_speed)
        params = schedule(v_design, limits, vehicle.wheelbase,
                          k_rob=float(cfg.get("k_rob", 0.3)))
        return "proposed-c1", params
    k_rob = float(cfg.get("k_rob", 0.3))
    sign_zero = float(cfg.get("sign_zero", 0.0))
    kappa_bar = float(cfg.get("kappa_bar", 0.12))
    if kind == "proposed-c0":
        lam = float(cfg.get("lambda", vehicle.wheelbase))
        return kind, ControllerParams(kappa_bar, (lam,), k_rob, sign_zero)
    if kind == "proposed-c1":
        lam_l = float(cfg.get("lambda_l", 0.4))
        lam = float(cfg.get("lambda",
                            lambda_from_cornering(vehicle.wheelbase, lam_l)))
        return kind, ControllerParams(kappa_bar, (lam, lam_l), k_rob, sign_zero)
    if kind == "proposed-cn":
        lambdas = tuple(float(v) for v in cfg["lambdas"])
        return kind, ControllerParams(kappa_bar, lambdas, k_rob, sign_zero)
    raise InvalidSpec(f"unknown controller kind {kind!r}")


def scenario_from_dict(cfg):
    path = _build_path(cfg["path"])
    vehicle = _build_vehicle(cfg.get("plant", {}))
    plant_kind = cfg.get("plant", {}).get("kind", "kinematic")
    budget = cfg.get("budget", {})
    duration = budget.get("duration")
    length = budget.get("length")
    if duration is None and length is None:
        raise InvalidSpec("budget needs 'duration' or 'length'")
    speed = _build_speed(cfg.get("speed", {"kind": "constant", "v": 10.0}), duration)
    design_speed = speed.v1 or speed.v0
    kind, params = controller_params_from_config(cfg.get("controller", {}),
                                                 vehicle, design_speed)
    init = cfg.get("initial", {})
    dist = cfg.get("disturbance", {})
    return Scenario(
        path=path,
        plant_kind=plant_kind,
        vehicle=vehicle,
        speed=speed,
        offset0=float(init.get("offset", 0.0)),
        heading0=float(init.get("heading_error", 0.0)),
        delta0=float(init.get("delta0", 0.0)),
        s0=float(init.get("s0", 0.0)),
        controller_kind=kind,
        controller_params=params,
        rate_hz=float(cfg.get("rate_hz", 50.0)),
        substeps=int(cfg.get("substeps", 20)),
        disturbance=DisturbanceSpec(
            matched_kappa_d=float(dist.get("matched_kappa_d", 0.0)),
            e_noise_std=float(dist.get("e_noise_std", 0.0)),
            psi_noise_std=float(dist.get("psi_noise_std", 0.0)),
            seed=int(dist.get("seed", 0)),
        ),
        duration=duration if duration is None else float(duration),
        length=length if length is None else float(length),
        abort_offset=float(cfg.get("abort_offset", 20.0)),
        eps_reach=float(cfg.get("eps_reach", 0.05)),
        name=str(cfg.get("name", "scenario")),
    )


def load_scenario(path):
    with open(path, "r", encoding="utf-8") as fh:
        cfg = yaml.safe_load(fh)
    return scenario_from_dict(cfg)


# -- built-in scenario configurations ---------------------------------------

# arc-sequence tracking scenario with a speed ramp (noise and robustness study)
ARC_RAMP_CONFIG = {
    "name": "arc-ramp",
    "path": {"segments": [[0.0, 15.0], [0.04, 30.0], [0.0, 10.0],
                          [-0.033, 36.0], [0.0, 10.0], [0.025, 32.0],
                          [0.0, 20.0]]},
    "plant": {"kind": "kinetic", "wheelbase": 2.7, "delta_max": 0.5},
    "speed": {"kind": "ramp", "v0": 2.8, "v1": 12.5},
    "initial": {"offset": 1.5},
    "controller": {"kind": "proposed-c1", "kappa_bar": 0.12, "lambda_l": 0.4,
                   "k_rob": 0.3},
    "rate_hz": 50.0,
    "substeps": 20,
    "disturbance": {"e_noise_std": 0.005, "psi_noise_std": 0.002, "seed": 7},
    "budget": {"duration": 18.0},
}

# ISO-3888-style double lane change at 15 m/s
LANE_CHANGE_CONFIG = {
    "name": "lane-change",
    "path": {"lane_change": {"offset": 3.5}},
    "plant": {"kind": "kinetic", "wheelbase": 2.7, "delta_max": 0.5},
    "speed": {"kind": "constant", "v": 15.0},
    "initial": {"offset": 0.0},
    "controller": {"kind": "proposed-c1", "kappa_bar": 0.12, "lambda_l": 0.4,
                   "k_rob": 0.3},
    "rate_hz": 50.0,
    "substeps": 20,
    "disturbance": {"seed": 3},
    "budget": {"duration": 4.0},
}

# small-robot single track for the reaching benchmark (see the README for why
# the comparison runs at this scale)
REACH_BENCH = {
    "wheelbase": 0.3,
    "delta_max": 0.85,
    "ddelta_max": 7.5,
    "kappa_bar": 0.98 * math.sin(0.85) / 0.3,
    "e0": 1.0,
    "psi0_cases": (0.0, 0.2 * math.pi, -0.2 * math.pi),
}

# parameter variations of the comparison study: one parameter each
PARAM_VARIATIONS = (
    ("kappa_bar -50%", {"kappa_bar": 0.5}),
    ("lambda_l +300%", {"lambda_l": 4.0}),
    ("k_rob -33%", {"k_rob": 2.0 / 3.0}),
)


def arc_ramp_scenario(**overrides):
    cfg = yaml.safe_load(yaml.safe_dump(ARC_RAMP_CONFIG))
    cfg.update(overrides)
    return scenario_from_dict(cfg)


def lane_change_scenario(v=15.0, **overrides):
    cfg = yaml.safe_load(yaml.safe_dump(LANE_CHANGE_CONFIG))
    cfg["speed"] = {"kind": "constant", "v": float(v)}
    cfg["budget"] = {"duration": (sum(LANE_CHANGE_SECTIONS) - 2.0) / float(v)}
    cfg.update(overrides)
    return scenario_from_dict(cfg)


def vary_controller(scenario, name, factors):
    """Scenario copy with controller parameters scaled by the given factors.

    Lambda is re-derived from the cornering rule when lambda_l changes.
    """
    p = scenario.controller_params
    if not isinstance(p, ControllerParams):
        raise InvalidSpec("parameter variations need a proposed controller")
    kappa = p.kappa_bar * factors.get("kappa_bar", 1.0)
    k_rob = p.k_rob * factors.get("k_rob", 1.0)
    lambdas = p.lambdas
    if "lambda_l" in factors and len(lambdas) == 2:
        lam_l = lambdas[1] * factors["lambda_l"]
        lambdas = (lambda_from_cornering(scenario.vehicle.wheelbase, lam_l), lam_l)
    new = ControllerParams(kappa_bar=kappa, lambdas=lambdas, k_rob=k_rob,
                           sign_zero=p.sign_zero, limits=p.limits)
    out = Scenario(**{**scenario.__dict__})
    out.controller_params = new
    out.name = name
    return out
