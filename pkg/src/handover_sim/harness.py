"""Scenario simulation of complete handover episodes.

One episode runs the full controller stack at the control rate: advance the
path parameter by the previous scaling factor, sample the spline, map to
Cartesian references, compute the compliant (or baseline PD) joint-velocity
command, scale it through the safety optimization, and integrate the
velocity-controlled plant. A scripted hand, a schedule-driven wrist sensor,
and a release monitor close the loop; opening the gripper triggers a retreat
plan back to the grasp configuration.

The plant is the ideal velocity integrator (commands are realized exactly at
the control rate); the sensor trace is generated, not contact-simulated, and
its internal transfer fraction is the episode's failure ground truth.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .admittance import (
    AdmittanceParams,
    Wrench,
    admittance_accel,
    integrate_velocity,
    transform_wrench,
)
from .config import DEFAULT_PD_GAINS, default_manipulator
from .detector.curves import LoadCurveParams, generate_handover_sequence, sample_curve_params
from .detector.network import NetworkParams
from .detector.runtime import RELEASE, ReleaseMonitor, ThresholdReleaseMonitor
from .kinematics import (
    ManipulatorModel,
    chain_frames,
    damped_pinv,
    jacobian_dot_from_frames,
    jacobian_from_frames,
    pose_from_frames,
)
from .safety import HumanState, SafetyParams, apparent_mass, link_constraints, optimal_alpha
from .trajectory import (
    PathParameter,
    QuinticTrajectory,
    advance_parameter,
    fit_cubic_spline,
    plan_quintic,
    sample_spline,
)

__all__ = [
    "Scenario",
    "EpisodeMetrics",
    "EpisodeLog",
    "EpisodeResult",
    "human_motion",
    "simulate_ft_sensor",
    "pd_controller",
    "position_ik",
    "run_handover",
    "make_batch_scenarios",
    "evaluate_batch",
    "write_episode_csv",
    "write_batch_csvs",
    "ARMS",
]

GRAVITY = 9.81
SPEED_TOLERANCE = 1e-6
PREMATURE_FRACTION = 0.90

SUCCESS = "success"
PREMATURE_DROP = "premature_drop"
FAILED_RELEASE = "failed_release"

# Architecture arms: name -> (controller, release detector).
ARMS = {
    "proposed": ("admittance", "network"),
    "baseline": ("pd", "threshold"),
}

_DEFAULT_GRASP_Q = (1.57, -1.0, 1.2, -1.77, -1.57, 0.0)
_DEFAULT_HAND = (0.65, -0.45, 0.55)


@dataclass(frozen=True)
class Scenario:
    """Everything that defines one reproducible episode."""

    object_mass: float = 1.0
    grasp_q: tuple = _DEFAULT_GRASP_Q
    handover_hand_pose: tuple = _DEFAULT_HAND
    hand_motion: tuple = ()          # ((t, x, y, z), ...) piecewise-linear waypoints
    receiver_engagement_time: float = 2.6
    load_curve: dict = field(default_factory=dict)
    disturbances: tuple = ()         # ((start, peak, width), ...)
    controller: str = "admittance"
    release: str = "network"
    seed: int = 0
    control_rate: float = 500.0
    sensor_rate: float = 500.0
    plan_duration: float = 2.0
    retreat_duration: float = 0.8
    release_timeout: float = 1.0
    episode_tail: float = 0.3
    detector_period: int = 10        # control cycles between classifier inferences
    pinv_damping: float = 1e-3       # damped-inverse regularization near singularities
    admittance: dict = field(default_factory=dict)
    safety: dict = field(default_factory=dict)
    pd_gains: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.control_rate <= 0.0 or self.sensor_rate <= 0.0:
            raise ValueError("rates must be positive")
        if self.control_rate != self.sensor_rate:
            raise ValueError("control_rate and sensor_rate must match (shared cycle)")
        if self.controller not in ("admittance", "pd"):
            raise ValueError(f"unknown controller {self.controller!r}")
        if self.release not in ("network", "threshold"):
            raise ValueError(f"unknown release mode {self.release!r}")
        if self.plan_duration <= 0.0 or self.retreat_duration < 0.0:
            raise ValueError("plan_duration must be positive, retreat_duration non-negative")
        if self.detector_period < 1:
            raise ValueError("detector_period must be >= 1")
        if self.pinv_damping < 0.0:
            raise ValueError("pinv_damping must be non-negative")
        object.__setattr__(self, "grasp_q", tuple(float(v) for v in self.grasp_q))
        object.__setattr__(self, "handover_hand_pose", tuple(float(v) for v in self.handover_hand_pose))
        object.__setattr__(self, "hand_motion", tuple(tuple(map(float, w)) for w in self.hand_motion))
        object.__setattr__(self, "disturbances", tuple(tuple(map(float, d)) for d in self.disturbances))

    def curve_params(self) -> LoadCurveParams:
        """Episode load-curve parameters (scenario fields plus overrides)."""
        kwargs = {
            "f_L0": self.object_mass * GRAVITY,
            "engagement_time": self.receiver_engagement_time,
            "disturbance_events": self.disturbances,
            "seed": self.seed,
        }
        kwargs.update(self.load_curve)
        return LoadCurveParams(**kwargs)

    def episode_duration(self) -> float:
        curve = self.curve_params()
        deadline = curve.schedule_end + self.release_timeout
        if curve.engagement_time >= deadline + self.retreat_duration + self.episode_tail:
            raise ValueError("engagement time must fall within the episode")
        return deadline + self.retreat_duration + self.episode_tail

    def to_dict(self) -> dict:
        return {
            "object_mass": self.object_mass,
            "grasp_q": list(self.grasp_q),
            "handover_hand_pose": list(self.handover_hand_pose),
            "hand_motion": [list(w) for w in self.hand_motion],
            "receiver_engagement_time": self.receiver_engagement_time,
            "load_curve": dict(self.load_curve),
            "disturbances": [list(d) for d in self.disturbances],
            "controller": self.controller,
            "release": self.release,
            "seed": self.seed,
            "control_rate": self.control_rate,
            "sensor_rate": self.sensor_rate,
            "plan_duration": self.plan_duration,
            "retreat_duration": self.retreat_duration,
            "release_timeout": self.release_timeout,
            "episode_tail": self.episode_tail,
            "detector_period": self.detector_period,
            "pinv_damping": self.pinv_damping,
            "admittance": dict(self.admittance),
            "safety": dict(self.safety),
            "pd_gains": dict(self.pd_gains),
        }

    @staticmethod
    def from_dict(data: dict) -> "Scenario":
        return Scenario(**data)


@dataclass(frozen=True)
class EpisodeMetrics:
    """Outcome and safety/timing aggregates of one episode."""

    outcome: str
    release_time: float              # nan when the gripper never opened
    release_fraction: float          # ground-truth transferred fraction at opening
    min_separation: float
    max_directed_speed: float
    safety_violations: int           # cycles where a link exceeded its speed limit
    infeasible_cycles: int           # cycles where the scaling problem was infeasible
    cycles: int
    cycle_time_mean: float           # wall-clock seconds, non-deterministic
    cycle_time_max: float


@dataclass
class EpisodeLog:
    """Per-cycle time series of one episode."""

    columns: list[str]
    data: np.ndarray
    binding: list[str]


@dataclass(frozen=True)
class EpisodeResult:
    scenario: Scenario
    metrics: EpisodeMetrics
    log: EpisodeLog


# ---------------------------------------------------------------------------
# scripted human hand

def _parse_waypoints(scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    if not scenario.hand_motion:
        return np.array([0.0]), np.array([scenario.handover_hand_pose], dtype=float)
    rows = np.asarray(scenario.hand_motion, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != 4:
        raise ValueError("hand_motion waypoints must be (t, x, y, z) rows")
    order = np.argsort(rows[:, 0])
    return rows[order, 0], rows[order, 1:]


def _hand_state(times: np.ndarray, points: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    if len(times) == 1 or t < times[0]:
        return points[0], np.zeros(3)
    if t >= times[-1]:
        return points[-1], np.zeros(3)
    idx = int(np.searchsorted(times, t, side="right")) - 1
    dt = times[idx + 1] - times[idx]
    vel = (points[idx + 1] - points[idx]) / dt
    return points[idx] + vel * (t - times[idx]), vel


def human_motion(scenario: Scenario, t: float) -> HumanState:
    """Hand position and exact velocity of the piecewise-linear profile at t."""
    times, points = _parse_waypoints(scenario)
    pos, vel = _hand_state(times, points, t)
    return HumanState(pos, vel)


# ---------------------------------------------------------------------------
# simulated wrist force/torque sensor

class EpisodeSensor:
    """Schedule-driven sensor trace for one episode.

    While the gripper holds the object the reading is the generated transfer
    curve (load, disturbances, noise); after opening, the load and impact
    terms vanish and only sensor noise remains.
    """

    def __init__(self, curve: LoadCurveParams, duration: float, rate: float):
        self.rate = float(rate)
        self.sequence = generate_handover_sequence(curve, duration, rate)

    def reading(self, cycle: int, gripper_open: bool) -> np.ndarray:
        if gripper_open:
            return self.sequence.noise[cycle]
        return self.sequence.wrench[cycle]

    def fraction(self, cycle: int) -> float:
        return float(self.sequence.fraction[cycle])


def simulate_ft_sensor(sensor: EpisodeSensor, t: float, gripper_open: bool = False) -> Wrench:
    """Sensor wrench at time t (tool frame)."""
    cycle = min(int(round(t * sensor.rate)), len(sensor.sequence) - 1)
    return Wrench.from_array(sensor.reading(cycle, gripper_open))


# ---------------------------------------------------------------------------
# controllers

def pd_controller(
    q_des: np.ndarray,
    q_dot_des: np.ndarray,
    q: np.ndarray,
    q_dot: np.ndarray,
    gains: dict | None = None,
) -> np.ndarray:
    """Stiff velocity-resolved PD tracking; ignores external forces."""
    gains = gains or DEFAULT_PD_GAINS
    kp, kd = float(gains["kp"]), float(gains["kd"])
    if kp <= 0.0 or kd < 0.0:
        raise ValueError("PD gains must be positive (kd may be zero)")
    return q_dot_des + kp * (np.asarray(q_des) - np.asarray(q)) + kd * (np.asarray(q_dot_des) - np.asarray(q_dot))


_QUINTIC_PEAK_VEL = 1.875       # max of the normalized quintic rate
_QUINTIC_PEAK_ACC = 5.7735      # max of the normalized quintic acceleration


def limit_respecting_duration(model: ManipulatorModel, delta_q: np.ndarray, requested: float) -> float:
    """Stretch a quintic plan duration until it fits the joint-rate limits.

    A plan whose nominal profile grazes the velocity or acceleration boxes
    forces the safety layer into infeasible braking as soon as the tracking
    controller adds its correction on top, so the nominal profile is kept
    10% inside the velocity box and a factor 2 inside the acceleration box.
    """
    delta = np.abs(np.asarray(delta_q, dtype=float))
    t_vel = _QUINTIC_PEAK_VEL * float(np.max(delta / model.q_dot_max))
    t_acc = math.sqrt(2.0 * _QUINTIC_PEAK_ACC * float(np.max(delta / model.q_ddot_max)))
    return max(requested, 1.1 * t_vel, t_acc)


def _plan_stop(q: np.ndarray, q_dot: np.ndarray, model: ManipulatorModel, rate: float):
    """Constant-deceleration ramp to rest, splined like any other segment.

    Keeps the retreat replan C1: without it, opening the gripper mid-motion
    would snap the reference velocity to zero in one cycle.
    """
    speed = np.abs(q_dot)
    T = float(np.max(speed / (0.5 * model.q_ddot_max)))
    T = max(T, 4.0 / rate)
    count = max(4, int(round(T * rate)))
    times = np.linspace(0.0, T, count)
    decel = q_dot / T
    q_s = q + np.outer(times, q_dot) - 0.5 * np.outer(times**2, decel)
    qd_s = q_dot - np.outer(times, decel)
    qdd_s = np.tile(-decel, (count, 1))
    seg = QuinticTrajectory(
        start_q=q, end_q=q_s[-1], duration=T, sample_rate=rate,
        times=times, q=q_s, q_dot=qd_s, q_ddot=qdd_s,
    )
    return fit_cubic_spline(seg), T


def position_ik(
    model: ManipulatorModel,
    target: np.ndarray,
    q0: np.ndarray,
    tol: float = 1e-9,
    max_iters: int = 300,
) -> np.ndarray:
    """Damped least-squares position-only IK from seed q0 (deterministic)."""
    target = np.asarray(target, dtype=float).reshape(3)
    q = model.check_q(q0).copy()
    residual = math.inf
    for _ in range(max_iters):
        frames = chain_frames(model, q)
        pose = pose_from_frames(model, frames)
        err = target - pose.position
        residual = float(np.linalg.norm(err))
        if residual < tol:
            return q
        J_pos = jacobian_from_frames(model, frames)[:3]
        q = q + np.clip(damped_pinv(J_pos, 1e-3) @ err, -0.2, 0.2)
    raise ValueError(
        f"position IK did not converge to {target.tolist()} "
        f"(residual {residual:.3e} m); hand pose may be unreachable"
    )


# ---------------------------------------------------------------------------
# episode loop

LOG_COLUMNS = (
    ["t"]
    + [f"q{i}" for i in range(6)]
    + [f"qd{i}" for i in range(6)]
    + [f"u{i}" for i in range(6)]
    + ["x", "y", "z"]
    + ["Fx", "Fy", "Fz", "Tx", "Ty", "Tz"]
    + ["s", "alpha", "separation", "ssm", "pfl", "v_limit", "directed_max", "det_out", "gripper", "feasible"]
)


def run_handover(
    scenario: Scenario,
    model: ManipulatorModel | None = None,
    network: NetworkParams | None = None,
) -> EpisodeResult:
    """Simulate one episode; deterministic for a fixed scenario."""
    if scenario.release == "network" and network is None:
        raise ValueError("release='network' requires trained network weights")
    if model is None:
        model = default_manipulator(payload_mass=scenario.object_mass)
    n = model.joint_count
    safety_params = SafetyParams(**scenario.safety)
    adm_params = AdmittanceParams.diagonal(**scenario.admittance)
    pd_gains = {**DEFAULT_PD_GAINS, **scenario.pd_gains}
    m_r = apparent_mass(model)

    curve = scenario.curve_params()
    duration = scenario.episode_duration()
    T_r = 1.0 / scenario.control_rate
    max_cycles = int(round(duration * scenario.control_rate))
    sensor = EpisodeSensor(curve, duration + T_r, scenario.control_rate)
    hand_times, hand_points = _parse_waypoints(scenario)

    grasp_q = np.asarray(scenario.grasp_q, dtype=float)
    end_q = position_ik(model, scenario.handover_hand_pose, grasp_q, tol=1e-8)
    plan_T = limit_respecting_duration(model, end_q - grasp_q, scenario.plan_duration)
    spline = fit_cubic_spline(plan_quintic(grasp_q, end_q, plan_T, scenario.control_rate))
    path = PathParameter(s=spline.start_time, s_dot=1.0, t_final=spline.end_time)

    if scenario.release == "network":
        monitor: ReleaseMonitor | ThresholdReleaseMonitor = ReleaseMonitor(network)
    else:
        monitor = ThresholdReleaseMonitor()

    q = grasp_q.copy()
    q_dot_meas = np.zeros(n)
    alpha = 1.0
    gripper_open = False
    pending_retreat = False
    release_time = math.nan
    release_fraction = math.nan
    deadline = curve.schedule_end + scenario.release_timeout
    end_time = duration

    data = np.empty((max_cycles, len(LOG_COLUMNS)))
    binding_log: list[str] = []
    cycle_times = np.empty(max_cycles)
    violations = 0
    infeasible = 0
    k = 0

    while k < max_cycles:
        t = k * T_r
        if t >= end_time:
            break
        tic = time.perf_counter()

        hand_pos, hand_vel = _hand_state(hand_times, hand_points, t)
        raw = sensor.reading(k, gripper_open)

        det_out = math.nan
        if not gripper_open:
            decision = None
            if isinstance(monitor, ReleaseMonitor):
                run_inference = k % scenario.detector_period == 0
                decision = monitor.step(raw, infer=run_inference)
                if run_inference and len(monitor) >= monitor.window:
                    det_out = monitor.last_probability
            else:
                decision = monitor.push(raw)
                if monitor.f_L0:
                    det_out = abs(raw[2]) / monitor.f_L0
            if decision == RELEASE:
                gripper_open = True
                release_time = t
                release_fraction = sensor.fraction(k)
                stop_T = 0.0
                retreat_T = 0.0
                if scenario.retreat_duration > 0.0:
                    retreat_T = limit_respecting_duration(model, grasp_q - q, scenario.retreat_duration)
                    if float(np.max(np.abs(q_dot_meas))) > 0.05:
                        # brake to rest first so the retreat reference starts C1
                        spline, stop_T = _plan_stop(q, q_dot_meas, model, scenario.control_rate)
                        pending_retreat = True
                    else:
                        spline = fit_cubic_spline(plan_quintic(q, grasp_q, retreat_T, scenario.control_rate))
                    path = PathParameter(s=spline.start_time, s_dot=1.0, t_final=spline.end_time)
                end_time = min(end_time, t + stop_T + retreat_T + scenario.episode_tail)
            elif t > deadline:
                end_time = t  # receiver gave up waiting; episode is a failed release
        if pending_retreat and path.s >= spline.end_time - 1e-9:
            retreat_T = limit_respecting_duration(model, grasp_q - q, scenario.retreat_duration)
            spline = fit_cubic_spline(plan_quintic(q, grasp_q, retreat_T, scenario.control_rate))
            path = PathParameter(s=spline.start_time, s_dot=1.0, t_final=spline.end_time)
            pending_retreat = False
        # advance the timing law with the previous cycle's scaling factor
        path = advance_parameter(path, alpha, T_r)
        q_des, qd_des, qdd_des = sample_spline(spline, path.s)

        ref_frames = chain_frames(model, q_des)
        x_des = pose_from_frames(model, ref_frames)
        J_ref = jacobian_from_frames(model, ref_frames)
        Jd_ref = jacobian_dot_from_frames(model, ref_frames, qd_des)
        x_dot_des = J_ref @ qd_des
        x_ddot_des = J_ref @ qdd_des + Jd_ref @ qd_des

        cur_frames = chain_frames(model, q)
        x_cur = pose_from_frames(model, cur_frames)
        J_cur = jacobian_from_frames(model, cur_frames)
        x_dot = J_cur @ q_dot_meas

        wrench = transform_wrench(x_cur.rotation, Wrench.from_array(raw), adm_params.force_weight)
        if scenario.controller == "admittance":
            x_ddot_adm = admittance_accel(adm_params, x_des, x_dot_des, x_ddot_des, x_cur, x_dot, wrench)
            x_dot_adm = integrate_velocity(x_ddot_adm, x_dot, T_r)
            qd_adm = damped_pinv(J_cur, scenario.pinv_damping) @ x_dot_adm
        else:
            qd_adm = pd_controller(q_des, qd_des, q, q_dot_meas, pd_gains)

        human = HumanState(hand_pos, hand_vel)
        lc = link_constraints(model, q, human, safety_params, m_r, frames=cur_frames)
        result = optimal_alpha(
            qd_adm, q_dot_meas, lc.rows, lc.v_max,
            model.q_dot_min, model.q_dot_max, model.q_ddot_min, model.q_ddot_max,
            T_r,
        )
        alpha = result.alpha
        u = alpha * qd_adm
        directed = lc.rows @ u
        directed_max = float(np.max(directed))
        if np.any(directed > lc.v_max + SPEED_TOLERANCE):
            violations += 1
        if not result.feasible:
            infeasible += 1

        row = data[k]
        row[0] = t
        row[1:7] = q
        row[7:13] = q_dot_meas
        row[13:19] = u
        row[19:22] = x_cur.position
        row[22:28] = raw
        row[28] = path.s
        row[29] = alpha
        row[30] = float(np.min(lc.separation))
        row[31] = float(np.min(lc.ssm))
        row[32] = lc.pfl
        row[33] = float(np.min(lc.v_max))
        row[34] = directed_max
        row[35] = det_out
        row[36] = 1.0 if gripper_open else 0.0
        row[37] = 1.0 if result.feasible else 0.0
        binding_log.append(result.binding_constraint)

        q = q + u * T_r
        q_dot_meas = u
        cycle_times[k] = time.perf_counter() - tic
        k += 1

    data = data[:k]
    cycle_times = cycle_times[:k]
    if math.isnan(release_time):
        outcome = FAILED_RELEASE
    elif release_fraction < PREMATURE_FRACTION:
        outcome = PREMATURE_DROP
    else:
        outcome = SUCCESS

    sep_col = data[:, 30]
    metrics = EpisodeMetrics(
        outcome=outcome,
        release_time=release_time,
        release_fraction=release_fraction,
        min_separation=float(np.min(sep_col)) if k else math.nan,
        max_directed_speed=float(np.max(data[:, 34])) if k else math.nan,
        safety_violations=violations,
        infeasible_cycles=infeasible,
        cycles=k,
        cycle_time_mean=float(np.mean(cycle_times)) if k else math.nan,
        cycle_time_max=float(np.max(cycle_times)) if k else math.nan,
    )
    log = EpisodeLog(columns=list(LOG_COLUMNS), data=data, binding=binding_log)
    return EpisodeResult(scenario=scenario, metrics=metrics, log=log)


# ---------------------------------------------------------------------------
# batch evaluation

def make_batch_scenarios(
    base: Scenario,
    count: int,
    seed: int = 0,
    disturbed: bool = True,
) -> list[Scenario]:
    """Randomized episode family around a base scenario.

    Varies object weight, transfer schedule, hand placement, and hand
    approach motion; disturbance pulses follow the same family used for
    training-data augmentation.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    scenarios = []
    base_hand = np.asarray(base.handover_hand_pose, dtype=float)
    engagement_lo = base.plan_duration + 0.4
    for i in range(count):
        curve = sample_curve_params(
            rng,
            disturbed=disturbed,
            engagement_range=(engagement_lo, engagement_lo + 0.5),
        )
        hand = base_hand + rng.uniform(-0.08, 0.08, size=3)
        motion: tuple = ()
        if rng.random() < 0.5:
            # hand reaches in from up to 0.4 m away, arriving before engagement;
            # ease-in/ease-out segments keep the velocity steps small
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            start = hand + direction * rng.uniform(0.2, 0.4)
            arrive = max(curve.engagement_time - rng.uniform(0.2, 0.4), 0.4)
            span = hand - start
            motion = (
                (0.0, *start),
                (0.30 * arrive, *(start + 0.15 * span)),
                (0.70 * arrive, *(start + 0.85 * span)),
                (arrive, *hand),
            )
        scenarios.append(
            replace(
                base,
                object_mass=curve.f_L0 / GRAVITY,
                handover_hand_pose=tuple(hand),
                hand_motion=motion,
                receiver_engagement_time=curve.engagement_time,
                load_curve={
                    "f_L0": curve.f_L0,
                    "f_G0": curve.f_G0,
                    "transfer_duration": curve.transfer_duration,
                    "residual_grip": curve.residual_grip,
                    "dwell_after_transfer": curve.dwell_after_transfer,
                    "pull_magnitude": curve.pull_magnitude,
                    "pull_duration": curve.pull_duration,
                    "noise_sigma": curve.noise_sigma,
                },
                disturbances=curve.disturbance_events,
                seed=int(rng.integers(0, 2**31 - 1)),
            )
        )
    return scenarios


@dataclass(frozen=True)
class ArmSummary:
    arm: str
    episodes: int
    successes: int
    premature_drops: int
    failed_releases: int
    failures: int
    mean_release_latency: float      # seconds from pull onset to gripper opening
    safety_violations: int


@dataclass(frozen=True)
class BatchResult:
    episodes: list[tuple[str, int, EpisodeMetrics]]   # (arm, scenario index, metrics)
    summaries: list[ArmSummary]


def evaluate_batch(
    scenarios: list[Scenario],
    arms: dict[str, tuple[str, str]] | None = None,
    model: ManipulatorModel | None = None,
    network: NetworkParams | None = None,
) -> BatchResult:
    """Run every scenario under each architecture arm on matched seeds."""
    if not scenarios:
        raise ValueError("need at least one scenario")
    arms = arms or ARMS
    episodes: list[tuple[str, int, EpisodeMetrics]] = []
    summaries = []
    for arm_name, (controller, release) in arms.items():
        latencies = []
        successes = premature = failed = violations = 0
        for idx, scenario in enumerate(scenarios):
            run = replace(scenario, controller=controller, release=release)
            result = run_handover(run, model=model, network=network)
            m = result.metrics
            episodes.append((arm_name, idx, m))
            violations += m.safety_violations
            if m.outcome == SUCCESS:
                successes += 1
                latencies.append(m.release_time - run.curve_params().pull_onset)
            elif m.outcome == PREMATURE_DROP:
                premature += 1
            else:
                failed += 1
        summaries.append(
            ArmSummary(
                arm=arm_name,
                episodes=len(scenarios),
                successes=successes,
                premature_drops=premature,
                failed_releases=failed,
                failures=premature + failed,
                mean_release_latency=float(np.mean(latencies)) if latencies else math.nan,
                safety_violations=violations,
            )
        )
    return BatchResult(episodes=episodes, summaries=summaries)


# ---------------------------------------------------------------------------
# CSV output (deterministic: no wall-clock columns)

def write_episode_csv(result: EpisodeResult, path: str | Path) -> None:
    log = result.log
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(log.columns + ["binding"])
        for row, tag in zip(log.data, log.binding):
            writer.writerow([f"{v:.9g}" for v in row] + [tag])


def write_batch_csvs(batch: BatchResult, episodes_path: str | Path, summary_path: str | Path) -> None:
    with open(episodes_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["arm", "episode", "outcome", "release_time", "release_fraction",
             "min_separation", "max_directed_speed", "safety_violations"]
        )
        for arm, idx, m in batch.episodes:
            writer.writerow(
                [arm, idx, m.outcome, f"{m.release_time:.9g}", f"{m.release_fraction:.9g}",
                 f"{m.min_separation:.9g}", f"{m.max_directed_speed:.9g}", m.safety_violations]
            )
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["arm", "episodes", "successes", "premature_drops", "failed_releases",
             "failures", "mean_release_latency", "safety_violations"]
        )
        for s in batch.summaries:
            writer.writerow(
                [s.arm, s.episodes, s.successes, s.premature_drops, s.failed_releases,
                 s.failures, f"{s.mean_release_latency:.9g}", s.safety_violations]
            )
