"""Joint-space planning and the path-velocity decomposition.

A quintic point-to-point plan is resampled onto cubic splines over position,
velocity, and acceleration. A scalar path parameter s (time-valued abscissa)
then indexes the splines, so the timing law can be scaled online without
changing the geometric path.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .kinematics import ManipulatorModel, Pose, forward_kinematics, jacobian, jacobian_dot

__all__ = [
    "QuinticTrajectory",
    "SplineTrajectory",
    "PathParameter",
    "plan_quintic",
    "fit_cubic_spline",
    "sample_spline",
    "advance_parameter",
    "to_cartesian",
    "write_trajectory_csv",
]


@dataclass(frozen=True)
class QuinticTrajectory:
    """Sampled per-joint quintic with zero boundary velocity and acceleration."""

    start_q: np.ndarray
    end_q: np.ndarray
    duration: float
    sample_rate: float
    times: np.ndarray
    q: np.ndarray
    q_dot: np.ndarray
    q_ddot: np.ndarray


@dataclass(frozen=True)
class SplineTrajectory:
    """Natural cubic splines interpolating (q, q_dot, q_ddot) knot samples.

    The three blocks are splined independently over the same knots; evaluation
    is clamped to [start_time, end_time].
    """

    knot_times: np.ndarray
    joint_count: int
    _stacked: CubicSpline

    @property
    def start_time(self) -> float:
        return float(self.knot_times[0])

    @property
    def end_time(self) -> float:
        return float(self.knot_times[-1])


@dataclass(frozen=True)
class PathParameter:
    """Curvilinear abscissa s (time-valued) and its current rate."""

    s: float
    s_dot: float
    t_final: float


def plan_quintic(
    start_q: np.ndarray,
    end_q: np.ndarray,
    duration: float,
    sample_rate: float,
) -> QuinticTrajectory:
    """Plan a per-joint quintic from start_q to end_q.

    Uses the normalized profile sigma(tau) = 6 tau^5 - 15 tau^4 + 10 tau^3, so
    velocity and acceleration vanish at both endpoints.
    """
    if duration <= 0.0:
        raise ValueError("duration must be positive")
    if sample_rate <= 0.0:
        raise ValueError("sample_rate must be positive")
    start_q = np.asarray(start_q, dtype=float).ravel()
    end_q = np.asarray(end_q, dtype=float).ravel()
    if start_q.shape != end_q.shape:
        raise ValueError("start_q and end_q must have equal length")

    count = max(2, int(round(duration * sample_rate)))
    times = np.linspace(0.0, duration, count)
    tau = times / duration
    sigma = 6.0 * tau**5 - 15.0 * tau**4 + 10.0 * tau**3
    sigma_d = (30.0 * tau**4 - 60.0 * tau**3 + 30.0 * tau**2) / duration
    sigma_dd = (120.0 * tau**3 - 180.0 * tau**2 + 60.0 * tau) / duration**2

    delta = end_q - start_q
    return QuinticTrajectory(
        start_q=start_q,
        end_q=end_q,
        duration=float(duration),
        sample_rate=float(sample_rate),
        times=times,
        q=start_q + np.outer(sigma, delta),
        q_dot=np.outer(sigma_d, delta),
        q_ddot=np.outer(sigma_dd, delta),
    )


def fit_cubic_spline(traj: QuinticTrajectory) -> SplineTrajectory:
    """Interpolate the plan's (q, q_dot, q_ddot) samples with natural cubics."""
    if len(traj.times) < 4:
        raise ValueError(f"need at least 4 samples to fit a spline, got {len(traj.times)}")
    stacked = np.hstack([traj.q, traj.q_dot, traj.q_ddot])
    spline = CubicSpline(traj.times, stacked, axis=0, bc_type="natural")
    return SplineTrajectory(
        knot_times=traj.times.copy(),
        joint_count=traj.q.shape[1],
        _stacked=spline,
    )


def sample_spline(spline: SplineTrajectory, s: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate (q_des, q_dot_des, q_ddot_des) at abscissa s, clamped to the knots."""
    s = min(max(float(s), spline.start_time), spline.end_time)
    # Direct piecewise-polynomial evaluation (identical to the scipy call,
    # without its per-call overhead at the control rate).
    pp = spline._stacked
    idx = min(int(np.searchsorted(pp.x, s, side="right")) - 1, pp.x.size - 2)
    idx = max(idx, 0)
    dx = s - pp.x[idx]
    c = pp.c[:, idx]
    values = ((c[0] * dx + c[1]) * dx + c[2]) * dx + c[3]
    n = spline.joint_count
    return values[:n], values[n : 2 * n], values[2 * n :]


def advance_parameter(p: PathParameter, alpha: float, T_r: float) -> PathParameter:
    """Advance s by one control cycle under the linear time law s' = s + alpha T_r."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if T_r <= 0.0:
        raise ValueError("T_r must be positive")
    return PathParameter(s=min(p.t_final, p.s + alpha * T_r), s_dot=alpha, t_final=p.t_final)


def to_cartesian(
    model: ManipulatorModel,
    q_des: np.ndarray,
    q_dot_des: np.ndarray,
    q_ddot_des: np.ndarray,
) -> tuple[Pose, np.ndarray, np.ndarray]:
    """Map joint references to Cartesian pose, velocity, and acceleration.

    x = FK(q), x_dot = J q_dot, x_ddot = J q_ddot + J_dot q_dot.
    """
    q_des = model.check_q(q_des)
    q_dot_des = model.check_q(q_dot_des)
    q_ddot_des = model.check_q(q_ddot_des)
    pose = forward_kinematics(model, q_des)
    J = jacobian(model, q_des)
    Jd = jacobian_dot(model, q_des, q_dot_des)
    return pose, J @ q_dot_des, J @ q_ddot_des + Jd @ q_dot_des


def write_trajectory_csv(traj: QuinticTrajectory, path: str | Path) -> None:
    """Export the sampled plan as CSV rows (t, q.., q_dot.., q_ddot..)."""
    n = traj.q.shape[1]
    header = (
        ["t"]
        + [f"q{i}" for i in range(n)]
        + [f"qd{i}" for i in range(n)]
        + [f"qdd{i}" for i in range(n)]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(len(traj.times)):
            row = [traj.times[k], *traj.q[k], *traj.q_dot[k], *traj.q_ddot[k]]
            writer.writerow([f"{v:.12g}" for v in row])
