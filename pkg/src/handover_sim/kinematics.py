"""Serial-manipulator kinematics: FK, Jacobian, Jacobian derivative, link points.

All quantities are expressed in the robot base frame. Joints are revolute and
follow the standard Denavit-Hartenberg convention; each joint transform is

    A_i(q_i) = RotZ(q_i + theta_off_i) @ TransZ(d_i) @ TransX(a_i) @ RotX(alpha_i)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ManipulatorModel",
    "JointState",
    "Pose",
    "SingularConfigurationError",
    "forward_kinematics",
    "jacobian",
    "jacobian_dot",
    "link_positions",
    "damped_pinv",
    "chain_frames",
    "pose_from_frames",
    "jacobian_from_frames",
    "jacobian_dot_from_frames",
    "load_manipulator",
]

ROTATION_TOL = 1e-9


class SingularConfigurationError(RuntimeError):
    """Raised when an exact Jacobian inverse is requested at a singularity."""


def cross_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cross product of (..., 3) arrays (np.cross without its overhead)."""
    shape = a.shape if a.shape == b.shape else np.broadcast_shapes(a.shape, b.shape)
    out = np.empty(shape)
    out[..., 0] = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


def _check_rotation(rotation: np.ndarray, tol: float = ROTATION_TOL) -> None:
    rotation = np.asarray(rotation, dtype=float)
    if rotation.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {rotation.shape}")
    if not np.allclose(rotation @ rotation.T, np.eye(3), atol=tol):
        raise ValueError("rotation is not orthonormal")
    if abs(np.linalg.det(rotation) - 1.0) > tol:
        raise ValueError("rotation determinant is not +1")


@dataclass(frozen=True)
class Pose:
    """Cartesian pose: position in metres plus a unit rotation matrix."""

    position: np.ndarray
    rotation: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        _check_rotation(self.rotation)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.eye(3))


@dataclass(frozen=True)
class JointState:
    """Joint-space state (q, q_dot) at a given time."""

    q: np.ndarray
    q_dot: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).ravel())
        object.__setattr__(self, "q_dot", np.asarray(self.q_dot, dtype=float).ravel())
        if self.q.shape != self.q_dot.shape:
            raise ValueError("q and q_dot must have equal length")


@dataclass(frozen=True)
class ManipulatorModel:
    """Kinematic description and motion limits of an n-DoF serial arm.

    dh_rows holds one (link_length a, link_twist alpha, link_offset d,
    joint_angle_offset theta) tuple per joint. tool_transform is a 4x4 rigid
    transform from the last joint frame to the tool/sensor point.
    """

    joint_count: int
    dh_rows: np.ndarray
    q_dot_min: np.ndarray
    q_dot_max: np.ndarray
    q_ddot_min: np.ndarray
    q_ddot_max: np.ndarray
    link_masses: np.ndarray
    payload_mass: float = 0.0
    tool_transform: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self) -> None:
        n = int(self.joint_count)
        if n < 1:
            raise ValueError("joint_count must be >= 1")
        object.__setattr__(self, "joint_count", n)
        object.__setattr__(self, "dh_rows", np.asarray(self.dh_rows, dtype=float).reshape(n, 4))
        for name in ("q_dot_min", "q_dot_max", "q_ddot_min", "q_ddot_max", "link_masses"):
            vec = np.asarray(getattr(self, name), dtype=float).ravel()
            if vec.shape != (n,):
                raise ValueError(f"{name} must have length {n}, got {vec.shape}")
            object.__setattr__(self, name, vec)
        if not (np.all(self.q_dot_min < 0.0) and np.all(self.q_dot_max > 0.0)):
            raise ValueError("velocity bounds must satisfy q_dot_min < 0 < q_dot_max")
        if not (np.all(self.q_ddot_min < 0.0) and np.all(self.q_ddot_max > 0.0)):
            raise ValueError("acceleration bounds must satisfy q_ddot_min < 0 < q_ddot_max")
        if np.any(self.link_masses < 0.0):
            raise ValueError("link masses must be non-negative")
        if self.payload_mass < 0.0:
            raise ValueError("payload mass must be non-negative")
        tool = np.asarray(self.tool_transform, dtype=float).reshape(4, 4)
        _check_rotation(tool[:3, :3])
        object.__setattr__(self, "tool_transform", tool)
        # Constant per-joint terms, precomputed for the control-rate FK path.
        object.__setattr__(self, "_cos_twist", np.cos(self.dh_rows[:, 1]))
        object.__setattr__(self, "_sin_twist", np.sin(self.dh_rows[:, 1]))

    def check_q(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float).ravel()
        if q.shape != (self.joint_count,):
            raise ValueError(f"expected {self.joint_count} joint values, got {q.shape}")
        return q

    def to_dict(self) -> dict:
        return {
            "joint_count": self.joint_count,
            "dh_rows": self.dh_rows.tolist(),
            "q_dot_min": self.q_dot_min.tolist(),
            "q_dot_max": self.q_dot_max.tolist(),
            "q_ddot_min": self.q_ddot_min.tolist(),
            "q_ddot_max": self.q_ddot_max.tolist(),
            "link_masses": self.link_masses.tolist(),
            "payload_mass": self.payload_mass,
            "tool_transform": self.tool_transform.tolist(),
        }

    @staticmethod
    def from_dict(data: dict) -> "ManipulatorModel":
        kwargs = dict(data)
        if "tool_transform" not in kwargs:
            kwargs["tool_transform"] = np.eye(4)
        return ManipulatorModel(**kwargs)


def load_manipulator(path: str | Path) -> ManipulatorModel:
    """Load a manipulator description from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        return ManipulatorModel.from_dict(json.load(fh))


def chain_frames(model: ManipulatorModel, q: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cumulative chain geometry for q.

    Returns (origins, axes, rot_n): origins is (n+1, 3) with the base origin
    first and the last joint-frame origin last (no tool offset); axes is
    (n, 3) where axes[j] is the rotation axis of joint j+1 (frame-j z axis);
    rot_n is the last joint frame's rotation matrix.
    """
    q = model.check_q(q)
    n = model.joint_count
    origins = np.zeros((n + 1, 3))
    axes = np.empty((n, 3))
    theta = q + model.dh_rows[:, 3]
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = model._cos_twist, model._sin_twist
    a, d = model.dh_rows[:, 0], model.dh_rows[:, 2]
    # All per-joint transforms at once, then one sequential matrix chain.
    A = np.zeros((n, 4, 4))
    A[:, 0, 0] = ct; A[:, 0, 1] = -st * ca; A[:, 0, 2] = st * sa; A[:, 0, 3] = a * ct
    A[:, 1, 0] = st; A[:, 1, 1] = ct * ca; A[:, 1, 2] = -ct * sa; A[:, 1, 3] = a * st
    A[:, 2, 1] = sa; A[:, 2, 2] = ca; A[:, 2, 3] = d
    A[:, 3, 3] = 1.0
    T = np.eye(4)
    for j in range(n):
        axes[j] = T[:3, 2]
        T = T @ A[j]
        origins[j + 1] = T[:3, 3]
    return origins, axes, T[:3, :3]


Frames = tuple[np.ndarray, np.ndarray, np.ndarray]


def pose_from_frames(model: ManipulatorModel, frames: Frames) -> Pose:
    # Rotation is a product of exact DH rotations: skip re-validation.
    origins, _, rot_n = frames
    tool = model.tool_transform
    pose = object.__new__(Pose)
    object.__setattr__(pose, "position", origins[-1] + rot_n @ tool[:3, 3])
    object.__setattr__(pose, "rotation", rot_n @ tool[:3, :3])
    return pose


def forward_kinematics(model: ManipulatorModel, q: np.ndarray) -> Pose:
    """End-effector pose (tool transform included) for joint vector q."""
    return pose_from_frames(model, chain_frames(model, q))


def link_positions(model: ManipulatorModel, q: np.ndarray) -> np.ndarray:
    """Base-frame origin of every link frame plus the end point, (n+1, 3).

    The first row is always the fixed base origin; the last row is the final
    joint-frame origin (tool offset excluded), each rigidly attached to its
    link.
    """
    origins, _, _ = chain_frames(model, q)
    return origins


def jacobian_from_frames(model: ManipulatorModel, frames: Frames) -> np.ndarray:
    origins, axes, rot_n = frames
    p_tool = origins[-1] + rot_n @ model.tool_transform[:3, 3]
    J = np.empty((6, model.joint_count))
    J[:3] = cross_rows(axes, p_tool - origins[:-1]).T
    J[3:] = axes.T
    return J


def jacobian(model: ManipulatorModel, q: np.ndarray) -> np.ndarray:
    """Geometric Jacobian (6 x n) at the tool point, base frame.

    Rows 0-2 map joint rates to linear velocity (m/s), rows 3-5 to angular
    velocity (rad/s).
    """
    return jacobian_from_frames(model, chain_frames(model, q))


def jacobian_dot_from_frames(model: ManipulatorModel, frames: Frames, q_dot: np.ndarray) -> np.ndarray:
    q_dot = np.asarray(q_dot, dtype=float).ravel()
    if q_dot.shape != (model.joint_count,):
        raise ValueError(f"expected {model.joint_count} joint rates, got {q_dot.shape}")
    origins, axes, rot_n = frames
    n = model.joint_count
    p_tool = origins[-1] + rot_n @ model.tool_transform[:3, 3]

    # Propagate frame angular velocities and origin velocities down the chain:
    # both are cumulative sums of per-joint contributions.
    omega = np.zeros((n + 1, 3))
    np.cumsum(q_dot[:, None] * axes, axis=0, out=omega[1:])
    origin_vel = np.zeros((n + 1, 3))
    np.cumsum(cross_rows(omega[1:], origins[1:] - origins[:-1]), axis=0, out=origin_vel[1:])
    tool_vel = origin_vel[n] + cross_rows(omega[n], p_tool - origins[n])

    axes_dot = cross_rows(omega[:-1], axes)
    Jd = np.empty((6, n))
    Jd[:3] = (cross_rows(axes_dot, p_tool - origins[:-1]) + cross_rows(axes, tool_vel - origin_vel[:-1])).T
    Jd[3:] = axes_dot.T
    return Jd


def jacobian_dot(model: ManipulatorModel, q: np.ndarray, q_dot: np.ndarray) -> np.ndarray:
    """Time derivative of the geometric Jacobian along q_dot (6 x n)."""
    return jacobian_dot_from_frames(model, chain_frames(model, q), q_dot)


def damped_pinv(J: np.ndarray, lam: float = 1e-3) -> np.ndarray:
    """Damped least-squares inverse J^T (J J^T + lam^2 I)^-1 of a 6 x n Jacobian.

    lam = 0 demands a well-conditioned square Jacobian and returns the exact
    inverse; a singular configuration then raises SingularConfigurationError.
    """
    if lam < 0.0:
        raise ValueError("damping must be non-negative")
    J = np.asarray(J, dtype=float)
    A = J @ J.T
    m = A.shape[0]
    A.flat[:: m + 1] += lam * lam
    if lam == 0.0:
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > 1e12:
            raise SingularConfigurationError(
                f"Jacobian is singular (cond(JJ^T) = {cond:.3e}); use lam > 0"
            )
    return np.linalg.solve(A, J).T
