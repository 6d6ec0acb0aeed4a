"""Cartesian admittance control.

The reference trajectory is rendered compliant by virtual mass-damper-spring
dynamics driven by the measured external wrench:

    x_ddot_adm = M^-1 (D (x_dot_des - x_dot) + K err(x_des, x) - F_ext) + x_ddot_des

followed by one explicit Euler step to a velocity command and a mapping to
joint space through the (damped) Jacobian inverse. Positive external wrench
pushes the robot away from its reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinematics import ManipulatorModel, Pose, damped_pinv, jacobian

__all__ = [
    "AdmittanceParams",
    "Wrench",
    "pose_error",
    "admittance_accel",
    "integrate_velocity",
    "cartesian_to_joint",
    "transform_wrench",
    "rotation_log",
]

_SYM_TOL = 1e-9


def _check_symmetric_psd(name: str, mat: np.ndarray, strict: bool) -> np.ndarray:
    mat = np.asarray(mat, dtype=float).reshape(6, 6)
    if not np.allclose(mat, mat.T, atol=_SYM_TOL):
        raise ValueError(f"{name} must be symmetric")
    eigs = np.linalg.eigvalsh(mat)
    if strict and np.min(eigs) <= 0.0:
        raise ValueError(f"{name} must be positive definite (min eig {np.min(eigs):.3e})")
    if not strict and np.min(eigs) < -_SYM_TOL:
        raise ValueError(f"{name} must be positive semi-definite (min eig {np.min(eigs):.3e})")
    return mat


@dataclass(frozen=True)
class Wrench:
    """External force (N) and torque (N m) as read by the wrist sensor."""

    force: np.ndarray
    torque: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "force", np.asarray(self.force, dtype=float).reshape(3))
        object.__setattr__(self, "torque", np.asarray(self.torque, dtype=float).reshape(3))
        if not (np.all(np.isfinite(self.force)) and np.all(np.isfinite(self.torque))):
            raise ValueError("wrench entries must be finite")

    @staticmethod
    def zero() -> "Wrench":
        return Wrench(np.zeros(3), np.zeros(3))

    @staticmethod
    def from_array(values: np.ndarray) -> "Wrench":
        values = np.asarray(values, dtype=float).reshape(6)
        return Wrench(values[:3], values[3:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])


@dataclass(frozen=True)
class AdmittanceParams:
    """Virtual mass, damping, and stiffness (6x6 blocks) plus a force scaling."""

    M: np.ndarray
    D: np.ndarray
    K: np.ndarray
    force_weight: float = 1.0
    M_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "M", _check_symmetric_psd("M", self.M, strict=True))
        object.__setattr__(self, "D", _check_symmetric_psd("D", self.D, strict=False))
        object.__setattr__(self, "K", _check_symmetric_psd("K", self.K, strict=False))
        if self.force_weight < 0.0:
            raise ValueError("force_weight must be non-negative")
        object.__setattr__(self, "M_inv", np.linalg.inv(self.M))

    @staticmethod
    def diagonal(
        mass: float = 8.0,
        inertia: float = 0.5,
        k_trans: float = 400.0,
        k_rot: float = 20.0,
        force_weight: float = 1.0,
    ) -> "AdmittanceParams":
        """Critically damped diagonal parameters, D = 2 sqrt(K M) per axis."""
        m = np.array([mass] * 3 + [inertia] * 3)
        k = np.array([k_trans] * 3 + [k_rot] * 3)
        return AdmittanceParams(
            M=np.diag(m),
            D=np.diag(2.0 * np.sqrt(k * m)),
            K=np.diag(k),
            force_weight=force_weight,
        )


def rotation_log(rotation: np.ndarray) -> np.ndarray:
    """Axis-angle vector of a rotation matrix (robust near 0 and pi)."""
    R = np.asarray(rotation, dtype=float)
    vee = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    cos_a = min(1.0, max(-1.0, (np.trace(R) - 1.0) / 2.0))
    angle = np.arccos(cos_a)
    if angle < 1e-10:
        return vee
    if angle > np.pi - 1e-6:
        # R ~ 2 a a^T - I: recover the axis from the dominant column.
        B = (R + np.eye(3)) / 2.0
        i = int(np.argmax(np.diag(B)))
        axis = B[:, i] / np.sqrt(max(B[i, i], 1e-12))
        axis /= np.linalg.norm(axis)
        return angle * axis
    return angle / np.sin(angle) * vee


def pose_error(x_des: Pose, x: Pose) -> np.ndarray:
    """Six-vector error: translation difference and axis-angle of R_des R^T."""
    err = np.empty(6)
    err[:3] = x_des.position - x.position
    err[3:] = rotation_log(x_des.rotation @ x.rotation.T)
    return err


def admittance_accel(
    params: AdmittanceParams,
    x_des: Pose,
    x_dot_des: np.ndarray,
    x_ddot_des: np.ndarray,
    x: Pose,
    x_dot: np.ndarray,
    F_ext: Wrench,
) -> np.ndarray:
    """Compliant Cartesian acceleration given the current tracking state.

    F_ext must already be expressed in the base frame (see transform_wrench).
    """
    spring = params.K @ pose_error(x_des, x)
    damper = params.D @ (np.asarray(x_dot_des, dtype=float) - np.asarray(x_dot, dtype=float))
    return params.M_inv @ (damper + spring - F_ext.as_array()) + np.asarray(x_ddot_des, dtype=float)


def integrate_velocity(x_ddot_adm: np.ndarray, x_dot_current: np.ndarray, T_r: float) -> np.ndarray:
    """One explicit Euler step: x_dot_adm = x_dot_current + x_ddot_adm * T_r."""
    if T_r <= 0.0:
        raise ValueError("T_r must be positive")
    return np.asarray(x_dot_current, dtype=float) + np.asarray(x_ddot_adm, dtype=float) * T_r


def cartesian_to_joint(
    model: ManipulatorModel,
    q: np.ndarray,
    x_dot_adm: np.ndarray,
    lam: float = 1e-3,
) -> np.ndarray:
    """Map a Cartesian velocity command to joint rates via the damped inverse."""
    J = jacobian(model, q)
    return damped_pinv(J, lam) @ np.asarray(x_dot_adm, dtype=float)


def transform_wrench(tool_rotation: np.ndarray, raw: Wrench, force_weight: float = 1.0) -> Wrench:
    """Rotate a sensor-frame wrench into the base frame and scale it."""
    R = np.asarray(tool_rotation, dtype=float)
    # Rotation of an already-validated wrench stays finite: skip re-checks.
    out = object.__new__(Wrench)
    object.__setattr__(out, "force", force_weight * (R @ raw.force))
    object.__setattr__(out, "torque", force_weight * (R @ raw.torque))
    return out
