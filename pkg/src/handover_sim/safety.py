"""ISO/TS 15066 velocity limits and the online velocity-scaling optimization.

Two limit paradigms are combined: separation monitoring (speed bounded by the
distance to the human and closing speeds) and power/force limiting (a
distance-independent contact-energy cap). Their maximum bounds the directed
speed of every link toward the human hand, enforced each cycle by choosing
the largest scaling factor alpha in [0, 1] that satisfies

    J_ri(q) q_dot_adm alpha <= v_max_i          for every link i
    q_dot_min <= q_dot_adm alpha <= q_dot_max
    q_ddot_min <= (q_dot_adm alpha - q_dot) / T_r <= q_ddot_max

Because alpha is scalar, the linear program reduces to an exact interval
intersection, solved here in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .kinematics import ManipulatorModel, chain_frames, cross_rows

__all__ = [
    "SafetyParams",
    "HumanState",
    "ScalingResult",
    "hr_versor",
    "ssm_limit",
    "apparent_mass",
    "pfl_limit",
    "combined_limit",
    "modified_jacobian",
    "optimal_alpha",
    "LinkConstraints",
    "link_constraints",
]

_EPS = 1e-12


@dataclass(frozen=True)
class SafetyParams:
    """Constants of the separation-monitoring and force-limiting formulas.

    Defaults use hand/finger body-region values (contact force 140 N, spring
    constant 75 kN/m, body-part mass 0.6 kg, contact area 1 cm^2) and treat
    the hand as a sphere of human_radius around the tracked point.
    """

    a_max: float = 2.0
    T_r: float = 0.002
    C: float = 0.0
    Z_d: float = 0.0
    Z_r: float = 0.0
    F_max: float = 140.0
    p_max: float = 190.0
    A: float = 1.0
    k_spring: float = 75000.0
    m_h: float = 0.6
    human_radius: float = 0.1
    ssm_formula: str = "corrected"

    def __post_init__(self) -> None:
        for name in ("a_max", "T_r", "F_max", "p_max", "A", "k_spring", "m_h", "human_radius"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("C", "Z_d", "Z_r"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.ssm_formula not in ("corrected", "verbatim"):
            raise ValueError("ssm_formula must be 'corrected' or 'verbatim'")


@dataclass(frozen=True)
class HumanState:
    """Tracked hand point and its velocity in the robot base frame."""

    hand_position: np.ndarray
    hand_velocity: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "hand_position", np.asarray(self.hand_position, dtype=float).reshape(3))
        object.__setattr__(self, "hand_velocity", np.asarray(self.hand_velocity, dtype=float).reshape(3))
        if not (np.all(np.isfinite(self.hand_position)) and np.all(np.isfinite(self.hand_velocity))):
            raise ValueError("human state must be finite")


@dataclass(frozen=True)
class ScalingResult:
    """Outcome of the per-cycle scaling optimization."""

    alpha: float
    binding_constraint: str
    feasible: bool

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha out of [0, 1]: {self.alpha}")


def hr_versor(P_H: np.ndarray, P_R: np.ndarray) -> np.ndarray:
    """Unit vector from a robot point toward the human point."""
    diff = np.asarray(P_H, dtype=float) - np.asarray(P_R, dtype=float)
    norm = float(np.linalg.norm(diff))
    if norm < 1e-9:
        raise ValueError("human and robot points coincide; separation direction undefined")
    return diff / norm


def _ssm_vector(params: SafetyParams, separation: np.ndarray, v_h: np.ndarray) -> np.ndarray:
    a_t = params.a_max * params.T_r
    if params.ssm_formula == "corrected":
        margin = separation - params.C - params.Z_d - params.Z_r
        tail = -a_t - v_h
    else:
        margin = params.C + params.Z_d + params.Z_r - separation
        tail = a_t - v_h
    radicand = v_h * v_h + a_t * a_t + 2.0 * params.a_max * margin
    return np.maximum(0.0, np.sqrt(np.maximum(radicand, 0.0)) + tail)


def ssm_limit(params: SafetyParams, separation: float, v_h_toward_robot: float) -> float:
    """Speed limit from separation monitoring, clamped below at zero.

    separation is the hand-to-link distance already reduced by human_radius.
    The default 'corrected' form is zero exactly at the protective boundary
    separation = C + Z_d + Z_r; the 'verbatim' form keeps the printed sign of
    the distance margin and of the reaction-time term and is exposed only for
    auditing.
    """
    if separation < 0.0:
        raise ValueError("separation must be non-negative")
    return float(_ssm_vector(params, np.asarray(separation, dtype=float), np.asarray(v_h_toward_robot, dtype=float)))


def apparent_mass(model: ManipulatorModel) -> float:
    """Robot mass perceived at contact: half the moving link mass plus payload."""
    m_r = float(np.sum(model.link_masses)) / 2.0 + model.payload_mass
    if m_r <= 0.0:
        raise ValueError("apparent mass is zero; set link or payload masses")
    return m_r


def pfl_limit(params: SafetyParams, m_r: float) -> float:
    """Distance-independent contact speed limit from force/pressure bounds.

    Uses the stricter of the force and pressure expressions,
    v = min(F_max, p_max A) / sqrt(mu k), with mu the reduced mass of the
    robot/body-part pair.
    """
    if m_r <= 0.0:
        raise ValueError("m_r must be strictly positive")
    mu = 1.0 / (1.0 / m_r + 1.0 / params.m_h)
    force_cap = min(params.F_max, params.p_max * params.A)
    return force_cap / math.sqrt(mu * params.k_spring)


def combined_limit(ssm: float, pfl: float) -> float:
    """Governing limit: the larger of the two paradigms."""
    if ssm < 0.0 or pfl < 0.0:
        raise ValueError("limits must be non-negative")
    return max(ssm, pfl)


def modified_jacobian(
    model: ManipulatorModel,
    q: np.ndarray,
    versor: np.ndarray,
    link_index: int,
) -> np.ndarray:
    """Row mapping joint rates to the speed of link link_index toward the human.

    The row is the versor projection of the positional Jacobian of the link
    point, truncated so that joints beyond link_index contribute zero.
    """
    if not 1 <= link_index <= model.joint_count:
        raise ValueError(f"link_index must be in [1, {model.joint_count}], got {link_index}")
    versor = np.asarray(versor, dtype=float).reshape(3)
    if abs(np.linalg.norm(versor) - 1.0) > 1e-9:
        raise ValueError("versor must have unit norm")
    origins, axes, _ = chain_frames(model, q)
    row = np.zeros(model.joint_count)
    point = origins[link_index]
    cols = cross_rows(axes[:link_index], point - origins[:link_index])
    row[:link_index] = cols @ versor
    return row


_TAGS = ("iso-limit", "joint-velocity", "joint-acceleration")


def optimal_alpha(
    q_dot_adm: np.ndarray,
    q_dot_current: np.ndarray,
    per_link_rows: np.ndarray,
    v_max_per_link: np.ndarray,
    q_dot_min: np.ndarray,
    q_dot_max: np.ndarray,
    q_ddot_min: np.ndarray,
    q_ddot_max: np.ndarray,
    T_r: float,
) -> ScalingResult:
    """Largest scaling factor in [0, 1] satisfying all per-cycle constraints.

    Every constraint has the form coeff * alpha <= bound and so contributes
    an upper (coeff > 0) or lower (coeff < 0) bound on alpha; the result is
    the top of the intersected interval. If the interval is empty (the arm
    cannot brake hard enough within one cycle), the result saturates to the
    closest value satisfying the lower bounds and is flagged infeasible.
    """
    if T_r <= 0.0:
        raise ValueError("T_r must be positive")
    q_dot_adm = np.asarray(q_dot_adm, dtype=float).ravel()
    q_dot_current = np.asarray(q_dot_current, dtype=float).ravel()
    rows = np.atleast_2d(np.asarray(per_link_rows, dtype=float))
    v_max = np.asarray(v_max_per_link, dtype=float).ravel()

    accel_hi = q_dot_current + T_r * np.asarray(q_ddot_max, dtype=float)
    accel_lo = q_dot_current + T_r * np.asarray(q_ddot_min, dtype=float)
    coeff = np.concatenate([rows @ q_dot_adm, q_dot_adm, -q_dot_adm, q_dot_adm, -q_dot_adm])
    bound = np.concatenate([v_max, np.asarray(q_dot_max, dtype=float), -np.asarray(q_dot_min, dtype=float), accel_hi, -accel_lo])
    n = len(q_dot_adm)
    tag_idx = np.concatenate([
        np.zeros(len(v_max), dtype=int),
        np.ones(2 * n, dtype=int),
        np.full(2 * n, 2, dtype=int),
    ])

    pos = coeff > _EPS
    neg = coeff < -_EPS
    hard_infeasible = bool(np.any(~pos & ~neg & (bound < -_EPS)))

    lo, lo_tag, hi, hi_tag = 0.0, "box", 1.0, "box"
    hi_actuator = 1.0  # the velocity box is a hard limit even when infeasible
    if np.any(pos):
        ubs = bound[pos] / coeff[pos]
        k = int(np.argmin(ubs))
        if ubs[k] < hi:
            hi, hi_tag = float(ubs[k]), _TAGS[tag_idx[pos][k]]
        vel = tag_idx[pos] == 1
        if np.any(vel):
            hi_actuator = min(1.0, float(np.min(ubs[vel])))
    if np.any(neg):
        lbs = bound[neg] / coeff[neg]
        k = int(np.argmax(lbs))
        if lbs[k] > lo:
            lo, lo_tag = float(lbs[k]), _TAGS[tag_idx[neg][k]]

    if not hard_infeasible and lo <= hi + 1e-12:
        return ScalingResult(alpha=min(max(hi, 0.0), 1.0), binding_constraint=hi_tag, feasible=True)
    alpha = min(max(lo, 0.0), hi_actuator)
    return ScalingResult(alpha=alpha, binding_constraint=lo_tag, feasible=False)


class LinkConstraints(NamedTuple):
    """Per-link safety data for one control cycle."""

    rows: np.ndarray       # (n, n) directed-speed rows, one per link
    v_max: np.ndarray      # (n,) governing limit per link
    ssm: np.ndarray        # (n,) separation-monitoring limit per link
    separation: np.ndarray  # (n,) sphere-reduced distance per link
    pfl: float


def link_constraints(
    model: ManipulatorModel,
    q: np.ndarray,
    human: HumanState,
    params: SafetyParams,
    m_r: float,
    frames: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
) -> LinkConstraints:
    """Assemble the per-link directed rows and limits for one cycle.

    Each moving link point gets its own separation, closing speed, and limit
    (strictly stronger than limiting only the closest point). A link point
    coinciding with the hand gets a zero row: the direction is undefined and
    the contact-speed floor governs.
    """
    origins, axes, _ = frames if frames is not None else chain_frames(model, q)
    n = model.joint_count
    pfl = pfl_limit(params, m_r)
    hand = human.hand_position

    diffs = hand - origins[1:]                      # (n, 3)
    dist = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    sep = np.maximum(0.0, dist - params.human_radius)
    safe = dist >= 1e-9
    versors = np.where(safe[:, None], diffs / np.where(safe, dist, 1.0)[:, None], 0.0)
    v_h = -(versors @ human.hand_velocity)
    ssm = np.where(safe, _ssm_vector(params, sep, v_h), 0.0)
    v_max = np.where(safe, np.maximum(ssm, pfl), pfl)

    # z_j x (p_i - p_j) for every (link point i, joint j <= i) pair at once.
    point_offsets = origins[1:, None, :] - origins[None, :-1, :]   # (n, n, 3)
    crossed = cross_rows(np.broadcast_to(axes, (n, n, 3)), point_offsets)
    rows = np.tril((crossed * versors[:, None, :]).sum(axis=2))
    return LinkConstraints(rows=rows, v_max=v_max, ssm=ssm, separation=sep, pfl=pfl)
