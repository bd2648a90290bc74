"""Planar articulated chain description and simulator state containers.

Conventions used throughout the package:

* The world is the vertical x-z plane; gravity pulls along -z.
* Joint angles are relative (joint i rotates link i against link i-1).
  At q = 0 the chain hangs straight down; a link at absolute angle phi
  points along (sin phi, -cos phi), so positive angles swing the link
  counter-clockwise (toward +x first).
* Link centers of mass sit on the link axis, ``link_com`` meters from the
  inboard joint (defaults to mid-link).
* In floating mode the base carries three extra degrees of freedom
  (x, z, pitch) and optional point feet at link endpoints touch a ground
  plane at z = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ConfigError, ContractViolation

FIXED = "fixed"
FLOATING = "floating"


def _as_vec(x, n, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ContractViolation(f"{name}: expected {n} entries, got shape {arr.shape}")
    return arr.copy()


@dataclass(eq=False)
class RobotModel:
    """Kinematic and dynamic description of a planar chain."""

    n_links: int
    link_length: np.ndarray
    link_mass: np.ndarray
    link_inertia: np.ndarray  # about the link COM
    link_com: np.ndarray  # COM distance from the inboard joint
    joint_damping: np.ndarray
    joint_limit_lo: np.ndarray
    joint_limit_hi: np.ndarray
    joint_vel_limit: np.ndarray
    joint_torque_limit: np.ndarray
    base_mode: str = FIXED
    foot_links: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    gravity: float = 9.81
    root_mass: float = 1.0
    root_inertia: float = 0.05
    contact_stiffness: float = 2e4
    contact_damping: float = 200.0
    contact_tangent_damping: float = 400.0

    def __post_init__(self):
        n = self.n_links
        if n < 1:
            raise ConfigError("n_links must be >= 1")
        for name in ("link_length", "link_mass", "link_inertia", "link_com",
                     "joint_damping", "joint_limit_lo", "joint_limit_hi",
                     "joint_vel_limit", "joint_torque_limit"):
            setattr(self, name, _as_vec(getattr(self, name), n, name))
        self.foot_links = np.asarray(self.foot_links, dtype=np.int64)
        if np.any(self.link_length <= 0) or np.any(self.link_mass <= 0) or np.any(self.link_inertia <= 0):
            raise ConfigError("link lengths, masses and inertias must be strictly positive")
        if np.any(self.link_com <= 0) or np.any(self.link_com > self.link_length):
            raise ConfigError("link_com must lie on the link (0 < com <= length)")
        if np.any(self.joint_damping < 0):
            raise ConfigError("joint_damping must be nonnegative")
        if np.any(self.joint_limit_lo >= self.joint_limit_hi):
            raise ConfigError("joint limits must satisfy lo < hi")
        if np.any(self.joint_vel_limit <= 0) or np.any(self.joint_torque_limit <= 0):
            raise ConfigError("velocity and torque limits must be strictly positive")
        if self.base_mode not in (FIXED, FLOATING):
            raise ConfigError(f"base_mode must be '{FIXED}' or '{FLOATING}'")
        if self.base_mode == FLOATING:
            if self.root_mass <= 0 or self.root_inertia <= 0:
                raise ConfigError("floating base needs positive root_mass and root_inertia")
            if np.any(self.foot_links < 0) or np.any(self.foot_links >= n):
                raise ConfigError("foot_links out of range")
        if self.gravity < 0:
            raise ConfigError("gravity magnitude must be nonnegative")

    @property
    def n_joints(self) -> int:
        return self.n_links

    @property
    def floating(self) -> bool:
        return self.base_mode == FLOATING

    def copy(self) -> "RobotModel":
        return replace(
            self,
            link_length=self.link_length.copy(),
            link_mass=self.link_mass.copy(),
            link_inertia=self.link_inertia.copy(),
            link_com=self.link_com.copy(),
            joint_damping=self.joint_damping.copy(),
            joint_limit_lo=self.joint_limit_lo.copy(),
            joint_limit_hi=self.joint_limit_hi.copy(),
            joint_vel_limit=self.joint_vel_limit.copy(),
            joint_torque_limit=self.joint_torque_limit.copy(),
            foot_links=self.foot_links.copy(),
        )


def chain_model(
    n_links,
    link_length=0.5,
    link_mass=1.0,
    link_inertia=None,
    link_com=None,
    joint_damping=0.1,
    joint_limits=(-2.7, 2.7),
    joint_vel_limit=30.0,
    joint_torque_limit=50.0,
    base_mode=FIXED,
    foot_links=(),
    **kw,
) -> RobotModel:
    """Convenience factory; scalars broadcast to all links.

    ``link_inertia`` defaults to the slender-rod value m*l^2/12 and
    ``link_com`` to mid-link.
    """
    length = _as_vec(link_length, n_links, "link_length")
    mass = _as_vec(link_mass, n_links, "link_mass")
    if link_inertia is None:
        link_inertia = mass * length**2 / 12.0
    if link_com is None:
        link_com = length / 2.0
    limits = np.asarray(joint_limits, dtype=np.float64)
    if limits.ndim == 1:
        lo = np.full(n_links, limits[0])
        hi = np.full(n_links, limits[1])
    else:
        lo, hi = limits[:, 0].copy(), limits[:, 1].copy()
    return RobotModel(
        n_links=n_links,
        link_length=length,
        link_mass=mass,
        link_inertia=link_inertia,
        link_com=link_com,
        joint_damping=joint_damping,
        joint_limit_lo=lo,
        joint_limit_hi=hi,
        joint_vel_limit=joint_vel_limit,
        joint_torque_limit=joint_torque_limit,
        base_mode=base_mode,
        foot_links=np.asarray(foot_links, dtype=np.int64),
        **kw,
    )


@dataclass(eq=False)
class SimState:
    """Full simulator state. Root fields stay zero in fixed-base mode."""

    q: np.ndarray
    qdot: np.ndarray
    root_pos: np.ndarray = field(default_factory=lambda: np.zeros(2))
    root_vel: np.ndarray = field(default_factory=lambda: np.zeros(2))
    root_pitch: float = 0.0
    root_pitch_rate: float = 0.0
    time: float = 0.0
    contact_forces: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.float64).copy()
        self.qdot = np.asarray(self.qdot, dtype=np.float64).copy()
        self.root_pos = np.asarray(self.root_pos, dtype=np.float64).copy()
        self.root_vel = np.asarray(self.root_vel, dtype=np.float64).copy()
        self.contact_forces = np.asarray(self.contact_forces, dtype=np.float64).copy()
        if self.q.shape != self.qdot.shape:
            raise ContractViolation("q and qdot must have equal length")

    def copy(self) -> "SimState":
        return SimState(
            q=self.q,
            qdot=self.qdot,
            root_pos=self.root_pos,
            root_vel=self.root_vel,
            root_pitch=self.root_pitch,
            root_pitch_rate=self.root_pitch_rate,
            time=self.time,
            contact_forces=self.contact_forces,
        )

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.q))
            and np.all(np.isfinite(self.qdot))
            and np.all(np.isfinite(self.root_pos))
            and np.all(np.isfinite(self.root_vel))
            and np.isfinite(self.root_pitch)
            and np.isfinite(self.root_pitch_rate)
        )


def zero_state(model: RobotModel) -> SimState:
    n_feet = len(model.foot_links)
    return SimState(
        q=np.zeros(model.n_joints),
        qdot=np.zeros(model.n_joints),
        contact_forces=np.zeros((n_feet, 2)),
    )


@dataclass(eq=False)
class PdGains:
    kp: np.ndarray
    kd: np.ndarray

    def __post_init__(self):
        self.kp = np.asarray(self.kp, dtype=np.float64).copy()
        self.kd = np.asarray(self.kd, dtype=np.float64).copy()
        if self.kp.shape != self.kd.shape:
            raise ContractViolation("kp and kd must have equal length")
        if np.any(self.kp <= 0) or np.any(self.kd < 0):
            raise ConfigError("require kp > 0 and kd >= 0")

    def copy(self) -> "PdGains":
        return PdGains(kp=self.kp, kd=self.kd)


@dataclass(eq=False)
class RandomizationParams:
    """One sampled draw of the per-episode physics perturbations."""

    mass_scale: np.ndarray
    inertia_scale: np.ndarray
    friction: float
    kp_scale: np.ndarray
    kd_scale: np.ndarray
    action_delay: int  # simulation substeps, < decimation
    obs_noise_std: float
    torque_noise_std: float

    def as_vector(self) -> np.ndarray:
        """Flat encoding handed to the critic as privileged channels."""
        return np.concatenate([
            self.mass_scale,
            self.inertia_scale,
            [self.friction],
            self.kp_scale,
            self.kd_scale,
            [float(self.action_delay), self.obs_noise_std, self.torque_noise_std],
        ])


def identity_randomization(n_joints: int) -> RandomizationParams:
    ones = np.ones(n_joints)
    return RandomizationParams(
        mass_scale=ones.copy(),
        inertia_scale=ones.copy(),
        friction=0.8,
        kp_scale=ones.copy(),
        kd_scale=ones.copy(),
        action_delay=0,
        obs_noise_std=0.0,
        torque_noise_std=0.0,
    )


@dataclass
class RandomizationRanges:
    """Uniform sampling ranges for :class:`RandomizationParams`.

    Degenerate ranges ([1, 1] for scales, [0, 0] for noise/delay) give the
    identity randomization.
    """

    mass_scale: tuple = (1.0, 1.0)
    inertia_scale: tuple = (1.0, 1.0)
    friction: tuple = (0.8, 0.8)
    kp_scale: tuple = (1.0, 1.0)
    kd_scale: tuple = (1.0, 1.0)
    action_delay_max: int = 0
    obs_noise_std: tuple = (0.0, 0.0)
    torque_noise_std: tuple = (0.0, 0.0)

    def __post_init__(self):
        for name in ("mass_scale", "inertia_scale", "kp_scale", "kd_scale"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ConfigError(f"randomization range {name} must satisfy 0 < lo <= hi")
        for name in ("friction", "obs_noise_std", "torque_noise_std"):
            lo, hi = getattr(self, name)
            if not (0 <= lo <= hi):
                raise ConfigError(f"randomization range {name} must satisfy 0 <= lo <= hi")
        if self.action_delay_max < 0:
            raise ConfigError("action_delay_max must be >= 0")
