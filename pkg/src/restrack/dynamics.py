"""High-level simulator operations on top of the batched kernel."""

from __future__ import annotations

import numpy as np

from . import backend
from .exceptions import ConfigError, ContractViolation, SimDivergence
from .model import (PdGains, RandomizationParams, RandomizationRanges,
                    RobotModel, SimState, identity_randomization)

MAX_LINKS = 12  # compiled kernel stack-buffer bound (links + base coords)


def pd_torque(q_tar, q, qdot, gains: PdGains, torque_limit) -> np.ndarray:
    """Joint-space PD law with hard torque clamping.

    tau_i = kp_i (q_tar_i - q_i) - kd_i qdot_i, clipped to +-torque_limit_i.
    Accepts vectors or (batch, n) arrays.
    """
    q_tar = np.asarray(q_tar, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    qdot = np.asarray(qdot, dtype=np.float64)
    limit = np.asarray(torque_limit, dtype=np.float64)
    if not (q_tar.shape == q.shape == qdot.shape):
        raise ContractViolation("pd_torque: q_tar, q, qdot must share a shape")
    if q.shape[-1] != gains.kp.shape[0]:
        raise ContractViolation("pd_torque: gains dimension mismatch")
    if not (np.all(np.isfinite(q_tar)) and np.all(np.isfinite(q)) and np.all(np.isfinite(qdot))):
        raise ContractViolation("pd_torque: non-finite input")
    tau = gains.kp * (q_tar - q) - gains.kd * qdot
    return np.clip(tau, -limit, limit)


def _effective_arrays(model: RobotModel, params: RandomizationParams | None):
    """Per-episode plant parameters with randomization scales applied."""
    if params is None:
        params = identity_randomization(model.n_joints)
    mass = model.link_mass * params.mass_scale
    inertia = model.link_inertia * params.inertia_scale
    return mass, inertia, params.friction


def _state_rows(state: SimState):
    root = np.array([[state.root_pos[0], state.root_pos[1], state.root_pitch]])
    rootdot = np.array([[state.root_vel[0], state.root_vel[1], state.root_pitch_rate]])
    return (state.q[None, :].copy(), state.qdot[None, :].copy(), root, rootdot)


def step(model: RobotModel, state: SimState, torque, params=None, dt=1e-3) -> SimState:
    """One integration substep with an explicit joint torque.

    Deterministic; raises :class:`SimDivergence` if the integrator blows up.
    """
    if not (0.0 < dt <= 0.01):
        raise ContractViolation("step: dt must lie in (0, 0.01]")
    torque = np.asarray(torque, dtype=np.float64)
    if torque.shape != (model.n_joints,):
        raise ContractViolation("step: torque dimension mismatch")
    if not np.all(np.isfinite(torque)):
        raise ContractViolation("step: non-finite torque")
    if model.n_links > MAX_LINKS:
        raise ConfigError(f"chains longer than {MAX_LINKS} links are not supported")

    mass, inertia, friction = _effective_arrays(model, params)
    q, qdot, root, rootdot = _state_rows(state)
    nf = len(model.foot_links)
    contact = np.zeros((1, nf, 2))
    diverged = np.zeros(1, dtype=np.uint8)
    backend.core.step_torque(
        q, qdot, root, rootdot, torque[None, :].copy(),
        mass[None, :].copy(), model.link_com[None, :].copy(),
        model.link_length[None, :].copy(), inertia[None, :].copy(),
        model.joint_damping[None, :].copy(),
        np.array([model.root_mass]), np.array([model.root_inertia]),
        np.array([friction]), model.foot_links,
        model.contact_stiffness, model.contact_damping,
        model.contact_tangent_damping, model.gravity, dt, model.floating,
        contact, diverged,
    )
    if diverged[0]:
        raise SimDivergence(f"integrator diverged at t={state.time:.6f}", step=state.time)
    return SimState(
        q=q[0], qdot=qdot[0],
        root_pos=root[0, :2], root_vel=rootdot[0, :2],
        root_pitch=float(root[0, 2]), root_pitch_rate=float(rootdot[0, 2]),
        time=state.time + dt,
        contact_forces=contact[0],
    )


def chain_positions(model: RobotModel, q, root_pos=None, root_pitch=None):
    """Vectorized forward kinematics.

    ``q`` may be (n,) or (..., n); returns (joints, ends, coms) with shapes
    (..., n+1, 2), (..., n, 2), (..., n, 2).
    """
    q = np.asarray(q, dtype=np.float64)
    squeeze = q.ndim == 1
    qb = np.atleast_2d(q)
    B, n = qb.shape[0], qb.shape[-1]
    if n != model.n_links:
        raise ContractViolation("forward kinematics: q dimension mismatch")
    pitch = np.zeros(B) if root_pitch is None else np.broadcast_to(
        np.asarray(root_pitch, dtype=np.float64), (B,))
    phi = pitch[:, None] + np.cumsum(qb, axis=1)
    s, c = np.sin(phi), np.cos(phi)
    joints = np.zeros((B, n + 1, 2))
    if root_pos is not None:
        joints[:, 0, :] = np.broadcast_to(np.asarray(root_pos, dtype=np.float64), (B, 2))
    seg = np.stack([model.link_length * s, -model.link_length * c], axis=-1)
    joints[:, 1:, :] = joints[:, :1, :] + np.cumsum(seg, axis=1)
    coms = joints[:, :-1, :] + np.stack([model.link_com * s, -model.link_com * c], axis=-1)
    if squeeze:
        return joints[0], joints[0, 1:], coms[0]
    return joints, joints[:, 1:], coms


def forward_kinematics(model: RobotModel, state: SimState):
    """World-frame link endpoint and COM positions for a single state."""
    root_pos = state.root_pos if model.floating else None
    pitch = state.root_pitch if model.floating else None
    _, ends, coms = chain_positions(model, state.q, root_pos, pitch)
    return ends, coms


def total_energy(model: RobotModel, state: SimState) -> float:
    """Kinetic plus gravitational potential energy.

    In fixed-base mode the potential reference is the minimum-potential
    (hanging) configuration, so E = 0 at rest at q = 0. In floating mode the
    potential is measured from z = 0 (no canonical minimum exists).
    """
    n = model.n_links
    root_pos = state.root_pos if model.floating else None
    pitch = state.root_pitch if model.floating else None
    _, _, coms = chain_positions(model, state.q, root_pos, pitch)
    phi = (state.root_pitch if model.floating else 0.0) + np.cumsum(state.q)
    w = (state.root_pitch_rate if model.floating else 0.0) + np.cumsum(state.qdot)
    s, c = np.sin(phi), np.cos(phi)
    # COM velocities by accumulating joint-point velocities down the chain
    vx = np.zeros(n + 1)
    vz = np.zeros(n + 1)
    if model.floating:
        vx[0], vz[0] = state.root_vel
    for i in range(n):
        vx[i + 1] = vx[i] + model.link_length[i] * w[i] * c[i]
        vz[i + 1] = vz[i] + model.link_length[i] * w[i] * s[i]
    vcx = vx[:n] + model.link_com * w * c
    vcz = vz[:n] + model.link_com * w * s
    kinetic = 0.5 * np.sum(model.link_mass * (vcx**2 + vcz**2) + model.link_inertia * w**2)
    if model.floating:
        kinetic += 0.5 * model.root_mass * np.sum(state.root_vel**2)
        kinetic += 0.5 * model.root_inertia * state.root_pitch_rate**2
        potential = np.sum(model.link_mass * model.gravity * coms[:, 1])
        potential += model.root_mass * model.gravity * state.root_pos[1]
    else:
        z_min = -(np.concatenate([[0.0], np.cumsum(model.link_length)[:-1]]) + model.link_com)
        potential = np.sum(model.link_mass * model.gravity * (coms[:, 1] - z_min))
    return float(kinetic + potential)


def joint_accelerations(model: RobotModel, state: SimState, torque, params=None):
    """Generalized accelerations (root coords first in floating mode)."""
    mass, inertia, friction = _effective_arrays(model, params)
    q, qdot, root, rootdot = _state_rows(state)
    torque = np.asarray(torque, dtype=np.float64)[None, :].copy()
    acc, _ = backend.core.accelerations(
        q, qdot, root, rootdot, torque,
        mass[None, :].copy(), model.link_com[None, :].copy(),
        model.link_length[None, :].copy(), inertia[None, :].copy(),
        model.joint_damping[None, :].copy(),
        np.array([model.root_mass]), np.array([model.root_inertia]),
        np.array([friction]), model.foot_links,
        model.contact_stiffness, model.contact_damping,
        model.contact_tangent_damping, model.gravity, model.floating,
    )
    return np.asarray(acc)[0]


def _sample_range(rng, lo, hi):
    return float(lo) if lo == hi else float(rng.uniform(lo, hi))


def apply_randomization(model: RobotModel, gains: PdGains,
                        ranges: RandomizationRanges, rng: np.random.Generator):
    """Sample per-episode physics perturbations.

    Returns scaled copies of the model and gains plus the sampled
    parameters; the inputs are left untouched.
    """
    n = model.n_joints
    params = RandomizationParams(
        mass_scale=rng.uniform(ranges.mass_scale[0], ranges.mass_scale[1], n),
        inertia_scale=rng.uniform(ranges.inertia_scale[0], ranges.inertia_scale[1], n),
        friction=_sample_range(rng, *ranges.friction),
        kp_scale=rng.uniform(ranges.kp_scale[0], ranges.kp_scale[1], n),
        kd_scale=rng.uniform(ranges.kd_scale[0], ranges.kd_scale[1], n),
        action_delay=int(rng.integers(0, ranges.action_delay_max + 1)),
        obs_noise_std=_sample_range(rng, *ranges.obs_noise_std),
        torque_noise_std=_sample_range(rng, *ranges.torque_noise_std),
    )
    scaled = model.copy()
    scaled.link_mass = model.link_mass * params.mass_scale
    scaled.link_inertia = model.link_inertia * params.inertia_scale
    scaled_gains = PdGains(kp=gains.kp * params.kp_scale, kd=gains.kd * params.kd_scale)
    return scaled, scaled_gains, params
