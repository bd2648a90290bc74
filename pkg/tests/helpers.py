"""Shared test utilities for driving the simulation kernels directly."""

import numpy as np

from restrack.model import RobotModel


def stack_plant(model: RobotModel, E: int, friction=0.8):
    """Per-environment parameter arrays for a batch of identical plants."""
    rep = lambda v: np.tile(np.asarray(v, dtype=np.float64), (E, 1))
    return dict(
        mass=rep(model.link_mass),
        com=rep(model.link_com),
        length=rep(model.link_length),
        inertia=rep(model.link_inertia),
        damping=rep(model.joint_damping),
        root_mass=np.full(E, model.root_mass),
        root_inertia=np.full(E, model.root_inertia),
        friction=np.full(E, friction),
        foot_links=model.foot_links,
        kn=model.contact_stiffness,
        cn=model.contact_damping,
        ct=model.contact_tangent_damping,
        gravity=model.gravity,
        floating=model.floating,
    )


def kernel_accel(kernel, model, q, qdot, tau, root=None, rootdot=None, friction=0.8):
    """Batched forward dynamics through a given backend."""
    q = np.atleast_2d(np.asarray(q, dtype=np.float64)).copy()
    E = q.shape[0]
    qdot = np.atleast_2d(np.asarray(qdot, dtype=np.float64)).copy()
    tau = np.atleast_2d(np.asarray(tau, dtype=np.float64)).copy()
    root = np.zeros((E, 3)) if root is None else np.atleast_2d(root).astype(np.float64).copy()
    rootdot = np.zeros((E, 3)) if rootdot is None else np.atleast_2d(rootdot).astype(np.float64).copy()
    p = stack_plant(model, E, friction)
    acc, contact = kernel.accelerations(
        q, qdot, root, rootdot, tau, p["mass"], p["com"], p["length"],
        p["inertia"], p["damping"], p["root_mass"], p["root_inertia"],
        p["friction"], p["foot_links"], p["kn"], p["cn"], p["ct"],
        p["gravity"], p["floating"])
    return np.asarray(acc), np.asarray(contact)
