"""Cross-checks between the compiled kernel and the numpy fallback."""

import numpy as np
import pytest

from restrack import backend
from restrack.model import chain_model

from .helpers import stack_plant

needs_compiled = pytest.mark.skipif(
    "compiled" not in backend.available_backends(),
    reason="compiled kernel not built")


def _random_batch(rng, model, E):
    n = model.n_links
    q = rng.uniform(-1.5, 1.5, (E, n))
    qdot = rng.uniform(-3, 3, (E, n))
    if model.floating:
        root = np.column_stack([rng.uniform(-1, 1, E), rng.uniform(0.5, 2.0, E),
                                rng.uniform(-0.5, 0.5, E)])
        rootdot = rng.uniform(-1, 1, (E, 3))
    else:
        root = np.zeros((E, 3))
        rootdot = np.zeros((E, 3))
    return q, qdot, root, rootdot


@needs_compiled
@pytest.mark.parametrize("floating", [False, True])
def test_accelerations_agree(floating):
    rng = np.random.default_rng(5)
    model = chain_model(3, base_mode="floating" if floating else "fixed",
                        foot_links=[2] if floating else ())
    E = 64
    q, qdot, root, rootdot = _random_batch(rng, model, E)
    tau = rng.uniform(-10, 10, (E, 3))
    p = stack_plant(model, E)
    args = (p["mass"], p["com"], p["length"], p["inertia"], p["damping"],
            p["root_mass"], p["root_inertia"], p["friction"], p["foot_links"],
            p["kn"], p["cn"], p["ct"], p["gravity"], p["floating"])
    acc_c, con_c = backend.get_backend("compiled").accelerations(
        q.copy(), qdot.copy(), root.copy(), rootdot.copy(), tau.copy(), *args)
    acc_p, con_p = backend.get_backend("python").accelerations(
        q.copy(), qdot.copy(), root.copy(), rootdot.copy(), tau.copy(), *args)
    assert np.max(np.abs(np.asarray(acc_c) - acc_p)) < 1e-10
    if np.asarray(con_p).size:
        assert np.max(np.abs(np.asarray(con_c) - con_p)) < 1e-10


@needs_compiled
@pytest.mark.parametrize("floating", [False, True])
def test_control_step_agrees(floating):
    # one 20-substep control window: backends agree to roundoff
    rng = np.random.default_rng(17)
    model = chain_model(3, base_mode="floating" if floating else "fixed",
                        foot_links=[2] if floating else ())
    E = 16
    q, qdot, root, rootdot = _random_batch(rng, model, E)
    tar_new = rng.uniform(-1, 1, (E, 3))
    tar_old = rng.uniform(-1, 1, (E, 3))
    delay = rng.integers(0, 4, E)
    kp = np.full((E, 3), 80.0)
    kd = np.full((E, 3), 4.0)
    noise = rng.normal(0, 0.2, (E, 3))
    p = stack_plant(model, E)
    tlim = np.tile(model.joint_torque_limit, (E, 1))

    results = {}
    for name in ("compiled", "python"):
        qq, qd, rr, rd = q.copy(), qdot.copy(), root.copy(), rootdot.copy()
        tau_out = np.zeros((E, 3))
        contact = np.zeros((E, len(model.foot_links), 2))
        diverged = np.zeros(E, dtype=np.uint8)
        backend.get_backend(name).step_control(
            qq, qd, rr, rd, tar_new.copy(), tar_old.copy(), delay.copy(),
            kp, kd, noise, p["mass"], p["com"], p["length"], p["inertia"],
            p["damping"], tlim, p["root_mass"], p["root_inertia"],
            p["friction"], p["foot_links"], p["kn"], p["cn"], p["ct"],
            p["gravity"], 1e-3, 20, p["floating"], tau_out, contact, diverged)
        results[name] = (qq, qd, rr, rd, tau_out, contact, diverged)
    for a, b in zip(results["compiled"], results["python"]):
        diff = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
        if diff.size:
            assert np.max(diff) < 1e-9


@needs_compiled
def test_divergence_flag_agrees():
    model = chain_model(1, link_mass=1e-6, link_inertia=1e-12, link_length=1e-3,
                        joint_torque_limit=1e9)
    p = stack_plant(model, 1)
    for name in ("compiled", "python"):
        q = np.zeros((1, 1))
        qdot = np.zeros((1, 1))
        root = np.zeros((1, 3))
        rootdot = np.zeros((1, 3))
        tau_out = np.zeros((1, 1))
        contact = np.zeros((1, 0, 2))
        diverged = np.zeros(1, dtype=np.uint8)
        backend.get_backend(name).step_control(
            q, qdot, root, rootdot, np.full((1, 1), 1e8), np.zeros((1, 1)),
            np.zeros(1, dtype=np.int64), np.full((1, 1), 1e12), np.zeros((1, 1)),
            np.zeros((1, 1)), p["mass"], p["com"], p["length"], p["inertia"],
            p["damping"], np.full((1, 1), 1e12), p["root_mass"],
            p["root_inertia"], p["friction"], p["foot_links"], p["kn"],
            p["cn"], p["ct"], p["gravity"], 0.01, 200, False,
            tau_out, contact, diverged)
        assert diverged[0] == 1
        assert np.all(np.isfinite(q))
