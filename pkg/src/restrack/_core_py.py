"""Pure-numpy simulation kernel (fallback twin of ``restrack._core``).

Both backends implement the same batched planar-chain substep:

* dense mass matrix assembled from link Jacobians (equivalent closed form
  of the composite-rigid-body recursion for a serial planar chain),
* bias forces (centripetal + gravity) from zero-acceleration link
  kinematics,
* point-foot ground contact as a spring-damper normal force with a
  Coulomb-capped viscous tangential force (floating mode only),
* Cholesky solve, then semi-implicit Euler integration.

State arrays are modified in place. A per-environment ``diverged`` flag is
raised (and that environment frozen at its last finite state) when the
integrator produces non-finite or exploding values.

The numpy version vectorizes over the environment axis; the compiled
version loops in C. Per environment the arithmetic is the same sequence of
IEEE-754 double operations up to libm rounding of sin/cos, so the backends
agree to roundoff but are not guaranteed bit-equal.
"""

import numpy as np

BACKEND_NAME = "python"
DIVERGE_LIMIT = 1e8


def _accel(q, qdot, root, rootdot, tau, mass, com, length, inertia, damping,
           root_mass, root_inertia, friction, foot_links, kn, cn, ct,
           gravity, floating):
    """Forward dynamics for a batch of chains.

    Returns ``(acc, contact)`` where ``acc`` is (E, d) with d = n (+3 when
    floating, ordered [x, z, pitch, q...]) and ``contact`` is (E, F, 2)
    holding (tangential, normal) foot forces.
    """
    E, n = q.shape
    nf = len(foot_links)
    d = n + 3 if floating else n

    # absolute angles / rates
    if floating:
        phi = root[:, 2:3] + np.cumsum(q, axis=1)
        w = rootdot[:, 2:3] + np.cumsum(qdot, axis=1)
    else:
        phi = np.cumsum(q, axis=1)
        w = np.cumsum(qdot, axis=1)
    s = np.sin(phi)
    c = np.cos(phi)

    # joint / COM positions; joint j[i] is the inboard joint of link i
    jx = np.empty((E, n + 1))
    jz = np.empty((E, n + 1))
    if floating:
        jx[:, 0] = root[:, 0]
        jz[:, 0] = root[:, 1]
    else:
        jx[:, 0] = 0.0
        jz[:, 0] = 0.0
    for i in range(n):
        jx[:, i + 1] = jx[:, i] + length[:, i] * s[:, i]
        jz[:, i + 1] = jz[:, i] - length[:, i] * c[:, i]
    cx = jx[:, :n] + com * s
    cz = jz[:, :n] - com * c

    # zero-acceleration (bias) COM accelerations, gravity folded into z
    ajx = np.empty((E, n + 1))
    ajz = np.empty((E, n + 1))
    ajx[:, 0] = 0.0
    ajz[:, 0] = 0.0
    w2 = w * w
    for i in range(n):
        ajx[:, i + 1] = ajx[:, i] - length[:, i] * w2[:, i] * s[:, i]
        ajz[:, i + 1] = ajz[:, i] + length[:, i] * w2[:, i] * c[:, i]
    acx = ajx[:, :n] - com * w2 * s
    acz = ajz[:, :n] + com * w2 * c + gravity

    # Jacobian levers of COM i about joint k (valid for i >= k):
    # dp_i/dq_k = (-(cz_i - jz_k), cx_i - jx_k)
    M = np.zeros((E, d, d))
    rhs = np.zeros((E, d))
    off = 3 if floating else 0

    # joint-joint block
    for k1 in range(n):
        lav_x = -(cz[:, k1:] - jz[:, k1:k1 + 1])
        lav_z = cx[:, k1:] - jx[:, k1:k1 + 1]
        for k2 in range(k1, n):
            lbv_x = -(cz[:, k2:] - jz[:, k2:k2 + 1])
            lbv_z = cx[:, k2:] - jx[:, k2:k2 + 1]
            acc = np.zeros(E)
            for i in range(k2, n):
                ia = i - k1
                ib = i - k2
                acc += mass[:, i] * (lav_x[:, ia] * lbv_x[:, ib] + lav_z[:, ia] * lbv_z[:, ib]) \
                    + inertia[:, i]
            M[:, off + k1, off + k2] = acc
            M[:, off + k2, off + k1] = acc
        bias = np.zeros(E)
        for i in range(k1, n):
            ia = i - k1
            bias += mass[:, i] * (lav_x[:, ia] * acx[:, i] + lav_z[:, ia] * acz[:, i])
        rhs[:, off + k1] = tau[:, k1] - damping[:, k1] * qdot[:, k1] - bias

    if floating:
        msum = np.sum(mass, axis=1)
        # translation rows
        M[:, 0, 0] = root_mass + msum
        M[:, 1, 1] = root_mass + msum
        rhs[:, 0] = -np.sum(mass * acx, axis=1)
        rhs[:, 1] = -(np.sum(mass * acz, axis=1) + root_mass * gravity)
        # pitch row: lever about the root point
        pvx = -(cz - jz[:, 0:1])
        pvz = cx - jx[:, 0:1]
        M[:, 2, 2] = root_inertia + np.sum(mass * (pvx * pvx + pvz * pvz) + inertia, axis=1)
        M[:, 0, 2] = M[:, 2, 0] = np.sum(mass * pvx, axis=1)
        M[:, 1, 2] = M[:, 2, 1] = np.sum(mass * pvz, axis=1)
        rhs[:, 2] = -np.sum(mass * (pvx * acx + pvz * acz), axis=1)
        # translation-joint and pitch-joint couplings
        for k in range(n):
            lav_x = -(cz[:, k:] - jz[:, k:k + 1])
            lav_z = cx[:, k:] - jx[:, k:k + 1]
            mx = np.zeros(E)
            mz = np.zeros(E)
            mp = np.zeros(E)
            for i in range(k, n):
                ia = i - k
                mx += mass[:, i] * lav_x[:, ia]
                mz += mass[:, i] * lav_z[:, ia]
                mp += mass[:, i] * (pvx[:, i] * lav_x[:, ia] + pvz[:, i] * lav_z[:, ia]) \
                    + inertia[:, i]
            M[:, 0, off + k] = M[:, off + k, 0] = mx
            M[:, 1, off + k] = M[:, off + k, 1] = mz
            M[:, 2, off + k] = M[:, off + k, 2] = mp

    # point-foot contact at link endpoints
    contact = np.zeros((E, nf, 2))
    if floating and nf:
        vjx = np.empty((E, n + 1))
        vjz = np.empty((E, n + 1))
        vjx[:, 0] = rootdot[:, 0]
        vjz[:, 0] = rootdot[:, 1]
        for i in range(n):
            vjx[:, i + 1] = vjx[:, i] + length[:, i] * w[:, i] * c[:, i]
            vjz[:, i + 1] = vjz[:, i] + length[:, i] * w[:, i] * s[:, i]
        for f, lk in enumerate(foot_links):
            ex = jx[:, lk + 1]
            ez = jz[:, lk + 1]
            pen = -ez
            loaded = pen > 0.0
            normal = np.where(loaded, np.maximum(kn * pen - cn * vjz[:, lk + 1], 0.0), 0.0)
            cap = friction * normal
            tangent = np.clip(np.where(loaded, -ct * vjx[:, lk + 1], 0.0), -cap, cap)
            contact[:, f, 0] = tangent
            contact[:, f, 1] = normal
            # generalized force via the endpoint Jacobian
            rhs[:, 0] += tangent
            rhs[:, 1] += normal
            rhs[:, 2] += -(ez - jz[:, 0]) * tangent + (ex - jx[:, 0]) * normal
            for k in range(lk + 1):
                rhs[:, off + k] += -(ez - jz[:, k]) * tangent + (ex - jx[:, k]) * normal

    acc = _cholesky_solve(M, rhs)
    return acc, contact


def _cholesky_solve(M, rhs):
    """Batched LL^T solve; returns NaN rows for non-SPD systems."""
    E, d, _ = M.shape
    L = np.zeros((E, d, d))
    bad = np.zeros(E, dtype=bool)
    for j in range(d):
        acc = M[:, j, j].copy()
        for k in range(j):
            acc -= L[:, j, k] * L[:, j, k]
        bad |= ~(acc > 0.0)
        acc = np.where(acc > 0.0, acc, 1.0)
        L[:, j, j] = np.sqrt(acc)
        for i in range(j + 1, d):
            acc2 = M[:, i, j].copy()
            for k in range(j):
                acc2 -= L[:, i, k] * L[:, j, k]
            L[:, i, j] = acc2 / L[:, j, j]
    y = np.zeros((E, d))
    for i in range(d):
        acc = rhs[:, i].copy()
        for k in range(i):
            acc -= L[:, i, k] * y[:, k]
        y[:, i] = acc / L[:, i, i]
    x = np.zeros((E, d))
    for i in range(d - 1, -1, -1):
        acc = y[:, i].copy()
        for k in range(i + 1, d):
            acc -= L[:, k, i] * x[:, k]
        x[:, i] = acc / L[:, i, i]
    x[bad] = np.nan
    return x


def _integrate(q, qdot, root, rootdot, acc, dt, floating, upd):
    """Semi-implicit Euler on the active environments."""
    if floating:
        rootdot[upd] += dt * acc[upd, :3]
        root[upd] += dt * rootdot[upd]
        qdot[upd] += dt * acc[upd, 3:]
    else:
        qdot[upd] += dt * acc[upd]
    q[upd] += dt * qdot[upd]


def _still_finite(q, qdot, root, rootdot):
    ok = np.all(np.abs(q) < DIVERGE_LIMIT, axis=1) & np.all(np.isfinite(q), axis=1)
    ok &= np.all(np.abs(qdot) < DIVERGE_LIMIT, axis=1) & np.all(np.isfinite(qdot), axis=1)
    ok &= np.all(np.abs(root) < DIVERGE_LIMIT, axis=1) & np.all(np.isfinite(root), axis=1)
    ok &= np.all(np.abs(rootdot) < DIVERGE_LIMIT, axis=1) & np.all(np.isfinite(rootdot), axis=1)
    return ok


def step_control(q, qdot, root, rootdot, tar_new, tar_old, delay, kp, kd,
                 tq_noise, mass, com, length, inertia, damping, tlim,
                 root_mass, root_inertia, friction, foot_links, kn, cn, ct,
                 gravity, dt, n_substeps, floating,
                 tau_out, contact_out, diverged):
    """Run one control period: PD torques recomputed every substep against a
    held joint target (``tar_old`` for the first ``delay`` substeps)."""
    E, n = q.shape
    active = diverged == 0
    tau_acc = np.zeros((E, n))
    for sub in range(n_substeps):
        tar = np.where((delay > sub)[:, None], tar_old, tar_new)
        tau = kp * (tar - q) - kd * qdot + tq_noise
        tau = np.clip(tau, -tlim, tlim)
        tau_acc[active] += tau[active]

        snap = (q.copy(), qdot.copy(), root.copy(), rootdot.copy())
        acc, contact = _accel(q, qdot, root, rootdot, tau, mass, com, length,
                              inertia, damping, root_mass, root_inertia,
                              friction, foot_links, kn, cn, ct, gravity, floating)
        _integrate(q, qdot, root, rootdot, acc, dt, floating, active)
        ok = _still_finite(q, qdot, root, rootdot)
        newly_bad = active & ~ok
        if np.any(newly_bad):
            q[newly_bad] = snap[0][newly_bad]
            qdot[newly_bad] = snap[1][newly_bad]
            root[newly_bad] = snap[2][newly_bad]
            rootdot[newly_bad] = snap[3][newly_bad]
            diverged[newly_bad] = 1
            active = active & ok
        if contact.shape[1]:
            contact_out[active] = contact[active]
    tau_out[:] = tau_acc / n_substeps


def step_torque(q, qdot, root, rootdot, tau, mass, com, length, inertia,
                damping, root_mass, root_inertia, friction, foot_links,
                kn, cn, ct, gravity, dt, floating, contact_out, diverged):
    """One integration substep with an explicitly supplied torque."""
    active = diverged == 0
    snap = (q.copy(), qdot.copy(), root.copy(), rootdot.copy())
    acc, contact = _accel(q, qdot, root, rootdot, tau, mass, com, length,
                          inertia, damping, root_mass, root_inertia,
                          friction, foot_links, kn, cn, ct, gravity, floating)
    _integrate(q, qdot, root, rootdot, acc, dt, floating, active)
    ok = _still_finite(q, qdot, root, rootdot)
    newly_bad = active & ~ok
    if np.any(newly_bad):
        q[newly_bad] = snap[0][newly_bad]
        qdot[newly_bad] = snap[1][newly_bad]
        root[newly_bad] = snap[2][newly_bad]
        rootdot[newly_bad] = snap[3][newly_bad]
        diverged[newly_bad] = 1
    if contact.shape[1]:
        contact_out[active & ok] = contact[active & ok]


def accelerations(q, qdot, root, rootdot, tau, mass, com, length, inertia,
                  damping, root_mass, root_inertia, friction, foot_links,
                  kn, cn, ct, gravity, floating):
    """Expose forward dynamics directly (used by tests and diagnostics)."""
    acc, contact = _accel(q, qdot, root, rootdot, tau, mass, com, length,
                          inertia, damping, root_mass, root_inertia, friction,
                          foot_links, kn, cn, ct, gravity, floating)
    return acc, contact
