# Compiled simulation kernel; algorithmic twin of restrack._core_py.
# Keep the arithmetic sequence aligned with the numpy fallback: the two
# backends are cross-checked to floating-point roundoff in the test suite.

import numpy as np

from libc.math cimport cos, fabs, isfinite, sin, sqrt

BACKEND_NAME = "compiled"
DIVERGE_LIMIT = 1e8

DEF MAXD = 16      # max generalized coordinates (links + floating base)
DEF MAXF = 8       # max point feet

cdef double _DIV = 1e8


cdef int _accel_env(
    double* q, double* qdot, double* root, double* rootdot, double* tau,
    double* mass, double* com, double* length, double* inertia, double* damping,
    double root_mass, double root_inertia, double friction,
    long* foot_links, int nf, double kn, double cn, double ct,
    double gravity, bint floating, int n,
    double* acc_out, double* contact_out) noexcept nogil:
    """Forward dynamics for one chain. Returns 0 on success, 1 if the mass
    matrix lost positive definiteness."""
    cdef double s[MAXD]
    cdef double c[MAXD]
    cdef double w[MAXD]
    cdef double w2[MAXD]
    cdef double jx[MAXD]
    cdef double jz[MAXD]
    cdef double cxx[MAXD]
    cdef double czz[MAXD]
    cdef double ajx[MAXD]
    cdef double ajz[MAXD]
    cdef double acx[MAXD]
    cdef double acz[MAXD]
    cdef double vjx[MAXD]
    cdef double vjz[MAXD]
    cdef double M[MAXD][MAXD]
    cdef double L[MAXD][MAXD]
    cdef double rhs[MAXD]
    cdef double y[MAXD]
    cdef double pvx[MAXD]
    cdef double pvz[MAXD]
    cdef int i, k, k1, k2, f, lk, d, off
    cdef double phi_acc, w_acc, accv, bias, msum, mx, mz, mp
    cdef double ex, ez, pen, normal, tangent, cap
    cdef double lavx, lavz, lbvx, lbvz

    d = n + 3 if floating else n
    off = 3 if floating else 0

    phi_acc = root[2] if floating else 0.0
    w_acc = rootdot[2] if floating else 0.0
    for i in range(n):
        phi_acc = phi_acc + q[i]
        s[i] = sin(phi_acc)
        c[i] = cos(phi_acc)
        w_acc = w_acc + qdot[i]
        w[i] = w_acc
        w2[i] = w[i] * w[i]

    jx[0] = root[0] if floating else 0.0
    jz[0] = root[1] if floating else 0.0
    for i in range(n):
        jx[i + 1] = jx[i] + length[i] * s[i]
        jz[i + 1] = jz[i] - length[i] * c[i]
        cxx[i] = jx[i] + com[i] * s[i]
        czz[i] = jz[i] - com[i] * c[i]

    ajx[0] = 0.0
    ajz[0] = 0.0
    for i in range(n):
        ajx[i + 1] = ajx[i] - length[i] * w2[i] * s[i]
        ajz[i + 1] = ajz[i] + length[i] * w2[i] * c[i]
        acx[i] = ajx[i] - com[i] * w2[i] * s[i]
        acz[i] = ajz[i] + com[i] * w2[i] * c[i] + gravity

    for k1 in range(d):
        rhs[k1] = 0.0
        for k2 in range(d):
            M[k1][k2] = 0.0

    for k1 in range(n):
        for k2 in range(k1, n):
            accv = 0.0
            for i in range(k2, n):
                lavx = -(czz[i] - jz[k1])
                lavz = cxx[i] - jx[k1]
                lbvx = -(czz[i] - jz[k2])
                lbvz = cxx[i] - jx[k2]
                accv += mass[i] * (lavx * lbvx + lavz * lbvz) + inertia[i]
            M[off + k1][off + k2] = accv
            M[off + k2][off + k1] = accv
        bias = 0.0
        for i in range(k1, n):
            lavx = -(czz[i] - jz[k1])
            lavz = cxx[i] - jx[k1]
            bias += mass[i] * (lavx * acx[i] + lavz * acz[i])
        rhs[off + k1] = tau[k1] - damping[k1] * qdot[k1] - bias

    if floating:
        msum = 0.0
        for i in range(n):
            msum += mass[i]
        M[0][0] = root_mass + msum
        M[1][1] = root_mass + msum
        accv = 0.0
        for i in range(n):
            accv += mass[i] * acx[i]
        rhs[0] = -accv
        accv = 0.0
        for i in range(n):
            accv += mass[i] * acz[i]
        rhs[1] = -(accv + root_mass * gravity)
        for i in range(n):
            pvx[i] = -(czz[i] - jz[0])
            pvz[i] = cxx[i] - jx[0]
        accv = 0.0
        for i in range(n):
            accv += mass[i] * (pvx[i] * pvx[i] + pvz[i] * pvz[i]) + inertia[i]
        M[2][2] = root_inertia + accv
        accv = 0.0
        for i in range(n):
            accv += mass[i] * pvx[i]
        M[0][2] = accv
        M[2][0] = accv
        accv = 0.0
        for i in range(n):
            accv += mass[i] * pvz[i]
        M[1][2] = accv
        M[2][1] = accv
        accv = 0.0
        for i in range(n):
            accv += mass[i] * (pvx[i] * acx[i] + pvz[i] * acz[i])
        rhs[2] = -accv
        for k in range(n):
            mx = 0.0
            mz = 0.0
            mp = 0.0
            for i in range(k, n):
                lavx = -(czz[i] - jz[k])
                lavz = cxx[i] - jx[k]
                mx += mass[i] * lavx
                mz += mass[i] * lavz
                mp += mass[i] * (pvx[i] * lavx + pvz[i] * lavz) + inertia[i]
            M[0][off + k] = mx
            M[off + k][0] = mx
            M[1][off + k] = mz
            M[off + k][1] = mz
            M[2][off + k] = mp
            M[off + k][2] = mp

    for f in range(nf):
        contact_out[2 * f] = 0.0
        contact_out[2 * f + 1] = 0.0
    if floating and nf > 0:
        vjx[0] = rootdot[0]
        vjz[0] = rootdot[1]
        for i in range(n):
            vjx[i + 1] = vjx[i] + length[i] * w[i] * c[i]
            vjz[i + 1] = vjz[i] + length[i] * w[i] * s[i]
        for f in range(nf):
            lk = <int> foot_links[f]
            ex = jx[lk + 1]
            ez = jz[lk + 1]
            pen = -ez
            normal = 0.0
            tangent = 0.0
            if pen > 0.0:
                normal = kn * pen - cn * vjz[lk + 1]
                if normal < 0.0:
                    normal = 0.0
                tangent = -ct * vjx[lk + 1]
                cap = friction * normal
                if tangent > cap:
                    tangent = cap
                elif tangent < -cap:
                    tangent = -cap
            contact_out[2 * f] = tangent
            contact_out[2 * f + 1] = normal
            rhs[0] += tangent
            rhs[1] += normal
            rhs[2] += -(ez - jz[0]) * tangent + (ex - jx[0]) * normal
            for k in range(lk + 1):
                rhs[off + k] += -(ez - jz[k]) * tangent + (ex - jx[k]) * normal

    # LL^T factorization and solve
    for k1 in range(d):
        accv = M[k1][k1]
        for k in range(k1):
            accv -= L[k1][k] * L[k1][k]
        if not accv > 0.0:
            return 1
        L[k1][k1] = sqrt(accv)
        for i in range(k1 + 1, d):
            accv = M[i][k1]
            for k in range(k1):
                accv -= L[i][k] * L[k1][k]
            L[i][k1] = accv / L[k1][k1]
    for i in range(d):
        accv = rhs[i]
        for k in range(i):
            accv -= L[i][k] * y[k]
        y[i] = accv / L[i][i]
    for i in range(d - 1, -1, -1):
        accv = y[i]
        for k in range(i + 1, d):
            accv -= L[k][i] * acc_out[k]
        acc_out[i] = accv / L[i][i]
    return 0


cdef bint _finite_env(double* q, double* qdot, double* root, double* rootdot,
                      int n) noexcept nogil:
    cdef int i
    for i in range(n):
        if not (isfinite(q[i]) and fabs(q[i]) < _DIV):
            return False
        if not (isfinite(qdot[i]) and fabs(qdot[i]) < _DIV):
            return False
    for i in range(3):
        if not (isfinite(root[i]) and fabs(root[i]) < _DIV):
            return False
        if not (isfinite(rootdot[i]) and fabs(rootdot[i]) < _DIV):
            return False
    return True


def step_control(double[:, ::1] q, double[:, ::1] qdot,
                 double[:, ::1] root, double[:, ::1] rootdot,
                 double[:, ::1] tar_new, double[:, ::1] tar_old,
                 long[::1] delay,
                 double[:, ::1] kp, double[:, ::1] kd, double[:, ::1] tq_noise,
                 double[:, ::1] mass, double[:, ::1] com, double[:, ::1] length,
                 double[:, ::1] inertia, double[:, ::1] damping, double[:, ::1] tlim,
                 double[::1] root_mass, double[::1] root_inertia, double[::1] friction,
                 long[::1] foot_links, double kn, double cn, double ct,
                 double gravity, double dt, int n_substeps, bint floating,
                 double[:, ::1] tau_out, double[:, :, ::1] contact_out,
                 unsigned char[::1] diverged):
    cdef int E = q.shape[0]
    cdef int n = q.shape[1]
    cdef int nf = foot_links.shape[0]
    cdef int e, sub, j, i, bad
    cdef double tar, t
    cdef double tau[MAXD]
    cdef double acc[MAXD]
    cdef double cforce[2 * MAXF]
    cdef double sq[MAXD]
    cdef double sqd[MAXD]
    cdef double sroot[3]
    cdef double srootdot[3]

    if n + 3 > MAXD or nf > MAXF:
        raise ValueError("chain too large for compiled kernel")

    for e in range(E):
        for j in range(n):
            tau_out[e, j] = 0.0
        if diverged[e]:
            continue
        for sub in range(n_substeps):
            for j in range(n):
                tar = tar_old[e, j] if sub < delay[e] else tar_new[e, j]
                t = kp[e, j] * (tar - q[e, j]) - kd[e, j] * qdot[e, j] + tq_noise[e, j]
                if t > tlim[e, j]:
                    t = tlim[e, j]
                elif t < -tlim[e, j]:
                    t = -tlim[e, j]
                tau[j] = t
                tau_out[e, j] += t
            for j in range(n):
                sq[j] = q[e, j]
                sqd[j] = qdot[e, j]
            for j in range(3):
                sroot[j] = root[e, j]
                srootdot[j] = rootdot[e, j]
            bad = _accel_env(&q[e, 0], &qdot[e, 0], &root[e, 0], &rootdot[e, 0],
                             tau, &mass[e, 0], &com[e, 0], &length[e, 0],
                             &inertia[e, 0], &damping[e, 0],
                             root_mass[e], root_inertia[e], friction[e],
                             &foot_links[0] if nf else NULL, nf, kn, cn, ct,
                             gravity, floating, n, acc, cforce)
            if not bad:
                if floating:
                    for j in range(3):
                        rootdot[e, j] = rootdot[e, j] + dt * acc[j]
                        root[e, j] = root[e, j] + dt * rootdot[e, j]
                    for j in range(n):
                        qdot[e, j] = qdot[e, j] + dt * acc[3 + j]
                else:
                    for j in range(n):
                        qdot[e, j] = qdot[e, j] + dt * acc[j]
                for j in range(n):
                    q[e, j] = q[e, j] + dt * qdot[e, j]
                bad = not _finite_env(&q[e, 0], &qdot[e, 0], &root[e, 0],
                                      &rootdot[e, 0], n)
            if bad:
                for j in range(n):
                    q[e, j] = sq[j]
                    qdot[e, j] = sqd[j]
                for j in range(3):
                    root[e, j] = sroot[j]
                    rootdot[e, j] = srootdot[j]
                diverged[e] = 1
                break
            for i in range(nf):
                contact_out[e, i, 0] = cforce[2 * i]
                contact_out[e, i, 1] = cforce[2 * i + 1]
        for j in range(n):
            tau_out[e, j] = tau_out[e, j] / n_substeps


def step_torque(double[:, ::1] q, double[:, ::1] qdot,
                double[:, ::1] root, double[:, ::1] rootdot,
                double[:, ::1] tau,
                double[:, ::1] mass, double[:, ::1] com, double[:, ::1] length,
                double[:, ::1] inertia, double[:, ::1] damping,
                double[::1] root_mass, double[::1] root_inertia, double[::1] friction,
                long[::1] foot_links, double kn, double cn, double ct,
                double gravity, double dt, bint floating,
                double[:, :, ::1] contact_out, unsigned char[::1] diverged):
    cdef int E = q.shape[0]
    cdef int n = q.shape[1]
    cdef int nf = foot_links.shape[0]
    cdef int e, j, i, bad
    cdef double acc[MAXD]
    cdef double cforce[2 * MAXF]
    cdef double sq[MAXD]
    cdef double sqd[MAXD]
    cdef double sroot[3]
    cdef double srootdot[3]

    if n + 3 > MAXD or nf > MAXF:
        raise ValueError("chain too large for compiled kernel")

    for e in range(E):
        if diverged[e]:
            continue
        for j in range(n):
            sq[j] = q[e, j]
            sqd[j] = qdot[e, j]
        for j in range(3):
            sroot[j] = root[e, j]
            srootdot[j] = rootdot[e, j]
        bad = _accel_env(&q[e, 0], &qdot[e, 0], &root[e, 0], &rootdot[e, 0],
                         &tau[e, 0], &mass[e, 0], &com[e, 0], &length[e, 0],
                         &inertia[e, 0], &damping[e, 0],
                         root_mass[e], root_inertia[e], friction[e],
                         &foot_links[0] if nf else NULL, nf, kn, cn, ct,
                         gravity, floating, n, acc, cforce)
        if not bad:
            if floating:
                for j in range(3):
                    rootdot[e, j] = rootdot[e, j] + dt * acc[j]
                    root[e, j] = root[e, j] + dt * rootdot[e, j]
                for j in range(n):
                    qdot[e, j] = qdot[e, j] + dt * acc[3 + j]
            else:
                for j in range(n):
                    qdot[e, j] = qdot[e, j] + dt * acc[j]
            for j in range(n):
                q[e, j] = q[e, j] + dt * qdot[e, j]
            bad = not _finite_env(&q[e, 0], &qdot[e, 0], &root[e, 0],
                                  &rootdot[e, 0], n)
        if bad:
            for j in range(n):
                q[e, j] = sq[j]
                qdot[e, j] = sqd[j]
            for j in range(3):
                root[e, j] = sroot[j]
                rootdot[e, j] = srootdot[j]
            diverged[e] = 1
        else:
            for i in range(nf):
                contact_out[e, i, 0] = cforce[2 * i]
                contact_out[e, i, 1] = cforce[2 * i + 1]


def accelerations(double[:, ::1] q, double[:, ::1] qdot,
                  double[:, ::1] root, double[:, ::1] rootdot,
                  double[:, ::1] tau,
                  double[:, ::1] mass, double[:, ::1] com, double[:, ::1] length,
                  double[:, ::1] inertia, double[:, ::1] damping,
                  double[::1] root_mass, double[::1] root_inertia, double[::1] friction,
                  long[::1] foot_links, double kn, double cn, double ct,
                  double gravity, bint floating):
    cdef int E = q.shape[0]
    cdef int n = q.shape[1]
    cdef int nf = foot_links.shape[0]
    cdef int d = n + 3 if floating else n
    cdef int e, j, i, bad
    cdef double acc[MAXD]
    cdef double cforce[2 * MAXF]

    if n + 3 > MAXD or nf > MAXF:
        raise ValueError("chain too large for compiled kernel")

    out = np.full((E, d), np.nan)
    contact = np.zeros((E, max(nf, 1), 2))
    cdef double[:, ::1] out_v = out
    cdef double[:, :, ::1] contact_v = contact
    for e in range(E):
        bad = _accel_env(&q[e, 0], &qdot[e, 0], &root[e, 0], &rootdot[e, 0],
                         &tau[e, 0], &mass[e, 0], &com[e, 0], &length[e, 0],
                         &inertia[e, 0], &damping[e, 0],
                         root_mass[e], root_inertia[e], friction[e],
                         &foot_links[0] if nf else NULL, nf, kn, cn, ct,
                         gravity, floating, n, acc, cforce)
        if not bad:
            for j in range(d):
                out_v[e, j] = acc[j]
            for i in range(nf):
                contact_v[e, i, 0] = cforce[2 * i]
                contact_v[e, i, 1] = cforce[2 * i + 1]
    return out, contact[:, :nf]
