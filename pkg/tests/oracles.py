"""Independent oracles the implementation is checked against.

Everything here is deliberately written from first principles (symbolic
Lagrangian dynamics, brute-force search, definitional sums) and shares no
code with the package.
"""

import functools

import numpy as np
import sympy as sp


@functools.lru_cache(maxsize=None)
def lagrangian_dynamics(n, floating=False):
    """Dense planar-chain dynamics derived symbolically.

    Coordinates are [x, z, pitch, q_0..q_{n-1}] when floating, else just the
    relative joint angles. Convention: at q = 0 the chain hangs along -z; a
    link at absolute angle phi points along (sin phi, -cos phi).

    Returns ``f(coords, vels, masses, lengths, coms, inertias, root_mass,
    root_inertia, g) -> (M, bias)`` with M the mass matrix and bias the
    velocity-product plus gravity generalized forces, so that
    M qdd = generalized_force - bias.
    """
    q = list(sp.symbols(f"q0:{n}", real=True))
    qd = list(sp.symbols(f"qd0:{n}", real=True))
    base = list(sp.symbols("bx bz bth", real=True)) if floating else []
    based = list(sp.symbols("bxd bzd bthd", real=True)) if floating else []
    m = list(sp.symbols(f"m0:{n}", positive=True))
    l = list(sp.symbols(f"l0:{n}", positive=True))
    cd = list(sp.symbols(f"c0:{n}", positive=True))
    I = list(sp.symbols(f"I0:{n}", positive=True))
    mr, Ir, g = sp.symbols("mr Ir g", positive=True)

    coords = base + q
    vels = based + qd
    d = len(coords)

    T = sp.Integer(0)
    V = sp.Integer(0)
    if floating:
        T += mr * (based[0] ** 2 + based[1] ** 2) / 2 + Ir * based[2] ** 2 / 2
        V += mr * g * base[1]
    jx = base[0] if floating else sp.Integer(0)
    jz = base[1] if floating else sp.Integer(0)
    phi = base[2] if floating else sp.Integer(0)
    for i in range(n):
        phi = phi + q[i]
        cx = jx + cd[i] * sp.sin(phi)
        cz = jz - cd[i] * sp.cos(phi)
        vx = sum(sp.diff(cx, coords[k]) * vels[k] for k in range(d))
        vz = sum(sp.diff(cz, coords[k]) * vels[k] for k in range(d))
        wi = sum(sp.diff(phi, coords[k]) * vels[k] for k in range(d))
        T += m[i] * (vx**2 + vz**2) / 2 + I[i] * wi**2 / 2
        V += m[i] * g * cz
        jx = jx + l[i] * sp.sin(phi)
        jz = jz - l[i] * sp.cos(phi)

    M = sp.Matrix(d, d, lambda a, b: sp.diff(sp.diff(T, vels[a]), vels[b]))
    bias = []
    for a in range(d):
        dT_dv = sp.diff(T, vels[a])
        ddt = sum(sp.diff(dT_dv, coords[k]) * vels[k] for k in range(d))
        bias.append(ddt - sp.diff(T, coords[a]) + sp.diff(V, coords[a]))
    bias = sp.Matrix(bias)

    args = coords + vels + m + l + cd + I + [mr, Ir, g]
    f_M = sp.lambdify(args, M, "numpy")
    f_b = sp.lambdify(args, bias, "numpy")

    def evaluate(coords_v, vels_v, masses, lengths, coms, inertias,
                 root_mass=1.0, root_inertia=0.05, grav=9.81):
        vals = (list(coords_v) + list(vels_v) + list(masses) + list(lengths)
                + list(coms) + list(inertias) + [root_mass, root_inertia, grav])
        return (np.array(f_M(*vals), dtype=float),
                np.array(f_b(*vals), dtype=float).ravel())

    return evaluate


def oracle_accelerations(coords, vels, gen_force, masses, lengths, coms,
                         inertias, root_mass=1.0, root_inertia=0.05,
                         grav=9.81, floating=False):
    """Solve M qdd = gen_force - bias with the symbolic dense matrices."""
    n = len(masses)
    dyn = lagrangian_dynamics(n, floating)
    M, bias = dyn(coords, vels, masses, lengths, coms, inertias,
                  root_mass, root_inertia, grav)
    return np.linalg.solve(M, np.asarray(gen_force, dtype=float) - bias)


def pendulum_energy(m, l_c, inertia, q, qdot, grav=9.81):
    """Closed-form energy of a single hanging pendulum, zero at rest."""
    I_total = m * l_c**2 + inertia
    return 0.5 * I_total * qdot**2 + m * grav * l_c * (1.0 - np.cos(q))


def simplex_grid_min(P, U, resolution=1e-3):
    """Brute-force the balancing objective over a grid on the simplex.

    Only practical for S <= 3 segments; returns the best objective value.
    """
    P = np.asarray(P, dtype=float)
    U = np.asarray(U, dtype=float)
    S = P.shape[0]
    steps = int(round(1.0 / resolution))
    if S == 1:
        w = np.array([1.0])
        return float(np.sum((P.T @ w - U) ** 2)), w
    if S == 2:
        a = np.arange(steps + 1) / steps
        W = np.stack([a, 1.0 - a], axis=1)
    elif S == 3:
        a = np.arange(steps + 1) / steps
        g1, g2 = np.meshgrid(a, a, indexing="ij")
        keep = g1 + g2 <= 1.0 + 1e-12
        W = np.stack([g1[keep], g2[keep], 1.0 - g1[keep] - g2[keep]], axis=1)
    else:
        raise ValueError("grid oracle supports S <= 3")
    resid = W @ P - U
    obj = np.sum(resid**2, axis=1)
    best = int(np.argmin(obj))
    return float(obj[best]), W[best]


def simplex_grid_project(v, resolution=1e-4):
    """Nearest simplex point by grid search (dim <= 4)."""
    v = np.asarray(v, dtype=float)
    dim = len(v)
    steps = int(round(1.0 / resolution))
    if dim > 3:
        resolution = max(resolution, 2e-3)
        steps = int(round(1.0 / resolution))
    axes = [np.arange(steps + 1) / steps for _ in range(dim - 1)]
    grids = np.meshgrid(*axes, indexing="ij")
    total = sum(grids)
    keep = total <= 1.0 + 1e-12
    cols = [g[keep] for g in grids] + [1.0 - total[keep]]
    W = np.stack(cols, axis=1)
    d2 = np.sum((W - v) ** 2, axis=1)
    return W[int(np.argmin(d2))]


def gae_definitional(rewards, values, terminated, truncated, bootstrap,
                     tail_value, gamma, lam):
    """O(T^2) generalized-advantage estimate straight from the definition.

    A_t = sum_{k>=0} (gamma*lam)^k delta_{t+k}, with the sum cut at episode
    boundaries. ``bootstrap[t]`` is V(s_{t+1}) for truncated steps;
    ``tail_value`` closes the buffer.
    """
    T = len(rewards)
    deltas = np.empty(T)
    for t in range(T):
        if terminated[t]:
            v_next = 0.0
        elif truncated[t]:
            v_next = bootstrap[t]
        elif t + 1 < T:
            v_next = values[t + 1]
        else:
            v_next = tail_value
        deltas[t] = rewards[t] + gamma * v_next - values[t]
    adv = np.zeros(T)
    for t in range(T):
        factor = 1.0
        for k in range(t, T):
            adv[t] += factor * deltas[k]
            if terminated[k] or truncated[k]:
                break
            factor *= gamma * lam
    return adv


def finite_difference_gradient(f, x, h=1e-5):
    """Central finite differences of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        grad.flat[i] = (f(xp) - f(xm)) / (2 * h)
    return grad


def mlp_forward_reference(weights, biases, x):
    """Straightforward re-implementation of the dense forward pass."""
    h = np.asarray(x, dtype=float)
    for i, (W, b) in enumerate(zip(weights, biases)):
        h = h @ W.T + b
        if i < len(weights) - 1:
            h = np.maximum(h, 0.0)
    return h
