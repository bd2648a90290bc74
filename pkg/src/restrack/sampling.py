"""Start-state sampling: offline distribution balancing, online
failure-aware priorities, and reference-state initialization."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ContractViolation
from .model import RobotModel, SimState
from .motion import MotionClip, Segment


def simplex_project(v) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = 1} (sort-based, exact)."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ContractViolation("simplex_project: non-finite input")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    cond = u - css / ks > 0
    rho = np.nonzero(cond)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


@dataclass(eq=False)
class BalanceProblem:
    """Least-squares matching of the blended occupancy to a target."""

    P: np.ndarray            # (S, B) rows are per-segment occupancy histograms
    U: np.ndarray = None     # (B,) target distribution; default uniform

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64)
        if self.P.ndim != 2:
            raise ContractViolation("BalanceProblem: P must be 2-D")
        S, B = self.P.shape
        if self.U is None:
            self.U = np.full(B, 1.0 / B)
        self.U = np.asarray(self.U, dtype=np.float64)
        if self.U.shape != (B,):
            raise ContractViolation("BalanceProblem: U dimension mismatch")
        if np.any(self.P < -1e-12) or np.any(self.U < -1e-12):
            raise ContractViolation("BalanceProblem: negative entries")
        if np.max(np.abs(self.P.sum(axis=1) - 1.0)) > 1e-6:
            raise ContractViolation("BalanceProblem: P rows must sum to 1")
        if abs(self.U.sum() - 1.0) > 1e-6:
            raise ContractViolation("BalanceProblem: U must sum to 1")

    def objective(self, w) -> float:
        r = w @ self.P - self.U
        return float(r @ r)

    def gradient(self, w) -> np.ndarray:
        return 2.0 * (w @ self.P - self.U) @ self.P.T


@dataclass(eq=False)
class BalanceWeights:
    w: np.ndarray
    objective: float
    iterations: int
    converged: bool


def balance_weights(problem: BalanceProblem, max_iters: int = 200_000,
                    tol: float = 1e-13) -> BalanceWeights:
    """Projected gradient with exact simplex projection.

    The objective is convex and smooth; the step is 1/L with
    L = 2 sigma_max(P)^2. Deterministic. If the iterate stops moving by
    less than ``tol`` (max-norm) the solve is flagged converged, else the
    best iterate found under the iteration cap is returned.
    """
    P = problem.P
    S = P.shape[0]
    if S == 1:
        w = np.array([1.0])
        return BalanceWeights(w, problem.objective(w), 0, True)
    L = 2.0 * np.linalg.norm(P, 2) ** 2
    step = 1.0 / max(L, 1e-12)
    w = np.full(S, 1.0 / S)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        w_new = simplex_project(w - step * problem.gradient(w))
        delta = np.max(np.abs(w_new - w))
        w = w_new
        if delta < tol:
            converged = True
            break
    return BalanceWeights(w, problem.objective(w), it, converged)


def kkt_residual(problem: BalanceProblem, w, active_tol: float = 1e-9) -> float:
    """Stationarity violation on the simplex.

    At an optimum the gradient is constant over the support and no smaller
    off it; returns the maximum deviation from that pattern.
    """
    g = problem.gradient(w)
    active = w > active_tol
    if not np.any(active):
        return float("inf")
    nu = float(np.mean(g[active]))
    res = float(np.max(np.abs(g[active] - nu)))
    if np.any(~active):
        res = max(res, max(float(np.max(nu - g[~active])), 0.0))
    return res


@dataclass(eq=False)
class PriorityState:
    """Per-segment EMA failure scores and the temper parameters."""

    r: np.ndarray
    alpha: float = 0.1
    beta: float = 2.0
    epsilon: float = 0.01

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=np.float64).copy()
        if not (0.0 < self.alpha <= 1.0):
            raise ContractViolation("alpha must lie in (0, 1]")
        if self.beta < 0 or self.epsilon <= 0:
            raise ContractViolation("require beta >= 0 and epsilon > 0")
        if np.any(self.r < 0) or np.any(self.r > 1):
            raise ContractViolation("r scores must lie in [0, 1]")


def priority_state(n_segments: int, alpha=0.1, beta=2.0, epsilon=0.01) -> PriorityState:
    return PriorityState(r=np.zeros(n_segments), alpha=alpha, beta=beta, epsilon=epsilon)


def ema_update(state: PriorityState, segment: int, failed) -> PriorityState:
    """r_s <- (1 - alpha) r_s + alpha * failed, other segments untouched."""
    if not 0 <= segment < state.r.size:
        raise ContractViolation("ema_update: segment index out of range")
    f = float(failed)
    r = state.r.copy()
    r[segment] = min(max((1.0 - state.alpha) * r[segment] + state.alpha * f, 0.0), 1.0)
    return replace(state, r=r)


def tempered_prior(state: PriorityState) -> np.ndarray:
    """p_s proportional to (r_s + epsilon)^beta; strictly positive, sums to 1."""
    weights = (state.r + state.epsilon) ** state.beta
    return weights / weights.sum()


@dataclass
class RsiJitter:
    """Per-channel reset perturbation standard deviations."""

    q: float = 0.0
    qdot: float = 0.0
    root_pos: float = 0.0
    root_vel: float = 0.0
    root_pitch: float = 0.0
    root_pitch_rate: float = 0.0

    @classmethod
    def uniform(cls, std: float) -> "RsiJitter":
        return cls(q=std, qdot=std, root_pos=std, root_vel=std,
                   root_pitch=std, root_pitch_rate=std)


@dataclass
class SamplerConfig:
    """Mixture over the three start-state branches plus RSI jitter.

    The priority branch is uninformative before failures accumulate, so its
    share ramps in linearly over ``priority_warmup_iters`` (mass meanwhile
    goes to uniform-time sampling).
    """

    mix: tuple = (0.3, 0.35, 0.35)  # (uniform_time, balanced, priority)
    rsi_jitter: RsiJitter = field(default_factory=RsiJitter)
    priority_warmup_iters: int = 50
    attribute_to: str = "start"  # failure credit: 'start' or 'termination' segment

    def __post_init__(self):
        m = np.asarray(self.mix, dtype=np.float64)
        if m.shape != (3,) or np.any(m < 0) or abs(m.sum() - 1.0) > 1e-9:
            raise ContractViolation("mix must be 3 nonnegative entries summing to 1")
        if self.attribute_to not in ("start", "termination"):
            raise ContractViolation("attribute_to must be 'start' or 'termination'")

    def effective_mix(self, iteration=None) -> np.ndarray:
        m = np.asarray(self.mix, dtype=np.float64)
        if iteration is None or self.priority_warmup_iters <= 0:
            return m
        ramp = min(1.0, iteration / self.priority_warmup_iters)
        pr = m[2] * ramp
        return np.array([m[0] + (m[2] - pr), m[1], pr])


def sample_start(sampler: SamplerConfig, w, p, clips, segments, rng,
                 iteration=None):
    """Draw an episode start as (clip_id, frame).

    Branches: uniform over all frames of all clips; segment ~ balanced
    weights then a uniform frame inside it; segment ~ tempered priority
    then a uniform frame inside it. The final frame of a clip is never
    returned (an episode must have at least one step of reference left).
    """
    w = np.asarray(getattr(w, "w", w), dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if len(w) != len(segments) or len(p) != len(segments):
        raise ContractViolation("sample_start: weights must cover all segments")
    mix = sampler.effective_mix(iteration)
    branch = rng.choice(3, p=mix)
    if branch == 0:
        lengths = np.array([c.n_frames - 1 for c in clips])  # last frame excluded
        flat = rng.integers(0, lengths.sum())
        clip_id = int(np.searchsorted(np.cumsum(lengths), flat, side="right"))
        frame = int(flat - np.concatenate([[0], np.cumsum(lengths)])[clip_id])
        return clip_id, frame
    dist = w if branch == 1 else p
    seg = segments[rng.choice(len(segments), p=dist / dist.sum())]
    clip = clips[seg.clip_id]
    end = min(seg.end_frame, clip.n_frames - 1)
    frame = int(rng.integers(seg.start_frame, max(end, seg.start_frame + 1)))
    return seg.clip_id, frame


def segment_of_frame(segments, clip_id: int, frame: int) -> int:
    """Global segment index containing (clip_id, frame)."""
    for idx, s in enumerate(segments):
        if s.clip_id == clip_id and s.start_frame <= frame < s.end_frame:
            return idx
    raise ContractViolation(f"frame {frame} of clip {clip_id} not covered by segments")


def rsi_state(clip: MotionClip, frame: int, jitter: RsiJitter,
              rng: np.random.Generator, model: RobotModel) -> SimState:
    """Reset state = reference frame + Gaussian jitter, joints clamped to
    limits. Draw order is fixed (q, qdot, root_pos, root_vel, pitch,
    pitch rate) so resets are reproducible per generator state."""
    if not 0 <= frame < clip.n_frames:
        raise ContractViolation("rsi_state: frame out of range")
    n = clip.n_joints
    q = clip.q[frame] + jitter.q * rng.standard_normal(n)
    qdot = clip.qdot[frame] + jitter.qdot * rng.standard_normal(n)
    root_pos = clip.root_pos[frame] + jitter.root_pos * rng.standard_normal(2)
    root_vel = clip.root_vel[frame] + jitter.root_vel * rng.standard_normal(2)
    pitch = clip.root_pitch[frame] + jitter.root_pitch * rng.standard_normal()
    pitch_rate = clip.root_pitch_rate[frame] + jitter.root_pitch_rate * rng.standard_normal()
    q = np.clip(q, model.joint_limit_lo, model.joint_limit_hi)
    if not model.floating:
        root_pos = np.zeros(2)
        root_vel = np.zeros(2)
        pitch = 0.0
        pitch_rate = 0.0
    return SimState(
        q=q, qdot=qdot, root_pos=root_pos, root_vel=root_vel,
        root_pitch=float(pitch), root_pitch_rate=float(pitch_rate),
        contact_forces=np.zeros((len(model.foot_links), 2)),
    )
