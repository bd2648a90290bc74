"""Reference motion clips: storage, synthesis, segmentation and statistics."""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ClipParseError, ConfigError, ContractViolation

_MAGIC = b"RTCLIP01"


@dataclass(eq=False)
class MotionClip:
    """Time-indexed reference frames, stored as contiguous arrays."""

    name: str
    fps: float
    q: np.ndarray            # (T, n) joint position references, rad
    qdot: np.ndarray         # (T, n) rad/s
    root_pos: np.ndarray     # (T, 2) m
    root_vel: np.ndarray     # (T, 2) m/s
    root_pitch: np.ndarray   # (T,) rad
    root_pitch_rate: np.ndarray  # (T,) rad/s

    def __post_init__(self):
        arrays = ("q", "qdot", "root_pos", "root_vel", "root_pitch", "root_pitch_rate")
        for a in arrays:
            setattr(self, a, np.ascontiguousarray(getattr(self, a), dtype=np.float64))
        if self.fps <= 0:
            raise ClipParseError("fps must be positive")
        if self.q.ndim != 2 or self.q.shape[0] < 2:
            raise ClipParseError("a clip needs at least 2 frames")
        T = self.q.shape[0]
        shapes = {
            "qdot": (T, self.q.shape[1]), "root_pos": (T, 2), "root_vel": (T, 2),
            "root_pitch": (T,), "root_pitch_rate": (T,),
        }
        for a, shp in shapes.items():
            if getattr(self, a).shape != shp:
                raise ClipParseError(f"{a}: expected shape {shp}, got {getattr(self, a).shape}")
        for a in arrays:
            vals = getattr(self, a)
            bad = ~np.isfinite(vals).reshape(T, -1).all(axis=1)
            if np.any(bad):
                raise ClipParseError(f"non-finite value in frame {int(np.argmax(bad))} ({a})")

    @property
    def n_frames(self) -> int:
        return self.q.shape[0]

    @property
    def n_joints(self) -> int:
        return self.q.shape[1]

    @property
    def duration(self) -> float:
        return self.n_frames / self.fps

    def frame(self, i: int) -> "MotionFrame":
        return MotionFrame(
            q_ref=self.q[i], qdot_ref=self.qdot[i],
            root_pos_ref=self.root_pos[i], root_vel_ref=self.root_vel[i],
            root_pitch_ref=float(self.root_pitch[i]),
            root_pitch_rate_ref=float(self.root_pitch_rate[i]),
        )

    def clamped_to(self, lo, hi) -> "MotionClip":
        """Copy with joint references clamped into [lo, hi] (load-time rule)."""
        return MotionClip(
            name=self.name, fps=self.fps, q=np.clip(self.q, lo, hi),
            qdot=self.qdot.copy(), root_pos=self.root_pos.copy(),
            root_vel=self.root_vel.copy(), root_pitch=self.root_pitch.copy(),
            root_pitch_rate=self.root_pitch_rate.copy(),
        )


@dataclass(eq=False)
class MotionFrame:
    q_ref: np.ndarray
    qdot_ref: np.ndarray
    root_pos_ref: np.ndarray
    root_vel_ref: np.ndarray
    root_pitch_ref: float
    root_pitch_rate_ref: float


@dataclass(frozen=True)
class Segment:
    """One-second window of a clip (the last one may be shorter)."""

    clip_id: int
    start_frame: int
    end_frame: int
    short: bool = False

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame


@dataclass(eq=False)
class JointStats:
    segment_mean: np.ndarray  # (S, n)
    segment_std: np.ndarray   # (S, n)
    clip_mean: np.ndarray     # (n_clips, n)
    clip_std: np.ndarray      # (n_clips, n)


def save_clip(clip: MotionClip, path) -> None:
    """Self-describing binary layout; byte-exact round trips."""
    name = clip.name.encode("utf-8")
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<IIId", len(name), clip.n_joints, clip.n_frames, clip.fps))
    buf.write(name)
    for arr in (clip.q, clip.qdot, clip.root_pos, clip.root_vel,
                clip.root_pitch, clip.root_pitch_rate):
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_clip(path) -> MotionClip:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _MAGIC:
        raise ClipParseError(f"{path}: bad magic (not a clip file)")
    name_len, n_joints, n_frames, fps = struct.unpack_from("<IIId", raw, 8)
    off = 8 + struct.calcsize("<IIId")
    name = raw[off:off + name_len].decode("utf-8")
    off += name_len
    counts = [n_frames * n_joints, n_frames * n_joints, n_frames * 2,
              n_frames * 2, n_frames, n_frames]
    expected = off + 8 * sum(counts)
    if len(raw) != expected:
        raise ClipParseError(f"{path}: truncated or oversized body "
                             f"({len(raw)} bytes, expected {expected})")
    arrays = []
    for cnt in counts:
        arrays.append(np.frombuffer(raw, dtype="<f8", count=cnt, offset=off).astype(np.float64))
        off += 8 * cnt
    try:
        return MotionClip(
            name=name, fps=fps,
            q=arrays[0].reshape(n_frames, n_joints),
            qdot=arrays[1].reshape(n_frames, n_joints),
            root_pos=arrays[2].reshape(n_frames, 2),
            root_vel=arrays[3].reshape(n_frames, 2),
            root_pitch=arrays[4], root_pitch_rate=arrays[5],
        )
    except ClipParseError as exc:
        raise ClipParseError(f"{path}: {exc}") from exc


def load_csv(path, fps: float, name=None) -> MotionClip:
    """Import positions from CSV (header: joint_0..joint_{n-1},root_x,root_z,
    root_pitch); velocities are filled by finite differences."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ClipParseError(f"{path}: empty file")
        header = [h.strip() for h in header]
        n = sum(1 for h in header if h.startswith("joint_"))
        expected = [f"joint_{i}" for i in range(n)] + ["root_x", "root_z", "root_pitch"]
        if header != expected:
            raise ClipParseError(f"{path}: bad header {header!r}, expected {expected!r}")
        rows = []
        for k, row in enumerate(reader):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ClipParseError(f"{path}: unparsable value in frame {k}") from exc
            if len(rows[-1]) != len(expected):
                raise ClipParseError(f"{path}: wrong column count in frame {k}")
    if len(rows) < 2:
        raise ClipParseError(f"{path}: need at least 2 frames")
    data = np.asarray(rows, dtype=np.float64)
    T = data.shape[0]
    clip = MotionClip(
        name=name or str(path), fps=fps,
        q=data[:, :n], qdot=np.zeros((T, n)),
        root_pos=data[:, n:n + 2], root_vel=np.zeros((T, 2)),
        root_pitch=data[:, n + 2], root_pitch_rate=np.zeros(T),
    )
    return finite_difference_velocities(clip)


def finite_difference_velocities(clip: MotionClip) -> MotionClip:
    """Fill velocity channels: central differences inside, one-sided at the
    ends, scaled by fps. Exact on degree-1 polynomials."""

    def fd(x):
        x = np.asarray(x, dtype=np.float64)
        out = np.empty_like(x)
        out[1:-1] = (x[2:] - x[:-2]) * (clip.fps / 2.0)
        out[0] = (x[1] - x[0]) * clip.fps
        out[-1] = (x[-1] - x[-2]) * clip.fps
        return out

    return MotionClip(
        name=clip.name, fps=clip.fps, q=clip.q.copy(), qdot=fd(clip.q),
        root_pos=clip.root_pos.copy(), root_vel=fd(clip.root_pos),
        root_pitch=clip.root_pitch.copy(), root_pitch_rate=fd(clip.root_pitch),
    )


@dataclass
class SynthSpec:
    """Parameters for the synthetic reference generator.

    Per-joint trajectories are sums of phrase-wise sinusoids blended C^1 by
    smoothstep windows. A ``tail_fraction`` minority of phrases use
    amplitudes near the joint-limit extremes on the ``extreme_joints``.
    Bands are (lo, hi) rows per joint; scalars broadcast.
    """

    n_joints: int
    duration_s: float
    fps: float = 50.0
    n_phrases: int = 6
    amplitude: object = (0.3, 0.8)       # rad
    frequency: object = (0.3, 1.0)       # Hz
    phase: tuple = (0.0, 6.283185307179586)
    offset: object = (0.0, 0.0)          # rad
    tail_fraction: float = 0.0
    extreme_amplitude: tuple = (0.8, 0.95)  # fraction of feasible headroom
    extreme_joints: object = None        # default: all joints
    joint_limit_lo: object = -2.7
    joint_limit_hi: object = 2.7
    limit_margin: float = 0.02           # fraction of the joint range
    root_height: float = 0.0

    def band(self, attr):
        v = np.asarray(getattr(self, attr), dtype=np.float64)
        if v.ndim == 1:
            v = np.tile(v, (self.n_joints, 1))
        if v.shape != (self.n_joints, 2):
            raise ConfigError(f"synth band {attr}: expected (n_joints, 2)")
        if np.any(v[:, 0] > v[:, 1]):
            raise ConfigError(f"synth band {attr}: lo > hi")
        return v


def _smoothstep(u):
    return u * u * (3.0 - 2.0 * u)


def _smoothstep_d(u):
    return 6.0 * u * (1.0 - u)


def synth_reference(spec: SynthSpec, seed) -> MotionClip:
    """Deterministic per seed; respects joint limits for every frame."""
    rng = np.random.default_rng(seed)
    n = spec.n_joints
    T = int(round(spec.duration_s * spec.fps))
    if T < 2:
        raise ConfigError("synth: need at least 2 frames of duration")
    t = np.arange(T) / spec.fps

    lo = np.broadcast_to(np.asarray(spec.joint_limit_lo, dtype=np.float64), (n,))
    hi = np.broadcast_to(np.asarray(spec.joint_limit_hi, dtype=np.float64), (n,))
    margin = spec.limit_margin * (hi - lo)
    amp_band = spec.band("amplitude")
    freq_band = spec.band("frequency")
    off_band = spec.band("offset")
    extreme_joints = (np.arange(n) if spec.extreme_joints is None
                      else np.asarray(spec.extreme_joints, dtype=int))

    # phrase boundaries: near-equal durations with +-30% jitter
    P = max(1, int(spec.n_phrases))
    rel = rng.uniform(0.7, 1.3, P)
    bounds = np.concatenate([[0.0], np.cumsum(rel) / rel.sum() * spec.duration_s])

    # per-(phrase, joint) parameters
    offset = rng.uniform(off_band[:, 0], off_band[:, 1], (P, n))
    amp = rng.uniform(amp_band[:, 0], amp_band[:, 1], (P, n))
    freq = rng.uniform(freq_band[:, 0], freq_band[:, 1], (P, n))
    phase = rng.uniform(spec.phase[0], spec.phase[1], (P, n))
    extreme = rng.random(P) < spec.tail_fraction
    for p in range(P):
        if extreme[p]:
            frac = rng.uniform(*spec.extreme_amplitude, len(extreme_joints))
            head = np.minimum(hi[extreme_joints] - margin[extreme_joints] - offset[p, extreme_joints],
                              offset[p, extreme_joints] - (lo[extreme_joints] + margin[extreme_joints]))
            amp[p, extreme_joints] = frac * head
    room_hi = hi - margin - (offset + amp)
    room_lo = (offset - amp) - (lo + margin)
    if np.any(room_hi < 0) or np.any(room_lo < 0):
        raise ConfigError("synth: amplitude band exceeds joint limits; "
                          "shrink amplitude/offset or widen limits")

    # evaluate phrases then blend across boundaries
    sig = np.empty((P, T, n))
    dsig = np.empty((P, T, n))
    for p in range(P):
        arg = 2 * np.pi * freq[p] * t[:, None] + phase[p]
        sig[p] = offset[p] + amp[p] * np.sin(arg)
        dsig[p] = amp[p] * 2 * np.pi * freq[p] * np.cos(arg)

    q = np.empty((T, n))
    qd = np.empty((T, n))
    phrase_of = np.clip(np.searchsorted(bounds, t, side="right") - 1, 0, P - 1)
    for p in range(P):
        m = phrase_of == p
        q[m] = sig[p][m]
        qd[m] = dsig[p][m]
    for b in range(1, P):
        width = min(0.5, 0.5 * min(bounds[b] - bounds[b - 1], bounds[b + 1] - bounds[b]))
        if width <= 0:
            continue
        m = np.abs(t - bounds[b]) < width
        u = (t[m] - (bounds[b] - width)) / (2 * width)
        beta = _smoothstep(u)[:, None]
        dbeta = (_smoothstep_d(u) / (2 * width))[:, None]
        q[m] = (1 - beta) * sig[b - 1][m] + beta * sig[b][m]
        qd[m] = (dbeta * (sig[b][m] - sig[b - 1][m])
                 + (1 - beta) * dsig[b - 1][m] + beta * dsig[b][m])

    q = np.clip(q, lo, hi)  # safety only; feasibility was checked above
    root_pos = np.zeros((T, 2))
    root_pos[:, 1] = spec.root_height
    return MotionClip(
        name=f"synth-{seed}", fps=spec.fps, q=q, qdot=qd,
        root_pos=root_pos, root_vel=np.zeros((T, 2)),
        root_pitch=np.zeros(T), root_pitch_rate=np.zeros(T),
    )


def segment_clip(clip: MotionClip, clip_id: int = 0) -> list[Segment]:
    """Partition into one-second segments; the trailing remainder (if any)
    becomes a short segment."""
    per = int(round(clip.fps))
    T = clip.n_frames
    segs = []
    start = 0
    while start < T:
        end = min(start + per, T)
        segs.append(Segment(clip_id=clip_id, start_frame=start, end_frame=end,
                            short=(end - start) < per))
        start = end
    return segs


def joint_statistics(clips, segments=None) -> JointStats:
    """Exact sample mean/std (population) per segment and per clip."""
    if isinstance(clips, MotionClip):
        clips = [clips]
    if not clips:
        raise ContractViolation("joint_statistics: need at least one clip")
    if segments is None:
        segments = []
        for ci, clip in enumerate(clips):
            segments.extend(segment_clip(clip, ci))
    seg_mean = np.stack([clips[s.clip_id].q[s.start_frame:s.end_frame].mean(axis=0)
                         for s in segments])
    seg_std = np.stack([clips[s.clip_id].q[s.start_frame:s.end_frame].std(axis=0)
                        for s in segments])
    clip_mean = np.stack([c.q.mean(axis=0) for c in clips])
    clip_std = np.stack([c.q.std(axis=0) for c in clips])
    return JointStats(segment_mean=seg_mean, segment_std=seg_std,
                      clip_mean=clip_mean, clip_std=clip_std)


def occupancy(clips, segments, key_dofs, bins_per_dof, limit_lo, limit_hi,
              mode="marginal") -> np.ndarray:
    """Per-segment occupancy histograms over the key DOFs.

    ``marginal`` concatenates per-DOF histograms (B = n_dofs * bins);
    ``product`` uses the joint binning and is capped at 2 DOFs. Rows are
    probability vectors.
    """
    if isinstance(clips, MotionClip):
        clips = [clips]
    key_dofs = list(key_dofs)
    if not key_dofs:
        raise ContractViolation("occupancy: key_dofs must be non-empty")
    if bins_per_dof < 2:
        raise ContractViolation("occupancy: bins_per_dof must be >= 2")
    lo = np.broadcast_to(np.asarray(limit_lo, dtype=np.float64), (clips[0].n_joints,))
    hi = np.broadcast_to(np.asarray(limit_hi, dtype=np.float64), (clips[0].n_joints,))
    if mode == "product" and len(key_dofs) > 2:
        raise ConfigError("product binning is capped at 2 key DOFs")
    rows = []
    for s in segments:
        frames = clips[s.clip_id].q[s.start_frame:s.end_frame]
        if frames.shape[0] == 0:
            raise ContractViolation("occupancy: empty segment")
        if mode == "marginal":
            parts = []
            for j in key_dofs:
                edges = np.linspace(lo[j], hi[j], bins_per_dof + 1)
                h, _ = np.histogram(np.clip(frames[:, j], lo[j], hi[j]), bins=edges)
                parts.append(h)
            row = np.concatenate(parts).astype(np.float64)
        elif mode == "product":
            edges = [np.linspace(lo[j], hi[j], bins_per_dof + 1) for j in key_dofs]
            sample = np.stack([np.clip(frames[:, j], lo[j], hi[j]) for j in key_dofs], axis=1)
            h, _ = np.histogramdd(sample, bins=edges)
            row = h.ravel()
        else:
            raise ConfigError(f"unknown binning mode {mode!r}")
        rows.append(row / row.sum())
    return np.stack(rows)


def select_key_dofs(stats: JointStats, threshold_quantile: float) -> list[int]:
    """Joints whose across-segment dispersion of segment means exceeds the
    given quantile of all joints' dispersions (ties break to lower index)."""
    v = stats.segment_mean.std(axis=0)
    n = v.shape[0]
    thresh = float(np.quantile(v, threshold_quantile))
    selected = [j for j in range(n) if v[j] > thresh]
    if not selected:
        # degenerate (ties at the threshold): take the top block by value,
        # lower indices first
        k = max(1, int(np.ceil(n * (1.0 - threshold_quantile))))
        order = sorted(range(n), key=lambda j: (-v[j], j))
        selected = sorted(order[:k])
    return selected
