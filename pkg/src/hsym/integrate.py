"""Time integration of the forced Sabra model and trajectory persistence.

The integrator is an integrating-factor RK4: the stiff viscous diagonal is
absorbed into exponential factors, so the scheme is exact on the linear part
and classical fourth order on the rest.  The step size never adapts; the
integer step counter is the clock (t = step * dt), which keeps runs, restarts
and recorded timestamps reproducible to the bit.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import backend
from .errors import BlowUpError, FormatError, WindowError
from .model import ModelConfig, ShellState, nonlinear_padded, wavenumber

BLOWUP_THRESHOLD = 1.0e12

TARGET_FRAMES = 200_000  # aimed-for record count when record_stride is left auto

MAGIC = b"HSYM"
VERSION = 1

# magic, version, n_shells, frame count, stride_dt, Re, f0 re/im, f1 re/im, seed
_HEADER = struct.Struct("<4sHIQ6dQ")
_CLOCK = struct.Struct("<Qd")  # checkpoint trailer: absolute step index, dt


@dataclass(frozen=True)
class Clock:
    """Resolved integration grid for a config."""

    dt: float
    n_steps: int
    record_stride: int
    first_record: int  # first recorded absolute step; > n_steps means no frames

    @property
    def n_frames(self) -> int:
        if self.first_record > self.n_steps:
            return 0
        return (self.n_steps - self.first_record) // self.record_stride + 1

    @property
    def stride_dt(self) -> float:
        return self.record_stride * self.dt

    def frame_steps(self) -> np.ndarray:
        return self.first_record + self.record_stride * np.arange(self.n_frames, dtype=np.int64)


def resolve_clock(cfg: ModelConfig) -> Clock:
    """Fix dt, step count and the recording pattern for a run.

    Auto dt targets the nonlinear turnover at the dissipative end of the
    ladder, k_visc = min(k_max, Re^(3/4)), i.e. dt = c_safety / k_visc^(2/3),
    rounded down to a power of two so every timestamp s*dt is exact.
    Recording starts strictly after t_transient; with record_stride auto the
    stride aims at ~TARGET_FRAMES frames.
    """
    if cfg.dt is None:
        k_visc = min(wavenumber(cfg.n_shells - 1), cfg.reynolds**0.75)
        dt = 2.0 ** math.floor(math.log2(cfg.c_safety / max(1.0, k_visc ** (2.0 / 3.0))))
    else:
        dt = float(cfg.dt)
    n_steps = max(1, math.ceil(cfg.t_end / dt - 1e-9))

    s_transient = math.floor(cfg.t_transient / dt + 1e-9)  # last step with t <= t_transient
    if cfg.record_stride is None:
        stride = max(1, round((n_steps - s_transient) / TARGET_FRAMES))
    else:
        stride = int(cfg.record_stride)
    first = ((s_transient + stride) // stride) * stride  # first multiple of stride past s_transient
    return Clock(dt=dt, n_steps=n_steps, record_stride=stride, first_record=first)


def initial_condition(cfg: ModelConfig) -> np.ndarray:
    """Seeded small-amplitude start: |u_n| = 1e-2 k_n^(-1/3), uniform phases."""
    rng = np.random.default_rng(cfg.seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, cfg.n_shells)
    return 1e-2 * cfg.k ** (-1.0 / 3.0) * np.exp(1j * phases)


def _exp_factors(cfg: ModelConfig, dt: float) -> tuple[np.ndarray, np.ndarray]:
    d = cfg.k**2 / cfg.reynolds
    return np.exp(-0.5 * dt * d), np.exp(-dt * d)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded frames of a run: t[i] pairs with amplitude row u[i]."""

    cfg: ModelConfig
    t: np.ndarray  # (F,)
    u: np.ndarray  # (F, n_shells) complex128
    stride_dt: float

    @property
    def n_frames(self) -> int:
        return self.t.shape[0]

    @property
    def n_shells(self) -> int:
        return self.u.shape[1]

    @property
    def k(self) -> np.ndarray:
        return wavenumber(np.arange(self.n_shells))

    def state_at(self, i: int) -> ShellState:
        return ShellState(float(self.t[i]), 0, self.u[i])

    def validate(self) -> None:
        """Frame bookkeeping invariants; raises WindowError on violation."""
        if self.u.ndim != 2 or self.t.ndim != 1 or self.u.shape[0] != self.t.shape[0]:
            raise WindowError("t/u frame counts disagree")
        if self.u.shape[0] and self.u.shape[1] != self.cfg.n_shells:
            raise WindowError("amplitude count differs from config")
        if not np.isfinite(self.u.view(np.float64)).all() or not np.isfinite(self.t).all():
            raise WindowError("non-finite values in trajectory")
        if self.n_frames > 1:
            d = np.diff(self.t)
            if not (d > 0).all():
                raise WindowError("timestamps not strictly increasing")
            # uniform to the ulp scale of the timestamps (exact for dyadic dt)
            tol = 2.0 * np.spacing(np.abs(self.t).max()) + np.spacing(self.stride_dt)
            if np.abs(d - self.stride_dt).max() > tol:
                raise WindowError("frame spacing is not uniform")


def _advance_segment(u, cfg: ModelConfig, clock: Clock, s_begin: int, s_end: int) -> tuple[np.ndarray, np.ndarray]:
    """Advance u in place over absolute steps (s_begin, s_end]; return (t, frames)."""
    steps = clock.frame_steps()
    steps = steps[(steps > s_begin) & (steps <= s_end)]
    out = np.empty((steps.size, cfg.n_shells), dtype=np.complex128)
    if s_end > s_begin:
        e_half, e_full = _exp_factors(cfg, clock.dt)
        first_rel = int(steps[0] - s_begin) if steps.size else s_end - s_begin + 1
        rc = backend.advance(
            u, cfg.k, cfg.forcing, e_half, e_full, clock.dt,
            s_end - s_begin, clock.record_stride, first_rel, out, BLOWUP_THRESHOLD,
        )
        if rc:
            t_fail = (s_begin + rc) * clock.dt
            raise BlowUpError(t_fail, float(np.abs(u).max()))
    return steps * clock.dt, out


def run(cfg: ModelConfig) -> Trajectory:
    """Integrate the forced model from the seeded initial condition.

    Frames with t <= t_transient are discarded; the returned config snapshot
    carries the resolved dt and record_stride.
    """
    clock = resolve_clock(cfg)
    u = initial_condition(cfg)
    t, frames = _advance_segment(u, cfg, clock, 0, clock.n_steps)
    resolved = replace(cfg, dt=clock.dt, record_stride=clock.record_stride)
    return Trajectory(resolved, t, frames, clock.stride_dt)


def step(state: ShellState, cfg: ModelConfig, dt: float, include_nonlinear: bool = True) -> ShellState:
    """One integrating-factor RK4 step of the forced model.

    With include_nonlinear=False the interaction term is suppressed (test
    hook); forcing and the exact viscous factor still apply.
    """
    if state.n_min != 0 or state.u.size != cfg.n_shells:
        raise WindowError(f"state window {state.window} does not match config ({cfg.n_shells} shells)")
    k = cfg.k
    f = cfg.forcing
    e_half, e_full = _exp_factors(cfg, dt)

    def rhs(u):
        if include_nonlinear:
            return nonlinear_padded(u, k) + f
        return f.copy()

    u = state.u
    k1 = rhs(u)
    k2 = rhs(e_half * (u + (0.5 * dt) * k1))
    k3 = rhs(e_half * u + (0.5 * dt) * k2)
    k4 = rhs(e_full * u + dt * (e_half * k3))
    u1 = e_full * u + (dt / 6.0) * (e_full * k1 + (2.0 * e_half) * (k2 + k3) + k4)
    return state.with_u(u1, t=state.t + dt)


def advance_ideal(state: ShellState, dt: float, n_steps: int) -> ShellState:
    """n_steps of plain RK4 on the inviscid, unforced model (zero-padded window)."""
    u = state.u.copy()
    k = state.k
    ones = np.ones(u.size)
    zeros = np.zeros(u.size, dtype=np.complex128)
    out = np.empty((0, u.size), dtype=np.complex128)
    rc = backend.advance(u, k, zeros, ones, ones, dt, int(n_steps), 1, int(n_steps) + 1, out, BLOWUP_THRESHOLD)
    if rc:
        raise BlowUpError(state.t + rc * dt, float(np.abs(u).max()))
    return state.with_u(u, t=state.t + n_steps * dt)


# ---------------------------------------------------------------------------
# binary trajectory and checkpoint files

def _pack_header(cfg: ModelConfig, n_frames: int, stride_dt: float) -> bytes:
    return _HEADER.pack(
        MAGIC, VERSION, cfg.n_shells, n_frames, stride_dt, cfg.reynolds,
        cfg.f0.real, cfg.f0.imag, cfg.f1.real, cfg.f1.imag,
        cfg.seed & 0xFFFFFFFFFFFFFFFF,
    )


def _unpack_header(raw: bytes):
    if len(raw) < _HEADER.size:
        raise FormatError("file too short for a trajectory header")
    magic, version, n_shells, n_frames, stride_dt, re, f0r, f0i, f1r, f1i, seed = _HEADER.unpack(
        raw[: _HEADER.size]
    )
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}")
    return n_shells, n_frames, stride_dt, re, complex(f0r, f0i), complex(f1r, f1i), seed


def _header_config(n_shells, stride_dt, re, f0, f1, seed, t) -> ModelConfig:
    # The file header does not carry dt/t_end/t_transient; reconstruct a valid
    # config that preserves every header field (so save -> load -> save is
    # byte-identical) and leaves analysis quantities untouched.
    t_end = float(t[-1]) if len(t) else stride_dt
    return ModelConfig(
        reynolds=re, f0=f0, f1=f1, n_shells=n_shells, dt=stride_dt,
        t_end=max(t_end, stride_dt), t_transient=0.0, record_stride=1, seed=int(seed),
    )


def save_trajectory(traj: Trajectory, path) -> None:
    f64 = traj.u.view(np.float64).reshape(traj.n_frames, 2 * traj.n_shells)
    block = np.empty((traj.n_frames, 1 + 2 * traj.n_shells), dtype="<f8")
    block[:, 0] = traj.t
    block[:, 1:] = f64
    with open(path, "wb") as fh:
        fh.write(_pack_header(traj.cfg, traj.n_frames, traj.stride_dt))
        fh.write(block.tobytes())


def load_trajectory(path) -> Trajectory:
    with open(path, "rb") as fh:
        raw = fh.read()
    n_shells, n_frames, stride_dt, re, f0, f1, seed = _unpack_header(raw)
    row = 8 * (1 + 2 * n_shells)
    body = raw[_HEADER.size:]
    if len(body) != n_frames * row:
        raise FormatError(f"expected {n_frames} frames, file holds {len(body) / row:.2f}")
    block = np.frombuffer(body, dtype="<f8").reshape(n_frames, 1 + 2 * n_shells)
    t = block[:, 0].copy()
    u = block[:, 1:].copy().view(np.complex128)
    cfg = _header_config(n_shells, stride_dt, re, f0, f1, seed, t)
    traj = Trajectory(cfg, t, u, stride_dt)
    traj.validate()
    return traj


def save_checkpoint(path, cfg: ModelConfig, u: np.ndarray, step_index: int, dt: float) -> None:
    """Mid-run state: header, one frame, and the integer step clock."""
    t = step_index * dt
    frame = np.empty(1 + 2 * cfg.n_shells, dtype="<f8")
    frame[0] = t
    frame[1:] = u.view(np.float64)
    with open(path, "wb") as fh:
        fh.write(_pack_header(cfg, 1, dt))
        fh.write(frame.tobytes())
        fh.write(_CLOCK.pack(step_index, dt))


def load_checkpoint(path):
    """Returns (header ModelConfig fields as dict, u, step_index, dt)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    n_shells, n_frames, stride_dt, re, f0, f1, seed = _unpack_header(raw)
    row = 8 * (1 + 2 * n_shells)
    if n_frames != 1 or len(raw) != _HEADER.size + row + _CLOCK.size:
        raise FormatError("not a checkpoint file")
    frame = np.frombuffer(raw, dtype="<f8", count=1 + 2 * n_shells, offset=_HEADER.size)
    u = frame[1:].copy().view(np.complex128)
    step_index, dt = _CLOCK.unpack(raw[_HEADER.size + row:])
    header = dict(n_shells=n_shells, reynolds=re, f0=f0, f1=f1, seed=seed)
    return header, u, int(step_index), float(dt)


def run_with_checkpoint(cfg: ModelConfig, t_stop: float, path) -> Trajectory:
    """Integrate to the last step boundary <= t_stop and write a checkpoint.

    Returns the frames recorded so far; resume_run(path, cfg) continues to
    t_end bit-identically to an uninterrupted run().
    """
    clock = resolve_clock(cfg)
    s_stop = min(clock.n_steps, math.floor(t_stop / clock.dt + 1e-9))
    u = initial_condition(cfg)
    t, frames = _advance_segment(u, cfg, clock, 0, s_stop)
    save_checkpoint(path, cfg, u, s_stop, clock.dt)
    resolved = replace(cfg, dt=clock.dt, record_stride=clock.record_stride)
    return Trajectory(resolved, t, frames, clock.stride_dt)


def resume_run(path, cfg: ModelConfig) -> Trajectory:
    """Continue a checkpointed run to cfg.t_end."""
    header, u, s_begin, dt = load_checkpoint(path)
    if header["n_shells"] != cfg.n_shells:
        raise FormatError(f"checkpoint has {header['n_shells']} shells, config {cfg.n_shells}")
    clock = resolve_clock(cfg)
    if clock.dt != dt:
        raise FormatError(f"checkpoint dt {dt!r} differs from configured grid {clock.dt!r}")
    t, frames = _advance_segment(u, cfg, clock, s_begin, clock.n_steps)
    resolved = replace(cfg, dt=clock.dt, record_stride=clock.record_stride)
    return Trajectory(resolved, t, frames, clock.stride_dt)


# ---------------------------------------------------------------------------
# diagnostics

def spectrum(traj: Trajectory) -> np.ndarray:
    """Time-averaged squared amplitude per shell."""
    if traj.n_frames == 0:
        raise ValueError("empty trajectory")
    return np.mean(traj.u.real**2 + traj.u.imag**2, axis=0)


def energy_series(traj: Trajectory) -> np.ndarray:
    return np.sum(traj.u.real**2 + traj.u.imag**2, axis=1)


def stationarity_ratio(traj: Trajectory) -> float:
    """|mean(second half) - mean(first half)| / pooled std of the energy series."""
    e = energy_series(traj)
    if e.size < 4:
        raise ValueError("too few frames for a stationarity estimate")
    half = e.size // 2
    sd = e.std()
    if sd == 0:
        return 0.0
    return abs(e[half:].mean() - e[:half].mean()) / sd


def dissipation_tail_slope(traj: Trajectory, shells: int = 4) -> float:
    """OLS slope of log2(time-averaged |u_n|) over the top `shells` shells."""
    amp = np.mean(np.abs(traj.u), axis=0)[-shells:]
    y = np.log2(np.maximum(amp, 1e-300))
    x = np.arange(y.size, dtype=float)
    x = x - x.mean()
    return float((x * (y - y.mean())).sum() / (x * x).sum())
