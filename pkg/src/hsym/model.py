"""Sabra shell model: state container, wavenumbers, right-hand sides.

Shell velocities u_n are complex amplitudes on a geometric ladder of
wavenumbers k_n = 2^n.  A state holds a contiguous window [n_min, n_max] of
shells; amplitudes outside the window are identically zero, which is also the
boundary convention of the nonlinear term (shells above the last evolved one
are zero-padded, and the printed truncations at n = 0, 1 of the forced model
are exactly the zero-padded stencil).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import WindowError

LAMBDA = 2.0  # fixed shell spacing; wavenumbers are exact binary powers

MIN_WINDOW = 4  # the interaction stencil spans five shells (n-2 .. n+2)


def wavenumber(n) -> np.ndarray | float:
    """k_n = 2^n, exact in double precision for any shell index in use."""
    return np.ldexp(1.0, n) if np.ndim(n) else float(np.ldexp(1.0, n))


def shell_range(n_min: int, n_max: int) -> np.ndarray:
    return np.arange(n_min, n_max + 1)


@dataclass(frozen=True, eq=False)
class ShellState:
    """Immutable snapshot of shell amplitudes on a window [n_min, n_max].

    The window must contain shell 0 and span at least MIN_WINDOW shells.
    """

    t: float
    n_min: int
    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.complex128).copy()
        if u.ndim != 1 or u.size < MIN_WINDOW:
            raise WindowError(f"need a 1-d window of >= {MIN_WINDOW} shells, got shape {u.shape}")
        if not np.isfinite(u.view(np.float64)).all():
            raise WindowError("non-finite amplitude in shell window")
        if not (self.n_min <= 0 <= self.n_min + u.size - 1):
            raise WindowError(f"window [{self.n_min}, {self.n_min + u.size - 1}] must contain shell 0")
        if not np.isfinite(self.t):
            raise WindowError("non-finite time stamp")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "n_min", int(self.n_min))

    @property
    def n_max(self) -> int:
        return self.n_min + self.u.size - 1

    @property
    def window(self) -> tuple[int, int]:
        return self.n_min, self.n_max

    @property
    def k(self) -> np.ndarray:
        """Wavenumbers aligned with self.u."""
        return wavenumber(shell_range(self.n_min, self.n_max))

    def u_at(self, n: int) -> complex:
        """Amplitude of shell n; zero outside the stored window."""
        if self.n_min <= n <= self.n_max:
            return complex(self.u[n - self.n_min])
        return 0.0 + 0.0j

    def with_u(self, u, t: Optional[float] = None) -> "ShellState":
        return ShellState(self.t if t is None else t, self.n_min, u)

    @classmethod
    def zeros(cls, n_min: int, n_max: int, t: float = 0.0) -> "ShellState":
        return cls(t, n_min, np.zeros(n_max - n_min + 1, dtype=np.complex128))


@dataclass(frozen=True)
class ModelConfig:
    """Forced viscous run parameters.  Defaults are the desk-scale preset."""

    reynolds: float = 1.0e7
    f0: complex = 2.0 + 2.0j  # forcing on shell 0
    f1: complex = 1.0 + 1.0j  # forcing on shell 1
    n_shells: int = 28
    dt: Optional[float] = None  # None: resolve from the viscous-scale CFL rule
    t_end: float = 200.0
    t_transient: float = 20.0
    record_stride: Optional[int] = None  # None: aim for ~2e5 recorded frames
    seed: int = 1
    c_safety: float = 0.025  # 0.05 is marginal at Re = 1e7: bursts can outrun RK4

    def __post_init__(self):
        if not (self.reynolds > 0 and np.isfinite(self.reynolds)):
            raise ValueError(f"reynolds must be positive, got {self.reynolds}")
        if self.n_shells < 8:
            raise ValueError(f"n_shells must be >= 8, got {self.n_shells}")
        if self.dt is not None and not (0 < self.dt and np.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.t_end > 0 and np.isfinite(self.t_end)):
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if not (0 <= self.t_transient <= self.t_end):
            raise ValueError(f"t_transient must lie in [0, t_end], got {self.t_transient}")
        if self.record_stride is not None and self.record_stride < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")
        if not (self.c_safety > 0):
            raise ValueError(f"c_safety must be positive, got {self.c_safety}")

    @property
    def forcing(self) -> np.ndarray:
        f = np.zeros(self.n_shells, dtype=np.complex128)
        f[0] = self.f0
        f[1] = self.f1
        return f

    @property
    def k(self) -> np.ndarray:
        return wavenumber(np.arange(self.n_shells))


def desk_preset(**overrides) -> ModelConfig:
    """Re = 1e7, 28 shells: resolves on a desktop in minutes."""
    return ModelConfig(**overrides)


def paper_preset(**overrides) -> ModelConfig:
    """Production scale: Re = 2.5e11, 40 shells."""
    kw = dict(reynolds=2.5e11, n_shells=40, t_end=100.0, t_transient=20.0)
    kw.update(overrides)
    return ModelConfig(**kw)


def nonlinear_padded(u: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Sabra interaction term on a zero-padded window.

    B_n = i (k_{n+1} u_{n+2} u*_{n+1} - k_{n-1} u_{n+1} u*_{n-1}
             + k_{n-2} u_{n-1} u_{n-2}),
    with u = 0 outside the array.  Neighbour wavenumbers are folded into k_n
    (k_{n+1} = 2 k_n etc.), so only the window's own k vector is needed.
    """
    w = np.zeros(u.size + 4, dtype=np.complex128)
    w[2:-2] = u
    c = np.conj(w)
    return 1j * k * (2.0 * w[4:] * c[3:-1] - 0.5 * w[3:-1] * c[1:-3] + 0.25 * w[1:-3] * w[:-4])


def nonlinear_term(state: ShellState) -> np.ndarray:
    """B_n for every shell of the state's window (zero-padded boundaries)."""
    return nonlinear_padded(state.u, state.k)


def ideal_rhs(state: ShellState) -> np.ndarray:
    """Interaction term on the interior shells [n_min+2, n_max-2] only.

    The ideal (inviscid, unforced) system evolves shells whose full five-point
    stencil lies inside the window; the returned array is aligned with that
    interior range.
    """
    if state.u.size < MIN_WINDOW + 1:
        raise WindowError(f"window {state.window} has no interior shell with a full stencil")
    return nonlinear_term(state)[2:-2]


def full_rhs(state: ShellState, cfg: ModelConfig) -> np.ndarray:
    """Forced viscous right-hand side B_n - k_n^2 u_n / Re + f_n."""
    if state.n_min != 0:
        raise WindowError(f"forced model needs a window starting at shell 0, got {state.n_min}")
    if state.u.size != cfg.n_shells:
        raise WindowError(f"state has {state.u.size} shells, config expects {cfg.n_shells}")
    k = state.k
    return nonlinear_term(state) - (k * k / cfg.reynolds) * state.u + cfg.forcing


def time_scale(state: ShellState, a: float) -> ShellState:
    """Amplitude scaling u_n -> u_n / a (a > 0); window and t unchanged."""
    if not (a > 0 and np.isfinite(a)):
        raise ValueError(f"scale factor must be positive and finite, got {a}")
    return state.with_u(state.u / a)


def space_scale(state: ShellState, m: int) -> ShellState:
    """Shell shift u'_n = k_m u_{n+m} on the window [n_min - m, n_max - m]."""
    m = int(m)
    return ShellState(state.t, state.n_min - m, np.ldexp(1.0, m) * state.u)


def energy(state: ShellState) -> float:
    """Total squared amplitude over the window."""
    return float(np.sum(state.u.real**2 + state.u.imag**2))
