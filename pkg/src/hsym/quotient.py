"""Scale quotient of the shell model.

The sub-window amplitude A(x) = sqrt(sum_{n<0} k_n^2 |u_n|^2) measures how
much motion lives below shell 0.  Dividing a state by A projects it onto the
unit level set of A; reparametrizing time by dtau = A dt makes that projection
autonomous.  Forced states carry no shells below 0, so they are first extended
with a dummy shell u_{-1} = 2, which makes A identically one and the projected
flow at scale 0 coincide with the physical one.  Shifting by m shells before
projecting gives the rescaled frame at scale m:

    U_n^(m) = k_m u_{n+m} / (A o g^m),      dtau^(m) = (A o g^m) dt,

and the ratio sigma_m = (A o g^{m+1}) / (A o g^m) is the scale-to-scale
multiplier fed to the transfer-operator analysis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import WindowError
from .integrate import Trajectory
from .model import ShellState, nonlinear_padded, wavenumber

DUMMY_AMPLITUDE = 2.0 + 0.0j  # u_{-1}; k_{-1}^2 |2|^2 = 1 exactly


def extend_dummy(state: ShellState) -> ShellState:
    """Attach the dummy shell u_{-1} = 2 to a forced-model state.

    Idempotent: an already extended state is returned unchanged.
    """
    if state.n_min == -1 and state.u[0] == DUMMY_AMPLITUDE:
        return state
    if state.n_min != 0:
        raise WindowError(f"can only extend a window starting at shell 0, got {state.window}")
    u = np.concatenate(([DUMMY_AMPLITUDE], state.u))
    return ShellState(state.t, -1, u)


def _sub_window_mass(state: ShellState, m: int) -> float:
    """sum_{n < m} k_n^2 |u_n|^2 over the stored window."""
    stop = min(m - state.n_min, state.u.size)
    if stop <= 0:
        return 0.0
    u = state.u[:stop]
    k = state.k[:stop]
    return float(np.sum((k * k) * (u.real * u.real + u.imag * u.imag)))


def amplitude(state: ShellState) -> float:
    """A(x) = sqrt(sum_{n<0} k_n^2 |u_n|^2); zero is rejected (no sub-window motion)."""
    a2 = _sub_window_mass(state, 0)
    if a2 == 0.0:
        raise ValueError("amplitude is zero: state has no motion below shell 0 (extend first?)")
    return float(np.sqrt(a2))


def amplitude_at_scale(state: ShellState, m: int) -> float:
    """A o g^m: the amplitude seen after shifting m shells down.

    For a dummy-extended state this is sqrt(1 + sum_{0 <= n < m} k_n^2 |u_n|^2)
    (equal to 1 at m = 0); the implementation uses the window sum directly, so
    amplitude-scaled copies of a state are handled too.  m < 0 is not
    supported: the dummy tail leaves nothing below shell -1.
    """
    m = int(m)
    if m < 0:
        raise ValueError(f"scale shift must be non-negative, got {m}")
    a2 = _sub_window_mass(state, m)
    if a2 == 0.0:
        raise ValueError("amplitude at scale is zero: no motion below the shifted origin")
    return float(np.sqrt(a2))


def project(state: ShellState) -> ShellState:
    """P(x) = x / A(x); idempotent, invariant under amplitude scalings."""
    return state.with_u(state.u / amplitude(state))


def constraint_value(state: ShellState) -> float:
    """sum_{n<0} k_n^2 |U_n|^2, the quantity pinned to 1 on the quotient."""
    return _sub_window_mass(state, 0)


def multiplier_sigma(state: ShellState, n: int) -> float:
    """sigma_n(x) = (A o g^{n+1})(x) / (A o g^n)(x) for n >= 0."""
    return amplitude_at_scale(state, n + 1) / amplitude_at_scale(state, n)


def synchronized_times(t: np.ndarray, amps: np.ndarray) -> np.ndarray:
    """Trapezoidal tau(t) = integral of the amplitude, zero at the first sample."""
    t = np.asarray(t, dtype=float)
    amps = np.asarray(amps, dtype=float)
    if t.shape != amps.shape or t.ndim != 1:
        raise ValueError("t and amplitude series must be equal-length 1-d arrays")
    tau = np.empty_like(t)
    tau[0] = 0.0
    np.cumsum(0.5 * (amps[1:] + amps[:-1]) * np.diff(t), out=tau[1:])
    return tau


@dataclass(frozen=True, eq=False)
class RescaledFrame:
    """Trajectory samples rebased to scale m.

    U[i, j] is U_n^(m) at frame i for n = n_lo + j; weight[i] is the amplitude
    A o g^m at frame i (the Jacobian between plain and synchronized averages)
    and tau is the scale-m synchronized time.
    """

    m: int
    n_lo: int
    n_hi: int
    t: np.ndarray
    tau: np.ndarray
    weight: np.ndarray
    U: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.t.shape[0]

    def shell_column(self, n: int) -> np.ndarray:
        """Samples of U_n^(m) for a window shell n."""
        if not (self.n_lo <= n <= self.n_hi):
            raise WindowError(f"shell {n} outside frame window [{self.n_lo}, {self.n_hi}]")
        return self.U[:, n - self.n_lo]

    def validate(self) -> None:
        if not (np.diff(self.tau) > 0).all():
            raise WindowError("synchronized time is not strictly increasing")
        if not (self.weight >= 1.0).all():
            raise WindowError("scale amplitude below 1 on a dummy-extended trajectory")

    def to_csv(self, path) -> None:
        cols = [self.t, self.tau, self.weight]
        names = ["t", "tau", "weight"]
        for n in range(self.n_lo, self.n_hi + 1):
            c = self.U[:, n - self.n_lo]
            cols.extend([c.real, c.imag])
            names.extend([f"re_U{n}", f"im_U{n}"])
        data = np.column_stack(cols)
        np.savetxt(path, data, delimiter=",", header=",".join(names), comments="", fmt="%.17g")


def scale_amplitudes(traj: Trajectory, m_max: int) -> np.ndarray:
    """A o g^m per frame for every m in 0..m_max (inclusive), shape (F, m_max+1).

    Assumes the dummy extension: A o g^m = sqrt(1 + sum_{n<m} k_n^2 |u_n|^2).
    """
    if not (0 <= m_max <= traj.n_shells):
        raise WindowError(f"scale range 0..{m_max} outside the shell ladder")
    k2 = traj.k**2
    mass = np.cumsum(k2 * (traj.u.real**2 + traj.u.imag**2), axis=1)
    a2 = np.ones((traj.n_frames, m_max + 1))
    if m_max >= 1:
        a2[:, 1:] += mass[:, : m_max]
    return np.sqrt(a2)


def rescaled_frame(traj: Trajectory, m: int, window: tuple[int, int] = (-2, 2)) -> RescaledFrame:
    """Rebase a recorded trajectory to scale m over the window of shells given.

    Window shells n map to physical shells n + m; n = -1 - m picks up the dummy
    amplitude, anything below that has no data.
    """
    n_lo, n_hi = int(window[0]), int(window[1])
    if n_lo > n_hi:
        raise WindowError(f"empty frame window {window}")
    if not (0 <= m <= traj.n_shells - 1):
        raise WindowError(f"scale m={m} outside the shell ladder")
    if m + n_hi > traj.n_shells - 1:
        raise WindowError(f"window shell {n_hi} at scale {m} is above the last evolved shell")
    if m + n_lo < -1:
        raise WindowError(f"window shell {n_lo} at scale {m} is below the dummy shell")
    if traj.n_frames == 0:
        raise ValueError("empty trajectory")

    a = scale_amplitudes(traj, m)[:, m]
    km = wavenumber(m)
    U = np.empty((traj.n_frames, n_hi - n_lo + 1), dtype=np.complex128)
    for n in range(n_lo, n_hi + 1):
        j = n + m
        src = traj.u[:, j] if j >= 0 else DUMMY_AMPLITUDE
        U[:, n - n_lo] = km * src / a
    tau = synchronized_times(traj.t, a)
    return RescaledFrame(m=int(m), n_lo=n_lo, n_hi=n_hi, t=traj.t.copy(), tau=tau, weight=a, U=U)


# ---------------------------------------------------------------------------
# normalized (quotient) dynamics

def normalized_rhs(state: ShellState, tol: float = 1e-8) -> np.ndarray:
    """Right-hand side of the quotient flow dU/dtau = B(U) + c(U) U.

    The drift coefficient c(U) = sum_{j<0} k_j^3 (2 pi_{j+1} - pi_j/2 - pi_{j-1}/4)
    with pi_j = Im(U*_{j-1} U*_j U_{j+1}) cancels the radial growth, keeping
    sum_{n<0} k_n^2 |U_n|^2 = 1.  The state must satisfy that constraint.
    """
    c2 = constraint_value(state)
    if abs(c2 - 1.0) > tol:
        raise ValueError(f"state violates the unit constraint: sum = {c2:.12g}")
    u = state.u
    k = state.k
    b = nonlinear_padded(u, k)

    # pi_j for j = n_min-1 .. 0, with zero-padded reads outside the window
    w = np.zeros(u.size + 4, dtype=np.complex128)
    w[2:-2] = u
    lo = state.n_min
    idx = np.arange(lo - 1, 1)  # j values
    pos = idx - lo + 2  # index of shell j in w
    pi = np.imag(np.conj(w[pos - 1]) * np.conj(w[pos]) * w[pos + 1])

    j = np.arange(lo, 0)  # summation range j < 0
    kj3 = wavenumber(j) ** 3
    # pi[i] holds pi_{lo-1+i}; for j = lo+s: pi_{j+1} = pi[s+2], pi_j = pi[s+1], pi_{j-1} = pi[s]
    drift = float(np.sum(kj3 * (2.0 * pi[2:] - 0.5 * pi[1:-1] - 0.25 * pi[:-2])))
    return b + drift * u


def advance_normalized(state: ShellState, dtau: float, n_steps: int, tol: float = 1e-7) -> ShellState:
    """Plain RK4 on the quotient flow; the constraint is monitored, never reset."""
    s = state
    for _ in range(int(n_steps)):
        s = _rk4_normalized(s, dtau, tol)
    return s


def _rk4_normalized(state: ShellState, h: float, tol: float) -> ShellState:
    u = state.u
    k1 = normalized_rhs(state, tol)
    k2 = normalized_rhs(state.with_u(u + 0.5 * h * k1), tol)
    k3 = normalized_rhs(state.with_u(u + 0.5 * h * k2), tol)
    k4 = normalized_rhs(state.with_u(u + h * k3), tol)
    return state.with_u(u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), t=state.t + h)


def integrate_normalized_to(state: ShellState, tau_targets: np.ndarray, dtau_max: float = 1e-4,
                            tol: float = 1e-7) -> np.ndarray:
    """Integrate the quotient flow, landing exactly on each tau target.

    tau targets are offsets from the state's own time; the first may be 0.
    Returns an array (len(targets), window) of amplitudes.
    """
    targets = np.asarray(tau_targets, dtype=float)
    if targets.ndim != 1 or targets.size == 0 or (np.diff(targets) <= 0).any() or targets[0] < 0:
        raise ValueError("tau targets must be a strictly increasing 1-d array of offsets >= 0")
    out = np.empty((targets.size, state.u.size), dtype=np.complex128)
    s = state
    tau = 0.0
    for i, target in enumerate(targets):
        span = target - tau
        if span > 0:
            n_sub = max(1, int(np.ceil(span / dtau_max - 1e-12)))
            h = span / n_sub
            for _ in range(n_sub):
                s = _rk4_normalized(s, h, tol)
            tau = target
        out[i] = s.u
    return out


def synchronized_ideal_run(state: ShellState, dt: float, n_steps: int,
                           record_every: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reference route for the quotient dynamics, straight from the definition.

    Integrates the ideal model du/dt = B(u) with plain RK4 while accumulating
    the synchronized clock dtau/dt = A(u) through the same stages, then
    projects each recorded state.  Returns (t, tau, U) with U[i] = u(t_i)/A(u(t_i)).
    """
    u = state.u.copy()
    k = state.k
    neg = slice(0, -state.n_min) if state.n_min < 0 else slice(0, 0)
    k2neg = (k[neg]) ** 2

    def amp(v) -> float:
        vv = v[neg]
        return float(np.sqrt(np.sum(k2neg * (vv.real**2 + vv.imag**2))))

    if amp(u) == 0.0:
        raise ValueError("state has no motion below shell 0")

    n_rec = int(n_steps) // int(record_every) + 1
    t_out = np.empty(n_rec)
    tau_out = np.empty(n_rec)
    u_out = np.empty((n_rec, u.size), dtype=np.complex128)

    tau = 0.0
    r = 0
    for s in range(int(n_steps) + 1):
        if s % record_every == 0:
            t_out[r] = state.t + s * dt
            tau_out[r] = tau
            u_out[r] = u
            r += 1
        if s == n_steps:
            break
        k1 = nonlinear_padded(u, k)
        a1 = amp(u)
        v = u + (0.5 * dt) * k1
        k2 = nonlinear_padded(v, k)
        a2 = amp(v)
        v = u + (0.5 * dt) * k2
        k3 = nonlinear_padded(v, k)
        a3 = amp(v)
        v = u + dt * k3
        k4 = nonlinear_padded(v, k)
        a4 = amp(v)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        tau = tau + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)

    amps = np.sqrt(np.sum(k2neg * np.abs(u_out[:, neg]) ** 2, axis=1))
    U = u_out / amps[:, None]
    return t_out[:r], tau_out[:r], U[:r]
