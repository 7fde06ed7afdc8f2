"""Pure-numpy integration kernel.

Fallback twin of the compiled module ``hsym._kernels``; same call signatures,
same semantics, chosen at import time by :mod:`hsym.backend`.
"""

import numpy as np

from .model import nonlinear_padded

NAME = "python"


def nonlinear(u: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Sabra interaction term with zero-padded boundaries."""
    return nonlinear_padded(np.asarray(u), np.asarray(k))


def advance(u, k, forcing, e_half, e_full, dt, n_steps, record_stride, first_record, out, blowup):
    """Integrating-factor RK4 for du/dt = B(u) + f - D u.

    The stiff diagonal D = k^2/Re enters only through the precomputed factors
    e_half = exp(-D dt/2) and e_full = exp(-D dt); with B = f = 0 a step is the
    exact decay u -> e_full u.  `u` is updated in place.  The state after
    absolute step s is stored in out[j] for s = first_record + j*record_stride.

    Returns 0, or the 1-based index of the step after which an amplitude went
    non-finite or above `blowup` (u is then rolled back to the last good step).
    """
    half = 0.5 * dt
    sixth = dt / 6.0
    n_rec = out.shape[0]
    prev = u.copy()
    r = 0
    for s in range(1, n_steps + 1):
        k1 = nonlinear_padded(u, k) + forcing
        a = e_half * (u + half * k1)
        k2 = nonlinear_padded(a, k) + forcing
        b = e_half * u + half * k2
        k3 = nonlinear_padded(b, k) + forcing
        c = e_full * u + dt * (e_half * k3)
        k4 = nonlinear_padded(c, k) + forcing
        unew = e_full * u + sixth * (e_full * k1 + (2.0 * e_half) * (k2 + k3) + k4)
        m = np.max(unew.real * unew.real + unew.imag * unew.imag)
        if not (m <= blowup * blowup):  # also catches NaN
            u[:] = prev
            return s
        u[:] = unew
        prev[:] = unew
        if r < n_rec and s == first_record + r * record_stride:
            out[r] = unew
            r += 1
    return 0
