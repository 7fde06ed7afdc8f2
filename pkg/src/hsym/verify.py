"""Self-verification suite: exact identities and dual-route consistency checks.

Each check exercises a calibrated identity of the model or quotient machinery
on generated data and reports a measured value against its threshold.  The
suite is deterministic (fixed seeds, no wall-clock input), so two runs produce
identical reports.

The `corrupt` hook swaps a sign-flipped interaction stencil into the
energy-conservation check; it exists as a negative control to show that check
has teeth, and it is scoped to that single check on purpose.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from . import backend, integrate, perron, quotient, stats
from .model import (ModelConfig, ShellState, energy, ideal_rhs, nonlinear_padded,
                    nonlinear_term, space_scale, time_scale, wavenumber)

CORRUPT_NONLINEAR_SIGN = "nonlinear-sign"


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str
    warn_only: bool = False

    def __post_init__(self):
        # numpy scalars sneak in from comparisons; keep the report JSON-clean
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "threshold", float(self.threshold))


def _corrupt_nonlinear(state: ShellState) -> np.ndarray:
    """Interaction stencil with the middle-term sign flipped (negative control)."""
    u, k = state.u, state.k
    w = np.zeros(u.size + 4, dtype=np.complex128)
    w[2:-2] = u
    c = np.conj(w)
    return 1j * k * (2.0 * w[4:] * c[3:-1] + 0.5 * w[3:-1] * c[1:-3] + 0.25 * w[1:-3] * w[:-4])


def _random_state(rng, n_min=-6, n_max=9) -> ShellState:
    n = np.arange(n_min, n_max + 1)
    mag = wavenumber(n) ** (-1.0 / 3.0) * rng.uniform(0.5, 1.5, n.size)
    phase = rng.uniform(0.0, 2.0 * np.pi, n.size)
    return ShellState(0.0, n_min, mag * np.exp(1j * phase))


@lru_cache(maxsize=1)
def _small_run() -> integrate.Trajectory:
    cfg = ModelConfig(reynolds=1.0e5, n_shells=16, t_end=60.0, t_transient=15.0,
                      record_stride=8, seed=12)
    return integrate.run(cfg)


@lru_cache(maxsize=1)
def _decay_run() -> integrate.Trajectory:
    # lower Re so the top shells sit well past the viscous cutoff
    cfg = ModelConfig(reynolds=1.0e4, n_shells=16, t_end=40.0, t_transient=10.0,
                      record_stride=16, seed=12)
    return integrate.run(cfg)


_SMALL_M_BAND = (3, 8)  # inertial band of the Re = 1e5 check run


def check_energy_conservation(corrupt=None) -> CheckResult:
    """Re sum conj(u) B(u) = 0: the interaction term moves energy, never makes it."""
    rng = np.random.default_rng(7)
    b_impl = _corrupt_nonlinear if corrupt == CORRUPT_NONLINEAR_SIGN else nonlinear_term
    worst = 0.0
    for _ in range(20):
        s = _random_state(rng)
        resid = abs(float(np.sum(np.conj(s.u) * b_impl(s)).real))
        scale = energy(s) * wavenumber(s.n_max)
        worst = max(worst, resid / scale)
    return CheckResult("energy_conservation", worst < 1e-12, worst, 1e-12,
                       "max |Re<u, B(u)>| / (E k_max) over random states")


def check_homogeneity() -> CheckResult:
    """B(x/a) = B(x)/a^2 for amplitude scalings."""
    rng = np.random.default_rng(8)
    worst = 0.0
    for a in (0.5, 2.0, 3.7):
        for _ in range(5):
            s = _random_state(rng)
            b = nonlinear_term(s)
            ba = nonlinear_term(time_scale(s, a))
            worst = max(worst, float(np.abs(ba * a * a - b).max() / np.abs(b).max()))
    return CheckResult("quadratic_homogeneity", worst < 1e-12, worst, 1e-12,
                       "max rel |a^2 B(x/a) - B(x)| for a in {0.5, 2, 3.7}")


def check_shift_commutation() -> CheckResult:
    """Ideal dynamics commutes with the shell shift g^m."""
    rng = np.random.default_rng(9)
    worst = 0.0
    for m in (1, 3):
        for _ in range(5):
            s = _random_state(rng, -8, 9)
            lhs = ideal_rhs(space_scale(s, m))          # interior [n_min-m+2, n_max-m-2]
            rhs_full = ideal_rhs(s)                     # interior [n_min+2, n_max-2]
            rhs = wavenumber(m) * rhs_full              # g^m acts on the values
            scale = np.abs(rhs).max()
            worst = max(worst, float(np.abs(lhs - rhs).max() / scale))
    return CheckResult("shift_commutation", worst < 1e-12, worst, 1e-12,
                       "max rel |ideal_rhs(g^m x) - g^m ideal_rhs(x)| for m in {1, 3}")


def check_projector() -> CheckResult:
    """P is idempotent and kills amplitude scalings."""
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(5):
        s = _random_state(rng)
        p1 = quotient.project(s)
        p2 = quotient.project(p1)
        worst = max(worst, float(np.abs(p2.u - p1.u).max()))
        for a in (0.5, 2.0, 3.7):
            pa = quotient.project(time_scale(s, a))
            worst = max(worst, float(np.abs(pa.u - p1.u).max() / np.abs(p1.u).max()))
    return CheckResult("projector_laws", worst < 1e-12, worst, 1e-12,
                       "max |P P x - P x| and rel |P h^a x - P x|")


def check_sigma_invariance() -> CheckResult:
    """Multipliers are blind to amplitude scalings."""
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(5):
        s = _random_state(rng)
        for n in (0, 1, 3):
            ref = quotient.multiplier_sigma(s, n)
            for a in (0.5, 2.0, 3.7):
                worst = max(worst, abs(quotient.multiplier_sigma(time_scale(s, a), n) - ref) / ref)
    return CheckResult("sigma_scale_invariance", worst < 1e-12, worst, 1e-12,
                       "max rel |sigma_n(h^a x) - sigma_n(x)|")


def check_multiplier_identity() -> CheckResult:
    """u_{m+1}/u_m equals U_1^{(m)}/U_0^{(m)} sample by sample."""
    traj = _small_run()
    worst = 0.0
    for m in range(_SMALL_M_BAND[0], _SMALL_M_BAND[1] + 1):
        fr = quotient.rescaled_frame(traj, m, window=(0, 1))
        u0 = traj.u[:, m]
        u1 = traj.u[:, m + 1]
        ok = np.abs(u0) > 1e-30 * np.abs(traj.u).max()
        ratio_raw = u1[ok] / u0[ok]
        ratio_frame = fr.shell_column(1)[ok] / fr.shell_column(0)[ok]
        denom = np.maximum(np.abs(ratio_raw), 1e-300)
        worst = max(worst, float((np.abs(ratio_frame - ratio_raw) / denom).max()))
    return CheckResult("multiplier_identity", worst < 1e-12, worst, 1e-12,
                       "max rel |U_1/U_0 - u_{m+1}/u_m| over the band")


def check_constraint_unity() -> CheckResult:
    """Rescaled frames sit on the unit level set of the sub-window mass."""
    traj = _small_run()
    worst = 0.0
    for m in (0, 3, 7):
        fr = quotient.rescaled_frame(traj, m, window=(-1 - m, 0))
        n = np.arange(fr.n_lo, 0)
        k2 = wavenumber(n) ** 2
        mass = np.sum(k2[None, :] * np.abs(fr.U[:, : n.size]) ** 2, axis=1)
        worst = max(worst, float(np.abs(mass - 1.0).max()))
    return CheckResult("constraint_unity", worst < 1e-12, worst, 1e-12,
                       "max |sum_{n<0} k_n^2 |U_n^{(m)}|^2 - 1| for m in {0, 3, 7}")


def check_constraint_preservation() -> CheckResult:
    """The quotient flow is tangent to the constraint surface."""
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(10):
        s = quotient.project(_random_state(rng))
        rhs = quotient.normalized_rhs(s)
        neg = slice(0, -s.n_min)
        k2 = s.k[neg] ** 2
        ddt = 2.0 * float(np.sum(k2 * (np.conj(s.u[neg]) * rhs[neg]).real))
        scale = float(np.abs(rhs).max())
        worst = max(worst, abs(ddt) / scale)
    return CheckResult("constraint_preservation", worst < 1e-10, worst, 1e-10,
                       "max |d/dtau sum k^2 |U|^2| / |rhs| at projected states")


def check_oracle_equivalence(tau_end: float = 0.2, dt: float = 1e-4) -> CheckResult:
    """Project-then-evolve equals evolve-then-project on the quotient clock.

    Route A integrates the ideal model in t, accumulates tau and projects;
    route B integrates the quotient flow directly in tau.  Both use the same
    truncated window, so they must agree to integration accuracy.
    """
    rng = np.random.default_rng(14)
    n_min, n_max = -6, 6
    s = _random_state(rng, n_min, n_max)
    n_steps = int(np.ceil(1.6 * tau_end / dt))  # generous t horizon; A stays O(1)
    t, tau, u_proj = quotient.synchronized_ideal_run(s, dt, n_steps, record_every=25)
    sel = tau <= tau_end
    tau = tau[sel][1:]
    u_proj = u_proj[sel][1:]
    u_quot = quotient.integrate_normalized_to(quotient.project(s), tau, dtau_max=dt)
    interior = slice(2, s.u.size - 2)
    worst = float(np.abs(u_proj[:, interior] - u_quot[:, interior]).max())
    return CheckResult("oracle_equivalence", worst < 1e-5, worst, 1e-5,
                       f"sup |U_route_A - U_route_B| on interior shells, tau <= {tau_end}")


def check_transfer_p0() -> CheckResult:
    """K_0 is an averaging operator: R_0 = 1 on any estimated density."""
    traj = _small_run()
    samples = perron.collect_multipliers(traj, _SMALL_M_BAND)
    worst = 0.0
    for d in (0, 1):
        dens = perron.estimate_density(samples, perron.SigmaGrid.log_spaced(), d, warn_sparse=False)
        r0, _ = perron.power_iterate(perron.build_transfer(dens, 0.0))
        worst = max(worst, abs(r0 - 1.0))
    return CheckResult("transfer_p0_unity", worst < 1e-8, worst, 1e-8,
                       "|R_0 - 1| for memory depth 0 and 1")


def check_stationarity() -> CheckResult:
    traj = _small_run()
    ratio = integrate.stationarity_ratio(traj)
    return CheckResult("stationarity", ratio < 0.5, ratio, 0.5,
                       "|energy drift| / std between run halves (turbulence fluctuates)",
                       warn_only=True)


def check_viscous_decay() -> CheckResult:
    traj = _decay_run()
    slope = integrate.dissipation_tail_slope(traj)
    return CheckResult("viscous_tail_decay", slope < -4.0, slope, -4.0,
                       "log2 slope of time-averaged |u_n| over the top 4 shells")


def run_suite(corrupt: str | None = None) -> dict:
    """Run every check; returns a JSON-ready report."""
    if corrupt not in (None, CORRUPT_NONLINEAR_SIGN):
        raise ValueError(f"unknown corruption fixture {corrupt!r}")
    checks = [
        check_energy_conservation(corrupt),
        check_homogeneity(),
        check_shift_commutation(),
        check_projector(),
        check_sigma_invariance(),
        check_multiplier_identity(),
        check_constraint_unity(),
        check_constraint_preservation(),
        check_oracle_equivalence(),
        check_transfer_p0(),
        check_viscous_decay(),
        check_stationarity(),
    ]
    passed = all(c.passed for c in checks if not c.warn_only)
    return {
        "backend": backend.BACKEND,
        "corrupt": corrupt,
        "passed": passed,
        "checks": [asdict(c) for c in checks],
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2)
