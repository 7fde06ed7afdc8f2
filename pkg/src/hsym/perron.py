"""Anomalous exponents as dominant eigenvalues of a multiplier transfer operator.

The scale-to-scale multipliers sigma_m = (A o g^{m+1})/(A o g^m), sampled over
a stationary run and weighted by the synchronized-measure factor A o g^m, are
self-similar across the inertial band.  Their one-step conditional density
rho(sigma_0 | sigma_-1), discretized on a logarithmic grid, defines

    K_p[b, c] = 2^(-p) sigma_c^p rho(sigma_b | sigma_c) dsigma_b,

whose dominant eigenvalue R_p gives the structure-function exponent
zeta_p = -log2 R_p.  With memory depth d = 0 the operator is rank one and
R_p collapses to the closed form 2^(-p) * E[sigma^p].
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConvergenceError
from .integrate import Trajectory
from .quotient import scale_amplitudes

SPARSE_FACTOR = 10  # warn when samples < SPARSE_FACTOR * bins (or per column)


@dataclass(frozen=True)
class SigmaGrid:
    """Logarithmic multiplier grid; centers are geometric bin midpoints."""

    edges: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        if e.ndim != 1 or e.size < 3 or e[0] <= 0 or not (np.diff(e) > 0).all():
            raise ValueError("edges must be > 0, strictly increasing, with >= 2 bins")
        object.__setattr__(self, "edges", e)

    @classmethod
    def log_spaced(cls, lo: float = 1e-3, hi: float = 1e2, bins: int = 200) -> "SigmaGrid":
        if not (0 < lo < hi) or bins < 2:
            raise ValueError(f"need 0 < lo < hi and bins >= 2, got [{lo}, {hi}] x {bins}")
        return cls(np.geomspace(lo, hi, bins + 1))

    @property
    def bins(self) -> int:
        return self.edges.size - 1

    @property
    def centers(self) -> np.ndarray:
        return np.sqrt(self.edges[1:] * self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def locate(self, x: np.ndarray) -> np.ndarray:
        """Bin index per sample; -1 when outside the grid."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.edges, x, side="right") - 1
        idx[x == self.edges[-1]] = self.bins - 1
        outside = (x < self.edges[0]) | (x > self.edges[-1])
        idx[outside] = -1
        return idx


@dataclass(frozen=True)
class MultiplierSamples:
    """Per-frame multiplier pairs pooled over a band of scales.

    sigma0[i] = sigma_m at a frame, sigma_prev[i] = sigma_{m-1} at the same
    frame, amp[i] = A o g^m (the scale amplitude the pair was observed at),
    weight[i] = amp[i] * stride_dt, and m[i] records the scale.
    """

    m: np.ndarray
    sigma0: np.ndarray
    sigma_prev: np.ndarray
    weight: np.ndarray
    amp: np.ndarray

    @property
    def count(self) -> int:
        return self.sigma0.size

    def for_scales(self, keep) -> "MultiplierSamples":
        mask = np.isin(self.m, np.asarray(keep))
        return MultiplierSamples(self.m[mask], self.sigma0[mask], self.sigma_prev[mask],
                                 self.weight[mask], self.amp[mask])


def collect_multipliers(traj: Trajectory, m_band: tuple[int, int]) -> MultiplierSamples:
    """sigma pairs over scales m_band[0]..m_band[1] (inclusive).

    Needs m >= 1: the pair partner sigma_{m-1} is undefined at m = 0 because
    nothing lives below the dummy shell.
    """
    lo, hi = int(m_band[0]), int(m_band[1])
    if not (1 <= lo <= hi <= traj.n_shells - 1):
        raise ValueError(f"m band [{lo}, {hi}] must sit inside 1..{traj.n_shells - 1}")
    if traj.n_frames == 0:
        raise ValueError("empty trajectory")
    a = scale_amplitudes(traj, hi + 1)  # (F, hi+2)
    ms, s0, sp, w, amp = [], [], [], [], []
    for m in range(lo, hi + 1):
        ms.append(np.full(traj.n_frames, m, dtype=np.int64))
        s0.append(a[:, m + 1] / a[:, m])
        sp.append(a[:, m] / a[:, m - 1])
        w.append(a[:, m] * traj.stride_dt)
        amp.append(a[:, m])
    return MultiplierSamples(np.concatenate(ms), np.concatenate(s0), np.concatenate(sp),
                             np.concatenate(w), np.concatenate(amp))


def order_weights(samples: MultiplierSamples, d: int, p: float) -> np.ndarray:
    """Sample weights for estimating the order-p eigenvalue.

    The stationary moment ratio <A_{m+1}^p> / <A_m^p> equals the expectation
    of sigma_m^p under the A_m^p-tilted time measure, so the order-p operator
    must be built from the tilted density.  At d = 1 the kernel already
    supplies one sigma^p factor per step, which shifts the tilt one scale
    down: weight by A_{m-1}^p = (A_m / sigma_{m-1})^p instead.

    Each scale is normalized to unit total mass; without that, the p-th power
    concentrates all mass on the deepest scale of the band and the shallower
    scales stop contributing.
    """
    if d not in (0, 1):
        raise ValueError(f"memory depth must be 0 or 1, got {d}")
    tilt = samples.amp if d == 0 else samples.amp / samples.sigma_prev
    w = tilt ** float(p)
    out = np.empty_like(w)
    for m in np.unique(samples.m):
        sel = samples.m == m
        block = w[sel].sum()
        if not block > 0:
            raise ValueError(f"order-{p} weights vanish at scale {int(m)}")
        out[sel] = w[sel] / block
    return out


@dataclass(frozen=True)
class ConditionalDensity:
    """Discretized multiplier density on a SigmaGrid.

    d = 0: rho (G,) is the weighted marginal of sigma0, integrating to 1.
    d = 1: rho (G, G); column c is the density of sigma0 conditioned on
    sigma_prev falling in bin c.  Columns with no samples are filled with the
    marginal and listed in filled_columns.
    """

    grid: SigmaGrid
    d: int
    rho: np.ndarray
    marginal: np.ndarray
    counts: np.ndarray
    filled_columns: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    dropped_fraction: float = 0.0


def estimate_density(samples: MultiplierSamples, grid: SigmaGrid, d: int = 1,
                     warn_sparse: bool = True, weights: np.ndarray | None = None) -> ConditionalDensity:
    """Weighted histogram density of the multiplier stream at memory depth d.

    weights overrides the default time weights samples.weight; pass the
    output of order_weights to build the tilted density for a given p.
    """
    if d not in (0, 1):
        raise ValueError(f"memory depth must be 0 or 1, got {d}")
    if samples.count == 0:
        raise ValueError("no multiplier samples")
    w = samples.weight if weights is None else np.asarray(weights, dtype=float)
    if w.shape != samples.sigma0.shape:
        raise ValueError("weights must match the sample count")
    total_w = w.sum()

    i0 = grid.locate(samples.sigma0)
    ip = grid.locate(samples.sigma_prev)
    keep = i0 >= 0 if d == 0 else (i0 >= 0) & (ip >= 0)
    dropped = 1.0 - (w[keep].sum() / total_w) if total_w > 0 else 0.0
    if dropped > 0.01:
        warnings.warn(f"{dropped:.1%} of multiplier mass falls outside the sigma grid")

    g = grid.bins
    marg_mass = np.bincount(i0[i0 >= 0], weights=w[i0 >= 0], minlength=g)
    if not marg_mass.sum() > 0:
        raise ValueError("no multiplier mass falls inside the sigma grid")
    marginal = marg_mass / (marg_mass.sum() * grid.widths)

    if d == 0:
        counts = np.bincount(i0[i0 >= 0], minlength=g)
        if warn_sparse and counts.sum() < SPARSE_FACTOR * g:
            warnings.warn(f"only {int(counts.sum())} samples for {g} bins; marginal is under-resolved")
        return ConditionalDensity(grid=grid, d=0, rho=marginal, marginal=marginal,
                                  counts=counts, dropped_fraction=float(dropped))

    flat = ip[keep] * g + i0[keep]
    mass = np.bincount(flat, weights=w[keep], minlength=g * g).reshape(g, g).T  # [b, c]
    counts = np.bincount(ip[keep], minlength=g)
    col_mass = mass.sum(axis=0)
    occupied = col_mass > 0
    rho = np.empty((g, g))
    rho[:, occupied] = mass[:, occupied] / (col_mass[occupied] * grid.widths[:, None])
    rho[:, ~occupied] = marginal[:, None]
    filled = np.nonzero(~occupied)[0]
    if warn_sparse:
        thin = occupied & (counts < SPARSE_FACTOR)
        if thin.any():
            warnings.warn(f"{int(thin.sum())} conditioning bins hold fewer than {SPARSE_FACTOR} samples")
    return ConditionalDensity(grid=grid, d=1, rho=rho, marginal=marginal, counts=counts,
                              filled_columns=filled, dropped_fraction=float(dropped))


@dataclass
class TransferMatrix:
    """Discretized weighted transfer operator K_p."""

    p: float
    grid: SigmaGrid
    matrix: np.ndarray
    eigenvalue: Optional[float] = None
    eigenvector: Optional[np.ndarray] = None


def build_transfer(density: ConditionalDensity, p: float) -> TransferMatrix:
    """K_p[b, c] = 2^(-p) sigma_c^p rho(sigma_b | sigma_c) dsigma_b on the grid."""
    if p < 0:
        raise ValueError(f"order must be non-negative, got {p}")
    grid = density.grid
    sig_p = grid.centers**p
    if density.d == 0:
        cond = np.broadcast_to(density.rho[:, None], (grid.bins, grid.bins))
    else:
        cond = density.rho
    k = (2.0**-p) * cond * grid.widths[:, None] * sig_p[None, :]
    return TransferMatrix(p=float(p), grid=grid, matrix=k)


def power_iterate(tm: TransferMatrix, tol: float = 1e-12, max_iter: int = 10_000) -> tuple[float, np.ndarray]:
    """Dominant eigenvalue by power iteration with L1 normalization.

    The iterate stays a probability vector; the eigenvalue estimate is the L1
    growth per application.  Stops when the estimate moves less than tol.
    """
    k = tm.matrix
    v = np.full(tm.grid.bins, 1.0 / tm.grid.bins)
    prev = np.inf
    for _ in range(max_iter):
        w = k @ v
        s = w.sum()
        if not (s > 0) or not np.isfinite(s):
            raise ValueError("transfer matrix annihilates the positive cone (zero or invalid entries)")
        v = w / s
        if abs(s - prev) < tol * max(1.0, abs(s)):
            tm.eigenvalue = float(s)
            tm.eigenvector = v
            return float(s), v
        prev = s
    raise ConvergenceError(f"power iteration did not settle in {max_iter} steps", last_estimate=float(s))


def closed_form_rp(density: ConditionalDensity, p: float) -> float:
    """Memoryless eigenvalue 2^(-p) * E[sigma^p] from the marginal density."""
    if p < 0:
        raise ValueError(f"order must be non-negative, got {p}")
    g = density.grid
    return float(2.0**-p * np.sum(g.centers**p * density.marginal * g.widths))


def exponent_from_eigenvalue(r: float) -> float:
    """zeta_p = -log2 R_p."""
    if not (r > 0) or not np.isfinite(r):
        raise ValueError(f"eigenvalue must be positive and finite, got {r}")
    return float(-np.log2(r))


@dataclass(frozen=True)
class PFResult:
    p: float
    eigenvalue: float
    zeta: float
    zeta_err: float  # jackknife over scales; 0 when not estimated


def pf_exponents(samples: MultiplierSamples, grid: SigmaGrid, d: int, orders,
                 jackknife: bool = True) -> list[PFResult]:
    """zeta_p for each order, with a leave-one-scale-out jackknife error bar.

    Each order gets its own density, built with order_weights so the operator
    sees the multiplier law under the amplitude measure that the order-p
    moment actually averages over.  The jackknife re-derives the weights on
    every leave-one-scale-out subset.  Sparsity warnings are left to callers
    that build the untilted density for reporting.
    """
    orders = [float(p) for p in orders]
    scales = np.unique(samples.m)
    subsets = [samples]
    if jackknife and scales.size >= 3:
        subsets += [samples.for_scales(scales[scales != m0]) for m0 in scales]

    def _zeta(sub: MultiplierSamples, p: float) -> tuple[float, float]:
        dd = estimate_density(sub, grid, d, warn_sparse=False, weights=order_weights(sub, d, p))
        r, _ = power_iterate(build_transfer(dd, p))
        return r, exponent_from_eigenvalue(r)

    out = []
    for p in orders:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            r, zeta = _zeta(samples, p)
            zs = np.array([_zeta(sub, p)[1] for sub in subsets[1:]])
        err = 0.0
        if zs.size:
            mfac = (scales.size - 1) / scales.size
            err = float(np.sqrt(mfac * np.sum((zs - zs.mean()) ** 2)))
        out.append(PFResult(p=p, eigenvalue=r, zeta=zeta, zeta_err=err))
    return out


def per_scale_marginal_ks(samples: MultiplierSamples, grid: SigmaGrid) -> float:
    """Self-similarity diagnostic: largest KS distance between per-scale sigma0 laws."""
    from .stats import WeightedHistogram, collapse_distance

    hists = []
    for m in np.unique(samples.m):
        sel = samples.m == m
        hists.append(WeightedHistogram(grid.edges).add(samples.sigma0[sel], samples.weight[sel]))
    if len(hists) < 2:
        raise ValueError("need at least two scales")
    return collapse_distance(hists)


# ---------------------------------------------------------------------------
# CSV artifacts

def write_pf_csv(results: list[PFResult], zeta_fit: dict[float, float], path) -> None:
    """pf_zeta.csv rows: p, R_p, zeta_pf, zeta_fit, abs_diff (blank without a fit)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "R_p", "zeta_pf", "zeta_pf_err", "zeta_fit", "abs_diff"])
        for r in results:
            zf = zeta_fit.get(r.p)
            w.writerow([
                f"{r.p:g}", repr(float(r.eigenvalue)), repr(float(r.zeta)), repr(float(r.zeta_err)),
                "" if zf is None else repr(float(zf)),
                "" if zf is None else repr(abs(r.zeta - float(zf))),
            ])


def write_density_csv(density: ConditionalDensity, path) -> None:
    c = density.grid.centers
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if density.d == 0:
            w.writerow(["sigma", "rho"])
            for s, r in zip(c, density.rho):
                w.writerow([repr(float(s)), repr(float(r))])
        else:
            w.writerow(["sigma0", "sigma_prev", "rho"])
            for ci in range(density.grid.bins):
                for b in range(density.grid.bins):
                    w.writerow([repr(float(c[b])), repr(float(c[ci])), repr(float(density.rho[b, ci]))])


def write_flags(density: ConditionalDensity, path) -> None:
    lines = [
        f"memory_depth={density.d}",
        f"dropped_mass_fraction={density.dropped_fraction!r}",
    ]
    if density.d == 1:
        thin = int(np.sum((density.counts > 0) & (density.counts < SPARSE_FACTOR)))
        lines.append(f"unfilled_columns={density.filled_columns.size}")
        lines.append(f"filled_column_indices={','.join(map(str, density.filled_columns.tolist()))}")
        lines.append(f"low_sample_columns={thin}")
    else:
        lines.append(f"samples={int(density.counts.sum())}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
