"""Weighted single-point statistics: histograms, PDFs, structure functions.

Samples from a recorded trajectory arrive with weights (the scale amplitude
times the frame spacing) so that averages over the synchronized measure reduce
to weighted time averages.  Histograms are mergeable accumulators: partial
results from different scales or chunks combine by addition.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .integrate import Trajectory
from .model import wavenumber
from .quotient import RescaledFrame


class WeightedHistogram:
    """Fixed-bin accumulator of weighted samples.

    Bins follow numpy conventions (right-open, last bin closed); mass landing
    outside the edges is tracked in `under`/`over`, so the total weight is
    conserved: mass.sum() + under + over == total.
    """

    __slots__ = ("edges", "mass", "under", "over", "total")

    def __init__(self, edges):
        edges = np.asarray(edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or not (np.diff(edges) > 0).all():
            raise ValueError("edges must be a strictly increasing 1-d array with >= 2 entries")
        self.edges = edges
        self.mass = np.zeros(edges.size - 1)
        self.under = 0.0
        self.over = 0.0
        self.total = 0.0

    def add(self, samples, weights=None) -> "WeightedHistogram":
        samples = np.asarray(samples, dtype=float).ravel()
        if weights is None:
            weights = np.ones_like(samples)
        else:
            weights = np.asarray(weights, dtype=float).ravel()
            if weights.shape != samples.shape:
                raise ValueError("samples and weights must have equal length")
            if (weights < 0).any():
                raise ValueError("negative weight")
        hist, _ = np.histogram(samples, bins=self.edges, weights=weights)
        self.mass += hist
        self.under += weights[samples < self.edges[0]].sum()
        self.over += weights[samples > self.edges[-1]].sum()
        self.total += weights.sum()
        return self

    def merge(self, other: "WeightedHistogram") -> "WeightedHistogram":
        """Combined accumulator; commutative, and associative to roundoff."""
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot merge histograms with different edges")
        out = WeightedHistogram(self.edges)
        out.mass = self.mass + other.mass
        out.under = self.under + other.under
        out.over = self.over + other.over
        out.total = self.total + other.total
        return out

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def density(self) -> np.ndarray:
        """Mass per unit length, normalized by the total weight (out-of-range included)."""
        if self.total <= 0:
            raise ValueError("histogram holds no mass")
        return self.mass / (self.total * self.widths)

    def cdf(self) -> np.ndarray:
        """Weighted empirical CDF evaluated at every edge."""
        if self.total <= 0:
            raise ValueError("histogram holds no mass")
        c = np.empty(self.edges.size)
        c[0] = self.under
        np.cumsum(self.mass, out=c[1:])
        c[1:] += self.under
        return c / self.total


def pdf(samples, weights=None, edges=None) -> WeightedHistogram:
    """One-call weighted histogram."""
    if edges is None:
        raise ValueError("edges are required")
    return WeightedHistogram(edges).add(samples, weights)


def auto_edges(samples, bins: int = 201, span: float = 5.0) -> np.ndarray:
    """Uniform bins covering mean +- span standard deviations of the pooled data."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("no samples")
    mu = samples.mean()
    sd = samples.std()
    if sd == 0:
        raise ValueError("degenerate sample: zero standard deviation")
    return np.linspace(mu - span * sd, mu + span * sd, bins + 1)


def weighted_average(values, weights) -> float:
    values = np.asarray(values, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if values.shape != weights.shape:
        raise ValueError("values and weights must have equal length")
    if (weights < 0).any():
        raise ValueError("negative weight")
    total = weights.sum()
    if not total > 0:
        raise ValueError("total weight must be positive")
    return float(np.sum(values * weights) / total)


def collapse_distance(hists: Sequence[WeightedHistogram]) -> float:
    """Largest pairwise Kolmogorov-Smirnov distance among the histograms.

    All histograms must share identical edges; the sup runs over the edge set,
    with out-of-range mass entering through the first/last CDF values.
    """
    if len(hists) < 2:
        raise ValueError("need at least two histograms")
    edges = hists[0].edges
    for h in hists[1:]:
        if not np.array_equal(h.edges, edges):
            raise ValueError("histograms must share identical edges")
    cdfs = np.stack([h.cdf() for h in hists])
    d = 0.0
    for i in range(len(hists)):
        for j in range(i + 1, len(hists)):
            d = max(d, float(np.abs(cdfs[i] - cdfs[j]).max()))
    return d


# ---------------------------------------------------------------------------
# structure functions

def structure_function(traj: Trajectory, p: float, n: int) -> float:
    """S_p(k_n) = time average of |u_n|^p."""
    if p < 0:
        raise ValueError(f"order must be non-negative, got {p}")
    if not (0 <= n < traj.n_shells):
        raise ValueError(f"shell {n} outside 0..{traj.n_shells - 1}")
    if traj.n_frames == 0:
        raise ValueError("empty trajectory")
    return float(np.mean(np.abs(traj.u[:, n]) ** p))


def normalized_structure_function(frame: RescaledFrame, p: float, n: int) -> float:
    """S_p(k_n) recovered from the rescaled frame at scale m = frame.m.

    Undoing the rebasing, |u_{n}| = |U_{n-m}^{(m)}| * weight / k_m, so the
    plain time average of |U w / k_m|^p reproduces the direct structure
    function; the two code paths share no data beyond the trajectory itself.
    """
    if p < 0:
        raise ValueError(f"order must be non-negative, got {p}")
    col = frame.shell_column(n - frame.m)
    km = wavenumber(frame.m)
    return float(np.mean((np.abs(col) * frame.weight / km) ** p))


@dataclass(frozen=True)
class SFTable:
    """Structure functions S_p(k_n) on a grid of orders and shells."""

    orders: np.ndarray  # (P,)
    shells: np.ndarray  # (N,) shell indices
    values: np.ndarray  # (P, N)
    zeta: Optional[np.ndarray] = None
    zeta_err: Optional[np.ndarray] = None
    band: Optional[tuple[int, int]] = None


def sf_table(traj: Trajectory, orders, shells=None) -> SFTable:
    orders = np.asarray(orders, dtype=float)
    if shells is None:
        shells = np.arange(traj.n_shells)
    shells = np.asarray(shells, dtype=int)
    a = np.abs(traj.u[:, shells])
    values = np.stack([np.mean(a**p, axis=0) for p in orders])
    return SFTable(orders=orders, shells=shells, values=values)


def fit_loglog(x, y) -> tuple[float, float]:
    """OLS slope of y against x with its standard error (needs >= 3 points)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise ValueError("need at least three points for a slope with an error bar")
    xc = x - x.mean()
    sxx = np.sum(xc * xc)
    slope = float(np.sum(xc * (y - y.mean())) / sxx)
    resid = y - y.mean() - slope * xc
    var = float(np.sum(resid * resid) / (x.size - 2) / sxx)
    return slope, float(np.sqrt(var))


def default_fit_band(reynolds: float, n_shells: int) -> tuple[int, int]:
    """Inertial-range shells clear of both the forcing and the viscous cutoff."""
    hi = min(round(0.75 * np.log2(reynolds)) - 4, n_shells - 2)
    return 4, int(hi)


def fit_exponents(table: SFTable, band: tuple[int, int]) -> SFTable:
    """Least-squares zeta_p from log2 S_p vs n over the shell band (inclusive)."""
    lo, hi = int(band[0]), int(band[1])
    sel = (table.shells >= lo) & (table.shells <= hi)
    if sel.sum() < 3:
        raise ValueError(f"fit band [{lo}, {hi}] covers fewer than three tabulated shells")
    x = table.shells[sel].astype(float)
    zeta = np.empty(table.orders.size)
    err = np.empty(table.orders.size)
    for i in range(table.orders.size):
        vals = table.values[i, sel]
        if (vals <= 0).any():
            bad = table.shells[sel][vals <= 0][0]
            raise ValueError(f"S_p vanishes at shell {bad}: cannot fit a log slope")
        slope, se = fit_loglog(x, np.log2(vals))
        zeta[i] = -slope
        err[i] = se
    return replace(table, zeta=zeta, zeta_err=err, band=(lo, hi))


# ---------------------------------------------------------------------------
# CSV artifacts

def _fmt_order(p: float) -> str:
    return f"{p:g}"


def write_sf_csv(table: SFTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "k_n"] + [f"S_{_fmt_order(p)}" for p in table.orders])
        for j, n in enumerate(table.shells):
            w.writerow([int(n), repr(float(wavenumber(int(n))))]
                       + [repr(float(v)) for v in table.values[:, j]])


def write_zeta_csv(table: SFTable, path) -> None:
    if table.zeta is None:
        raise ValueError("fit the exponents before writing zeta.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "zeta", "stderr"])
        for p, z, e in zip(table.orders, table.zeta, table.zeta_err):
            w.writerow([_fmt_order(p), repr(float(z)), repr(float(e))])


def write_pdf_csv(hist: WeightedHistogram, path) -> None:
    dens = hist.density()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_center", "density"])
        for c, d in zip(hist.centers, dens):
            w.writerow([repr(float(c)), repr(float(d))])


def write_collapse_csv(pairs, path) -> None:
    """pairs: iterable of (m1, m2, ks)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m1", "m2", "ks"])
        for m1, m2, ks in pairs:
            w.writerow([int(m1), int(m2), repr(float(ks))])
