"""Command-line interface.

Subcommands: simulate, normalize, pdf, sf, pf, verify.  Outputs land in the
directory given by --out (or $HSYM_OUT, default ./hsym_out).  Exit codes:
0 success, 1 usage, 2 configuration, 3 numerical failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import backend, config, integrate, perron, quotient, stats, verify
from .errors import BlowUpError, ConfigError, ConvergenceError, FormatError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("HSYM_OUT") or "hsym_out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_runconfig(args) -> config.RunConfig:
    cfg = config.load_config(args.config) if args.config else config.RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _thread_map(fn, items, threads: int):
    if threads == 0:
        threads = os.cpu_count() or 1
    if threads == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _load_traj(args) -> integrate.Trajectory:
    return integrate.load_trajectory(args.traj)


def _frames_for_band(traj, band, window, threads):
    ms = list(range(band[0], band[1] + 1))
    frames = _thread_map(lambda m: quotient.rescaled_frame(traj, m, window), ms, threads)
    return dict(zip(ms, frames))


def cmd_simulate(args) -> int:
    rc = _load_runconfig(args)
    out = _out_dir(args)
    traj = integrate.run(rc.model())
    traj.validate()
    integrate.save_trajectory(traj, out / "traj.bin")

    spec = integrate.spectrum(traj)
    spectrum_lines = [f"{n},{float(traj.k[n])!r},{float(spec[n])!r}"
                      for n in range(traj.n_shells)]
    with open(out / "spectrum.csv", "w") as fh:
        fh.write("n,k_n,mean_sq_amplitude\n")
        fh.write("\n".join(spectrum_lines) + "\n")
    e = integrate.energy_series(traj)
    with open(out / "energy.csv", "w") as fh:
        fh.write("t,energy\n")
        for ti, ei in zip(traj.t, e):
            fh.write(f"{float(ti)!r},{float(ei)!r}\n")

    print(f"backend={backend.BACKEND} frames={traj.n_frames} stride_dt={traj.stride_dt!r} "
          f"dt={traj.cfg.dt!r} seed={traj.cfg.seed}")
    print("n,k_n,mean_sq_amplitude")
    print("\n".join(spectrum_lines))
    return EXIT_OK


def cmd_normalize(args) -> int:
    rc = _load_runconfig(args)
    out = _out_dir(args)
    traj = _load_traj(args)
    band = rc.resolved_m_band()
    frames = _frames_for_band(traj, band, rc.window, args.threads)
    manifest = {"m_band": list(band), "window": list(rc.window), "frames": {}}
    for m, fr in sorted(frames.items()):
        fr.validate()
        name = f"frame_m{m}.csv"
        fr.to_csv(out / name)
        manifest["frames"][str(m)] = {"file": name, "samples": fr.n_frames,
                                      "tau_span": float(fr.tau[-1] - fr.tau[0])}
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    print(f"wrote {len(frames)} rescaled frames for m in [{band[0]}, {band[1]}] to {out}")
    return EXIT_OK


def _pdf_histogram(fr, offset: int, edges, weighting: str) -> stats.WeightedHistogram:
    col = fr.shell_column(offset).real
    if weighting == "amplitude":
        return stats.pdf(col, fr.weight, edges)
    # resample: sample-and-hold on a uniform tau grid, then unweighted histogram
    grid = np.linspace(fr.tau[0], fr.tau[-1], fr.tau.size)
    idx = np.clip(np.searchsorted(fr.tau, grid, side="right") - 1, 0, fr.tau.size - 1)
    return stats.pdf(col[idx], None, edges)


def cmd_pdf(args) -> int:
    rc = _load_runconfig(args)
    out = _out_dir(args)
    traj = _load_traj(args)
    band = rc.resolved_m_band()
    frames = _frames_for_band(traj, band, rc.window, args.threads)

    lines = []
    for offset in range(rc.window[0], rc.window[1] + 1):
        pooled = np.concatenate([fr.shell_column(offset).real for fr in frames.values()])
        edges = stats.auto_edges(pooled, bins=rc.pdf_bins, span=rc.pdf_span)
        hists = {m: _pdf_histogram(fr, offset, edges, rc.pdf_weighting) for m, fr in frames.items()}
        for m, h in hists.items():
            stats.write_pdf_csv(h, out / f"pdf_{m}_{offset}.csv")
        if offset == 0:
            pairs = []
            ms = sorted(hists)
            for i, m1 in enumerate(ms):
                for m2 in ms[i + 1:]:
                    pairs.append((m1, m2, stats.collapse_distance([hists[m1], hists[m2]])))
            stats.write_collapse_csv(pairs, out / "collapse.csv")
            ks_max = max(p[2] for p in pairs)
            lines.append(f"normalized-frame collapse over m in [{band[0]}, {band[1]}]: max KS = {ks_max:.4f}")
    for line in lines:
        print(line)
    print(f"pdf files written to {out}")
    return EXIT_OK


def cmd_sf(args) -> int:
    rc = _load_runconfig(args)
    out = _out_dir(args)
    traj = _load_traj(args)
    table = stats.sf_table(traj, rc.orders)
    table = stats.fit_exponents(table, rc.resolved_fit_band())
    stats.write_sf_csv(table, out / "sf.csv")
    stats.write_zeta_csv(table, out / "zeta.csv")
    print("p,zeta,stderr")
    for p, z, e in zip(table.orders, table.zeta, table.zeta_err):
        print(f"{p:g},{z:.6f},{e:.2e}")
    return EXIT_OK


def cmd_pf(args) -> int:
    rc = _load_runconfig(args)
    out = _out_dir(args)
    traj = _load_traj(args)
    band = rc.resolved_m_band()
    grid = perron.SigmaGrid.log_spaced(rc.grid_min, rc.grid_max, rc.grid_bins)
    samples = perron.collect_multipliers(traj, band)
    density = perron.estimate_density(samples, grid, rc.memory_depth)
    results = perron.pf_exponents(samples, grid, rc.memory_depth, rc.orders)

    table = stats.fit_exponents(stats.sf_table(traj, rc.orders), rc.resolved_fit_band())
    zeta_fit = {float(p): float(z) for p, z in zip(table.orders, table.zeta)}

    perron.write_pf_csv(results, zeta_fit, out / "pf_zeta.csv")
    perron.write_density_csv(density, out / "density.csv")
    perron.write_flags(density, out / "flags.txt")
    print("p,R_p,zeta_pf,zeta_fit,abs_diff")
    for r in results:
        zf = zeta_fit[r.p]
        print(f"{r.p:g},{r.eigenvalue:.6e},{r.zeta:.6f},{zf:.6f},{abs(r.zeta - zf):.6f}")
    return EXIT_OK


def cmd_verify(args) -> int:
    corrupt = verify.CORRUPT_NONLINEAR_SIGN if args.corrupt_sign else None
    report = verify.run_suite(corrupt=corrupt)
    print(verify.report_json(report))
    return EXIT_OK if report["passed"] else EXIT_NUMERICAL


def build_parser() -> _Parser:
    parser = _Parser(prog="hsym", description="Sabra shell model: simulation and scale-quotient analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, traj=False):
        p.add_argument("--config", help="key=value run configuration file")
        p.add_argument("--out", help="output directory (default $HSYM_OUT or ./hsym_out)")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for per-scale analysis (0 = all cores)")
        if traj:
            p.add_argument("--traj", required=True, help="binary trajectory file from `hsym simulate`")

    p = sub.add_parser("simulate", help="integrate the forced model and write traj.bin")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("normalize", help="rescaled frames per scale, CSV + manifest")
    common(p, traj=True)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("pdf", help="per-scale PDFs of Re U_n^(m) and the collapse table")
    common(p, traj=True)
    p.set_defaults(func=cmd_pdf)

    p = sub.add_parser("sf", help="structure functions and fitted exponents")
    common(p, traj=True)
    p.set_defaults(func=cmd_sf)

    p = sub.add_parser("pf", help="transfer-operator exponents from multiplier statistics")
    common(p, traj=True)
    p.set_defaults(func=cmd_pf)

    p = sub.add_parser("verify", help="run the self-verification suite, print JSON")
    common(p)
    p.add_argument("--corrupt-sign", action="store_true",
                   help="negative control: corrupt the interaction stencil sign")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (BlowUpError, ConvergenceError, ValueError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
