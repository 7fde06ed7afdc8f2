#!/usr/bin/env python3
"""Timing harness for the two integration kernels.

Drives the same forced shell-model problem through the compiled kernel and
the numpy fallback, reports steps/second for each, the speedup, and the
deviation between the two final states.

    python3 benchmarks/backend_bench.py --shells 28 --steps 20000 --repeats 5
"""

import argparse
import time

import numpy as np

from hsym.backend import load_backend
from hsym.integrate import initial_condition, resolve_clock
from hsym.model import ModelConfig


def time_kernel(kernel, cfg: ModelConfig, dt: float, n_steps: int, repeats: int):
    """Best-of-`repeats` wall time for n_steps; returns (final_state, steps_per_s)."""
    d = cfg.k**2 / cfg.reynolds
    e_half, e_full = np.exp(-0.5 * dt * d), np.exp(-dt * d)
    out = np.empty((1, cfg.n_shells), dtype=np.complex128)
    best = np.inf
    u = None
    for _ in range(repeats):
        u = initial_condition(cfg)
        t0 = time.perf_counter()
        code = kernel.advance(u, cfg.k, cfg.forcing, e_half, e_full, dt,
                              n_steps, n_steps, n_steps, out, 1e6)
        best = min(best, time.perf_counter() - t0)
        if code:
            raise RuntimeError(f"{kernel.NAME} kernel blew up at step {code}")
    return u, n_steps / best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--shells", type=int, default=28)
    ap.add_argument("--reynolds", type=float, default=1e7)
    ap.add_argument("--steps", type=int, default=20_000)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    cfg = ModelConfig(reynolds=args.reynolds, n_shells=args.shells, t_end=1.0,
                      t_transient=0.0)
    dt = resolve_clock(cfg).dt
    print(f"{args.shells} shells, Re = {args.reynolds:g}, dt = {dt:g}, "
          f"{args.steps} steps, best of {args.repeats}")

    results = {}
    for name in ("compiled", "python"):
        try:
            kernel = load_backend(name)
        except ImportError:
            print(f"{name:>9}: not built, skipped")
            continue
        # warm-up outside the timed loop (imports, allocator, branch caches)
        time_kernel(kernel, cfg, dt, min(500, args.steps), 1)
        u, rate = time_kernel(kernel, cfg, dt, args.steps, args.repeats)
        results[name] = (u, rate)
        print(f"{name:>9}: {rate:12,.0f} steps/s")

    if len(results) == 2:
        (u_c, r_c), (u_p, r_p) = results["compiled"], results["python"]
        dev = float(np.abs(u_c - u_p).max())
        print(f"  speedup: {r_c / r_p:.1f}x   final-state deviation: {dev:.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
