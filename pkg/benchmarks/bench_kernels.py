#!/usr/bin/env python3
"""Benchmark the compiled master-equation kernel against the numpy fallback.

Runs the CZ-gate propagation workloads that dominate the heavy paths (single
density matrix, and the batched operator-basis propagation behind channel
construction) with both backends, checks they agree, and prints timings.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import sys
import time

import numpy as np

from fsqsim._kernels import available_backends
from fsqsim.budget import reference_budget_config
from fsqsim.channels import gate_pair_basis
from fsqsim.czopt import default_profile
from fsqsim.levels import DIM, Q1, full_index
from fsqsim.lindblad import _jump_arrays
from fsqsim.noise import gate_collapse_ops
from fsqsim.rydberg import RydbergDrive, modulated_drive


def build_problem(batch):
    profile = default_profile()
    drive = RydbergDrive()
    config = reference_budget_config()
    mdrive = modulated_drive(profile, drive, 2)
    ptr, rows, cols, amps, gdiag, _ = _jump_arrays(
        gate_collapse_ops(config, drive.rabi_frequency), 2
    )
    if batch == 1:
        rho = np.zeros((1, 36, 36), dtype=complex)
        i11 = full_index([Q1, Q1])
        rho[0, i11, i11] = 1.0
    else:
        pairs = gate_pair_basis(2)[:batch]
        rho = np.zeros((batch, 36, 36), dtype=complex)
        for k, (i, j) in enumerate(pairs):
            rho[k, i, j] = 1.0
    args = (
        0.0,
        profile.t_gate,
        1e-6,
        1e-9,
        np.ascontiguousarray(mdrive.h0),
        np.ascontiguousarray(mdrive.coupling),
        mdrive.phase_amp,
        mdrive.phase_freq,
        mdrive.phase_offset,
        mdrive.phase_slope,
        0.0,
        None,
        ptr,
        rows,
        cols,
        amps,
        gdiag,
    )
    return rho, args


def run(name, fn, rho, args, repeats):
    best = np.inf
    out = None
    for _ in range(repeats):
        work = rho.copy()
        t0 = time.perf_counter()
        out = fn(work, *args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true",
                        help="smaller batch, single repeat")
    opts = parser.parse_args(argv)

    backends = available_backends()
    print(f"backends available: {', '.join(backends)}")
    if len(backends) < 2:
        print("compiled kernel not built; run `pip install -e .` with a "
              "C compiler to compare both")

    workloads = [("single CZ-gate density matrix (36x36)", 1, 3)]
    if opts.quick:
        workloads.append(("operator-basis batch (24 x 36x36)", 24, 1))
    else:
        workloads.append(("operator-basis batch (144 x 36x36)", 144, 1))

    failures = 0
    for label, batch, repeats in workloads:
        rho, args = build_problem(batch)
        print(f"\n{label}, gate duration {args[1]*1e3:.0f} ns:")
        results = {}
        for name, fn in backends.items():
            dt, out = run(name, fn, rho, args, repeats)
            results[name] = (dt, out)
            print(f"  {name:<8s} {dt*1e3:9.1f} ms")
        if len(results) == 2:
            diff = np.max(np.abs(results["python"][1] - results["cython"][1]))
            speedup = results["python"][0] / results["cython"][0]
            print(f"  agreement {diff:.2e}, speedup x{speedup:.1f}")
            if diff > 1e-9:
                failures += 1
                print("  MISMATCH above 1e-9")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
