"""Compare numba and pure-numpy assembly kernels on refined square meshes.

Run as: python3 benchmarks/assembly_bench.py [--levels N]
The numba path is selected by default; setting DRUMKIT_NO_NUMBA=1 in the
environment switches the package to the numpy fallback, so this script
re-imports the kernel module under both settings in subprocesses.
"""

import argparse
import json
import subprocess
import sys
import textwrap

WORKER = textwrap.dedent("""
    import json, os, sys, time
    import numpy as np
    from drumkit.mesh import mesh_rectangle, refine
    from drumkit import _kernels
    from drumkit.fem import assemble_stiffness, assemble_mass

    levels = int(sys.argv[1])
    m = mesh_rectangle((0.0, 0.0), (1.0, 1.0), 8, 8)
    for _ in range(levels):
        m = refine(m)
    # warm up (jit compilation cost should not be timed)
    assemble_stiffness(m); assemble_mass(m)
    reps = 5
    t0 = time.perf_counter()
    for _ in range(reps):
        a = assemble_stiffness(m)
        b = assemble_mass(m)
    dt = (time.perf_counter() - t0) / reps
    print(json.dumps({
        "backend": _kernels.BACKEND,
        "n_cells": int(m.n_cells),
        "seconds": dt,
        "stiffness_sum": float(abs(a).sum()),
        "mass_sum": float(b.sum()),
    }))
""")


def run(levels, no_numba):
    env = dict(__import__("os").environ)
    if no_numba:
        env["DRUMKIT_NO_NUMBA"] = "1"
    else:
        env.pop("DRUMKIT_NO_NUMBA", None)
    out = subprocess.run(
        [sys.executable, "-c", WORKER, str(levels)],
        capture_output=True, text=True, env=env, check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--levels", type=int, default=4)
    args = ap.parse_args()
    numba_res = run(args.levels, no_numba=False)
    numpy_res = run(args.levels, no_numba=True)
    for r in (numba_res, numpy_res):
        print(f"{r['backend']:>6}: {r['n_cells']} cells, {r['seconds']*1e3:.2f} ms/assembly")
    if abs(numba_res["mass_sum"] - numpy_res["mass_sum"]) > 1e-12:
        raise SystemExit("backends disagree on mass matrix")
    if abs(numba_res["stiffness_sum"] - numpy_res["stiffness_sum"]) > 1e-9:
        raise SystemExit("backends disagree on stiffness matrix")
    speedup = numpy_res["seconds"] / numba_res["seconds"]
    print(f"speedup numba vs numpy: {speedup:.2f}x (identical matrices)")


if __name__ == "__main__":
    main()
