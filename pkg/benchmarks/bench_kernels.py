"""Compare the compiled and pure-Python kernel backends.

Times three levels on the halo-to-halo case: the CR3BP derivative kernel on a
batch of states, one full discretization of a reference (with and without the
second-order tensor), and a short SCVX run. The largest difference between the
two backends' results is printed next to the timings.

Usage::

    python3 benchmarks/bench_kernels.py [--nodes 300] [--repeat 5] [--json out.json]
"""
import argparse
import json
import platform
import time

import numpy as np

from scvx_nlmesh import bundled_config, kernels, load_config
from scvx_nlmesh.discretization import discretize
from scvx_nlmesh.dynamics import CR3BP
from scvx_nlmesh.scvx import ScvxOptions, initialize_reference, run


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench(backend, problem, K, repeat, scvx_iters):
    model = CR3BP(problem.units.mu, backend=backend)
    rng = np.random.default_rng(0)
    x = problem.x0 + rng.normal(0, 1e-2, (K, 6))
    thrust = rng.normal(0, 1e-3, (K, 3))
    s = np.full(K, problem.tof)
    ref = initialize_reference(problem, K)

    rows = {}
    rows["derivatives (order 2)"] = best_of(
        lambda: model.derivatives(x, thrust, s, order=2).h, repeat)
    rows["discretize"] = best_of(lambda: discretize(model, ref, backend=backend).A, repeat)
    rows["discretize + STT"] = best_of(
        lambda: discretize(model, ref, with_stt=True, backend=backend).Lam, max(1, repeat // 2))
    opts = ScvxOptions(max_iterations=scvx_iters)
    rows[f"scvx ({scvx_iters} iterations)"] = best_of(
        lambda: run(problem, opts, K, backend=backend).reference.x, 1)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=300)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scvx-iters", type=int, default=3)
    ap.add_argument("--json", help="also write the timings here")
    args = ap.parse_args(argv)

    if not kernels.HAVE_COMPILED:
        raise SystemExit("compiled kernels not built; run `python3 setup.py build_ext --inplace`")
    problem = load_config(bundled_config("cr3bp_halo")).problem()
    results = {b: bench(b, problem, args.nodes, args.repeat, args.scvx_iters)
               for b in ("python", "compiled")}

    print(f"K={args.nodes}  python {platform.python_version()}  numpy {np.__version__}")
    print(f"{'kernel':<26}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>9}{'max diff':>11}")
    report = {}
    for name in results["python"]:
        tp, outp = results["python"][name]
        tc, outc = results["compiled"][name]
        diff = float(np.max(np.abs(np.asarray(outp) - np.asarray(outc))))
        print(f"{name:<26}{tp:>12.4f}{tc:>14.4f}{tp / tc:>9.1f}{diff:>11.1e}")
        report[name] = {"python_s": tp, "compiled_s": tc, "speedup": tp / tc, "max_diff": diff}
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"nodes": args.nodes, "results": report}, fh, indent=2)


if __name__ == "__main__":
    main()
