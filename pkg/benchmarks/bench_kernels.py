"""Compare the compiled and pure-Python kernel backends.

Times one dealiased nonlinear evaluation and one ETD4RK step per backend at
the reference resolution and reports the speedup and the agreement of the
two backends after a fixed number of steps.

    python3 benchmarks/bench_kernels.py [--n 32] [--repeat 5] [--steps 200]
"""
import argparse
import timeit

import numpy as np

from nsfilter import kernels
from nsfilter.dynamics import Solver, SolverParams
from nsfilter.observations import random_initial_state
from nsfilter.spectral import make_grid


def best_per_call(fn, number: int, repeat: int) -> float:
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=32, help="grid size")
    p.add_argument("--repeat", type=int, default=5, help="timing repeats (best is kept)")
    p.add_argument("--steps", type=int, default=200, help="steps per timed advance")
    args = p.parse_args(argv)

    grid = make_grid(args.n, 2.0)
    w0 = random_initial_state(grid, 1).coeffs
    backends = kernels.available()
    print(f"grid n={args.n}, backends: {', '.join(backends)}")
    timings = {}
    finals = {}
    for name in backends:
        solver = Solver(SolverParams(grid), backend=name)
        nl = best_per_call(lambda: solver.nonlinear(w0), 200, args.repeat)
        step = best_per_call(lambda: solver.advance(w0, args.steps), 1, args.repeat) / args.steps
        timings[name] = (nl, step)
        finals[name] = solver.advance(w0, args.steps)
        print(f"{name:>9}: nonlinear {nl * 1e6:9.1f} us   etd4rk step {step * 1e6:9.1f} us")
    if len(backends) == 2:
        c, py = timings["compiled"], timings["python"]
        print(f"  speedup: nonlinear {py[0] / c[0]:.2f}x   step {py[1] / c[1]:.2f}x")
        diff = np.abs(finals["compiled"] - finals["python"]).max() / np.abs(finals["python"]).max()
        print(f"  max relative difference after {args.steps} steps: {diff:.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
