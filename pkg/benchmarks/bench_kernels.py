"""Time the pure-numpy and Cython propagation kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--steps 1000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from nmkrotov import kernels
from nmkrotov.bath import ExponentialSeries
from nmkrotov.liouville import ExtendedGenerator


def problem(n_terms, steps, seed=0):
    rng = np.random.default_rng(seed)
    if n_terms == 0:
        gen = ExtendedGenerator(None)
    else:
        terms = tuple((complex(*rng.normal(scale=0.01, size=2)), complex(-rng.uniform(0.2, 5), rng.normal()))
                      for _ in range(n_terms))
        gen = ExtendedGenerator(ExponentialSeries(terms))
    eps = rng.uniform(-30, 30, steps)
    return gen, eps, 1e-3


def bench(mod, gen, eps, dt, repeat):
    eye = np.eye(gen.dim, dtype=complex)
    steps = mod.step_matrices(gen.drift, gen.control_diagonal, eps, dt)
    bs = mod.chain_backward(steps, eye / 4)
    cases = {
        "step_matrices": lambda: mod.step_matrices(gen.drift, gen.control_diagonal, eps, dt),
        "chain_forward": lambda: mod.chain_forward(steps, eye),
        "chain_backward": lambda: mod.chain_backward(steps, eye),
        "krotov_sweep": lambda: mod.krotov_sweep(gen.drift, gen.control_diagonal, eps, bs, dt, 50.0, 30.0),
    }
    return {k: min(timeit.repeat(f, number=1, repeat=repeat)) for k, f in cases.items()}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = [("python", kernels.python)]
    if kernels.compiled is not None:
        backends.append(("cython", kernels.compiled))
    else:
        print("compiled backend not built; timing the numpy kernels only")
    for n_terms in (0, 4):
        gen, eps, dt = problem(n_terms, args.steps)
        print(f"\nN = {gen.dim}, {args.steps} steps (best of {args.repeat})")
        timings = {name: bench(mod, gen, eps, dt, args.repeat) for name, mod in backends}
        print(f"{'kernel':<16}" + "".join(f"{n:>12}" for n, _ in backends)
              + ("     speedup" if len(backends) > 1 else ""))
        for kernel in timings["python"]:
            row = f"{kernel:<16}" + "".join(f"{timings[n][kernel] * 1e3:>10.2f}ms" for n, _ in backends)
            if len(backends) > 1:
                row += f"{timings['python'][kernel] / timings['cython'][kernel]:>11.2f}x"
            print(row)


if __name__ == "__main__":
    main()
