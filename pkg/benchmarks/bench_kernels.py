"""Time every hot kernel in its numba and pure-numpy form.

    python3 benchmarks/bench_kernels.py [--repeat 5]

numba timings exclude the first (compiling) call. When numba is missing or
disabled with ``DISSIPATE_DISABLE_NUMBA`` only the numpy column is filled.
"""
import argparse
import timeit

import numpy as np

from dissipate import kernels
from dissipate._accel import HAS_NUMBA, USE_NUMBA


def cases(rng):
    t = np.linspace(0, 40 * np.pi, 20_000)
    disp = (1 + t / 20) * np.sin(t)
    force = 50 * np.cos(t)
    X = rng.uniform(-1, 1, (250, 9))
    y = rng.normal(size=250)
    w = rng.uniform(0.5, 2.0, 9)
    ls = rng.uniform(0.5, 2.0, 9)
    M = rng.normal(size=(250, 250))
    M = M + M.T
    beta = np.zeros(9)
    return {
        "loop_integral (20k pts)": ("loop_integral", (disp, force, True)),
        "upward_crossings (20k pts)": ("upward_crossings", (disp, 0.1)),
        "lasso_cd (250x9)": ("lasso_cd", (X, y, 1.0, beta, 1e-10, 1000)),
        "nca_objective_grad (250x9)": ("nca_objective_grad", (X, y, w, 1.0, 0.004)),
        "nca_predict (250 -> 62)": ("nca_predict", (X, y, w, 1.0, X[:62])),
        "ard_kernel (250x250x9)": ("ard_kernel", (X, X, ls, 1.0)),
        "ard_grad_traces (250x250x9)": ("ard_grad_traces", (X, M, ls)),
    }


def bench(fn, args, repeat):
    fn(*args)  # warm-up / compile
    n, _ = timeit.Timer(lambda: fn(*args)).autorange()
    return min(timeit.repeat(lambda: fn(*args), number=n, repeat=repeat)) / n


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    rng = np.random.default_rng(0)
    use_numba = HAS_NUMBA and USE_NUMBA
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':32s} {'numpy (ms)':>12s} {'numba (ms)':>12s} {'speedup':>9s}")
    for label, (name, a) in cases(rng).items():
        t_np = bench(getattr(kernels, f"{name}_numpy"), a, args.repeat) * 1e3
        if use_numba:
            t_nb = bench(getattr(kernels, f"{name}_numba"), a, args.repeat) * 1e3
            print(f"{label:32s} {t_np:12.3f} {t_nb:12.3f} {t_np / t_nb:8.1f}x")
        else:
            print(f"{label:32s} {t_np:12.3f} {'-':>12s} {'-':>9s}")


if __name__ == "__main__":
    main()
