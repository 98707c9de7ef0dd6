"""Compare the compiled energy kernels against the NumPy fallback.

Run:  python3 benchmarks/bench_kernels.py [--reps 20]

Times energy_and_grad on square grids of increasing size with a realistic
activity pattern (disk mask, ring of pinned nodes) and prints per-call
timings plus the speedup.  Also asserts agreement to 1e-12 on the way, so
a silently divergent backend fails loudly rather than looking fast.
"""

import argparse
import time

import numpy as np

from epilab._kernels import numpy_impl

try:
    from epilab._kernels import _grid_cy
except ImportError:
    _grid_cy = None


def make_problem(n, n_components=1, seed=0):
    rng = np.random.default_rng(seed)
    coords = np.linspace(-1.1, 1.1, n)
    x, y = np.meshgrid(coords, coords)
    r = np.hypot(x, y)
    active = r <= 1.0
    free = active & (r <= 0.97)
    values = np.where(active, np.maximum(0.0, x), 0.0)[..., None]
    values = np.repeat(values, n_components, axis=2)
    values += 0.01 * rng.standard_normal(values.shape) * active[..., None]
    q = np.ones((n, n))
    return values, active, free.astype(np.uint8), q, 0.05, 2.2 / (n - 1)


def time_call(fn, args, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=20)
    opts = ap.parse_args()

    if _grid_cy is None:
        print("compiled backend not available; nothing to compare")
        return

    print(f"{'grid':>10} {'numpy (ms)':>12} {'compiled (ms)':>14} {'speedup':>8}")
    for n in (65, 129, 257, 513):
        args = make_problem(n)
        e1, g1 = numpy_impl.energy_and_grad(*args)
        e2, g2 = _grid_cy.energy_and_grad(*args)
        assert abs(e1 - e2) <= 1e-12 * (1 + abs(e1)), "backend energies differ"
        assert np.allclose(g1, g2, rtol=1e-12, atol=1e-12), "backend grads differ"
        t_np = time_call(numpy_impl.energy_and_grad, args, opts.reps)
        t_cy = time_call(_grid_cy.energy_and_grad, args, opts.reps)
        print(f"{n:>7}^2 {1e3 * t_np:>12.3f} {1e3 * t_cy:>14.3f} "
              f"{t_np / t_cy:>8.2f}x")


if __name__ == "__main__":
    main()
