"""Benchmark the compiled RK4 kernels against the numpy/scipy fallback.

Usage: python benchmarks/bench_kernels.py [--steps N]

Covers the two hot loops that dominate every simulation: the pure-state
non-Hermitian step (one trajectory step of the two-qubit system) and the
mixed-state conditional Lindblad step.  Both backends are checked to agree
before timing.
"""

import argparse
import math
import time

import numpy as np

from rnpm import _kernels_py
from rnpm.kernels import get_backend
from rnpm.models import mixed_generator, pure_generator, two_qubit_initial, two_qubit_model
from rnpm.params import QubitAmplitudes, SystemParams

try:
    from rnpm import _kernels_cy
except ImportError:
    _kernels_cy = None


def time_advance(kernel, state, dt, steps, repeat=3):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out, done, _ = kernel.advance(state, dt, steps, -1.0)
        best = min(best, (time.perf_counter() - t0) / steps)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=1000)
    args = ap.parse_args()

    q = QubitAmplitudes.uniform_pair()
    backends = [("python", _kernels_py)] + ([("cython", _kernels_cy)] if _kernels_cy else [])
    print(f"{'kernel':<28}{'backend':<10}{'us/step':>10}{'speedup':>10}")

    # pure-state engine, full two-qubit system
    p = SystemParams(chi=1.0, kappa=1.0, alpha=1.0)
    a = pure_generator(two_qubit_model(p))
    psi = two_qubit_initial(q, p).amplitudes.copy()
    results = {}
    for name, mod in backends:
        per, out = time_advance(mod.make_pure_kernel(a), psi, 1e-3, args.steps)
        results[name] = (per, out)
        speedup = results["python"][0] / per
        print(f"{'pure RK4 (dim %d)' % a.shape[0]:<28}{name:<10}{per * 1e6:>10.2f}{speedup:>10.2f}")
    if _kernels_cy:
        delta = np.max(np.abs(results["python"][1] - results["cython"][1]))
        assert delta < 1e-10, f"backends disagree by {delta:.2e}"

    # mixed-state engine at detector efficiency 0.9
    p5 = SystemParams(chi=1.0, kappa=1.0, alpha=1.0, eta_plus=0.9, eta_minus=0.9,
                      fock_cutoff=10, truncation_tol=1e-4)
    g, u = mixed_generator(two_qubit_model(p5, 10))
    rho = two_qubit_initial(q, p5, 10).to_mixed().matrix.copy()
    results = {}
    for name, mod in backends:
        per, out = time_advance(mod.make_mixed_kernel(g, u), rho, 2e-3, max(10, args.steps // 20))
        results[name] = (per, out)
        speedup = results["python"][0] / per
        print(f"{'mixed RK4 (dim %d)' % g.shape[0]:<28}{name:<10}{per * 1e6:>10.2f}{speedup:>10.2f}")
    if _kernels_cy:
        delta = np.max(np.abs(results["python"][1] - results["cython"][1]))
        assert delta < 1e-10, f"backends disagree by {delta:.2e}"


if __name__ == "__main__":
    main()
