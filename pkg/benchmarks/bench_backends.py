"""Time circuit evaluation and gradients on both backends.

Usage: python3 benchmarks/bench_backends.py [--reps 20]
"""

import argparse
import time

import numpy as np

from qgsage import backend
from qgsage.circuit import QGCNArchitecture, build_qgcn, init_params


def best_of(fn, reps):
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--reps", type=int, default=20)
    args = parser.parse_args()

    arch = QGCNArchitecture(8, (3, 5))
    circuit = build_qgcn(arch)
    plan = circuit.plan()
    rng = np.random.default_rng(0)
    x = rng.uniform(0, np.pi, 8)
    theta = np.asarray(init_params(arch, 1).values, dtype=np.float64)

    names = ["python"] + (["compiled"] if backend.have_compiled() else [])
    if "compiled" not in names:
        print("compiled backend not built; run: python3 setup.py build_ext --inplace")
    print(f"architecture: 8 qubits, depths (3, 5), {circuit.param_count} parameters")
    print(f"{'backend':<10s} {'value':>12s} {'value+grad':>12s}")
    results = {}
    for name in names:
        mod = backend.get_backend(name)
        value_t = best_of(lambda: mod.circuit_value(plan, theta, x), args.reps)
        grad_t = best_of(lambda: mod.circuit_value_and_grad(plan, theta, x), args.reps)
        results[name] = (value_t, grad_t)
        print(f"{name:<10s} {value_t * 1e6:>10.1f}us {grad_t * 1e3:>10.2f}ms")
    if len(results) == 2:
        pv, pg = results["python"]
        cv, cg = results["compiled"]
        print(f"{'speedup':<10s} {pv / cv:>11.1f}x {pg / cg:>11.1f}x")
        v_py = backend.get_backend("python").circuit_value(plan, theta, x)
        v_cy = backend.get_backend("compiled").circuit_value(plan, theta, x)
        print(f"agreement: |python - compiled| = {abs(v_py - v_cy):.2e}")


if __name__ == "__main__":
    main()
