#!/usr/bin/env python3
"""Benchmark: compiled tape kernel vs the NumPy fallback.

Times batched evaluation of representative expressions over large point
grids (the inner loop of every probe, scan, and selection step) with both
backends, and prints the speedup.  Run directly:

    python benchmarks/bench_eval.py [N]
"""

import sys
import time

import numpy as np

from renormlab import tape
from renormlab.expr import (
    AffineChart,
    CExp,
    CPoly,
    CSum,
    HarmonicPolynomial,
    RealPart,
    Z,
    parse_expr,
)
from renormlab.field import gradient_grid, tilde_grid


def workloads():
    quad = RealPart(CPoly([0, 0, 1]))
    rich = RealPart(CSum((CPoly([0, 0, 1]), CExp(Z())))).precompose(
        AffineChart(0.01, (0.3, -0.2))
    )
    poly = HarmonicPolynomial(
        2, {(3, 0): 1.0, (1, 2): -3.0, (2, 0): 0.5, (0, 2): -0.5, (1, 0): 2.0}
    )
    return [("re_z2", quad), ("re(z^2+e^z) o chart", rich), ("cubic poly", poly)]


def time_call(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 500_000
    rng = np.random.default_rng(0)
    pts = np.ascontiguousarray(rng.uniform(-2.0, 2.0, size=(n, 2)))

    if not tape.HAVE_COMPILED:
        print("compiled kernel not built; nothing to compare")
        return

    print(f"batch size: {n} points, backend default: {tape.active_backend()}")
    print(f"{'workload':24s} {'compiled':>10s} {'python':>10s} {'speedup':>8s}")
    for name, expr in workloads():
        t = expr.tape
        tc = time_call(lambda: tape._c_eval_tape(t.ops, t.iargs, t.cargs, pts, t.depth))
        tp = time_call(lambda: tape.eval_tape_python(t, pts))
        a = tape._c_eval_tape(t.ops, t.iargs, t.cargs, pts, t.depth)
        b = tape.eval_tape_python(t, pts)
        assert np.allclose(a, b, rtol=1e-13, atol=1e-13)
        print(f"{name:24s} {tc*1e3:9.1f}ms {tp*1e3:9.1f}ms {tp/tc:7.2f}x")

    # end-to-end: the damped-derivative scan that dominates engine runtime
    expr = workloads()[1][1]
    t_all = time_call(lambda: tilde_grid(expr, pts), repeats=3)
    print(f"\ntilde scan ({n} pts, value + 2 partials): {t_all*1e3:.1f} ms "
          f"[{tape.active_backend()} backend]")


if __name__ == "__main__":
    main()
