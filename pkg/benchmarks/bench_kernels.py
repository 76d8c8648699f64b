"""Time the numba kernels against their numpy counterparts.

    python benchmarks/bench_kernels.py [--repeat 5] [--anchors 2000]

Both backends are imported directly, so the CRM_DISABLE_NUMBA flag does not
matter here.  The end-to-end section runs a short regime-drift job in a
subprocess per backend, which is where the flag does apply.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from crm.kernels import _numba, _numpy

E2E = """
import time
from crm.discrepancy import make_bound
from crm.macro import Macro, run
from crm.process import ProcessDescriptor, gen_regime_drift, swapped_regimes
from crm.subroutine import LearnerSpec
desc = ProcessDescriptor("regime_drift", {"means": swapped_regimes(2.0, 2), "period": 500}, 2, 2, 7)
seq = gen_regime_drift(desc, 50)
run(seq, Macro(make_bound("d1"), LearnerSpec("gnb", 2), 0.1))
seq = gen_regime_drift(desc, %d)
t = time.perf_counter()
run(seq, Macro(make_bound("d1"), LearnerSpec("gnb", 2), 0.1))
print(time.perf_counter() - t)
"""


def cases(anchors, rng):
    w, d = 5, 2
    S, T = rng.normal(size=(w, d)), rng.normal(size=(w, d))
    qf, ql = rng.normal(size=(w, d)), rng.integers(0, 2, w)
    af, al = rng.normal(size=(anchors, w, d)), rng.integers(0, 2, (anchors, w))
    alen = np.full(anchors, w)
    q, A = rng.normal(size=(w, d)), rng.normal(size=(anchors, w, d))
    P = rng.dirichlet(np.ones(3), size=3)
    cum = np.cumsum(P, axis=1)
    u = rng.random(100_000)
    pts = rng.random((400, 2))
    D = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    return {
        "bottleneck": lambda m: m.bottleneck(S, T),
        "class_window_to_anchors": lambda m: m.class_window_to_anchors(qf, ql, af, al, alen, 2, 1.5),
        "aligned_to_anchors": lambda m: m.aligned_to_anchors(q, w, A, alen),
        "markov_labels": lambda m: m.markov_labels(cum, 0, u),
        "greedy_net": lambda m: m.greedy_net(D, 0.05),
        "first_triangle_violation": lambda m: m.first_triangle_violation(D[:150, :150], 1e-12),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats (best is reported)")
    ap.add_argument("--anchors", type=int, default=2000, help="pool size for the batched kernels")
    ap.add_argument("--steps", type=int, default=3000, help="steps of the end-to-end run (0 skips it)")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    print(f"{'kernel':<26}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, fn in cases(args.anchors, rng).items():
        fn(_numba)  # compile
        a, b = fn(_numba), fn(_numpy)
        if not np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), equal_nan=True):
            print(f"{name}: backends disagree", file=sys.stderr)
            return 1
        tn = min(timeit.repeat(lambda: fn(_numba), number=1, repeat=args.repeat)) * 1e3
        tp = min(timeit.repeat(lambda: fn(_numpy), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<26}{tn:>12.3f}{tp:>12.3f}{tp / tn:>9.1f}x")

    if args.steps:
        print(f"\nend-to-end d1 run, {args.steps} steps")
        for label, flag in (("numba", "0"), ("numpy", "1")):
            env = dict(os.environ, CRM_DISABLE_NUMBA=flag)
            out = subprocess.run([sys.executable, "-c", E2E % args.steps], env=env,
                                 capture_output=True, text=True, check=True)
            print(f"  {label:<6}{float(out.stdout):8.2f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
