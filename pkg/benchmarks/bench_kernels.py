"""Time the compiled kernels against their pure-Python twins.

    python benchmarks/bench_kernels.py [--paths N] [--horizon K] [--repeat R]

Each row runs the same inputs through both backends, reports the best of
``R`` wall-clock timings and the largest relative gap between the two
outputs. The sampler gaps must be exactly 0; the sequence recursion sums
in a different order on each backend and agrees to rounding.
"""
import argparse
import time

import numpy as np

from skipfree import _kernels_py, mbi
from skipfree.cpp import CppParams
from skipfree.mbi import MbiParams
from skipfree.measures import ProbMeasure
from skipfree.simulate import Event, SimConfig, engine

try:
    from skipfree import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times, result = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - start)
    return min(times), result


def gap(a, b):
    worst = 0.0
    for x, y in zip(a, b):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        worst = max(worst, float(np.max(np.abs(x - y) / np.maximum(np.abs(x), 1e-300), initial=0.0)))
    return worst


def sampler_case(model, x0, event, paths):
    cfg = SimConfig(seed=2024, n_paths=paths, max_jumps=100_000)

    def run(backend):
        engine.kernels = backend
        return lambda: engine._run(model, x0, event, cfg, 0, paths, None)

    return run


def sequence_case(params, horizon):
    def run(backend):
        mbi.kernels = backend
        return lambda: list(mbi.lemma_sequences(params, horizon).values())

    return run


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--paths", type=int, default=20_000)
    parser.add_argument("--horizon", type=int, default=4000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")

    walk = CppParams(1.0, ProbMeasure({0: 0.5, 2: 0.3, 4: 0.2}), 0.05)
    subcritical = MbiParams(1.0, ProbMeasure({0: 0.6, 2: 0.4}), beta=1.0, nu=ProbMeasure({1: 0.5, 2: 0.5}),
                            q=0.1)
    branching = MbiParams(1.0, ProbMeasure({0: 0.5, 2: 0.5}), p=0.3, beta=1.0,
                          nu=ProbMeasure({1: 0.5, 2: 0.5}), q=0.1)
    cases = [
        ("sampler: compound Poisson, exit (0, 40)", sampler_case(walk, 20, Event.exit(0, 40), args.paths)),
        ("sampler: branching, passage to [30", sampler_case(branching, 3, Event.passage_up(30), args.paths)),
        (f"sequences: branching, horizon {args.horizon}", sequence_case(subcritical, args.horizon)),
    ]
    print(f"{'case':<44} {'compiled s':>11} {'python s':>10} {'speed-up':>9}  {'max rel gap':>11}")
    for name, run in cases:
        fast, a = best_of(run(_ckernels), args.repeat)
        slow, b = best_of(run(_kernels_py), args.repeat)
        print(f"{name:<44} {fast:>11.4f} {slow:>10.4f} {slow / fast:>8.1f}x  {gap(a, b):>11.1e}")


if __name__ == "__main__":
    main()
