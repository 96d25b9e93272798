"""Time the compiled kernels against the pure-numpy fallback.

Both backends are bitwise-equivalent; this script reports what the compiled
extension buys in speed.  Run from the repository root:

    python3 benchmarks/bench_kernels.py [--n 200000] [--repeats 7]

Each kernel is timed on realistic shapes (descending score sweeps, ten-bin
reliability accumulation, a 20-knot spline basis), taking the best of
several repeats.  Agreement is re-checked before timing so a broken build
cannot report a meaningless speedup.
"""

import argparse
import timeit

import numpy as np

from calibkit._kernels import _fallback

try:
    from calibkit._kernels import _native
except ImportError:
    _native = None


def _inputs(n, rng):
    scores = rng.random(n)
    order = np.argsort(-scores, kind="stable")
    desc = np.ascontiguousarray(scores[order])
    labels = np.ascontiguousarray(
        (rng.random(n) < desc).astype(np.int64)[order])
    wa = rng.random(n)
    wb = rng.random(n)
    edges = np.linspace(0.0, 1.0, 11)
    knots = np.quantile(np.unique(scores), np.linspace(0.0, 1.0, 20))
    return {
        "sweep_counts": (desc, labels),
        "bin_accumulate": (scores, wa, wb, edges),
        "natural_spline_basis": (scores, knots),
    }


def _best_time(fn, args, repeats):
    timer = timeit.Timer(lambda: fn(*args))
    loops, _ = timer.autorange()
    return min(timer.repeat(repeats, loops)) / loops


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=200_000,
                        help="input length (default 200000)")
    parser.add_argument("--repeats", type=int, default=7,
                        help="timing repeats per kernel (default 7)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if _native is None:
        print("compiled extension not available; nothing to compare "
              "(build it with: pip install -e . --no-build-isolation)")
        return 1

    rng = np.random.Generator(np.random.PCG64(args.seed))
    inputs = _inputs(args.n, rng)

    print(f"n = {args.n}, best of {args.repeats} repeats\n")
    header = f"{'kernel':<22}{'python':>12}{'native':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, call_args in inputs.items():
        fast = getattr(_native, name)
        slow = getattr(_fallback, name)
        got_fast = fast(*call_args)
        got_slow = slow(*call_args)
        if name == "natural_spline_basis":
            same = np.array_equal(got_fast, got_slow)
        else:
            same = all(np.array_equal(a, b)
                       for a, b in zip(got_fast, got_slow))
        if not same:
            print(f"{name:<22}  BACKENDS DISAGREE — not timing")
            return 1
        t_slow = _best_time(slow, call_args, args.repeats)
        t_fast = _best_time(fast, call_args, args.repeats)
        print(f"{name:<22}{t_slow * 1e3:>10.3f}ms{t_fast * 1e3:>10.3f}ms"
              f"{t_slow / t_fast:>9.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
