"""Compare the compiled and numpy pixel kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one row per (kernel, frame size, backend) with the best-of-N time per
call and the speedup of the compiled core over the numpy fallback. Both
backends are also checked to return identical results on every input.
"""

import argparse
import timeit

import numpy as np

from camscout.kernels import available_backends

SIZES = [(120, 160), (480, 640), (1080, 1920)]


def frames(h, w, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
    noise = rng.integers(-20, 21, a.shape)
    b = np.clip(a.astype(np.int16) + noise, 0, 255).astype(np.uint8)
    return a, b


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the numpy fallback is timed")

    print(f"{'kernel':<16}{'frame':>12}{'backend':>9}{'ms/call':>10}{'speedup':>9}")
    for h, w in SIZES:
        a, b = frames(h, w)
        calls = {
            "count_changed": lambda k: k.count_changed(a, b, 10),
            "luma_sum_milli": lambda k: k.luma_sum_milli(a),
        }
        for name, call in calls.items():
            results = {n: call(k) for n, k in backends.items()}
            assert len(set(results.values())) == 1, f"{name} backends disagree: {results}"
            times = {}
            for n, k in backends.items():
                number = max(1, int(2e6 // (h * w)))
                best = min(timeit.repeat(lambda: call(k), number=number, repeat=args.repeat))
                times[n] = best / number * 1e3
            for n, t in times.items():
                speed = f"{times['python'] / t:.1f}x" if n != "python" else ""
                print(f"{name:<16}{f'{w}x{h}':>12}{n:>9}{t:>10.3f}{speed:>9}")


if __name__ == "__main__":
    main()
