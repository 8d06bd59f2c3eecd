"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one row per kernel with the median wall time of each backend and the
speedup.  Inputs are seeded so rows are comparable across machines.
"""

import argparse
import statistics
import time

import numpy as np

from segctc import kernels
from segctc.numerics import log_softmax, rng_for


def cases(rng):
    T, L, Y, H = 100, 8, 40, 64
    S = rng.normal(size=(T, L, Y))
    labels = rng.integers(0, Y, size=30)
    logp = log_softmax(rng.normal(size=(T, Y + 1)), axis=1)
    ctc_labels = rng.integers(1, Y + 1, size=30)
    xproj = rng.normal(size=(400, 4 * H))
    Wh = rng.normal(scale=0.1, size=(4 * H, H))
    h, c, gates = kernels.lstm_forward(xproj, Wh, False)
    dh = rng.normal(size=h.shape)
    return {
        f"semi_partition T={T} L={L} Y={Y}": (kernels.semi_partition, (S,)),
        f"semi_numerator T={T} L={L} J=30": (kernels.semi_numerator, (S, labels)),
        f"semi_viterbi T={T} L={L} Y={Y}": (kernels.semi_viterbi, (S,)),
        f"ctc_forward_backward T={T} J=30": (kernels.ctc_forward_backward, (logp, ctc_labels)),
        f"lstm_forward T=400 H={H}": (kernels.lstm_forward, (xproj, Wh, False)),
        f"lstm_backward T=400 H={H}": (kernels.lstm_backward, (dh, c, gates, Wh, False)),
    }


def median_time(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t)
    return statistics.median(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is available")
    table = cases(rng_for(0))
    print(f"{'kernel':<38}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, (fn, fargs) in table.items():
        row = {}
        for b in backends:
            with kernels.use_backend(b):
                fn(*fargs)
                row[b] = median_time(fn, fargs, args.repeat)
        line = f"{name:<38}" + "".join(f"{row[b] * 1e3:>10.2f}ms" for b in backends)
        if len(backends) > 1:
            line += f"{row['python'] / row['compiled']:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
