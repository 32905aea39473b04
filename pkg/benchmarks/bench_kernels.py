"""Compiled vs pure-Python kernels: per-kernel throughput and end-to-end timings.

    python benchmarks/bench_kernels.py [--size 512] [--repeat 5]
"""

import argparse
import statistics
import time

import numpy as np

import qcarray as q
from qcarray import kernels
from qcarray.entropy import huffman_table


def best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times)


def kernel_cases(rng, n):
    small = rng.integers(-3, 4, n)
    small[rng.random(n) < 0.6] = 0
    wide = rng.integers(-(1 << 14), 1 << 14, n)
    t3, t8 = huffman_table(3), huffman_table(8)
    mid = np.clip(np.round(rng.normal(0, 20, n)), -127, 127).astype(np.int64)
    packed = kernels.backends()["python"].pack_signmag(wide, 16)
    h3 = kernels.backends()["python"].rle_huffman_encode(small, t3.codes, t3.lengths, t3.offset)
    h8 = kernels.backends()["python"].rle_huffman_encode(mid, t8.codes, t8.lengths, t8.offset)
    args3 = (t3.first_code, t3.counts, t3.first_index, t3.symbols)
    args8 = (t8.first_code, t8.counts, t8.first_index, t8.symbols)
    return {
        "pack 16-bit": lambda k: k.pack_signmag(wide, 16),
        "unpack 16-bit": lambda k: k.unpack_signmag(packed[0], 0, n, 16),
        "huffman enc R=3 (sparse)": lambda k: k.rle_huffman_encode(small, t3.codes, t3.lengths, t3.offset),
        "huffman dec R=3 (sparse)": lambda k: k.rle_huffman_decode(h3[0], 0, h3[1], n, *args3),
        "huffman enc R=8": lambda k: k.rle_huffman_encode(mid, t8.codes, t8.lengths, t8.offset),
        "huffman dec R=8": lambda k: k.rle_huffman_decode(h8[0], 0, h8[1], n, *args8),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=512, help="side of the 2-D test array")
    ap.add_argument("--cells", type=int, default=1 << 18, help="values per kernel call")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    found = kernels.backends()
    if "cython" not in found:
        print("compiled backend not built; only the fallback is available")
    rng = np.random.default_rng(0)

    print(f"kernels, {args.cells} values per call (best of {args.repeat}, ms)")
    print(f"{'kernel':28s}" + "".join(f"{name:>12s}" for name in found) + "     speedup")
    for label, fn in kernel_cases(rng, args.cells).items():
        row = {name: best(lambda: fn(k), args.repeat)[0] * 1e3 for name, k in found.items()}
        speed = row["python"] / row["cython"] if "cython" in row else float("nan")
        print(f"{label:28s}" + "".join(f"{row[n]:12.2f}" for n in found) + f"{speed:11.1f}x")

    n = args.size
    yy, xx = np.mgrid[0:n, 0:n]
    data = (127 + 60 * np.sin(xx / 40.0) * np.cos(yy / 55.0) + rng.normal(0, 2, (n, n))).astype(np.uint8)
    print(f"\nend to end, {n}x{n} uint8, chunk 64, level 3, bit-reduction on (best of {args.repeat}, ms)")
    for name in found:
        kernels.use(name)
        blob = q.compress_array(data)
        c = best(lambda: q.compress_array(data), args.repeat)[0] * 1e3
        d = best(lambda: q.decompress_array(blob), args.repeat)[0] * 1e3
        print(f"{name:10s} compress {c:9.1f}   decompress {d:9.1f}   bytes {len(blob)}")
    kernels.use("cython" if "cython" in found else "python")


if __name__ == "__main__":
    main()
