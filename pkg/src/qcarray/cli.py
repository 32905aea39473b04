"""``qcarray`` command line: compress, decompress, query and inspect containers.

Reports go to stderr as ``key: value`` lines; data (raw arrays or CSV)
goes to the output file or stdout.
"""

from __future__ import annotations

import argparse
import contextlib
import sys
import time
from math import prod
from pathlib import Path

import numpy as np

from . import query
from .codec import ChunkFormatError, estimate_widths
from .container import ContainerFormatError, open_container
from .geometry import GeometryError, Region, value_dtype
from .hmmt import HmmtFormatError
from .pipeline import DEFAULT_CHUNK, DEFAULT_LEVEL, compress_to, decompress_array
from .query import DEFAULT_THREADS, Predicate


class UsageError(Exception):
    pass


def _dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not dims or any(d <= 0 for d in dims):
        raise argparse.ArgumentTypeError(f"extents must be positive: {text!r}")
    return dims


def _region(text: str) -> Region:
    try:
        return Region.parse(text)
    except GeometryError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _report(**items) -> None:
    for k, v in items.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        print(f"{k}: {v}", file=sys.stderr)


def _open_out(path: str | None, binary: bool):
    if path is None or path == "-":
        return contextlib.nullcontext(sys.stdout.buffer if binary else sys.stdout)
    return open(path, "wb" if binary else "w")


def _predicate(args) -> Predicate | None:
    given = [(name, getattr(args, name)) for name in ("eq", "range", "lt", "le", "gt", "ge")
             if getattr(args, name) is not None]
    if len(given) > 1:
        raise UsageError("give exactly one predicate flag")
    if not given:
        return None
    name, v = given[0]
    if name == "eq":
        return Predicate.equals(v)
    if name == "range":
        if v[0] > v[1]:
            raise UsageError(f"--range needs LO <= HI, got {v[0]} {v[1]}")
        return Predicate.in_range(*v)
    return Predicate.compare({"lt": "<", "le": "<=", "gt": ">", "ge": ">="}[name], v)


# --- commands -----------------------------------------------------------------

def cmd_compress(args) -> None:
    dtype = value_dtype(args.dtype)
    raw = Path(args.input).read_bytes()
    expect = prod(args.shape) * dtype.itemsize
    if len(raw) != expect:
        raise UsageError(f"{args.input} holds {len(raw)} bytes; shape {args.shape} of {args.dtype} needs {expect}")
    chunk = args.chunk or (DEFAULT_CHUNK,) * len(args.shape)
    if len(chunk) != len(args.shape):
        raise UsageError("--chunk and --shape differ in rank")
    t0 = time.perf_counter()
    values = np.frombuffer(raw, dtype=dtype).reshape(args.shape)
    n = compress_to(args.output, values, chunk_dims=chunk, level=args.level,
                    bit_reduction=not args.no_bit_reduction, value_type=args.dtype, threads=args.threads)
    _report(input_bytes=len(raw), output_bytes=n, ratio=len(raw) / n,
            wall_time=time.perf_counter() - t0)


def cmd_decompress(args) -> None:
    t0 = time.perf_counter()
    arr = decompress_array(args.container, threads=args.threads)
    data = np.ascontiguousarray(arr).tobytes()
    with _open_out(args.output, True) as fh:
        fh.write(data)
    _report(shape=",".join(map(str, arr.shape)), dtype=arr.dtype.name, output_bytes=len(data),
            wall_time=time.perf_counter() - t0)


def _query_report(stats: query.QueryStats, t0: float) -> None:
    _report(chunks_marked=stats.chunks_marked, chunks_read=stats.chunks_read,
            blocks_decoded=stats.blocks_decoded, bytes_read=stats.bytes_read,
            results=stats.results, wall_time=time.perf_counter() - t0)


def cmd_range(args) -> None:
    t0 = time.perf_counter()
    with open_container(args.container) as h:
        res = query.range(h, args.region, threads=args.threads)
        if args.format == "csv":
            with _open_out(args.output, False) as fh:
                for c in np.ndindex(*res.values.shape):
                    g = [a + b for a, b in zip(c, args.region.lo)]
                    fh.write(",".join(map(str, g)) + f",{res.values[c]}\n")
        else:
            with _open_out(args.output, True) as fh:
                fh.write(np.ascontiguousarray(res.values).tobytes())
    _report(shape=",".join(map(str, res.values.shape)))
    _query_report(res.stats, t0)


def cmd_filter(args) -> None:
    p = _predicate(args)
    if p is None:
        raise UsageError("filter needs one of --eq, --range, --lt, --le, --gt, --ge")
    t0 = time.perf_counter()
    with open_container(args.container) as h:
        if args.region is not None:
            res = query.range_filter(h, args.region, p, threads=args.threads)
        else:
            res = query.filter(h, p, threads=args.threads)
    with _open_out(args.output, False) as fh:
        res.write_csv(fh)
    _query_report(res.stats, t0)


def cmd_info(args) -> None:
    with open_container(args.container) as h:
        s = h.schema
        size = h.file_size
        syn_bits = 0
        for c in range(s.num_chunks):
            ch = h.read_chunk(c)
            lay = ch.layout(estimate_widths(h.node_map(c), h.bounds))
            syn_bits += lay.nbits[0]
        tree = len(h.tree_bytes)
        syn = syn_bits / 8
        lo, hi = h.bounds.root
        _report(format_version=1, value_type=s.value_type, logical_dims=",".join(map(str, s.logical_dims)),
                dims=",".join(map(str, s.dims)), chunk_dims=",".join(map(str, s.chunk_dims)),
                wavelet_level=s.wavelet_level, bit_reduction=int(h.bit_reduction),
                chunks=s.num_chunks, blocks_per_chunk=s.blocks_per_chunk,
                root_min=lo, root_max=hi, file_bytes=size, header_bytes=h.header_size,
                hmmt_bytes=tree, synopsis_bytes=syn,
                hmmt_pct=100 * tree / size, synopsis_pct=100 * syn / size,
                body_pct=100 * (size - tree - syn) / size)


def cmd_synopsis(args) -> None:
    t0 = time.perf_counter()
    with open_container(args.container) as h:
        h.reset_counters()
        syn = h.synopsis().astype(h.schema.dtype)
        with _open_out(args.output, True) as fh:
            fh.write(np.ascontiguousarray(syn).tobytes())
        _report(shape=",".join(map(str, syn.shape)), dtype=syn.dtype.name,
                bytes_read=h.bytes_read, file_bytes=h.file_size, wall_time=time.perf_counter() - t0)


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qcarray", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def threads(p):
        p.add_argument("--threads", type=int, default=DEFAULT_THREADS, help="worker threads (default 6)")

    p = sub.add_parser("compress", help="compress a raw row-major array")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--dtype", required=True, choices=["uint8", "int8", "uint16", "int16", "int32"])
    p.add_argument("--shape", required=True, type=_dims, help="logical extents, e.g. 1024,768")
    p.add_argument("--chunk", type=_dims, help="chunk extents (default 64 per dimension)")
    p.add_argument("--level", type=int, default=DEFAULT_LEVEL, help="wavelet level (default 3)")
    p.add_argument("--no-bit-reduction", action="store_true", help="skip the RLE/Huffman stage")
    threads(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="decode a container to a raw array")
    p.add_argument("container")
    p.add_argument("output", nargs="?")
    threads(p)
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("range", help="extract a sub-array")
    p.add_argument("container")
    p.add_argument("--region", required=True, type=_region, help="lo:hi per dimension, comma-joined")
    p.add_argument("-o", "--output")
    p.add_argument("--format", choices=["raw", "csv"], default="raw")
    threads(p)
    p.set_defaults(func=cmd_range)

    p = sub.add_parser("filter", help="cells matching a value predicate, as CSV")
    p.add_argument("container")
    g = p.add_argument_group("predicate (exactly one)")
    g.add_argument("--eq", type=int, metavar="V")
    g.add_argument("--range", type=int, nargs=2, metavar=("LO", "HI"))
    g.add_argument("--lt", type=int, metavar="V")
    g.add_argument("--le", type=int, metavar="V")
    g.add_argument("--gt", type=int, metavar="V")
    g.add_argument("--ge", type=int, metavar="V")
    p.add_argument("--region", type=_region, help="restrict to lo:hi,... before filtering")
    p.add_argument("-o", "--output")
    threads(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("info", help="schema, bounds and size breakdown")
    p.add_argument("container")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("synopsis", help="write the synopsis array without decoding details")
    p.add_argument("container")
    p.add_argument("output", nargs="?")
    p.set_defaults(func=cmd_synopsis)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        ap.error("--threads must be at least 1")
    try:
        args.func(args)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"qcarray: error: {exc}", file=sys.stderr)
        return 2
    except (ContainerFormatError, ChunkFormatError, HmmtFormatError, GeometryError,
            OSError, ValueError) as exc:
        print(f"qcarray: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
