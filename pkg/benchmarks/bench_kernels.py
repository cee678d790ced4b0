#!/usr/bin/env python3
"""Benchmark the JIT-compiled kernels against their pure-python fallbacks.

The fallback path (``CURSIVE_NUMBA=0``) runs the identical source without
compilation; this script times both sides of that switch, plus the
end-to-end corpus build that sits on top of them.

Usage:
    python benchmarks/bench_kernels.py [--points N] [--sequences N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cursive import dataset as ds
from cursive import synth
from cursive import wordbank as wb
from cursive.accel import NUMBA_ENABLED, py_func
from cursive.kernels import assemble_chunk, downsample_keep_mask
from cursive.tokenizer import TokenizerConfig


def timeit(fn, *args, repeat=5):
    fn(*args)  # warmup (and JIT compilation)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_downsample(n_points: int):
    rng = np.random.default_rng(0)
    p = (rng.random(n_points) < 0.9).astype(np.float64)
    p[0] = 1.0
    keys = rng.random(n_points)
    jit = timeit(downsample_keep_mask, p, keys, 0.65)
    plain = timeit(py_func(downsample_keep_mask), p, keys, 0.65)
    return jit, plain


def chunk_inputs(n_sequences: int):
    bank = wb.generate_bank(wb.WordBankConfig(), 400, rng=3)
    records = synth.render_bank(bank, seed=3)
    cfg = ds.DatasetConfig()
    pool = ds._Pool.build(records, cfg)
    tok = TokenizerConfig(r_max=60.0)
    rng = np.random.default_rng(1)
    word_idx = rng.integers(0, len(pool.counts), size=(n_sequences, 4))
    raw = pool.counts[word_idx].sum(axis=1)
    key_starts = np.concatenate([[0], np.cumsum(raw)])
    out = np.empty(int(np.sum(2 * raw + 5)), dtype=np.uint16)
    args = (pool.pts, pool.starts, pool.xmin, pool.xmax, word_idx,
            rng.uniform(-0.3, 0.3, n_sequences), rng.uniform(0.9, 1.1, n_sequences),
            rng.uniform(0.9, 1.1, n_sequences), rng.uniform(0.55, 0.75, n_sequences),
            rng.random(int(key_starts[-1])), key_starts, pool.gap,
            tok.theta_bins, tok.r_bins, tok.r_max, tok.r_edges(), True, 1050, out)
    return args, records


def bench_assembly(n_sequences: int):
    args, _ = chunk_inputs(n_sequences)
    jit = timeit(assemble_chunk, *args, repeat=3)
    plain_fn = py_func(assemble_chunk)
    plain = timeit(plain_fn, *args, repeat=1) if n_sequences <= 512 else float("nan")
    return jit, plain


def bench_corpus(records, n: int):
    t0 = time.perf_counter()
    ds.build_corpus(records, n, max(n // 100, 10), seed=5, workers=1)
    return time.perf_counter() - t0


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=200_000)
    parser.add_argument("--sequences", type=int, default=256)
    parser.add_argument("--corpus", type=int, default=50_000,
                        help="sequences for the end-to-end build timing")
    args = parser.parse_args()

    print(f"numba enabled: {NUMBA_ENABLED}")
    print(f"{'kernel':<38} {'jit (s)':>10} {'python (s)':>12} {'speedup':>9}")
    print("-" * 72)

    jit, plain = bench_downsample(args.points)
    print(f"{'downsample_keep_mask / %dk pts' % (args.points // 1000):<38} "
          f"{jit:>10.4f} {plain:>12.4f} {plain / jit:>8.1f}x")

    jit, plain = bench_assembly(args.sequences)
    label = f"assemble_chunk / {args.sequences} seqs"
    print(f"{label:<38} {jit:>10.4f} {plain:>12.4f} {plain / jit:>8.1f}x")

    _, records = chunk_inputs(8)
    dt = bench_corpus(records, args.corpus)
    rate = args.corpus / dt
    print("-" * 72)
    print(f"end-to-end corpus build: {args.corpus:,} sequences in {dt:.1f}s "
          f"({rate:,.0f} seq/s)")


if __name__ == "__main__":
    main()
