"""The JIT kernels and their pure-python fallbacks share one source; these
tests pin down that both paths produce identical bits."""

import numpy as np

from cursive import dataset as ds
from cursive import synth
from cursive import wordbank as wb
from cursive.accel import NUMBA_ENABLED, py_func
from cursive.kernels import assemble_chunk, downsample_keep_mask
from cursive.tokenizer import TokenizerConfig


def test_env_flag_controls_numba():
    import os
    expected = os.environ.get("CURSIVE_NUMBA", "1") != "0"
    assert NUMBA_ENABLED == expected


def test_downsample_mask_fallback_identical():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(2, 400))
        p = (rng.random(n) < 0.85).astype(np.float64)
        p[0] = 1.0
        keys = rng.random(n)
        drop = float(rng.uniform(0.55, 0.75))
        fast = downsample_keep_mask(p, keys, drop)
        slow = py_func(downsample_keep_mask)(p, keys, drop)
        np.testing.assert_array_equal(fast, slow)


def test_assemble_chunk_fallback_identical():
    bank = wb.generate_bank(wb.WordBankConfig(word_length_range=(1, 4)), 30, rng=8)
    records = synth.render_bank(bank, seed=8)
    cfg = ds.DatasetConfig()
    pool = ds._Pool.build(records, cfg)
    tok = TokenizerConfig(theta_bins=64, r_bins=32, r_max=40.0)
    rng = np.random.default_rng(2)
    n = 32
    word_idx = rng.integers(0, len(pool.counts), size=(n, 4))
    raw = pool.counts[word_idx].sum(axis=1)
    key_starts = np.concatenate([[0], np.cumsum(raw)])
    keys = rng.random(int(key_starts[-1]))
    shear = rng.uniform(-0.3, 0.3, n)
    sx = rng.uniform(0.9, 1.1, n)
    sy = rng.uniform(0.9, 1.1, n)
    drop = rng.uniform(0.55, 0.75, n)
    worst = int(np.sum(2 * raw + 5))

    def run(fn):
        out = np.empty(worst, dtype=np.uint16)
        lengths, clipped, total = fn(
            pool.pts, pool.starts, pool.xmin, pool.xmax, word_idx, shear, sx, sy,
            drop, keys, key_starts, pool.gap, tok.theta_bins, tok.r_bins,
            tok.r_max, tok.r_edges(), True, 1050, out)
        return lengths.copy(), int(clipped), out[:total].copy()

    fast = run(assemble_chunk)
    slow = run(py_func(assemble_chunk))
    np.testing.assert_array_equal(fast[0], slow[0])
    assert fast[1] == slow[1]
    np.testing.assert_array_equal(fast[2], slow[2])
