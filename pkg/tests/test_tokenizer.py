import math
import time

import numpy as np
import pytest

from cursive import geometry as geo
from cursive import tokenizer as tok

CFG = tok.TokenizerConfig(theta_bins=220, r_bins=150, r_max=60.0)


def rand_polar(rng, n, r_max):
    theta = rng.uniform(-np.pi, np.pi, size=n)
    r = rng.uniform(0.0, r_max, size=n)
    p = rng.integers(0, 2, size=n).astype(np.float64)
    return np.stack([theta, r, p], axis=1)


def test_vocab_size():
    assert tok.vocab_size(CFG) == 523
    assert tok.vocab_size(tok.TokenizerConfig(1, 1, 1.0)) == 6
    assert tok.vocab_size(tok.TokenizerConfig(100, 50, 2.0)) == 203


def test_special_token_layout():
    assert CFG.pad_id == 520
    assert CFG.end_id == 521
    assert CFG.word_id == 522
    assert CFG.pad_id == CFG.theta_bins + 2 * CFG.r_bins


def test_bin_theta_boundaries():
    assert tok.bin_theta(-np.pi, CFG) == 0
    assert tok.bin_theta(np.nextafter(np.pi, -np.inf), CFG) == 219
    assert tok.bin_theta(0.0, CFG) == 110  # floor(0.5 * 220)
    with pytest.raises(ValueError):
        tok.bin_theta(np.pi, CFG)
    with pytest.raises(ValueError):
        tok.bin_theta(-4.0, CFG)


def test_bin_r_boundaries_and_clip():
    assert tok.bin_r(0.0, CFG) == 0
    assert tok.bin_r(CFG.r_max, CFG) == 149
    assert tok.bin_r(CFG.r_max * 10, CFG) == 149
    assert tok.bin_r(CFG.r_max / 2, CFG) == 75
    assert tok.count_r_clipped([0.0, 59.0, 61.0, 1e9], CFG) == 2


def test_encode_single_offset():
    stream = tok.encode([(0.0, 0.0, 1.0)], [], CFG)
    np.testing.assert_array_equal(stream, [110, 221, 521])


def test_encode_empty():
    np.testing.assert_array_equal(tok.encode(np.empty((0, 3)), [], CFG), [521])


def test_encode_with_break_grammar_shape():
    polar = [(0.0, 1.0, 1.0), (0.5, 2.0, 0.0)]
    stream = tok.encode(polar, [1], CFG)
    assert len(stream) == 2 * 2 + 1 + 1
    assert stream[2] == CFG.word_id
    assert stream[-1] == CFG.end_id
    tok.validate_grammar(stream, CFG)
    # a trailing break marks the final word too
    stream = tok.encode(polar, [1, 2], CFG)
    np.testing.assert_array_equal(
        stream[[2, 5, 6]], [CFG.word_id, CFG.word_id, CFG.end_id]
    )


def test_encode_rejects_bad_breaks():
    polar = [(0.0, 1.0, 1.0), (0.5, 2.0, 0.0)]
    for bad in ([0], [2, 1], [1, 1], [3]):
        with pytest.raises(ValueError):
            tok.encode(polar, bad, CFG)


def test_decode_end_only():
    polar, breaks = tok.decode([521], CFG)
    assert polar.shape == (0, 3)
    assert len(breaks) == 0


def test_decode_bin_centers():
    polar, breaks = tok.decode([110, 221, 521], CFG)
    assert polar[0, 0] == pytest.approx(-np.pi + 110.5 * 2 * np.pi / 220, abs=1e-12)
    assert polar[0, 1] == pytest.approx(0.5 * CFG.r_max / 150, abs=1e-12)
    assert polar[0, 2] == 1.0
    assert len(breaks) == 0


def test_round_trip_error_bounds():
    rng = np.random.default_rng(42)
    start = time.perf_counter()
    for _ in range(10_000):
        n = int(rng.integers(1, 40))
        polar = rand_polar(rng, n, CFG.r_max)
        stream = tok.encode(polar, [n], CFG)
        back, breaks = tok.decode(stream, CFG)
        assert np.all(np.abs(back[:, 0] - polar[:, 0]) <= np.pi / CFG.theta_bins)
        assert np.all(np.abs(back[:, 1] - polar[:, 1]) <= CFG.r_max / (2 * CFG.r_bins))
        np.testing.assert_array_equal(back[:, 2], polar[:, 2])
        np.testing.assert_array_equal(breaks, [n])
    assert time.perf_counter() - start < 10.0


def test_specific_round_trip_within_bin_widths():
    polar = np.array([[0.9273, 5.0, 1.0]])
    back, _ = tok.decode(tok.encode(polar, [], CFG), CFG)
    assert abs(back[0, 0] - 0.9273) <= np.pi / CFG.theta_bins
    assert abs(back[0, 1] - 5.0) <= CFG.r_max / (2 * CFG.r_bins)


def test_position_drift_bound():
    rng = np.random.default_rng(9)
    n = 400
    polar = rand_polar(rng, n, CFG.r_max)
    back, _ = tok.decode(tok.encode(polar, [], CFG), CFG)
    coords = geo.offsets_to_coords(geo.polar_to_cartesian(polar))
    coords_back = geo.offsets_to_coords(geo.polar_to_cartesian(back))
    drift = np.max(np.abs(coords_back[:, :2] - coords[:, :2]))
    per_step = CFG.r_max / (2 * CFG.r_bins) + CFG.r_max * np.pi / CFG.theta_bins
    assert drift <= n * per_step


def test_grammar_accepts_and_rejects():
    tok.validate_grammar([521], CFG)
    tok.validate_grammar([522, 521], CFG)
    tok.validate_grammar([521, 520, 520], CFG)

    with pytest.raises(tok.TokenGrammarError) as e:
        tok.validate_grammar([5, 521], CFG)  # dangling THETA
    assert e.value.index == 1
    with pytest.raises(tok.TokenGrammarError) as e:
        tok.validate_grammar([300, 521], CFG)  # RP first
    assert e.value.index == 0
    with pytest.raises(tok.TokenGrammarError) as e:
        tok.validate_grammar([520, 521], CFG)  # PAD before END
    assert e.value.index == 0
    with pytest.raises(tok.TokenGrammarError) as e:
        tok.validate_grammar([521, 5], CFG)  # token after END
    assert e.value.index == 1
    with pytest.raises(tok.TokenGrammarError) as e:
        tok.validate_grammar([5, 300], CFG)  # no END
    assert e.value.index == 2
    with pytest.raises(tok.TokenGrammarError) as e:
        tok.validate_grammar([523, 521], CFG)  # out of range
    assert e.value.index == 0
    with pytest.raises(tok.TokenGrammarError) as e:
        tok.validate_grammar([5, 522, 300, 521], CFG)  # WORD splits a pair
    assert e.value.index == 1


def test_encode_always_validates():
    rng = np.random.default_rng(17)
    for _ in range(200):
        n = int(rng.integers(0, 30))
        polar = rand_polar(rng, n, CFG.r_max * 1.5)  # allow clipping
        k = int(rng.integers(0, 4))
        breaks = np.sort(rng.choice(np.arange(1, n + 1), size=min(k, n), replace=False))
        stream = tok.encode(polar, breaks, CFG)
        tok.validate_grammar(stream, CFG)
        assert len(stream) == 2 * n + len(breaks) + 1


def test_token_id_partition():
    ids = np.arange(CFG.vocab_size)
    theta = ids < CFG.theta_bins
    rp = (ids >= CFG.theta_bins) & (ids < CFG.pad_id)
    special = ids >= CFG.pad_id
    assert np.all(theta.astype(int) + rp.astype(int) + special.astype(int) == 1)
    assert special.sum() == 3


def test_json_file_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    stream = tok.encode(rand_polar(rng, 25, CFG.r_max), [10, 25], CFG)
    path = tmp_path / "stream.json"
    tok.save_stream_json(path, stream, CFG)
    back, got = tok.load_stream_json(path, CFG)
    np.testing.assert_array_equal(back, stream)
    assert got == CFG


def test_packed_file_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    stream = tok.encode(rand_polar(rng, 100, CFG.r_max), [100], CFG)
    path = tmp_path / "stream.ctok"
    tok.save_stream_packed(path, stream, CFG)
    back, got = tok.load_stream_packed(path, CFG)
    np.testing.assert_array_equal(back, stream)
    assert got == CFG
    # bit-exact: writing the loaded stream again reproduces the file
    path2 = tmp_path / "again.ctok"
    tok.save_stream_packed(path2, back, got)
    assert path.read_bytes() == path2.read_bytes()


def test_packed_file_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bogus.ctok"
    path.write_bytes(b"NOPE1234")
    with pytest.raises(ValueError):
        tok.load_stream_packed(path)


def test_header_mismatch_detected(tmp_path):
    stream = tok.encode([(0.0, 1.0, 1.0)], [], CFG)
    path = tmp_path / "s.json"
    tok.save_stream_json(path, stream, CFG)
    other = tok.TokenizerConfig(theta_bins=10, r_bins=5, r_max=1.0)
    with pytest.raises(ValueError):
        tok.load_stream_json(path, other)


def test_log_spacing_round_trip():
    cfg = tok.TokenizerConfig(theta_bins=64, r_bins=32, r_max=50.0, r_spacing="log")
    rng = np.random.default_rng(4)
    polar = rand_polar(rng, 500, cfg.r_max)
    back, _ = tok.decode(tok.encode(polar, [500], cfg), cfg)
    edges = cfg.r_edges()
    widths = np.diff(edges)
    idx = np.clip(np.searchsorted(edges, polar[:, 1], side="right") - 1, 0, cfg.r_bins - 1)
    assert np.all(np.abs(back[:, 1] - polar[:, 1]) <= widths[idx] + 1e-12)
