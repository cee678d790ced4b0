"""Reversible codec between polar stroke offsets and integer token streams.

Each stroke offset becomes two tokens: a direction bin id in ``[0, theta_bins)``
followed by a packed (radius bin, pen flag) id in
``[theta_bins, theta_bins + 2*r_bins)``. Three specials complete the
vocabulary: PAD, END and WORD, in that id order. Every valid stream matches
the grammar ``((THETA RP) | WORD)* END PAD*``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels

MAGIC = b"CTOK"
FORMAT_VERSION = 1


class TokenGrammarError(ValueError):
    """A token stream violated the stroke-token grammar."""

    def __init__(self, index: int, message: str):
        super().__init__(f"token stream invalid at index {index}: {message}")
        self.index = index


_REASONS = {
    kernels.ERR_RANGE: "id out of range",
    kernels.ERR_EXPECTED_RP: "dangling THETA (expected an RP token)",
    kernels.ERR_UNEXPECTED_RP: "RP token without a preceding THETA",
    kernels.ERR_PAD_BEFORE_END: "PAD before END",
    kernels.ERR_TOKEN_AFTER_END: "non-PAD token after END",
    kernels.ERR_MISSING_END: "stream ended without END",
}


@dataclass(frozen=True)
class TokenizerConfig:
    """Bin counts and radius clip for the stroke codec.

    ``r_spacing`` may be "uniform" (the default; bin index is
    ``floor(r / r_max * r_bins)``) or "log" (geometric edges between
    ``r_log_min`` and ``r_max``, with bin 0 covering ``[0, r_log_min)``).
    """

    theta_bins: int = 220
    r_bins: int = 150
    r_max: float = 60.0
    r_spacing: str = "uniform"
    r_log_min: float = field(default=0.0)

    def __post_init__(self):
        if self.theta_bins < 1 or self.r_bins < 1:
            raise ValueError("bin counts must be >= 1")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")
        if self.r_spacing not in ("uniform", "log"):
            raise ValueError(f"unknown r_spacing {self.r_spacing!r}")
        if self.r_spacing == "log":
            lo = self.r_log_min if self.r_log_min > 0 else self.r_max / 1000.0
            object.__setattr__(self, "r_log_min", lo)
            if not lo < self.r_max:
                raise ValueError("r_log_min must be below r_max")

    @property
    def vocab_size(self) -> int:
        return self.theta_bins + 2 * self.r_bins + 3

    @property
    def pad_id(self) -> int:
        return self.theta_bins + 2 * self.r_bins

    @property
    def end_id(self) -> int:
        return self.pad_id + 1

    @property
    def word_id(self) -> int:
        return self.pad_id + 2

    def r_edges(self) -> np.ndarray:
        """Bin edge array of length ``r_bins + 1`` (used for log spacing)."""
        if self.r_spacing == "uniform":
            return np.linspace(0.0, self.r_max, self.r_bins + 1)
        inner = np.geomspace(self.r_log_min, self.r_max, self.r_bins)
        return np.concatenate([[0.0], inner])

    def r_centers(self) -> np.ndarray:
        if self.r_spacing == "uniform":
            return (np.arange(self.r_bins) + 0.5) * (self.r_max / self.r_bins)
        e = self.r_edges()
        centers = np.sqrt(e[1:] * e[:-1])
        centers[0] = 0.5 * e[1]
        return centers

    def to_dict(self) -> dict:
        return {
            "theta_bins": self.theta_bins,
            "r_bins": self.r_bins,
            "r_max": self.r_max,
            "r_spacing": self.r_spacing,
            "r_log_min": self.r_log_min,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TokenizerConfig":
        return cls(**{k: d[k] for k in
                      ("theta_bins", "r_bins", "r_max", "r_spacing", "r_log_min")
                      if k in d})


def vocab_size(cfg: TokenizerConfig) -> int:
    return cfg.vocab_size


def bin_theta(theta, cfg: TokenizerConfig) -> np.ndarray:
    """Uniform direction binning over [-pi, pi). Out-of-range input is an error."""
    th = np.asarray(theta, dtype=np.float64)
    if np.any(th < -np.pi) or np.any(th >= np.pi):
        raise ValueError("theta must lie in [-pi, pi); canonicalize first")
    idx = np.floor((th + np.pi) / (2.0 * np.pi) * cfg.theta_bins).astype(np.int64)
    return np.clip(idx, 0, cfg.theta_bins - 1)


def bin_r(r, cfg: TokenizerConfig) -> np.ndarray:
    """Radius binning with silent clipping at ``r_max``.

    Use :func:`count_r_clipped` to monitor how often the clip engages.
    """
    rr = np.asarray(r, dtype=np.float64)
    if np.any(rr < 0):
        raise ValueError("radius must be non-negative")
    if cfg.r_spacing == "uniform":
        idx = np.floor(rr / cfg.r_max * cfg.r_bins).astype(np.int64)
    else:
        idx = np.searchsorted(cfg.r_edges(), rr, side="right") - 1
    return np.clip(idx, 0, cfg.r_bins - 1)


def count_r_clipped(r, cfg: TokenizerConfig) -> int:
    """How many radii exceed ``r_max`` (and therefore saturate the top bin)."""
    return int(np.count_nonzero(np.asarray(r, dtype=np.float64) > cfg.r_max))


def encode(polar, word_breaks, cfg: TokenizerConfig) -> np.ndarray:
    """Polar offsets + word-break offset counts -> token id stream.

    ``word_breaks`` lists, in strictly increasing order, the number of
    offsets after which a WORD token is inserted; a trailing break equal to
    ``len(polar)`` marks the final word. The stream always ends with END.
    """
    po = np.asarray(polar, dtype=np.float64).reshape(-1, 3)
    n = len(po)
    breaks = np.asarray(word_breaks, dtype=np.int64)
    if breaks.ndim != 1:
        raise ValueError("word_breaks must be a flat index list")
    if len(breaks) and (
        np.any(breaks[1:] <= breaks[:-1]) or breaks[0] < 1 or breaks[-1] > n
    ):
        raise ValueError("word_breaks must be strictly increasing within [1, len(polar)]")
    p = po[:, 2].astype(np.int64)
    if np.any((p != 0) & (p != 1)):
        raise ValueError("pen flag must be 0 or 1")
    theta_ids = bin_theta(po[:, 0], cfg) if n else np.empty(0, dtype=np.int64)
    rp_ids = cfg.theta_bins + 2 * bin_r(po[:, 1], cfg) + p if n else np.empty(0, dtype=np.int64)
    out = np.empty(2 * n + len(breaks) + 1, dtype=np.int64)
    pair_pos = 2 * np.arange(n) + np.searchsorted(breaks, np.arange(n), side="right")
    out[pair_pos] = theta_ids
    out[pair_pos + 1] = rp_ids
    out[2 * breaks + np.arange(len(breaks))] = cfg.word_id
    out[-1] = cfg.end_id
    return out


def _classify(ids: np.ndarray, cfg: TokenizerConfig):
    theta = ids < cfg.theta_bins
    rp = (ids >= cfg.theta_bins) & (ids < cfg.pad_id)
    return theta, rp


def grammar_error(stream, cfg: TokenizerConfig) -> tuple[int, int]:
    """Scan a stream; returns ``(status, index)``, status 0 when valid."""
    ids = np.asarray(stream, dtype=np.int64)
    n = len(ids)
    bad_range = (ids < 0) | (ids >= cfg.vocab_size)
    theta, rp = _classify(ids, cfg)
    is_word = ids == cfg.word_id
    is_end = ids == cfg.end_id
    is_pad = ids == cfg.pad_id
    # open == 1 exactly while an RP token is owed to the preceding THETA
    open_after = np.cumsum(theta.astype(np.int64) - rp.astype(np.int64))
    open_before = np.empty(n, dtype=np.int64)
    if n:
        open_before[0] = 0
        open_before[1:] = open_after[:-1]
    end_positions = np.flatnonzero(is_end)
    first_end = end_positions[0] if len(end_positions) else n
    viol = np.zeros(n, dtype=bool)
    viol |= bad_range
    viol |= rp & (open_before != 1)                      # RP with nothing open
    viol |= (open_before == 1) & ~rp & ~bad_range        # THETA must be answered
    viol |= is_pad & (np.arange(n) < first_end)
    viol |= (np.arange(n) > first_end) & ~is_pad
    viol |= is_end & (open_before != 0)
    where = np.flatnonzero(viol)
    if len(where):
        i = int(where[0])
        if bad_range[i]:
            return kernels.ERR_RANGE, i
        if rp[i] and open_before[i] != 1:
            return kernels.ERR_UNEXPECTED_RP, i
        if open_before[i] == 1 and not rp[i]:
            return kernels.ERR_EXPECTED_RP, i
        if is_pad[i]:
            return kernels.ERR_PAD_BEFORE_END, i
        return kernels.ERR_TOKEN_AFTER_END, i
    if first_end == n:
        return kernels.ERR_MISSING_END, n
    return kernels.OK, -1


def validate_grammar(stream, cfg: TokenizerConfig) -> None:
    """Raise :class:`TokenGrammarError` unless the stream is grammatical."""
    status, index = grammar_error(stream, cfg)
    if status != kernels.OK:
        raise TokenGrammarError(index, _REASONS[status])


def decode(stream, cfg: TokenizerConfig) -> tuple[np.ndarray, np.ndarray]:
    """Token stream -> (polar offsets decoded at bin centers, word_breaks)."""
    ids = np.asarray(stream, dtype=np.int64)
    validate_grammar(ids, cfg)
    end = int(np.flatnonzero(ids == cfg.end_id)[0])
    body = ids[:end]
    theta_mask, rp_mask = _classify(body, cfg)
    theta_ids = body[theta_mask]
    rp_ids = body[rp_mask] - cfg.theta_bins
    n = len(theta_ids)
    theta = -np.pi + (theta_ids + 0.5) * (2.0 * np.pi / cfg.theta_bins)
    r = cfg.r_centers()[rp_ids // 2]
    p = (rp_ids % 2).astype(np.float64)
    polar = np.stack([theta, r, p], axis=1) if n else np.empty((0, 3))
    word_pos = np.flatnonzero(body == cfg.word_id)
    breaks = (word_pos - np.arange(len(word_pos))) // 2
    return polar, breaks.astype(np.int64)


def stream_header(cfg: TokenizerConfig) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        **cfg.to_dict(),
        "pad_id": cfg.pad_id,
        "end_id": cfg.end_id,
        "word_id": cfg.word_id,
    }


def _check_header(header: dict, cfg: TokenizerConfig | None) -> TokenizerConfig:
    got = TokenizerConfig.from_dict(header)
    if cfg is not None and got != cfg:
        raise ValueError("token file header does not match the expected tokenizer config")
    return got


def save_stream_json(path, stream, cfg: TokenizerConfig) -> None:
    doc = {"header": stream_header(cfg), "ids": np.asarray(stream, dtype=np.int64).tolist()}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, separators=(",", ":"))


def load_stream_json(path, cfg: TokenizerConfig | None = None):
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    got = _check_header(doc["header"], cfg)
    return np.asarray(doc["ids"], dtype=np.int64), got


def save_stream_packed(path, stream, cfg: TokenizerConfig) -> None:
    """Binary token file: magic, u32 header length, header JSON, little-endian u16 ids."""
    ids = np.asarray(stream, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= cfg.vocab_size or cfg.vocab_size > 65536):
        raise ValueError("ids not representable as u16 for this vocabulary")
    header = json.dumps(stream_header(cfg), separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(ids.astype("<u2").tobytes())


def load_stream_packed(path, cfg: TokenizerConfig | None = None):
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise ValueError(f"not a packed token file (magic {magic!r})")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        got = _check_header(header, cfg)
        ids = np.frombuffer(f.read(), dtype="<u2").astype(np.int64)
    return ids, got
