"""Dataset assembly: sample records, train/test split, augmentation, and the
multi-word corpus builder.

A corpus build is fully determined by (records, seed, config). Sequences are
produced in fixed-size chunks, each driven by its own random substream, so a
build parallelized over chunks is byte-identical to a serial one; the
manifest records content hashes to prove it.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry as geo
from . import kernels
from .asciitok import AsciiTokenizer
from .tokenizer import TokenizerConfig, validate_grammar
from .util import canonical_json, config_hash, subrng
from .wordbank import validate_word

MANIFEST_VERSION = 1
CORPUS_MAGIC = b"CCOR"

# substream salts: keep every consumer of the master seed on its own stream
_SALT_SPLIT = 101
_SALT_PROBE = 102
_SALT_TRAIN = 103
_SALT_TEST = 104
_SALT_AUG = 105


class SchemaError(ValueError):
    """A sample-record document violated the JSON schema."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class SampleRecord:
    """One collected or synthesized word: prompt text plus its strokes."""

    word: str
    points: np.ndarray  # [N, 3] (x, y, p), canonical y-up coordinates
    metadata: dict = field(default_factory=dict)

    def __eq__(self, other):
        return (
            isinstance(other, SampleRecord)
            and self.word == other.word
            and np.array_equal(self.points, other.points)
            and self.metadata == other.metadata
        )


@dataclass
class TrainingSequence:
    """A multi-word training example: text, stroke tokens, text tokens."""

    text: str
    stream: np.ndarray
    ascii_ids: np.ndarray


@dataclass(frozen=True)
class AugmentationParams:
    """One concrete augmentation draw (see DatasetConfig for the ranges)."""

    shear_x: float
    scale_x: float
    scale_y: float
    drop_fraction: float
    seed: int = 0

    def __post_init__(self):
        if not (0.9 <= self.scale_x <= 1.1) or not (0.9 <= self.scale_y <= 1.1):
            raise ValueError("scales must lie in [0.9, 1.1]")
        if not (0.55 <= self.drop_fraction <= 0.75):
            raise ValueError("drop_fraction must lie in [0.55, 0.75]")


@dataclass(frozen=True)
class DatasetConfig:
    words_per_seq: int = 4
    max_context: int = 1050
    max_ascii: int = 64
    gap_scale: float = 1.0     # inter-word gap in units of median character width
    shear_range: tuple[float, float] = (-0.3, 0.3)
    scale_range: tuple[float, float] = (0.9, 1.1)
    drop_range: tuple[float, float] = (0.55, 0.75)
    chunk_size: int = 4096
    r_max_percentile: float = 99.9
    train_fraction: float = 0.95

    def to_dict(self) -> dict:
        return {
            "words_per_seq": self.words_per_seq,
            "max_context": self.max_context,
            "max_ascii": self.max_ascii,
            "gap_scale": self.gap_scale,
            "shear_range": list(self.shear_range),
            "scale_range": list(self.scale_range),
            "drop_range": list(self.drop_range),
            "chunk_size": self.chunk_size,
            "r_max_percentile": self.r_max_percentile,
            "train_fraction": self.train_fraction,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        d = dict(d)
        for k in ("shear_range", "scale_range", "drop_range"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------

def _check_point(pt, path):
    if not isinstance(pt, (list, tuple)) or len(pt) != 3:
        raise SchemaError(path, "point must be [x, y, p]")
    x, y, p = pt
    for name, v in (("x", x), ("y", y)):
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
            raise SchemaError(f"{path}[{0 if name == 'x' else 1}]", f"{name} must be a finite number")
    if p not in (0, 1):
        raise SchemaError(f"{path}[2]", "pen flag must be 0 or 1")


def ingest_json(data) -> list[SampleRecord]:
    """Parse and validate a sample-record document.

    Records whose metadata declares ``"coords": "screen"`` are flipped to the
    canonical y-up orientation on the way in. Errors name the offending JSON
    path, e.g. ``$[3].points[7][2]``.
    """
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise SchemaError("$", f"invalid JSON: {e}") from e
    if not isinstance(data, list):
        raise SchemaError("$", "document must be a list of records")
    records = []
    for i, item in enumerate(data):
        path = f"$[{i}]"
        if not isinstance(item, dict):
            raise SchemaError(path, "record must be an object")
        if "word" not in item or not isinstance(item["word"], str):
            raise SchemaError(f"{path}.word", "missing or non-string word")
        if "points" not in item or not isinstance(item["points"], list) or not item["points"]:
            raise SchemaError(f"{path}.points", "points must be a non-empty list")
        metadata = item.get("metadata", {})
        if not isinstance(metadata, dict):
            raise SchemaError(f"{path}.metadata", "metadata must be an object")
        word = item["word"]
        violations = validate_word(word)
        if violations and not metadata.get("free_form"):
            raise SchemaError(f"{path}.word", f"word breaks bank rules ({violations[0]}); "
                              "set metadata.free_form to accept it")
        for j, pt in enumerate(item["points"]):
            _check_point(pt, f"{path}.points[{j}]")
        pts = np.asarray(item["points"], dtype=np.float64)
        metadata = dict(metadata)
        if metadata.get("coords") == "screen":
            pts = pts.copy()
            pts[:, 1] = -pts[:, 1]
            metadata["coords"] = "canonical"
        else:
            metadata.setdefault("coords", "canonical")
        records.append(SampleRecord(word=word, points=pts, metadata=metadata))
    return records


def export_json(records) -> bytes:
    """Serialize records to the interchange schema (canonical coordinates)."""
    out = []
    for rec in records:
        pts = geo.as_points(rec.points)
        out.append({
            "word": rec.word,
            "points": [[float(x), float(y), int(p)] for x, y, p in pts],
            "metadata": {**rec.metadata, "coords": "canonical"},
        })
    return json.dumps(out, separators=(",", ":"), allow_nan=False).encode("utf-8")


# ---------------------------------------------------------------------------
# split / augment
# ---------------------------------------------------------------------------

def split(samples, train_fraction: float = 0.95, seed: int = 0):
    """Shuffle and split; |train| = round(train_fraction * N)."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    n = len(samples)
    if n == 0:
        raise ValueError("cannot split an empty sample list")
    perm = subrng(seed, _SALT_SPLIT).permutation(n)
    n_train = int(round(train_fraction * n))
    train = [samples[i] for i in perm[:n_train]]
    test = [samples[i] for i in perm[n_train:]]
    return train, test


def downsample(seq, drop_fraction: float, rng=0) -> np.ndarray:
    """Remove ``floor(drop_fraction * N)`` interior points, never touching
    the beginnings or endings of pen-down runs."""
    if not 0.0 <= drop_fraction < 1.0:
        raise ValueError("drop_fraction must be in [0, 1)")
    pts = geo.as_points(seq)
    gen = rng if isinstance(rng, np.random.Generator) else subrng(rng, _SALT_AUG)
    keys = gen.random(len(pts))
    keep = kernels.downsample_keep_mask(pts[:, 2], keys, drop_fraction)
    return pts[keep]


def augment(seq, params: AugmentationParams) -> np.ndarray:
    """Shear/scale then downsample; fully determined by ``params``."""
    out = geo.apply_affine(seq, params.shear_x, params.scale_x, params.scale_y)
    return downsample(out, params.drop_fraction, subrng(params.seed, _SALT_AUG))


# ---------------------------------------------------------------------------
# corpus assembly
# ---------------------------------------------------------------------------

@dataclass
class _Pool:
    pts: np.ndarray          # [P, 3] all words concatenated
    starts: np.ndarray       # [W+1]
    xmin: np.ndarray
    xmax: np.ndarray
    counts: np.ndarray       # [W] points per word
    words: list[str]
    gap: float

    @classmethod
    def build(cls, records, cfg: DatasetConfig):
        if not records:
            raise ValueError("sample pool is empty")
        pts = np.concatenate([geo.as_points(r.points) for r in records], axis=0)
        counts = np.array([len(r.points) for r in records], dtype=np.int64)
        starts = np.concatenate([[0], np.cumsum(counts)])
        xmin = np.minimum.reduceat(pts[:, 0], starts[:-1])
        xmax = np.maximum.reduceat(pts[:, 0], starts[:-1])
        words = [r.word for r in records]
        char_width = (xmax - xmin) / np.maximum([len(w) for w in words], 1)
        gap = cfg.gap_scale * float(np.median(char_width))
        return cls(pts, starts, xmin, xmax, counts, words, gap)


def _check_pool_fits(pool: _Pool, cfg: DatasetConfig):
    """A word that cannot fit the context even alone is a hard error."""
    drop_max = cfg.drop_range[1]
    for w in range(len(pool.counts)):
        a, b = pool.starts[w], pool.starts[w + 1]
        p = pool.pts[a:b, 2]
        interior = int(np.sum((p[1:-1] == 1) & (p[2:] == 1))) if b - a >= 3 else 0
        raw = int(pool.counts[w])
        kept_min = raw - min(int(np.floor(drop_max * raw)), interior)
        if 2 * kept_min + cfg.words_per_seq + 1 > cfg.max_context:
            raise ValueError(
                f"sample {w} ({pool.words[w]!r}) cannot fit the stroke context "
                f"of {cfg.max_context} even at maximum downsampling"
            )


def _chunk_sequences(pool: _Pool, tok_cfg: TokenizerConfig, cfg: DatasetConfig,
                     seed: int, salt: int, chunk_idx: int, count: int):
    """Assemble one chunk; returns (list of id arrays, list of texts, stats)."""
    lo = chunk_idx * cfg.chunk_size
    hi = min(count, lo + cfg.chunk_size)
    n = hi - lo
    rng = subrng(seed, salt, chunk_idx)
    r_edges = tok_cfg.r_edges()
    uniform_r = tok_cfg.r_spacing == "uniform"
    tokens: list = [None] * n
    texts: list = [None] * n
    pending = np.arange(n)
    clipped = 0
    redraws = 0
    rounds = 0
    while len(pending):
        m = len(pending)
        word_idx = rng.integers(0, len(pool.counts), size=(m, cfg.words_per_seq))
        shear = rng.uniform(*cfg.shear_range, size=m)
        sx = rng.uniform(*cfg.scale_range, size=m)
        sy = rng.uniform(*cfg.scale_range, size=m)
        drop = rng.uniform(*cfg.drop_range, size=m)
        raw = pool.counts[word_idx].sum(axis=1)
        key_starts = np.concatenate([[0], np.cumsum(raw)])
        keys = rng.random(int(key_starts[-1]))
        worst = int(np.sum(2 * raw + cfg.words_per_seq + 1))
        out = np.empty(worst, dtype=np.uint16)
        lengths, nclip, total = kernels.assemble_chunk(
            pool.pts, pool.starts, pool.xmin, pool.xmax,
            word_idx, shear, sx, sy, drop,
            keys, key_starts, pool.gap,
            tok_cfg.theta_bins, tok_cfg.r_bins, tok_cfg.r_max, r_edges,
            uniform_r, cfg.max_context, out,
        )
        clipped += int(nclip)
        cuts = np.cumsum(lengths[lengths >= 0])
        pieces = np.split(out[:total], cuts[:-1]) if len(cuts) else []
        failed = []
        k = 0
        for j in range(m):
            slot = pending[j]
            text = " ".join(pool.words[w] for w in word_idx[j])
            if lengths[j] < 0 or len(text) > cfg.max_ascii:
                failed.append(slot)
                if lengths[j] >= 0:
                    k += 1
                continue
            tokens[slot] = pieces[k].copy()
            texts[slot] = text
            k += 1
        redraws += len(failed)
        pending = np.array(failed, dtype=np.int64)
        rounds += 1
        if rounds > 100:
            raise RuntimeError("corpus assembly is not converging; "
                               "check max_context against the sample pool")
    word_counts = np.array(
        [int(np.count_nonzero(t == tok_cfg.word_id)) for t in tokens], dtype=np.int64
    )
    stats = {
        "max_stream_len": int(max(len(t) for t in tokens)),
        "word_tokens_min": int(word_counts.min()),
        "word_tokens_max": int(word_counts.max()),
        "ascii_max_len": int(max(len(t) for t in texts)),
        "clipped_r": clipped,
        "redraws": redraws,
    }
    return tokens, texts, stats


def _merge_stats(agg: dict, new: dict):
    for k, v in new.items():
        if k in ("clipped_r", "redraws"):
            agg[k] = agg.get(k, 0) + v
        elif k.endswith("_min"):
            agg[k] = min(agg.get(k, v), v)
        else:
            agg[k] = max(agg.get(k, v), v)


def _digest_chunk(tokens, texts) -> bytes:
    h = hashlib.sha256()
    lengths = np.array([len(t) for t in tokens], dtype="<i4")
    h.update(lengths.tobytes())
    for t in tokens:
        h.update(t.astype("<u2").tobytes())
    h.update("\n".join(texts).encode("utf-8"))
    return h.digest()


def probe_r_max(pool: _Pool, cfg: DatasetConfig, seed: int, n_probe: int = 512) -> float:
    """Estimate the radius clip: a high percentile of offset magnitudes over
    probe sequences assembled exactly like training data."""
    rng = subrng(seed, _SALT_PROBE)
    radii = []
    for _ in range(n_probe):
        word_idx = rng.integers(0, len(pool.counts), size=cfg.words_per_seq)
        parts = []
        cursor = 0.0
        for w in word_idx:
            a, b = pool.starts[w], pool.starts[w + 1]
            seg = pool.pts[a:b].copy()
            seg[:, 0] += cursor - pool.xmin[w]
            if parts:
                seg[0, 2] = 0.0
            cursor += (pool.xmax[w] - pool.xmin[w]) + pool.gap
            parts.append(seg)
        pts = np.concatenate(parts, axis=0)
        pts = geo.apply_affine(pts, rng.uniform(*cfg.shear_range),
                               rng.uniform(*cfg.scale_range), rng.uniform(*cfg.scale_range))
        pts = downsample(pts, rng.uniform(*cfg.drop_range), rng)
        offs = geo.coords_to_offsets(pts)
        radii.append(np.hypot(offs[:, 0], offs[:, 1]))
    return float(np.percentile(np.concatenate(radii), cfg.r_max_percentile))


_WORKER: dict = {}


def _init_worker(pool, tok_cfg, cfg, seed):
    _WORKER.update(pool=pool, tok_cfg=tok_cfg, cfg=cfg, seed=seed)


def _worker_chunk(args):
    salt, chunk_idx, count, need_payload = args
    tokens, texts, stats = _chunk_sequences(
        _WORKER["pool"], _WORKER["tok_cfg"], _WORKER["cfg"],
        _WORKER["seed"], salt, chunk_idx, count,
    )
    digest = _digest_chunk(tokens, texts)
    if not need_payload:
        tokens = texts = None
    return chunk_idx, digest, stats, tokens, texts


def assemble_sequences(pool_records, count: int, tok_cfg: TokenizerConfig,
                       cfg: DatasetConfig | None = None, seed: int = 0,
                       salt: int = _SALT_TRAIN) -> list[TrainingSequence]:
    """Materialize ``count`` training sequences drawn (with replacement) from
    the pool. Each sequence carries exactly ``words_per_seq`` WORD tokens and
    fits the stroke context; over-long draws are rejected and redrawn."""
    cfg = cfg or DatasetConfig()
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return []
    pool = _Pool.build(pool_records, cfg)
    _check_pool_fits(pool, cfg)
    atok = AsciiTokenizer()
    out = []
    for chunk_idx in range(_n_chunks(count, cfg)):
        tokens, texts, _ = _chunk_sequences(pool, tok_cfg, cfg, seed, salt, chunk_idx, count)
        for ids, text in zip(tokens, texts):
            out.append(TrainingSequence(text=text, stream=ids.astype(np.int64),
                                        ascii_ids=atok.encode(text)))
    return out


def _n_chunks(count: int, cfg: DatasetConfig) -> int:
    return (count + cfg.chunk_size - 1) // cfg.chunk_size


def build_corpus(
    records,
    n_train: int,
    n_test: int,
    tok_cfg: TokenizerConfig | None = None,
    cfg: DatasetConfig | None = None,
    seed: int = 0,
    workers: int = 1,
    out_dir=None,
    theta_bins: int = 220,
    r_bins: int = 150,
) -> dict:
    """Split records, assemble both corpora, and return the manifest.

    When ``tok_cfg`` is None the radius clip is probed from the training pool
    (``r_max_percentile`` of augmented offset magnitudes) and combined with
    ``theta_bins``/``r_bins``. The manifest (and any written corpus files) is
    byte-identical for any ``workers`` count. When ``out_dir`` is given the
    token streams and texts are persisted alongside ``manifest.json``.
    """
    cfg = cfg or DatasetConfig()
    train_recs, test_recs = split(records, cfg.train_fraction, seed)
    if not train_recs or (n_test > 0 and not test_recs):
        raise ValueError("split produced an empty pool; need more records")
    pools = {"train": _Pool.build(train_recs, cfg), "test": _Pool.build(test_recs, cfg)}
    if tok_cfg is None:
        r_max = probe_r_max(pools["train"], cfg, seed)
        tok_cfg = TokenizerConfig(theta_bins=theta_bins, r_bins=r_bins, r_max=r_max)
    for pool in pools.values():
        _check_pool_fits(pool, cfg)

    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    splits_manifest = {}
    jobs = {"train": (_SALT_TRAIN, n_train), "test": (_SALT_TEST, n_test)}
    for name, (salt, count) in jobs.items():
        pool = pools[name]
        digest = hashlib.sha256()
        stats: dict = {}
        writer = _CorpusWriter(out_dir / name, tok_cfg) if out_dir is not None else None
        n_chunks = _n_chunks(count, cfg)
        chunk_args = [(salt, c, count, writer is not None) for c in range(n_chunks)]
        if workers > 1 and n_chunks > 1:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=workers, mp_context=ctx,
                                     initializer=_init_worker,
                                     initargs=(pool, tok_cfg, cfg, seed)) as ex:
                for chunk_idx, d, st, tokens, texts in ex.map(
                        _worker_chunk, chunk_args, chunksize=1):
                    digest.update(d)
                    _merge_stats(stats, st)
                    if writer:
                        writer.append(tokens, texts)
        else:
            for salt_, chunk_idx, count_, _need in chunk_args:
                tokens, texts, st = _chunk_sequences(pool, tok_cfg, cfg, seed,
                                                     salt_, chunk_idx, count_)
                digest.update(_digest_chunk(tokens, texts))
                _merge_stats(stats, st)
                if writer:
                    writer.append(tokens, texts)
        if writer:
            writer.close()
        splits_manifest[name] = {
            "count": count,
            "sha256": digest.hexdigest(),
            "pool_words": len(pool.counts),
            "gap": pool.gap,
            **stats,
        }

    manifest = {
        "format_version": MANIFEST_VERSION,
        "seed": seed,
        "dataset_config": cfg.to_dict(),
        "tokenizer_config": tok_cfg.to_dict(),
        "splits": splits_manifest,
    }
    manifest["config_hash"] = config_hash(
        {"dataset": cfg.to_dict(), "tokenizer": tok_cfg.to_dict(), "seed": seed}
    )
    if out_dir is not None:
        (out_dir / "manifest.json").write_text(canonical_json(manifest))
    return manifest


class _CorpusWriter:
    """Streams a split to ``<prefix>.ctok`` (tokens) and ``<prefix>.txt``."""

    def __init__(self, prefix: Path, tok_cfg: TokenizerConfig):
        self.tok_path = prefix.with_suffix(".ctok")
        self.txt_path = prefix.with_suffix(".txt")
        header = canonical_json(tok_cfg.to_dict()).encode("utf-8")
        self.tok_file = open(self.tok_path, "wb")
        self.tok_file.write(CORPUS_MAGIC)
        self.tok_file.write(struct.pack("<I", len(header)))
        self.tok_file.write(header)
        self.txt_file = open(self.txt_path, "w", encoding="utf-8")

    def append(self, tokens, texts):
        for t in tokens:
            self.tok_file.write(struct.pack("<I", len(t)))
            self.tok_file.write(t.astype("<u2").tobytes())
        for text in texts:
            self.txt_file.write(text)
            self.txt_file.write("\n")

    def close(self):
        self.tok_file.close()
        self.txt_file.close()


def load_corpus(out_dir, name: str) -> list[TrainingSequence]:
    """Read back a persisted split as in-memory training sequences."""
    out_dir = Path(out_dir)
    with open(out_dir / f"{name}.ctok", "rb") as f:
        if f.read(4) != CORPUS_MAGIC:
            raise ValueError("not a corpus token file")
        (hlen,) = struct.unpack("<I", f.read(4))
        TokenizerConfig.from_dict(json.loads(f.read(hlen)))
        payload = f.read()
    texts = (out_dir / f"{name}.txt").read_text(encoding="utf-8").splitlines()
    atok = AsciiTokenizer()
    seqs = []
    pos = 0
    for text in texts:
        (ln,) = struct.unpack_from("<I", payload, pos)
        pos += 4
        ids = np.frombuffer(payload, dtype="<u2", count=ln, offset=pos).astype(np.int64)
        pos += 2 * ln
        seqs.append(TrainingSequence(text=text, stream=ids, ascii_ids=atok.encode(text)))
    if pos != len(payload):
        raise ValueError("corpus token file has trailing bytes")
    return seqs
