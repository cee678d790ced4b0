"""Grammar-constrained autoregressive sampling, word regeneration, SVG
rendering, and attention-map extraction.

Every sampled stream is decodable by construction: at each step the logits
are masked to the token classes the grammar allows, and when the budget runs
low the sampler is steered to close the stream (remaining WORD tokens, then
END), so even an untrained model emits valid streams.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from xml.etree import ElementTree as ET

import numpy as np

from . import geometry as geo
from .asciitok import AsciiTokenizer
from .model import DecodeState, forward
from .tokenizer import TokenizerConfig, decode, validate_grammar
from .training import Checkpoint
from .util import subrng

PAGE_VERSION = 1
_SALT_SAMPLE = 307


@dataclass(frozen=True)
class SamplingConfig:
    temperature: float = 1.0
    seed: int = 0
    max_tokens: int = 1050
    warmup_ids: tuple = ()

    def __post_init__(self):
        if not (math.isfinite(self.temperature) and self.temperature > 0):
            raise ValueError("temperature must be finite and positive")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass
class GeneratedPage:
    """A sampled stroke stream addressable by word for regeneration."""

    text: str
    ids: np.ndarray
    spans: list[tuple[int, int]]       # per word [start, stop); ids[stop-1] is WORD
    tail_span: tuple[int, int]         # pair tokens after the last WORD, before END
    tokenizer: TokenizerConfig
    temperature: float = 1.0
    seed: int = 0
    truncated: bool = False
    lines: list[int] | None = None     # per-word line assignment set by layout

    @property
    def word_count(self) -> int:
        return len(self.spans)

    def word_texts(self) -> list[str]:
        words = self.text.split(" ")
        if len(words) == self.word_count:
            return words
        return [""] * self.word_count

    def to_json(self) -> str:
        return json.dumps({
            "format_version": PAGE_VERSION,
            "text": self.text,
            "ids": np.asarray(self.ids).tolist(),
            "words": [{"text": t, "span": [a, b]}
                      for t, (a, b) in zip(self.word_texts(), self.spans)],
            "tail_span": list(self.tail_span),
            "tokenizer": self.tokenizer.to_dict(),
            "temperature": self.temperature,
            "seed": self.seed,
            "truncated": self.truncated,
        }, separators=(",", ":"))

    @classmethod
    def from_json(cls, data) -> "GeneratedPage":
        if isinstance(data, (bytes, bytearray)):
            data = data.decode("utf-8")
        doc = json.loads(data) if isinstance(data, str) else data
        if doc.get("format_version") != PAGE_VERSION:
            raise ValueError("unsupported page format version")
        cfg = TokenizerConfig.from_dict(doc["tokenizer"])
        ids = np.asarray(doc["ids"], dtype=np.int64)
        page = cls(
            text=doc["text"], ids=ids,
            spans=[tuple(w["span"]) for w in doc["words"]],
            tail_span=tuple(doc["tail_span"]), tokenizer=cfg,
            temperature=doc.get("temperature", 1.0), seed=doc.get("seed", 0),
            truncated=doc.get("truncated", False),
        )
        validate_grammar(ids, cfg)
        return page


def page_from_ids(text: str, ids, cfg: TokenizerConfig, **kw) -> GeneratedPage:
    """Segment a grammatical stream into word spans at its WORD tokens."""
    ids = np.asarray(ids, dtype=np.int64)
    validate_grammar(ids, cfg)
    end = int(np.flatnonzero(ids == cfg.end_id)[0])
    word_pos = np.flatnonzero(ids[:end] == cfg.word_id)
    spans = []
    start = 0
    for w in word_pos:
        spans.append((start, int(w) + 1))
        start = int(w) + 1
    return GeneratedPage(text=text, ids=ids, spans=spans,
                         tail_span=(start, end), tokenizer=cfg, **kw)


# ---------------------------------------------------------------------------
# constrained sampling
# ---------------------------------------------------------------------------

class _GrammarMask:
    """Per-stream legality masks over the token vocabulary."""

    def __init__(self, cfg: TokenizerConfig, batch: int, max_tokens: int,
                 quota=None, dtype=np.float32):
        self.cfg = cfg
        self.B = batch
        self.max_tokens = max_tokens
        self.expect_rp = np.zeros(batch, dtype=bool)
        self.emitted = np.zeros(batch, dtype=np.int64)
        self.done = np.zeros(batch, dtype=bool)
        self.forced = np.zeros(batch, dtype=bool)
        self.quota = None if quota is None else np.full(batch, quota, dtype=np.int64)
        V = cfg.vocab_size
        self.theta_mask = np.zeros(V, dtype=bool)
        self.theta_mask[:cfg.theta_bins] = True
        self.rp_mask = np.zeros(V, dtype=bool)
        self.rp_mask[cfg.theta_bins:cfg.pad_id] = True
        self.neg_inf = np.asarray(-np.inf, dtype=dtype)

    def legal(self) -> np.ndarray:
        """Boolean [B, V] mask of grammar-legal next tokens."""
        cfg = self.cfg
        out = np.zeros((self.B, cfg.vocab_size), dtype=bool)
        remaining = self.max_tokens - self.emitted
        for b in range(self.B):
            if self.done[b]:
                out[b, cfg.pad_id] = True
                continue
            if self.expect_rp[b]:
                out[b] = self.rp_mask
                continue
            need = 1 + (int(self.quota[b]) if self.quota is not None else 0)
            if remaining[b] <= need:
                # steer to closure: emit owed WORD tokens, then END
                self.forced[b] = True
                if self.quota is not None and self.quota[b] > 0:
                    out[b, cfg.word_id] = True
                else:
                    out[b, cfg.end_id] = True
                continue
            if self.quota is not None and self.quota[b] == 0:
                # all words emitted: close like the training format does
                out[b, cfg.end_id] = True
                continue
            if remaining[b] >= need + 2:
                out[b] = self.theta_mask
            out[b, cfg.word_id] = True
            if self.quota is None:
                out[b, cfg.end_id] = True
        return out

    def advance(self, ids: np.ndarray):
        cfg = self.cfg
        active = ~self.done
        self.emitted[active] += 1
        is_theta = ids < cfg.theta_bins
        self.expect_rp[active] = is_theta[active]
        word = active & (ids == cfg.word_id)
        if self.quota is not None:
            self.quota[word] -= 1
        self.done |= active & (ids == cfg.end_id)


def _apply_mask_and_sample(logits, legal, temperature, uniforms):
    z = logits.astype(np.float64) / temperature
    z[~legal] = -np.inf
    z -= z.max(axis=-1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=-1, keepdims=True)
    cum = np.cumsum(p, axis=-1)
    draws = np.minimum((cum <= uniforms[:, None]).sum(axis=-1), p.shape[-1] - 1)
    rows = np.arange(len(draws))
    draws = np.where(legal[rows, draws], draws, p.argmax(axis=-1))
    logp = np.log(np.where(p > 0, p, 1.0))
    ent = -np.sum(p * logp, axis=-1)
    return draws.astype(np.int64), ent


def _run_sampler(ckpt: Checkpoint, ascii_ids, cfg: TokenizerConfig, batch: int,
                 temperature: float, rng, max_tokens: int, prefix=None,
                 quota=None):
    """Shared batched loop; returns (list of id arrays, forced flags, entropies)."""
    mc = ckpt.model_cfg
    prefix = [] if prefix is None else list(prefix)
    budget = min(max_tokens, mc.max_stroke_context - 1)
    if len(prefix) >= budget:
        raise ValueError("prefix leaves no room to generate")
    C = np.tile(np.asarray(ascii_ids, dtype=np.int64)[None, :], (batch, 1))
    state = DecodeState(ckpt.params, mc, C, max_tokens=budget + 1)
    mask = _GrammarMask(cfg, batch, budget, quota=quota)
    logits = state.step(np.full(batch, ckpt.pad_id, dtype=np.int64))
    for t in prefix:
        mask.advance(np.full(batch, t, dtype=np.int64))
        logits = state.step(np.full(batch, t, dtype=np.int64))
    if mask.done.any():
        raise ValueError("warmup prefix already contains END")
    out = [list(prefix) for _ in range(batch)]
    entropies = [[] for _ in range(batch)]
    while not mask.done.all():
        legal = mask.legal()
        ids, ent = _apply_mask_and_sample(logits, legal, temperature, rng.random(batch))
        active = ~mask.done
        for b in np.flatnonzero(active):
            out[b].append(int(ids[b]))
            entropies[b].append(ent[b])
        mask.advance(ids)
        if mask.done.all():
            break
        feed = np.where(mask.done, ckpt.pad_id, ids)
        logits = state.step(feed)
    streams = [np.asarray(o, dtype=np.int64) for o in out]
    return streams, mask.forced.copy(), entropies


def sample(ckpt: Checkpoint, text: str, sc: SamplingConfig,
           tok_cfg: TokenizerConfig | None = None) -> GeneratedPage:
    """Generate a stroke-token stream for ``text`` and wrap it as a page."""
    cfg = tok_cfg or TokenizerConfig()
    if cfg.vocab_size != ckpt.model_cfg.stroke_vocab:
        raise ValueError("tokenizer vocabulary does not match the checkpoint")
    atok = AsciiTokenizer()
    if not text:
        raise ValueError("text must be non-empty")
    ascii_ids = atok.encode(text)
    if len(ascii_ids) > ckpt.model_cfg.max_ascii_context:
        raise ValueError(f"text longer than the ascii context "
                         f"({ckpt.model_cfg.max_ascii_context} characters)")
    rng = subrng(sc.seed, _SALT_SAMPLE)
    streams, forced, _ = _run_sampler(
        ckpt, ascii_ids, cfg, 1, sc.temperature, rng, sc.max_tokens,
        prefix=sc.warmup_ids or None)
    page = page_from_ids(text, streams[0], cfg,
                         temperature=sc.temperature, seed=sc.seed,
                         truncated=bool(forced[0]))
    return page


def sample_many(ckpt: Checkpoint, text: str, n: int, sc: SamplingConfig,
                tok_cfg: TokenizerConfig | None = None,
                return_entropy: bool = False):
    """Batched variant: ``n`` independent streams for one prompt."""
    cfg = tok_cfg or TokenizerConfig()
    atok = AsciiTokenizer()
    ascii_ids = atok.encode(text)
    rng = subrng(sc.seed, _SALT_SAMPLE)
    streams, forced, ent = _run_sampler(
        ckpt, ascii_ids, cfg, n, sc.temperature, rng, sc.max_tokens)
    if return_entropy:
        flat = [e for es in ent for e in es]
        return streams, forced, float(np.mean(flat))
    return streams, forced


def regenerate(ckpt: Checkpoint, page: GeneratedPage, word_indices,
               sc: SamplingConfig) -> GeneratedPage:
    """Resample the selected words (and everything after them), keeping the
    token spans of all earlier words bit-identical and the word count fixed."""
    indices = sorted(set(int(i) for i in word_indices))
    if not indices:
        return page
    if indices[0] < 0 or indices[-1] >= page.word_count:
        raise IndexError(f"word index out of range 0..{page.word_count - 1}")
    first = indices[0]
    prefix = page.ids[:page.spans[first][0]]
    atok = AsciiTokenizer()
    ascii_ids = atok.encode(page.text)
    rng = subrng(sc.seed, _SALT_SAMPLE)
    # quota counts every word; feeding the kept prefix consumes `first` of it
    streams, forced, _ = _run_sampler(
        ckpt, ascii_ids, page.tokenizer, 1, sc.temperature, rng,
        sc.max_tokens, prefix=prefix, quota=page.word_count)
    return page_from_ids(page.text, streams[0], page.tokenizer,
                         temperature=sc.temperature, seed=sc.seed,
                         truncated=bool(forced[0]))


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def word_strokes(page: GeneratedPage, index: int) -> np.ndarray:
    """Decoded absolute coordinates of one word, anchored at its own origin.

    The first decoded offset of a word is the travel from the previous word,
    so it is rendered as a pen-up move and the word re-anchored at zero.
    """
    a, b = page.spans[index] if index < page.word_count else page.tail_span
    span = page.ids[a:b]
    pairs = span[span != page.tokenizer.word_id]
    stream = np.concatenate([pairs, [page.tokenizer.end_id]])
    polar, _ = decode(stream, page.tokenizer)
    if not len(polar):
        return np.empty((0, 3))
    polar = polar.copy()
    polar[0, :2] = 0.0  # drop inter-word travel
    polar[0, 2] = 0.0
    pts = geo.offsets_to_coords(geo.polar_to_cartesian(polar))
    return pts


def layout_page(page: GeneratedPage, line_width_chars: int = 24) -> list[int]:
    """Greedy line breaking at word boundaries against a character budget."""
    texts = page.word_texts()
    lines = []
    line = 0
    used = 0
    for i in range(page.word_count):
        n = max(len(texts[i]), 1)
        add = n if used == 0 else used + 1 + n
        if used > 0 and add > line_width_chars:
            line += 1
            used = n
        else:
            used = add
        lines.append(line)
    page.lines = lines
    return lines


def render_svg(page: GeneratedPage, line_width_chars: int = 24,
               scale: float = 1.0, margin: float = 16.0,
               stroke_width: float = 1.6) -> bytes:
    """Render a page to SVG 1.1 bytes; pen-down runs become polyline paths."""
    lines = layout_page(page, line_width_chars)
    words = [word_strokes(page, i) for i in range(page.word_count)]
    tail = word_strokes(page, page.word_count) if page.tail_span[0] < page.tail_span[1] else None
    if tail is not None:
        words.append(tail)
        lines = lines + [lines[-1] if lines else 0]

    heights = [w[:, 1].max() - w[:, 1].min() for w in words if len(w)]
    word_h = max(heights) if heights else 10.0
    gap = 0.45 * word_h
    line_height = 1.6 * word_h

    paths = []
    cursor_x, cur_line = 0.0, 0
    max_x = 0.0
    for w, line in zip(words, lines):
        if line != cur_line:
            cursor_x, cur_line = 0.0, line
        if not len(w):
            continue
        x0 = w[:, 0].min()
        for a, b in geo.pen_run_slices(w):
            seg = w[a:b]
            d = "M" + "L".join(
                f"{scale * (cursor_x + x - x0):.3f} "
                f"{scale * (line * line_height + word_h - y):.3f}"
                for x, y in seg[:, :2]
            )
            paths.append(d)
        cursor_x += (w[:, 0].max() - x0) + gap
        max_x = max(max_x, cursor_x - gap)

    n_lines = (max(lines) + 1) if lines else 0
    width = scale * max_x + 2 * margin
    height = scale * (n_lines * line_height) + 2 * margin if n_lines else 2 * margin
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", version="1.1",
                     width=f"{width:.1f}", height=f"{height:.1f}",
                     viewBox=f"0 0 {width:.1f} {height:.1f}")
    group = ET.SubElement(svg, "g", transform=f"translate({margin:.1f} {margin:.1f})",
                          fill="none", stroke="black")
    group.set("stroke-width", f"{stroke_width}")
    group.set("stroke-linecap", "round")
    group.set("stroke-linejoin", "round")
    for d in paths:
        ET.SubElement(group, "path", d=d)
    return ET.tostring(svg, encoding="utf-8", xml_declaration=True)


# ---------------------------------------------------------------------------
# attention maps
# ---------------------------------------------------------------------------

def extract_attention(ckpt: Checkpoint, stroke_ids, ascii_ids) -> dict:
    """Post-softmax attention maps from a forward pass.

    Returns ``{"self": [L, H, T, T], "cross": [L, H, T, S]}`` where the
    stroke axis follows the model inputs (PAD then the stream minus END).
    """
    stroke_ids = np.asarray(stroke_ids, dtype=np.int64)
    ascii_ids = np.asarray(ascii_ids, dtype=np.int64)
    X = np.concatenate([[ckpt.pad_id], stroke_ids[:-1]])[None, :]
    _, cache = forward(ckpt.params, ckpt.model_cfg, X, ascii_ids[None, :],
                       collect_attention=True)
    return {
        "self": np.stack([p[0] for p in cache["attn_self"]]),
        "cross": np.stack([p[0] for p in cache["attn_cross"]]),
    }


def plot_attention(tensors: dict, out_dir, text: str | None = None) -> list[Path]:
    """One grayscale heatmap per (kind, layer, head); deterministic bytes."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for kind in ("cross", "self"):
        maps = tensors[kind]
        L, H = maps.shape[:2]
        for layer in range(L):
            for head in range(H):
                fig, ax = plt.subplots(figsize=(4.2, 3.4), dpi=100)
                ax.imshow(maps[layer, head], cmap="gray", aspect="auto",
                          interpolation="nearest", vmin=0.0)
                ax.set_ylabel("stroke token index")
                if kind == "cross" and text is not None:
                    ticks = np.arange(len(text))
                    ax.set_xticks(ticks)
                    ax.set_xticklabels(list(text), fontsize=5)
                    ax.set_xlabel("text characters")
                else:
                    ax.set_xlabel("stroke token index" if kind == "self"
                                  else "text token index")
                ax.set_title(f"{kind}-attention layer {layer} head {head}", fontsize=9)
                fig.tight_layout()
                path = out_dir / f"{kind}_L{layer}_H{head}.png"
                fig.savefig(path, metadata={"Software": "cursive"})
                plt.close(fig)
                written.append(path)
    return written
