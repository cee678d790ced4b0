"""Deterministic synthetic handwriting: renders prompt words as stroke
sequences with cursive-style connections between lowercase letters.

This stands in for collected human samples so the full pipeline (tokenize,
train, sample) can run end to end. Templates live in ``glyphs.json``; each
glyph is a main polyline plus optional detached marks (i-dots, t-crosses)
that are drawn immediately after the main stroke, the same convention used
during data entry. The next letter connects from wherever the pen ended up.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .dataset import SampleRecord
from .util import subrng


class UnknownGlyphError(KeyError):
    def __init__(self, chars):
        super().__init__(f"no glyph template for characters: {sorted(set(chars))}")
        self.chars = sorted(set(chars))


@dataclass(frozen=True)
class GlyphTemplate:
    character: str
    strokes: tuple  # tuple of [n, 2] float arrays, stroke 0 is the main line
    advance: float
    entry: np.ndarray
    exit: np.ndarray


@dataclass(frozen=True)
class TemplateSet:
    glyphs: dict[str, GlyphTemplate]
    format_version: int = 1

    def __contains__(self, ch: str) -> bool:
        return ch in self.glyphs

    def __getitem__(self, ch: str) -> GlyphTemplate:
        return self.glyphs[ch]


def load_templates(path=None) -> TemplateSet:
    """Load glyph templates from a JSON file (the packaged set by default)."""
    if path is None:
        text = resources.files("cursive").joinpath("glyphs.json").read_text()
    else:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    doc = json.loads(text)
    glyphs = {}
    for ch, spec in doc["glyphs"].items():
        strokes = tuple(np.asarray(s, dtype=np.float64) for s in spec["strokes"])
        if not strokes or any(len(s) == 0 for s in strokes):
            raise ValueError(f"glyph {ch!r} has an empty stroke")
        glyphs[ch] = GlyphTemplate(
            character=ch,
            strokes=strokes,
            advance=float(spec["advance"]),
            entry=np.asarray(spec["entry"], dtype=np.float64),
            exit=np.asarray(spec["exit"], dtype=np.float64),
        )
    return TemplateSet(glyphs=glyphs, format_version=doc.get("format_version", 1))


_DEFAULT: TemplateSet | None = None


def default_templates() -> TemplateSet:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_templates()
    return _DEFAULT


def _connects(prev: str | None, ch: str) -> bool:
    return prev is not None and prev.islower() and ch.islower()


def render_word(
    word: str,
    templates: TemplateSet | None = None,
    jitter_seed=0,
    jitter: float = 0.02,
    scale: float = 24.0,
    letter_spacing: float = 0.14,
) -> SampleRecord:
    """Render one word as a stroke sequence (canonical y-up coordinates).

    Consecutive lowercase letters are joined with a drawn connecting segment
    from the pen's current position to the next letter's entry point; all
    other transitions are pen-up travel moves. ``jitter_seed`` may be an int
    or a ``numpy.random.Generator``.
    """
    if not word:
        raise ValueError("cannot render an empty word")
    templates = templates or default_templates()
    missing = [c for c in word if c not in templates]
    if missing:
        raise UnknownGlyphError(missing)
    rng = jitter_seed if isinstance(jitter_seed, np.random.Generator) else subrng(jitter_seed)
    xs: list[np.ndarray] = []
    flags: list[np.ndarray] = []
    cursor = 0.0
    prev: str | None = None
    for ch in word:
        tpl = templates[ch]
        for k, stroke in enumerate(tpl.strokes):
            pts = stroke + np.array([cursor, 0.0])
            n = len(pts)
            p = np.ones(n)
            if not (k == 0 and _connects(prev, ch)):
                p[0] = 0.0  # travel move into this stroke
            xs.append(pts)
            flags.append(p)
        cursor += tpl.advance + letter_spacing
        prev = ch
    pts = np.concatenate(xs, axis=0)
    p = np.concatenate(flags)
    p[0] = 1.0  # the first touch of the word is a drawn point
    if jitter > 0:
        pts = pts + rng.normal(scale=jitter, size=pts.shape)
    points = np.concatenate([pts * scale, p[:, None]], axis=1)
    return SampleRecord(
        word=word,
        points=points,
        metadata={"coords": "canonical", "source": "synthetic", "scale": scale},
    )


def render_bank(
    words,
    templates: TemplateSet | None = None,
    seed: int = 0,
    jitter: float = 0.02,
    scale: float = 24.0,
) -> list[SampleRecord]:
    """Render a whole word bank; word ``i`` gets jitter substream ``(seed, i)``."""
    templates = templates or default_templates()
    return [
        render_word(w, templates, jitter_seed=subrng(seed, i), jitter=jitter, scale=scale)
        for i, w in enumerate(words)
    ]
