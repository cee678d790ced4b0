"""Synthetic prompt-word generator with rare-character oversampling.

Generated "words" follow three conventions (rule set R):

  (a) digit words: digits never mix with letters;
  (b) an uppercase letter is only valid when no letter precedes it, i.e. as
      the first alphabetic character of a word (leading quotes are fine);
  (c) sentence-terminal punctuation ``. ? !`` only occurs as a trailing run.

Two sampling strategies share this module. The default draws every character
i.i.d. from the configured weights and *arranges* the stream into valid
words, so empirical character frequencies track the weights exactly (up to
multinomial noise). Setting any of the probability knobs
(``digit_word_probability`` etc.) switches to a classed generator that
honors those knobs directly at the cost of only approximate frequencies.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field, replace

import numpy as np

ALPHABET = string.ascii_lowercase + string.ascii_uppercase + string.digits + ".,!?()'\""

TERMINALS = ".?!,"
_HARD_TERMINALS = ".?!"

# published sampling percentages for the most oversampled characters; the
# rest of the alphabet shares the remaining mass uniformly
_SEED_WEIGHTS = {
    "a": 2.90, "o": 2.67, "g": 1.95, "f": 1.84, "l": 1.70, "6": 1.39,
    "I": 1.28, "H": 1.13, "'": 0.85, "Q": 0.76, "J": 0.71, "G": 0.68,
}


def default_char_weights(alphabet: str = ALPHABET) -> dict[str, float]:
    listed = {c: w for c, w in _SEED_WEIGHTS.items() if c in alphabet}
    rest = [c for c in alphabet if c not in listed]
    residual = (100.0 - sum(listed.values())) / len(rest) if rest else 0.0
    weights = {c: listed.get(c, residual) for c in alphabet}
    return weights


@dataclass(frozen=True)
class WordBankConfig:
    alphabet: str = ALPHABET
    char_weights: dict[str, float] | None = None
    word_length_range: tuple[int, int] = (1, 9)
    # knobs for the classed generator; all None selects the frequency-exact
    # stream generator instead
    digit_word_probability: float | None = None
    terminal_punct_probability: float | None = None
    capitalize_probability: float | None = None
    edge_punct_probability: float = 0.08

    def __post_init__(self):
        if not self.alphabet:
            raise ValueError("alphabet must be non-empty")
        extra = set(self.alphabet) - set(ALPHABET)
        if extra:
            raise ValueError(f"alphabet contains unsupported characters: {sorted(extra)}")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ValueError("alphabet has duplicate characters")
        lo, hi = self.word_length_range
        if not (1 <= lo <= hi):
            raise ValueError(f"bad word_length_range {self.word_length_range}")
        weights = self.char_weights
        if weights is None:
            weights = default_char_weights(self.alphabet)
        if set(weights) != set(self.alphabet):
            raise ValueError("char_weights keys must equal the alphabet")
        if any(w <= 0 for w in weights.values()):
            raise ValueError("all char weights must be positive")
        object.__setattr__(self, "char_weights", dict(weights))
        for name in ("digit_word_probability", "terminal_punct_probability",
                     "capitalize_probability"):
            v = getattr(self, name)
            if v is not None and not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1]")
        if not (0.0 <= self.edge_punct_probability <= 1.0):
            raise ValueError("edge_punct_probability must be in [0, 1]")

    @property
    def classed(self) -> bool:
        return any(v is not None for v in (
            self.digit_word_probability,
            self.terminal_punct_probability,
            self.capitalize_probability,
        ))

    def to_dict(self) -> dict:
        return {
            "alphabet": self.alphabet,
            "char_weights": self.char_weights,
            "word_length_range": list(self.word_length_range),
            "digit_word_probability": self.digit_word_probability,
            "terminal_punct_probability": self.terminal_punct_probability,
            "capitalize_probability": self.capitalize_probability,
            "edge_punct_probability": self.edge_punct_probability,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WordBankConfig":
        d = dict(d)
        if "word_length_range" in d:
            d["word_length_range"] = tuple(d["word_length_range"])
        return cls(**d)


def validate_word(word: str) -> list[str]:
    """Rule-R violations of a word; an empty list means the word is valid."""
    violations = []
    has_digit = any(c.isdigit() for c in word)
    has_alpha = any(c.isalpha() for c in word)
    if has_digit and has_alpha:
        violations.append("R(a): digits and letters mixed")
    seen_alpha = False
    for i, c in enumerate(word):
        if c.isupper() and seen_alpha:
            violations.append(f"R(b): uppercase {c!r} at position {i} after a letter")
            break
        if c.isalpha():
            seen_alpha = True
    for i, c in enumerate(word):
        if c in _HARD_TERMINALS:
            tail = word[i:]
            if any(t not in _HARD_TERMINALS for t in tail):
                violations.append(f"R(c): terminal punctuation {c!r} at position {i} is not final")
            break
    return violations


class _Weights:
    def __init__(self, cfg: WordBankConfig):
        self.chars = list(cfg.alphabet)
        w = np.array([cfg.char_weights[c] for c in cfg.alphabet], dtype=np.float64)
        self.cum = np.cumsum(w / w.sum())

    def draw_batch(self, rng: np.random.Generator, n: int) -> list[str]:
        idx = np.searchsorted(self.cum, rng.random(n), side="right")
        idx = np.minimum(idx, len(self.chars) - 1)
        return [self.chars[i] for i in idx]

    def draw_from(self, rng: np.random.Generator, subset: str) -> str | None:
        pairs = [(c, self.cum[i] - (self.cum[i - 1] if i else 0.0))
                 for i, c in enumerate(self.chars) if c in subset]
        if not pairs:
            return None
        p = np.array([w for _, w in pairs])
        cum = np.cumsum(p / p.sum())
        i = int(np.minimum(np.searchsorted(cum, rng.random(), side="right"), len(pairs) - 1))
        return pairs[i][0]


class _StreamArranger:
    """Frequency-exact generator: i.i.d. character stream -> valid words."""

    def __init__(self, cfg: WordBankConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.weights = _Weights(cfg)
        self.buffer: list[str] = []

    def _next_char(self) -> str:
        if not self.buffer:
            self.buffer.extend(self.weights.draw_batch(self.rng, 64))
        return self.buffer.pop(0)

    def next_word(self) -> str:
        lo, hi = self.cfg.word_length_range
        target = int(self.rng.integers(lo, hi + 1))
        leads = head = body = trails = soft_terms = terms = ""
        core_class = None
        while True:
            c = self._next_char()
            locked = bool(trails or soft_terms or terms)
            if c == ",":
                soft_terms += c
            elif c in TERMINALS:
                terms += c
            elif c == ")":
                trails += c
            elif c == '"':
                if not head and not body and not locked:
                    leads += c
                else:
                    trails += c
            elif c == "(":
                if not head and not body and not locked:
                    leads += c
                else:
                    self.buffer.insert(0, c)
                    break
            elif c == "'":
                if not head and not body and not locked:
                    leads += c
                elif not locked:
                    body += c
                else:
                    trails += c
            elif c.isdigit():
                if locked or core_class == "alpha":
                    self.buffer.insert(0, c)
                    break
                core_class = "digit"
                body += c
            elif c.islower():
                if locked or core_class == "digit":
                    self.buffer.insert(0, c)
                    break
                core_class = "alpha"
                body += c
            else:  # uppercase
                if head or body or locked:
                    self.buffer.insert(0, c)
                    break
                core_class = "alpha"
                head = c
            if (len(head) + len(body) >= target
                    or len(trails) + len(soft_terms) + len(terms) >= 3
                    or len(leads) >= 3):
                break
        return leads + head + body + trails + soft_terms + terms


def _classed_word(cfg: WordBankConfig, rng: np.random.Generator, weights: _Weights) -> str:
    digit_p = cfg.digit_word_probability if cfg.digit_word_probability is not None else 0.2
    term_p = cfg.terminal_punct_probability if cfg.terminal_punct_probability is not None else 0.15
    cap_p = cfg.capitalize_probability if cfg.capitalize_probability is not None else 0.35
    lo, hi = cfg.word_length_range
    length = int(rng.integers(lo, hi + 1))
    digits = [c for c in cfg.alphabet if c.isdigit()]
    lowers = [c for c in cfg.alphabet if c.islower()]
    uppers = [c for c in cfg.alphabet if c.isupper()]
    core = ""
    if digits and (not lowers or rng.random() < digit_p):
        for _ in range(length):
            core += weights.draw_from(rng, "".join(digits)) or ""
    elif lowers:
        if uppers and rng.random() < cap_p:
            core += weights.draw_from(rng, "".join(uppers)) or ""
            length -= 1
        for _ in range(max(length, 0)):
            core += weights.draw_from(rng, "".join(lowers)) or ""
    leads = trails = terms = ""
    edge_p = cfg.edge_punct_probability
    if rng.random() < edge_p:
        leads = weights.draw_from(rng, '"(' + "'") or ""
    if rng.random() < edge_p:
        trails = weights.draw_from(rng, '")') or ""
    if rng.random() < term_p:
        terms = weights.draw_from(rng, TERMINALS) or ""
    word = leads + core + trails + terms
    return word if word else (weights.draw_from(rng, "".join(lowers or digits)) or "a")


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(rng))


def generate_bank(cfg: WordBankConfig, n: int, rng=0) -> list[str]:
    """Deterministically generate ``n`` words; same seed, same bank."""
    if n < 0:
        raise ValueError("n must be >= 0")
    gen = _as_rng(rng)
    if cfg.classed:
        weights = _Weights(cfg)
        return [_classed_word(cfg, gen, weights) for _ in range(n)]
    arranger = _StreamArranger(cfg, gen)
    return [arranger.next_word() for _ in range(n)]


def generate_word(cfg: WordBankConfig, rng=0) -> str:
    """One word; equivalent to the first word of a bank with this seed."""
    return generate_bank(cfg, 1, rng)[0]
