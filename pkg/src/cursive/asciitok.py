"""Character-level tokenizer for the text side of the model."""

from __future__ import annotations

import numpy as np

from .wordbank import ALPHABET

PAD_CHAR = "\x00"


class AsciiTokenizer:
    """Bijective char <-> id map over the writing alphabet plus space and PAD.

    PAD is id 0; unknown characters are rejected rather than mapped.
    """

    def __init__(self, alphabet: str = ALPHABET):
        chars = [PAD_CHAR, " "] + sorted(set(alphabet))
        if len(chars) != len(set(chars)):
            raise ValueError("alphabet must not contain space or NUL")
        self.chars = chars
        self.char_to_id = {c: i for i, c in enumerate(chars)}
        self.pad_id = 0

    @property
    def vocab_size(self) -> int:
        return len(self.chars)

    def encode(self, text: str) -> np.ndarray:
        ids = np.empty(len(text), dtype=np.int64)
        for i, c in enumerate(text):
            if c not in self.char_to_id or c == PAD_CHAR:
                raise ValueError(f"character {c!r} at position {i} is not in the alphabet")
            ids[i] = self.char_to_id[c]
        return ids

    def decode(self, ids) -> str:
        return "".join(self.chars[int(i)] for i in ids if int(i) != self.pad_id)
