import numpy as np
import pytest

from cursive import wordbank as wb


def test_validate_word_examples():
    assert wb.validate_word("Joakn") == []
    assert any("R(b)" in v for v in wb.validate_word("aB"))
    assert any("R(a)" in v for v in wb.validate_word("4a2"))
    assert any("R(c)" in v for v in wb.validate_word("a.b"))


def test_validate_word_accepts_bank_conventions():
    for w in ["hlin", "42", "rymrtd", "Kmxqngyo?", "854,", "'ogflia)",
              "noagpb\")", "ikna)!", "2510.", "lafpxp!", "\"Qnkrh", "(ambd"]:
        assert wb.validate_word(w) == [], w


def test_default_weights_cover_alphabet():
    weights = wb.default_char_weights()
    assert set(weights) == set(wb.ALPHABET)
    assert len(wb.ALPHABET) == 70
    assert weights["a"] == 2.90
    assert weights["'"] == 0.85
    assert all(w > 0 for w in weights.values())


def test_forced_single_letter():
    cfg = wb.WordBankConfig(alphabet="a", char_weights={"a": 1.0},
                            word_length_range=(1, 1))
    assert wb.generate_word(cfg) == "a"


def test_empty_alphabet_rejected():
    with pytest.raises(ValueError):
        wb.WordBankConfig(alphabet="")


def test_bank_empty_and_deterministic():
    cfg = wb.WordBankConfig()
    assert wb.generate_bank(cfg, 0) == []
    a = wb.generate_bank(cfg, 75, rng=1)
    b = wb.generate_bank(cfg, 75, rng=1)
    assert a == b
    assert wb.generate_bank(cfg, 75, rng=2) != a


def test_bank_of_10k_has_no_violations():
    cfg = wb.WordBankConfig()
    bank = wb.generate_bank(cfg, 10_000, rng=3)
    bad = [(w, v) for w in bank for v in wb.validate_word(w)]
    assert bad == []
    assert all(w for w in bank)


def test_classed_mode_valid_and_deterministic():
    cfg = wb.WordBankConfig(digit_word_probability=0.3,
                            terminal_punct_probability=0.2,
                            capitalize_probability=0.5)
    assert cfg.classed
    bank = wb.generate_bank(cfg, 2_000, rng=5)
    assert bank == wb.generate_bank(cfg, 2_000, rng=5)
    assert [v for w in bank for v in wb.validate_word(w)] == []
    assert any(any(c.isdigit() for c in w) for w in bank)
    assert any(w[0].isupper() for w in bank if w[0].isalpha())


def test_character_frequencies_match_weights():
    cfg = wb.WordBankConfig()
    bank = wb.generate_bank(cfg, 100_000, rng=11)
    text = "".join(bank)
    n = len(text)
    weights = cfg.char_weights
    total = sum(weights.values())
    counts = {c: 0 for c in cfg.alphabet}
    for ch in text:
        counts[ch] += 1
    for c in cfg.alphabet:
        p = weights[c] / total
        expected = n * p
        sigma = np.sqrt(n * p * (1 - p))
        assert abs(counts[c] - expected) <= 3 * sigma, (
            f"{c!r}: count {counts[c]} vs expected {expected:.1f} (3 sigma {3*sigma:.1f})"
        )


def test_word_lengths_respect_core_cap():
    cfg = wb.WordBankConfig(word_length_range=(1, 4))
    bank = wb.generate_bank(cfg, 3_000, rng=13)
    for w in bank:
        core = [c for c in w if c.isalnum()]
        assert len(core) <= 4
