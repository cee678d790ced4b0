import numpy as np
import pytest

from cursive import dataset as ds
from cursive import synth
from cursive import wordbank as wb
from cursive.model import TINY, ModelConfig
from cursive.tokenizer import TokenizerConfig
from cursive.training import (
    Checkpoint, TrainConfig, load_checkpoint, save_checkpoint, train,
)


@pytest.fixture(scope="module")
def toy_corpus():
    bank = wb.generate_bank(wb.WordBankConfig(word_length_range=(1, 3)), 12, rng=31)
    records = synth.render_bank(bank, seed=31)
    cfg = ds.DatasetConfig(chunk_size=8)
    tok = TokenizerConfig(theta_bins=8, r_bins=4, r_max=40.0)
    seqs = ds.assemble_sequences(records, 6, tok, cfg, seed=31)
    return tok, seqs


def micro_model(tok):
    return ModelConfig(n_blocks=1, n_heads_self=2, n_heads_cross=2, d_model=16,
                       d_context=16, max_stroke_context=256, max_ascii_context=64,
                       stroke_vocab=tok.vocab_size, ascii_vocab=72)


def test_train_is_deterministic(toy_corpus, tmp_path):
    tok, seqs = toy_corpus
    mc = micro_model(tok)
    tc = TrainConfig(lr0=1e-3, lr_step_every=100, total_steps=12, batch_size=4,
                     seed=1337, log_every=4)
    losses_a, losses_b = [], []
    train(seqs, mc, tc, tok.pad_id, on_step=lambda s, v: losses_a.append(v))
    train(seqs, mc, tc, tok.pad_id, on_step=lambda s, v: losses_b.append(v))
    assert losses_a == losses_b


def test_checkpoint_roundtrip_and_resume_bitwise(toy_corpus, tmp_path):
    tok, seqs = toy_corpus
    mc = micro_model(tok)
    full = TrainConfig(lr0=1e-3, lr_step_every=100, total_steps=10, batch_size=4)
    half = TrainConfig(lr0=1e-3, lr_step_every=100, total_steps=5, batch_size=4)

    straight = train(seqs, mc, full, tok.pad_id)

    first = train(seqs, mc, half, tok.pad_id, checkpoint_dir=tmp_path)
    loaded = load_checkpoint(tmp_path / "final.npz")
    assert loaded.step == 5
    assert loaded.model_cfg == mc
    for k in first.params:
        np.testing.assert_array_equal(loaded.params[k], first.params[k])

    resumed = train(seqs, mc, full, tok.pad_id,
                    resume=Checkpoint(mc, full, loaded.params, loaded.opt_m,
                                      loaded.opt_v, loaded.step, loaded.pad_id))
    for k in straight.params:
        np.testing.assert_array_equal(resumed.params[k], straight.params[k])


def test_loss_log_written(toy_corpus, tmp_path):
    tok, seqs = toy_corpus
    mc = micro_model(tok)
    tc = TrainConfig(lr0=1e-3, lr_step_every=100, total_steps=8, batch_size=4,
                     log_every=2, eval_every=4, eval_batches=1)
    train(seqs, mc, tc, tok.pad_id, checkpoint_dir=tmp_path, test_corpus=seqs)
    lines = (tmp_path / "loss.csv").read_text().strip().splitlines()
    assert lines[0] == "step,lr,train_loss,test_loss"
    assert len(lines) == 1 + 4
    row = lines[2].split(",")
    assert int(row[0]) == 4 and row[3] != ""


def test_train_rejects_overlong_sequence(toy_corpus):
    tok, seqs = toy_corpus
    mc = micro_model(tok)
    bad = ds.TrainingSequence(text="x", stream=np.zeros(500, dtype=np.int64),
                              ascii_ids=np.array([5]))
    with pytest.raises(ValueError):
        train(seqs + [bad], mc, TrainConfig(total_steps=1), tok.pad_id)


def test_train_rejects_empty_corpus(toy_corpus):
    tok, _ = toy_corpus
    with pytest.raises(ValueError):
        train([], micro_model(tok), TrainConfig(total_steps=1), tok.pad_id)


def test_stop_loss_halts_early(toy_corpus):
    tok, seqs = toy_corpus
    mc = micro_model(tok)
    tc = TrainConfig(lr0=1e-3, lr_step_every=1000, total_steps=1000, batch_size=4,
                     stop_loss=1e9)
    ck = train(seqs, mc, tc, tok.pad_id)
    assert ck.step == 1
