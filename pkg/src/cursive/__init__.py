"""Cursive handwriting synthesis toolkit.

Pipeline: pen strokes -> polar offsets -> binned two-token-per-stroke
streams -> a small cross-attention GPT -> grammar-constrained sampling back
to strokes, plus the data tooling (word bank, synthetic corpus, augmentation)
needed to run the whole loop without collected data.
"""

from .dataset import (
    AugmentationParams, DatasetConfig, SampleRecord, TrainingSequence,
    assemble_sequences, augment, build_corpus, downsample, export_json,
    ingest_json, load_corpus, split,
)
from .geometry import (
    apply_affine, cartesian_to_polar, coords_to_offsets, offsets_to_coords,
    polar_to_cartesian,
)
from .model import ModelConfig, forward, grad_check, init_params, loss, param_count
from .sampler import GeneratedPage, SamplingConfig, regenerate, render_svg, sample
from .tokenizer import TokenizerConfig, decode, encode, validate_grammar, vocab_size
from .training import Checkpoint, TrainConfig, load_checkpoint, lr_at, save_checkpoint, train
from .wordbank import WordBankConfig, generate_bank, generate_word, validate_word

__version__ = "0.1.0"
