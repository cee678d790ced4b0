"""Project-wide configuration: one JSON document wiring every stage together.

The tokenizer's ``r_max`` may be null in the file, meaning "derive it from
the training pool when the corpus is built"; everything else is concrete.
Artifacts embed ``ProjectConfig.hash()`` so mismatched configs are caught
when artifacts are combined.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .asciitok import AsciiTokenizer
from .dataset import DatasetConfig
from .model import ModelConfig
from .tokenizer import TokenizerConfig
from .training import TrainConfig
from .util import config_hash
from .wordbank import WordBankConfig


class ConfigError(ValueError):
    pass


@dataclass
class ProjectConfig:
    tokenizer: dict = field(default_factory=lambda: {"theta_bins": 220, "r_bins": 150,
                                                     "r_max": None})
    wordbank: WordBankConfig = field(default_factory=WordBankConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        self.validate()

    @property
    def theta_bins(self) -> int:
        return int(self.tokenizer.get("theta_bins", 220))

    @property
    def r_bins(self) -> int:
        return int(self.tokenizer.get("r_bins", 150))

    def tokenizer_config(self) -> TokenizerConfig | None:
        """Concrete codec config, or None while ``r_max`` is underived."""
        if self.tokenizer.get("r_max") is None:
            return None
        return TokenizerConfig.from_dict(self.tokenizer)

    def validate(self):
        vocab = self.theta_bins + 2 * self.r_bins + 3
        if self.model.stroke_vocab != vocab:
            raise ConfigError(
                f"model.stroke_vocab {self.model.stroke_vocab} != tokenizer vocabulary {vocab}")
        ascii_vocab = AsciiTokenizer(self.wordbank.alphabet).vocab_size
        if self.model.ascii_vocab != ascii_vocab:
            raise ConfigError(
                f"model.ascii_vocab {self.model.ascii_vocab} != alphabet vocabulary {ascii_vocab}")
        if self.dataset.max_context > self.model.max_stroke_context:
            raise ConfigError("dataset.max_context exceeds model.max_stroke_context")
        if self.dataset.max_ascii > self.model.max_ascii_context:
            raise ConfigError("dataset.max_ascii exceeds model.max_ascii_context")

    def to_dict(self) -> dict:
        return {
            "tokenizer": dict(self.tokenizer),
            "wordbank": self.wordbank.to_dict(),
            "dataset": self.dataset.to_dict(),
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProjectConfig":
        try:
            return cls(
                tokenizer=dict(d.get("tokenizer", {"theta_bins": 220, "r_bins": 150,
                                                   "r_max": None})),
                wordbank=WordBankConfig.from_dict(d["wordbank"]) if "wordbank" in d
                else WordBankConfig(),
                dataset=DatasetConfig.from_dict(d["dataset"]) if "dataset" in d
                else DatasetConfig(),
                model=ModelConfig.from_dict(d["model"]) if "model" in d else ModelConfig(),
                train=TrainConfig.from_dict(d["train"]) if "train" in d else TrainConfig(),
            )
        except (TypeError, KeyError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"bad project config: {e}") from e

    @classmethod
    def load(cls, path) -> "ProjectConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read project config {path}: {e}") from e
        return cls.from_dict(doc)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    def hash(self) -> str:
        return config_hash(self.to_dict())
