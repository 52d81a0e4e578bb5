"""Switching-point aware positional encodings for code-mixed text classification.

A small trainable transformer classifier with five interchangeable positional
encoding schemes, built on an in-package reverse-mode autodiff core.
"""

__version__ = "0.1.0"

from .ablation import run_ablation
from .corpus import (
    LABELS,
    Sentence,
    SynthConfig,
    Token,
    Vocab,
    build_vocab,
    generate_synthetic,
    parse_corpus,
    serialize_corpus,
    sp_determined_label,
    split,
)
from .embeddings import SkipgramConfig, train_skipgram
from .errors import (
    CompatibilityError,
    ConfigError,
    DataError,
    LengthError,
    ParseError,
    ShapeError,
    SwitchPEError,
    UsageError,
    VocabError,
)
from .metrics import MetricsReport, compute_metrics
from .model import Model, ModelConfig, classify, load_checkpoint, save_checkpoint
from .posenc import PEScheme, parse_scheme
from .switchpoints import SPIVariant, detect_switch_points, spi
from .tensor import Graph, Tensor, backward, no_grad
from .training import RunConfig, config_from_dict, evaluate_model, train_run

__all__ = [
    "CompatibilityError",
    "ConfigError",
    "DataError",
    "Graph",
    "LABELS",
    "LengthError",
    "MetricsReport",
    "Model",
    "ModelConfig",
    "PEScheme",
    "ParseError",
    "RunConfig",
    "SPIVariant",
    "Sentence",
    "ShapeError",
    "SkipgramConfig",
    "SwitchPEError",
    "SynthConfig",
    "Tensor",
    "Token",
    "UsageError",
    "Vocab",
    "VocabError",
    "backward",
    "build_vocab",
    "classify",
    "compute_metrics",
    "config_from_dict",
    "detect_switch_points",
    "evaluate_model",
    "generate_synthetic",
    "load_checkpoint",
    "no_grad",
    "parse_corpus",
    "parse_scheme",
    "run_ablation",
    "save_checkpoint",
    "serialize_corpus",
    "sp_determined_label",
    "spi",
    "split",
    "train_run",
    "train_skipgram",
]
