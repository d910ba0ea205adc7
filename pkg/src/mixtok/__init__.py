"""Search for the language mixture that makes a byte-level BPE tokenizer compress best.

Small proxy tokenizers are trained on Dirichlet-sampled mixtures, a boosted-tree
regressor learns mixture -> compression, and a large candidate search picks the
mixture used for the full-scale tokenizer.
"""

from .bpe import SubwordTokenizer, pretokenize, train
from .config import DESK, LARGE, PipelineConfig, Scale
from .corpus import CorpusStore, ingest, load_manifest, materialize, split_corpus
from .errors import FleetBudgetExceeded, ValidationError
from .metrics import CompressionRecord, EvalReport, mape, nsl, spearman, weighted_compression
from .mixture import DirichletConfig, LanguageIndex, Mixture, sample_mixtures
from .regressor import BoostingConfig, RegressionModel, TrainingSet, fit

__version__ = "0.1.0"

__all__ = [
    "BoostingConfig", "CompressionRecord", "CorpusStore", "DESK", "DirichletConfig",
    "EvalReport", "FleetBudgetExceeded", "LanguageIndex", "Mixture", "LARGE",
    "PipelineConfig", "RegressionModel", "Scale", "SubwordTokenizer", "TrainingSet",
    "ValidationError", "fit", "ingest", "load_manifest", "mape", "materialize", "nsl",
    "pretokenize", "sample_mixtures", "spearman", "split_corpus", "train",
    "weighted_compression",
]
