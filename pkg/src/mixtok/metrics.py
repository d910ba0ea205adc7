"""Compression (NSL) and the evaluation statistics used throughout: MAPE, Spearman rho."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .bpe import SubwordTokenizer
from .errors import ValidationError
from .mixture import Mixture


def token_total(tok: SubwordTokenizer, docs: Sequence[str]) -> int:
    return sum(tok.count_tokens(d) for d in docs)


def nsl(target: SubwordTokenizer, reference: SubwordTokenizer, test_docs: Sequence[str],
        reference_tokens: int | None = None) -> float:
    """Total target tokens over total reference tokens on the same documents.

    `reference_tokens` lets callers reuse a precomputed reference total.
    """
    if not test_docs:
        raise ValidationError("nsl needs at least one test document")
    ref = token_total(reference, test_docs) if reference_tokens is None else reference_tokens
    if ref <= 0:
        raise ValidationError("reference tokenizer produced no tokens on the test documents")
    return token_total(target, test_docs) / ref


def weighted_compression(per_language: Mapping[str, float], test_weights: Mapping[str, float]) -> float:
    if set(per_language) != set(test_weights):
        raise ValidationError(
            f"language keys differ: {sorted(set(per_language) ^ set(test_weights))}")
    w = np.array([test_weights[t] for t in per_language], dtype=np.float64)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValidationError("test weights must be nonnegative and sum to 1")
    return float(sum(test_weights[t] * v for t, v in per_language.items()))


def mape(predicted: Sequence[float], actual: Sequence[float]) -> float:
    """Mean absolute percentage error, in percent."""
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape or p.ndim != 1:
        raise ValidationError(f"length mismatch: {p.size} predictions vs {a.size} actuals")
    if p.size == 0:
        raise ValidationError("mape of empty vectors")
    if np.any(a == 0):
        raise ValidationError("mape undefined: an actual value is zero")
    return float(100.0 * np.mean(np.abs(p - a) / np.abs(a)))


def average_ranks(x: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(x.size, dtype=np.float64)
    # boundaries of runs of equal values in sorted order
    edges = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1], True])
    for lo, hi in zip(edges[:-1], edges[1:]):
        ranks[order[lo:hi]] = 0.5 * (lo + 1 + hi)
    return ranks


class UndefinedCorrelation(ValidationError):
    pass


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValidationError("spearman needs at least two points")
    rx = average_ranks(x)
    ry = average_ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    sx = math.sqrt(float(rx @ rx))
    sy = math.sqrt(float(ry @ ry))
    if sx == 0 or sy == 0:
        raise UndefinedCorrelation("spearman undefined: one input has all-equal values")
    return float(np.clip((rx @ ry) / (sx * sy), -1.0, 1.0))


@dataclass
class CompressionRecord:
    mixture: Mixture
    scale: tuple[int, int]
    per_language: dict[str, float]
    overall: float
    reference_id: str
    mixture_id: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(not v > 0 for v in self.per_language.values()):
            raise ValidationError("per-language NSL must be positive")
        if not self.mixture_id:
            self.mixture_id = self.mixture.digest()

    def to_json(self) -> dict:
        return {
            "mixture_id": self.mixture_id,
            "mixture": self.mixture.as_dict(),
            "scale": {"bytes": self.scale[0], "vocab_size": self.scale[1]},
            "per_language": self.per_language,
            "overall": self.overall,
            "reference_id": self.reference_id,
            **self.extra,
        }


@dataclass
class EvalReport:
    mape: float
    spearman: float
    n_points: int

    def to_json(self) -> dict:
        return {"mape": self.mape, "spearman": self.spearman, "n_points": self.n_points}

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")


def evaluate_predictions(predicted: Sequence[float], actual: Sequence[float]) -> EvalReport:
    return EvalReport(mape(predicted, actual), spearman(predicted, actual), len(actual))
