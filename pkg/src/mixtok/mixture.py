"""Points on the language-mixture simplex: construction, Dirichlet sampling, entropy."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import ValidationError

SUM_TOL = 1e-9
# Candidate streams are cut into fixed blocks; block b is drawn with seed + b so the
# stream content never depends on how many workers consume it.
CANDIDATE_BLOCK = 65_536
ALPHA_FLOOR = 1e-6


@dataclass(frozen=True)
class LanguageIndex:
    tags: tuple[str, ...]

    def __post_init__(self):
        tags = tuple(self.tags)
        if not tags:
            raise ValidationError("language index is empty")
        if len(set(tags)) != len(tags):
            dup = sorted({t for t in tags if tags.count(t) > 1})
            raise ValidationError(f"duplicate language tags: {dup}")
        object.__setattr__(self, "tags", tags)

    def __len__(self) -> int:
        return len(self.tags)

    def __iter__(self):
        return iter(self.tags)

    def position(self, tag: str) -> int:
        try:
            return self.tags.index(tag)
        except ValueError:
            raise ValidationError(f"unknown language tag {tag!r}") from None


@dataclass(frozen=True)
class Mixture:
    """Immutable weight vector over a LanguageIndex; renormalized on construction."""

    index: LanguageIndex
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).copy()
        if w.ndim != 1 or w.shape[0] != len(self.index):
            raise ValidationError(
                f"mixture has {w.size} weights for {len(self.index)} languages")
        if not np.all(np.isfinite(w)):
            raise ValidationError("mixture weights must be finite")
        if np.any(w < -1e-12):
            raise ValidationError(f"negative mixture weight: {w.min()}")
        w = np.clip(w, 0.0, None)
        total = w.sum()
        if total <= 0:
            raise ValidationError("mixture weights sum to zero")
        w /= total
        assert abs(w.sum() - 1.0) <= SUM_TOL and np.all(w >= 0)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, index: LanguageIndex) -> "Mixture":
        return cls(index, np.full(len(index), 1.0 / len(index)))

    @property
    def k(self) -> int:
        return len(self.index)

    def as_dict(self, decimals: int | None = 6) -> dict[str, float]:
        if decimals is None:
            return {t: float(x) for t, x in zip(self.index, self.weights)}
        return {t: round(float(x), decimals) for t, x in zip(self.index, self.weights)}

    def digest(self) -> str:
        """Short stable id; weights are rounded to 12 decimals so float noise doesn't split ids."""
        payload = json.dumps(
            [list(self.index.tags), [round(float(x), 12) for x in self.weights]])
        return hashlib.sha1(payload.encode()).hexdigest()[:16]

    def __eq__(self, other):
        if not isinstance(other, Mixture):
            return NotImplemented
        return self.index == other.index and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash((self.index, self.weights.tobytes()))


@dataclass(frozen=True)
class DirichletConfig:
    base_concentration: float = 1.0
    size_weighting: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.base_concentration > 0:
            raise ValidationError("base_concentration must be positive")


def _check_sizes(index: LanguageIndex, sizes: Sequence[float]) -> np.ndarray:
    s = np.asarray(sizes, dtype=np.float64)
    if s.shape != (len(index),):
        raise ValidationError(f"expected {len(index)} sizes, got {s.size}")
    if np.any(~np.isfinite(s)) or np.any(s <= 0):
        bad = [t for t, x in zip(index, s) if not x > 0]
        raise ValidationError(f"language sizes must be positive; bad entries for {bad}")
    return s


def dirichlet_alpha(index: LanguageIndex, sizes: Sequence[float], cfg: DirichletConfig) -> np.ndarray:
    """Concentrations summing to base_concentration * k, proportional to sizes if requested."""
    s = _check_sizes(index, sizes)
    k = len(index)
    total = cfg.base_concentration * k
    if not cfg.size_weighting:
        return np.full(k, cfg.base_concentration)
    alpha = total * s / s.sum()
    return np.maximum(alpha, ALPHA_FLOOR * total)


def _dirichlet_rows(rng: np.random.Generator, alpha: np.ndarray) -> np.ndarray:
    """Gamma-normalisation sampler; alpha is (k,) or (n, k)."""
    g = rng.standard_gamma(alpha)
    sums = g.sum(axis=-1, keepdims=True)
    dead = sums[..., 0] <= 0
    if np.any(dead):
        # every gamma underflowed (tiny alphas): the limit is a vertex chosen ∝ alpha
        a = np.broadcast_to(alpha, g.shape)[dead]
        p = a / a.sum(axis=1, keepdims=True)
        picks = np.array([rng.choice(p.shape[1], p=row) for row in p])
        g[dead] = 0.0
        g[np.flatnonzero(dead), picks] = 1.0
        sums = g.sum(axis=-1, keepdims=True)
    return g / sums


def sample_mixtures(index: LanguageIndex, sizes: Sequence[float], cfg: DirichletConfig,
                    n: int) -> list[Mixture]:
    if n < 1:
        raise ValidationError("n must be at least 1")
    alpha = dirichlet_alpha(index, sizes, cfg)
    rng = np.random.default_rng(cfg.seed)
    rows = _dirichlet_rows(rng, np.broadcast_to(alpha, (n, len(index))))
    return [Mixture(index, r) for r in rows]


def candidate_block(index: LanguageIndex, sizes: Sequence[float], seed: int, block: int,
                    count: int = CANDIDATE_BLOCK) -> np.ndarray:
    """Rows of candidate block `block`: even rows size-weighted Dirichlet, odd rows flat Dirichlet."""
    k = len(index)
    alphas = np.stack([
        dirichlet_alpha(index, sizes, DirichletConfig(1.0, True)),
        np.ones(k),
    ])
    rng = np.random.default_rng(seed + block)
    return _dirichlet_rows(rng, alphas[np.arange(count) % 2])


def candidate_blocks(index: LanguageIndex, sizes: Sequence[float], n: int, seed: int,
                     blocks: Sequence[int] | None = None) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (block number, weight rows) covering the first n candidates of the stream."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    _check_sizes(index, sizes)
    n_blocks = math.ceil(n / CANDIDATE_BLOCK)
    for b in (range(n_blocks) if blocks is None else blocks):
        count = min(CANDIDATE_BLOCK, n - b * CANDIDATE_BLOCK)
        yield b, candidate_block(index, sizes, seed, b, count)


def generate_candidates(index: LanguageIndex, sizes: Sequence[float], n: int,
                        seed: int) -> Iterator[Mixture]:
    for _, rows in candidate_blocks(index, sizes, n, seed):
        for r in rows:
            yield Mixture(index, r)


def entropy_of(weights: np.ndarray) -> float:
    w = np.asarray(weights, dtype=np.float64)
    k = w.shape[-1]
    if k == 1:
        return 1.0
    nz = w[w > 0]
    h = -float(np.sum(nz * np.log(nz)))
    return min(max(h / math.log(k), 0.0), 1.0)


def mixture_entropy(w: Mixture) -> float:
    """Shannon entropy normalised by log(k): 1 for the uniform mixture, 0 for a single language."""
    return entropy_of(w.weights)


def mixture_from_dict(obj: Mapping[str, float], index: LanguageIndex) -> Mixture:
    """Languages missing from `obj` get weight 0; unknown tags are rejected."""
    w = np.zeros(len(index))
    for tag, val in obj.items():
        try:
            w[index.position(tag)] = float(val)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"weight for {tag!r} is not a number: {val!r}") from None
    return Mixture(index, w)


def load_mixture(path: str | Path, index: LanguageIndex) -> Mixture:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: expected a JSON object of language -> weight")
    return mixture_from_dict(obj, index)


def save_mixture(w: Mixture, path: str | Path) -> None:
    Path(path).write_text(json.dumps(w.as_dict(), indent=2) + "\n")
