"""Least-squares gradient boosting with leaf-wise regression trees.

Maps a mixture's weight vector to its measured compression. Trees grow best-first:
the leaf whose best split removes the most squared error is split next, until the
leaf budget is spent. Split structure is searched on a seeded row subsample, then
leaf values are refit on every fit row, which keeps fit-split MSE non-increasing
from one tree to the next.
"""

from __future__ import annotations

import csv
import heapq
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from .errors import ValidationError
from .metrics import EvalReport, evaluate_predictions
from .mixture import LanguageIndex, Mixture

log = logging.getLogger(__name__)

MODEL_VERSION = 1


@dataclass(frozen=True)
class BoostingConfig:
    n_trees: int = 400
    max_leaves: int = 16
    learning_rate: float = 0.05
    min_samples_per_leaf: int = 4
    subsample: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_leaves < 2 or self.min_samples_per_leaf < 1:
            raise ValidationError("n_trees >= 1, max_leaves >= 2, min_samples_per_leaf >= 1 required")
        if not 0 < self.learning_rate <= 1:
            raise ValidationError("learning_rate must be in (0, 1]")
        if not 0 < self.subsample <= 1:
            raise ValidationError("subsample must be in (0, 1]")


@dataclass
class TrainingSet:
    index: LanguageIndex
    features: np.ndarray
    targets: np.ndarray
    split: np.ndarray  # "fit" / "holdout"
    ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        self.split = np.asarray(self.split, dtype=object)
        n, k = self.features.shape
        if k != len(self.index) or self.targets.shape != (n,) or self.split.shape != (n,):
            raise ValidationError("training set arrays have inconsistent shapes")
        if n and (np.any(self.features < -1e-12)
                  or np.any(np.abs(self.features.sum(axis=1) - 1) > 1e-6)):
            raise ValidationError("feature rows must be simplex points")
        if np.any(~(self.targets > 0)):
            raise ValidationError("targets must be positive")
        if not self.ids:
            self.ids = [str(i) for i in range(n)]

    def part(self, name: str) -> "TrainingSet":
        m = self.split == name
        return TrainingSet(self.index, self.features[m], self.targets[m], self.split[m],
                           [i for i, keep in zip(self.ids, m) if keep])

    def __len__(self) -> int:
        return len(self.targets)

    @classmethod
    def from_csv(cls, path: str | Path, index: LanguageIndex | None = None,
                 split: np.ndarray | None = None) -> "TrainingSet":
        """Read records.csv: mixture weight columns `w:<tag>` and the `overall` NSL column."""
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValidationError(f"{path}: no records")
        tags = tuple(c[2:] for c in rows[0] if c.startswith("w:"))
        if index is None:
            index = LanguageIndex(tags)
        elif tuple(index) != tags:
            raise ValidationError(f"{path}: weight columns {tags} do not match {tuple(index)}")
        try:
            X = np.array([[float(r[f"w:{t}"]) for t in index] for r in rows])
            y = np.array([float(r["overall"]) for r in rows])
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"{path}: bad record ({exc})") from None
        ids = [r.get("mixture_id", str(i)) for i, r in enumerate(rows)]
        if split is None:
            split = np.array(["fit"] * len(rows), dtype=object)
        return cls(index, X / X.sum(axis=1, keepdims=True), y, split, ids)


@dataclass
class Tree:
    """Flat binary tree; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict_one(self, x: Sequence[float]) -> float:
        node = 0
        while self.feature[node] >= 0:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
        return float(self.value[node])

    def to_json(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"value": float(self.value[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "left": self.to_json(int(self.left[node])),
            "right": self.to_json(int(self.right[node])),
        }

    @classmethod
    def from_json(cls, obj: dict, k: int) -> "Tree":
        feature, threshold, left, right, value = [], [], [], [], []

        def walk(o) -> int:
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            if "value" in o:
                value[i] = float(o["value"])
                return i
            f = int(o["feature"])
            if not 0 <= f < k:
                raise ValidationError(f"tree node uses feature {f}, model has k={k}")
            feature[i] = f
            threshold[i] = float(o["threshold"])
            left[i] = walk(o["left"])
            right[i] = walk(o["right"])
            return i

        try:
            walk(obj)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed tree node ({exc})") from None
        return cls(np.array(feature, dtype=np.int32), np.array(threshold), np.array(left, dtype=np.int32),
                   np.array(right, dtype=np.int32), np.array(value))


def _best_split(X: np.ndarray, r: np.ndarray, rows: np.ndarray, min_leaf: int):
    """(gain, feature, threshold) of the best variance-reducing split of `rows`, or None."""
    n = len(rows)
    if n < 2 * min_leaf:
        return None
    total = r[rows].sum()
    base = total * total / n
    best = None
    for j in range(X.shape[1]):
        order = rows[np.argsort(X[rows, j], kind="mergesort")]
        xs = X[order, j]
        cs = np.cumsum(r[order])
        n_left = np.arange(1, n)
        s_left = cs[:-1]
        gain = s_left ** 2 / n_left + (total - s_left) ** 2 / (n - n_left) - base
        ok = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not ok.any():
            continue
        gain = np.where(ok, gain, -np.inf)
        p = int(np.argmax(gain))
        g = float(gain[p])
        if g > 1e-15 and (best is None or g > best[0]):
            lo, hi = xs[p], xs[p + 1]
            thr = 0.5 * (lo + hi)
            if not lo <= thr < hi:
                thr = lo
            best = (g, j, float(thr))
    return best


def _grow_tree(X: np.ndarray, r: np.ndarray, sample: np.ndarray, cfg: BoostingConfig) -> Tree:
    feature, threshold, left, right = [-1], [0.0], [-1], [-1]
    members = {0: sample}
    heap = []
    split = _best_split(X, r, sample, cfg.min_samples_per_leaf)
    if split:
        heapq.heappush(heap, (-split[0], 0, split))
    n_leaves = 1
    while heap and n_leaves < cfg.max_leaves:
        _, node, (_, j, thr) = heapq.heappop(heap)
        rows = members.pop(node)
        go_left = X[rows, j] <= thr
        feature[node], threshold[node] = j, thr
        for side, part in ((left, rows[go_left]), (right, rows[~go_left])):
            child = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            side[node] = child
            members[child] = part
            s = _best_split(X, r, part, cfg.min_samples_per_leaf)
            if s:
                heapq.heappush(heap, (-s[0], child, s))
        n_leaves += 1
    tree = Tree(np.array(feature, dtype=np.int32), np.array(threshold),
                np.array(left, dtype=np.int32), np.array(right, dtype=np.int32),
                np.zeros(len(feature)))
    # leaf values: mean residual over all fit rows reaching the leaf
    leaf_of = _route(tree, X)
    for node in range(len(feature)):
        if feature[node] < 0:
            tree.value[node] = r[leaf_of == node].mean()
    return tree


def _route(tree: Tree, X: np.ndarray) -> np.ndarray:
    node = np.zeros(len(X), dtype=np.int32)
    active = tree.feature[node] >= 0
    while active.any():
        idx = np.flatnonzero(active)
        nd = node[idx]
        go_left = X[idx, tree.feature[nd]] <= tree.threshold[nd]
        node[idx] = np.where(go_left, tree.left[nd], tree.right[nd])
        active = tree.feature[node] >= 0
    return node


@numba.njit(cache=True, nogil=True)
def _predict_kernel(XT, feature, threshold, children, depth, value, base, lr, out):
    # Level-synchronous walk over a block of rows: leaves loop back to themselves, so
    # every row takes exactly depth[t] steps and the inner loop has no data-dependent exit.
    n = XT.shape[1]
    block = 256
    acc = np.zeros(block)
    nodes = np.zeros(block, np.int32)
    for s in range(0, n, block):
        m = min(n, s + block) - s
        acc[:] = 0.0
        for t in range(feature.shape[0]):
            ft = feature[t]
            tt = threshold[t]
            ch = children[t]
            vt = value[t]
            nodes[:m] = 0
            for _ in range(depth[t]):
                for j in range(m):
                    nd = nodes[j]
                    nodes[j] = ch[2 * nd + np.int32(XT[ft[nd], s + j] > tt[nd])]
            for j in range(m):
                acc[j] += vt[nodes[j]]
        for j in range(m):
            out[s + j] = base + lr * acc[j]


def _depths(tree: Tree) -> np.ndarray:
    d = np.zeros(len(tree.feature), dtype=np.int64)
    for node in range(len(tree.feature)):
        if tree.feature[node] >= 0:
            d[tree.left[node]] = d[tree.right[node]] = d[node] + 1
    return d


@dataclass
class RegressionModel:
    k: int
    base_prediction: float
    learning_rate: float
    trees: list[Tree]
    config: BoostingConfig
    degenerate: bool = False
    _packed: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def _pack(self):
        if self._packed is None:
            width = max(len(t.feature) for t in self.trees)
            T = len(self.trees)
            feature = np.zeros((T, width), dtype=np.int32)
            threshold = np.full((T, width), np.inf)
            nodes = np.arange(width, dtype=np.int32)
            children = np.repeat(nodes, 2)[None, :].repeat(T, axis=0)
            value = np.zeros((T, width))
            depth = np.zeros(T, dtype=np.int64)
            for i, t in enumerate(self.trees):
                m = len(t.feature)
                inner = np.flatnonzero(t.feature >= 0)
                feature[i, inner] = t.feature[inner]
                threshold[i, inner] = t.threshold[inner]
                children[i, 2 * inner] = t.left[inner]
                children[i, 2 * inner + 1] = t.right[inner]
                value[i, :m] = t.value
                depth[i] = _depths(t).max()
            self._packed = (feature, threshold, np.ascontiguousarray(children), depth, value)
        return self._packed

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.k:
            raise ValidationError(f"expected rows of {self.k} weights, got shape {X.shape}")
        out = np.empty(len(X))
        if not self.trees:
            out.fill(self.base_prediction)
            return out
        _predict_kernel(np.ascontiguousarray(X.T), *self._pack(), self.base_prediction,
                        self.learning_rate, out)
        return out

    def predict(self, w: Mixture | Sequence[float]) -> float:
        x = w.weights if isinstance(w, Mixture) else np.asarray(w, dtype=np.float64)
        if x.shape != (self.k,):
            raise ValidationError(f"mixture has {x.size} weights, model expects {self.k}")
        return float(self.predict_batch(x[None, :])[0])

    def staged_predict(self, X: np.ndarray):
        """Predictions after 0, 1, ..., n_trees trees (same arithmetic as predict)."""
        acc = np.zeros(len(X))
        yield self.base_prediction + self.learning_rate * acc
        for t in self.trees:
            acc = acc + t.value[_route(t, X)]
            yield self.base_prediction + self.learning_rate * acc

    def to_json(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "k": self.k,
            "hyperparameters": asdict(self.config),
            "base_prediction": self.base_prediction,
            "learning_rate": self.learning_rate,
            "degenerate": self.degenerate,
            "trees": [t.to_json() for t in self.trees],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def from_json(cls, obj: dict, expected_k: int | None = None) -> "RegressionModel":
        if not isinstance(obj, dict):
            raise ValidationError("model file: top level must be an object")
        if obj.get("version") != MODEL_VERSION:
            raise ValidationError(f"model file: unsupported version {obj.get('version')!r}")
        try:
            k = int(obj["k"])
            cfg = BoostingConfig(**obj["hyperparameters"])
            base = float(obj["base_prediction"])
            lr = float(obj["learning_rate"])
            trees = [Tree.from_json(t, k) for t in obj["trees"]]
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"model file: missing or malformed field ({exc})") from None
        if expected_k is not None and k != expected_k:
            raise ValidationError(f"model was fit on k={k} languages, current index has {expected_k}")
        return cls(k, base, lr, trees, cfg, bool(obj.get("degenerate", False)))

    @classmethod
    def load(cls, path: str | Path, expected_k: int | None = None) -> "RegressionModel":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_json(obj, expected_k)


def fit(data: TrainingSet, cfg: BoostingConfig = BoostingConfig()) -> RegressionModel:
    fit_set = data.part("fit") if np.any(data.split != "fit") else data
    X, y = fit_set.features, fit_set.targets
    n, k = X.shape
    need = max(2 * cfg.min_samples_per_leaf, 16)
    if n < need:
        raise ValidationError(f"fit split has {n} rows; at least {need} required")
    base = float(y.mean())
    if np.all(y == y[0]):
        log.warning("all fit targets equal; model reduces to the constant %g", base)
        return RegressionModel(k, float(y[0]), cfg.learning_rate, [], cfg, degenerate=True)

    rng = np.random.default_rng(cfg.seed)
    n_sub = min(n, max(int(round(cfg.subsample * n)), 2 * cfg.min_samples_per_leaf))
    acc = np.zeros(n)
    trees = []
    for _ in range(cfg.n_trees):
        pred = base + cfg.learning_rate * acc
        resid = y - pred
        sample = np.sort(rng.choice(n, size=n_sub, replace=False)) if n_sub < n else np.arange(n)
        tree = _grow_tree(X, resid, sample, cfg)
        trees.append(tree)
        acc = acc + tree.value[_route(tree, X)]
    return RegressionModel(k, base, cfg.learning_rate, trees, cfg)


def evaluate(model: RegressionModel, holdout: TrainingSet) -> EvalReport:
    if len(holdout) < 2:
        raise ValidationError("holdout needs at least two rows")
    return evaluate_predictions(model.predict_batch(holdout.features), holdout.targets)
