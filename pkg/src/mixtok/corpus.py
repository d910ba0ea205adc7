"""Language-tagged line corpora: ingestion, train/test split, byte-budgeted subsets."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .mixture import LanguageIndex, Mixture
from .seeding import derive_seed

log = logging.getLogger(__name__)

MIN_TEST_FRACTION = 0.0005
MAX_TEST_FRACTION = 0.01
SUBSET_TOLERANCE = 0.02


@dataclass
class SkippedLine:
    path: str
    line: int
    reason: str


@dataclass
class CorpusStore:
    """Documents per language (positions follow `index`), plus an optional split.

    `is_test[i][j]` tells whether document j of language i is held out. Before
    split_corpus runs, `is_test` is None and nothing may be materialized.
    """

    index: LanguageIndex
    docs: list[list[str]]
    doc_bytes: list[np.ndarray]
    paths: list[str]
    checksum: str
    skipped: list[SkippedLine] = field(default_factory=list)
    is_test: list[np.ndarray] | None = None
    split_seed: int | None = None
    test_fraction: float | None = None

    @property
    def sizes(self) -> np.ndarray:
        """Total UTF-8 bytes per language."""
        return np.array([b.sum() for b in self.doc_bytes], dtype=np.float64)

    @property
    def n_documents(self) -> int:
        return sum(len(d) for d in self.docs)

    def _require_split(self) -> list[np.ndarray]:
        if self.is_test is None:
            raise ValidationError("corpus has no train/test split yet")
        return self.is_test

    def train_ids(self, lang: int) -> np.ndarray:
        return np.flatnonzero(~self._require_split()[lang])

    def test_ids(self, lang: int) -> np.ndarray:
        return np.flatnonzero(self._require_split()[lang])

    def train_sizes(self) -> np.ndarray:
        return np.array([self.doc_bytes[i][self.train_ids(i)].sum() for i in range(len(self.index))],
                        dtype=np.float64)

    def test_docs(self, lang: int) -> list[str]:
        docs = self.docs[lang]
        return [docs[j] for j in self.test_ids(lang)]

    def test_weights(self) -> dict[str, float]:
        """Byte share of each language within the held-out split."""
        b = np.array([self.doc_bytes[i][self.test_ids(i)].sum() for i in range(len(self.index))],
                     dtype=np.float64)
        return {t: float(x) for t, x in zip(self.index, b / b.sum())}

    def manifest(self) -> dict:
        return {
            "languages": [
                {"tag": t, "path": p, "documents": len(d), "bytes": int(b.sum())}
                for t, p, d, b in zip(self.index, self.paths, self.docs, self.doc_bytes)
            ],
            "split": None if self.is_test is None else {
                "seed": self.split_seed, "test_fraction": self.test_fraction},
            "checksum": self.checksum,
        }

    def save_manifest(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.manifest(), indent=2) + "\n")


def _read_documents(path: Path, skipped: list[SkippedLine]) -> tuple[list[str], bytes]:
    raw = path.read_bytes()
    docs = []
    for lineno, line in enumerate(raw.split(b"\n"), start=1):
        line = line.rstrip(b"\r")
        if not line.strip():
            continue
        try:
            docs.append(line.decode("utf-8"))
        except UnicodeDecodeError as exc:
            skipped.append(SkippedLine(str(path), lineno, f"invalid UTF-8: {exc.reason}"))
    return docs, raw


def ingest(paths: Mapping[str, str | Path] | Sequence[tuple[str, str | Path]],
           index: LanguageIndex) -> CorpusStore:
    """Load one newline-delimited UTF-8 file per language."""
    pairs = list(paths.items()) if isinstance(paths, Mapping) else list(paths)
    by_tag: dict[str, Path] = {}
    for tag, p in pairs:
        if tag not in index.tags:
            raise ValidationError(f"file {p} is tagged {tag!r}, which is not in the language index")
        if tag in by_tag:
            raise ValidationError(f"language {tag!r} has more than one file")
        by_tag[tag] = Path(p)
    missing = [t for t in index if t not in by_tag]
    if missing:
        raise ValidationError(f"no file for languages {missing}")

    skipped: list[SkippedLine] = []
    docs, sizes, digest = [], [], hashlib.sha256()
    for tag in index:
        d, raw = _read_documents(by_tag[tag], skipped)
        docs.append(d)
        sizes.append(np.fromiter((len(x.encode("utf-8")) for x in d), dtype=np.int64, count=len(d)))
        digest.update(tag.encode() + b"\0" + hashlib.sha256(raw).digest())
    for s in skipped:
        log.warning("skipped %s:%d (%s)", s.path, s.line, s.reason)
    return CorpusStore(index, docs, sizes, [str(by_tag[t]) for t in index],
                       digest.hexdigest(), skipped)


def split_corpus(store: CorpusStore, test_fraction: float, seed: int) -> CorpusStore:
    """Hold out about `test_fraction` of each language's bytes, whole documents only."""
    if not MIN_TEST_FRACTION <= test_fraction <= MAX_TEST_FRACTION:
        raise ValidationError(
            f"test_fraction must lie in [{MIN_TEST_FRACTION}, {MAX_TEST_FRACTION}], got {test_fraction}")
    masks = []
    for i, tag in enumerate(store.index):
        sizes = store.doc_bytes[i]
        n = len(sizes)
        if n < 2:
            raise ValidationError(f"language {tag!r} has {n} document(s); cannot split")
        order = np.random.default_rng(derive_seed(seed, "split", tag)).permutation(n)
        cum = np.cumsum(sizes[order])
        target = test_fraction * cum[-1]
        # m test documents, 1 <= m <= n-1, whose byte total is nearest the target
        m = int(np.argmin(np.abs(cum[: n - 1] - target))) + 1
        mask = np.zeros(n, dtype=bool)
        mask[order[:m]] = True
        masks.append(mask)
    return CorpusStore(store.index, store.docs, store.doc_bytes, store.paths, store.checksum,
                       store.skipped, masks, seed, test_fraction)


def load_manifest(path: str | Path) -> CorpusStore:
    """Re-ingest the files listed in a manifest and re-apply its split."""
    path = Path(path)
    try:
        m = json.loads(path.read_text())
        langs = m["languages"]
        index = LanguageIndex(tuple(x["tag"] for x in langs))
        files = [(x["tag"], path.parent / x["path"]) for x in langs]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed corpus manifest ({exc})") from None
    store = ingest(files, index)
    if m.get("checksum") and m["checksum"] != store.checksum:
        raise ValidationError(f"{path}: corpus files changed since the manifest was written")
    store.paths = [x["path"] for x in langs]
    if m.get("split"):
        store = split_corpus(store, m["split"]["test_fraction"], m["split"]["seed"])
    return store


@dataclass
class MaterializedSubset:
    mixture: Mixture
    budget_bytes: int
    refs: list[tuple[int, int]]
    targets: np.ndarray
    realized: np.ndarray
    shortfall: dict[str, int] = field(default_factory=dict)
    empty_languages: list[str] = field(default_factory=list)

    @property
    def total_bytes(self) -> int:
        return int(self.realized.sum())

    def texts(self, store: CorpusStore) -> Iterator[str]:
        for lang, j in self.refs:
            yield store.docs[lang][j]


def materialize(store: CorpusStore, w: Mixture, budget_bytes: int, seed: int) -> MaterializedSubset:
    """Draw whole training documents per language until each share of the budget is met.

    The last document is taken only if it lands closer to the target than stopping
    short; a language whose target is smaller than all of its documents gets none.
    """
    if budget_bytes < 1:
        raise ValidationError("budget_bytes must be positive")
    if w.index != store.index:
        raise ValidationError("mixture and corpus use different language indexes")
    k = len(store.index)
    targets = w.weights * budget_bytes
    realized = np.zeros(k, dtype=np.int64)
    refs: list[tuple[int, int]] = []
    shortfall: dict[str, int] = {}
    empty: list[str] = []
    for i, tag in enumerate(store.index):
        target = targets[i]
        if target <= 0:
            continue
        ids = store.train_ids(i)
        sizes = store.doc_bytes[i][ids]
        if len(ids) == 0 or target < sizes.min():
            empty.append(tag)
            continue
        order = np.random.default_rng(derive_seed(seed, "materialize", tag)).permutation(len(ids))
        got = 0
        for j in order:
            size = int(sizes[j])
            if got + size > target and got + size - target >= target - got:
                break
            refs.append((i, int(ids[j])))
            got += size
            if got >= target:
                break
        realized[i] = got
        if target - got > max(sizes.max(), SUBSET_TOLERANCE * target):
            shortfall[tag] = int(math.ceil(target - got))
            log.warning("language %s: %d bytes short of its %d-byte target",
                        tag, shortfall[tag], int(target))
    return MaterializedSubset(w, int(budget_bytes), refs, targets, realized, shortfall, empty)
