"""The four-stage mixture search and its analyses.

sample mixtures -> train one proxy tokenizer per mixture -> fit compression
regressor -> scan candidate mixtures for the lowest predicted compression.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import bpe
from .config import ADAPTMIX_ITERATIONS, DEFAULT_HARDWARE, PipelineConfig, Scale
from .corpus import CorpusStore, load_manifest, materialize, split_corpus
from .errors import FleetBudgetExceeded, ValidationError
from .metrics import (CompressionRecord, EvalReport, UndefinedCorrelation, nsl, spearman,
                      token_total, weighted_compression)
from .mixture import (CANDIDATE_BLOCK, LanguageIndex, Mixture, candidate_blocks,
                      mixture_entropy, sample_mixtures)
from .regressor import RegressionModel, TrainingSet, evaluate, fit
from .seeding import derive_seed

log = logging.getLogger(__name__)

RECORDS = "records.csv"
FAILURES = "failures.json"
MODEL = "model.json"
REPORT = "eval_report.json"
SEARCH = "search_result.json"


def load_corpus(cfg: PipelineConfig) -> CorpusStore:
    if not cfg.corpus:
        raise ValidationError("no corpus manifest configured (--corpus)")
    store = load_manifest(cfg.corpus)
    if cfg.languages and tuple(cfg.languages) != store.index.tags:
        raise ValidationError(
            f"configured languages {cfg.languages} differ from the manifest's {store.index.tags}")
    if store.is_test is None:
        store = split_corpus(store, cfg.test_fraction, derive_seed(cfg.seed, "split"))
    return store


# ---------------------------------------------------------------- evaluation

class Evaluator:
    """Scores tokenizers on the held-out split against one fixed reference."""

    def __init__(self, store: CorpusStore, reference: bpe.SubwordTokenizer):
        self.store = store
        self.reference = reference
        self.test_docs = [store.test_docs(i) for i in range(len(store.index))]
        self.test_weights = store.test_weights()
        self.ref_tokens = [token_total(reference, d) for d in self.test_docs]

    def score(self, tok: bpe.SubwordTokenizer) -> tuple[dict[str, float], float]:
        """Per-language NSL and the test-weighted overall NSL."""
        per = {t: nsl(tok, self.reference, docs, ref)
               for t, docs, ref in zip(self.store.index, self.test_docs, self.ref_tokens)}
        return per, weighted_compression(per, self.test_weights)

    def record(self, tok: bpe.SubwordTokenizer, w: Mixture, scale: Scale,
               mixture_id: str = "") -> CompressionRecord:
        per, overall = self.score(tok)
        return CompressionRecord(w, (scale.bytes, scale.vocab_size), per, overall,
                                 self.reference.digest(), mixture_id or w.digest())


def train_on(store: CorpusStore, w: Mixture, scale: Scale, seed: int) -> bpe.SubwordTokenizer:
    subset = materialize(store, w, scale.bytes, seed)
    meta = {"mixture": w.digest(), "budget_bytes": scale.bytes,
            "realized_bytes": subset.total_bytes}
    if subset.shortfall:
        meta["shortfall"] = subset.shortfall
    if subset.empty_languages:
        meta["empty_languages"] = subset.empty_languages
    return bpe.train(subset.texts(store), scale.vocab_size, seed, meta)


def reference_tokenizer(cfg: PipelineConfig, store: CorpusStore, scale: Scale) -> bpe.SubwordTokenizer:
    """External reference file, or a uniform-mixture tokenizer trained (once) at `scale`."""
    if cfg.reference != "train-uniform":
        return bpe.SubwordTokenizer.load(cfg.reference)
    path = cfg.out_dir / f"reference_{scale.label()}.json"
    if path.exists():
        return bpe.SubwordTokenizer.load(path)
    tok = train_on(store, Mixture.uniform(store.index), scale,
                   derive_seed(cfg.seed, "reference", scale.bytes, scale.vocab_size))
    path.parent.mkdir(parents=True, exist_ok=True)
    tok.save(path)
    return tok


# ---------------------------------------------------------------- proxy fleet

def fleet_mixtures(cfg: PipelineConfig, store: CorpusStore, n: int | None = None) -> list[Mixture]:
    """The fleet's mixtures; a smaller `n` gives a prefix of the same sequence."""
    dcfg = replace(cfg.dirichlet, seed=derive_seed(cfg.seed, "mixtures", cfg.dirichlet.seed))
    return sample_mixtures(store.index, store.sizes, dcfg, n or cfg.n_mixtures)


def _record_row(i: int, rec: CompressionRecord) -> dict:
    row = {"index": i, "mixture_id": rec.mixture_id}
    for t, x in zip(rec.mixture.index, rec.mixture.weights):
        row[f"w:{t}"] = repr(float(x))
    for t, v in rec.per_language.items():
        row[f"nsl:{t}"] = repr(float(v))
    row["overall"] = repr(float(rec.overall))
    return row


def _header(index: LanguageIndex) -> list[str]:
    return (["index", "mixture_id"] + [f"w:{t}" for t in index]
            + [f"nsl:{t}" for t in index] + ["overall"])


def read_records(path: str | Path, index: LanguageIndex | None = None) -> list[dict]:
    """Rows of a records.csv; a truncated trailing row (killed writer) is dropped."""
    path = Path(path)
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        rows = []
        for row in reader:
            if None in row.values() or None in row:
                continue
            try:
                float(row["overall"])
            except (KeyError, ValueError):
                continue
            rows.append(row)
    if index is not None and header and header != _header(index):
        raise ValidationError(f"{path}: columns do not match the corpus languages")
    return rows


def records_from_rows(rows: Iterable[dict], index: LanguageIndex, scale: Scale | None = None,
                      reference_id: str = "") -> list[CompressionRecord]:
    out = []
    for r in rows:
        w = Mixture(index, [float(r[f"w:{t}"]) for t in index])
        per = {t: float(r[f"nsl:{t}"]) for t in index}
        out.append(CompressionRecord(w, (scale.bytes, scale.vocab_size) if scale else (0, 0), per,
                                     float(r["overall"]), reference_id, r["mixture_id"]))
    return out


# worker-process state, filled by _init_worker (inherited on fork)
_WORKER: dict = {}


def _init_worker(store: CorpusStore, evaluator: Evaluator, scale: Scale, master: int) -> None:
    _WORKER.update(store=store, evaluator=evaluator, scale=scale, master=master)


def _proxy_task(i: int, w: Mixture) -> tuple[int, dict | None, str | None]:
    st = _WORKER
    try:
        seed = derive_seed(st["master"], "proxy", i)
        tok = train_on(st["store"], w, st["scale"], seed)
        rec = st["evaluator"].record(tok, w, st["scale"])
        return i, _record_row(i, rec), None
    except Exception as exc:  # one bad mixture must not sink the fleet
        return i, None, f"{type(exc).__name__}: {exc}"


def run_proxy_fleet(cfg: PipelineConfig, store: CorpusStore | None = None,
                    limit: int | None = None) -> list[CompressionRecord]:
    """Train and score one proxy tokenizer per sampled mixture, appending to records.csv.

    Mixtures already present in records.csv are skipped, so an interrupted run resumes.
    `limit` caps how many new mixtures this call processes. On completion the file is
    rewritten in mixture order, making it independent of worker scheduling.
    """
    store = store or load_corpus(cfg)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    mixtures = fleet_mixtures(cfg, store)
    ids = [w.digest() for w in mixtures]
    path = out / RECORDS
    header = _header(store.index)

    done = {r["mixture_id"]: r for r in read_records(path, store.index) if r["mixture_id"] in ids}
    todo = [i for i in range(len(mixtures)) if ids[i] not in done]
    if limit is not None:
        todo = todo[:limit]
    log.info("fleet: %d done, %d to run", len(done), len(todo))

    # rewrite what survived (drops a truncated tail) and append from there
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, header, lineterminator="\n")
        writer.writeheader()
        for r in sorted(done.values(), key=lambda r: int(r["index"])):
            writer.writerow(r)

    failures: dict[int, str] = {}
    if todo:
        reference = reference_tokenizer(cfg, store, cfg.proxy)
        evaluator = Evaluator(store, reference)
        _init_worker(store, evaluator, cfg.proxy, cfg.seed)
        with open(path, "a", newline="") as fh:
            writer = csv.DictWriter(fh, header, lineterminator="\n")

            def sink(i, row, err):
                if row is None:
                    failures[i] = err
                    log.warning("proxy %d failed: %s", i, err)
                else:
                    writer.writerow(row)
                    fh.flush()
                    done[row["mixture_id"]] = row

            if cfg.jobs > 1:
                with ProcessPoolExecutor(cfg.jobs, initializer=_init_worker,
                                         initargs=(store, evaluator, cfg.proxy, cfg.seed)) as pool:
                    futs = [pool.submit(_proxy_task, i, mixtures[i]) for i in todo]
                    for f in as_completed(futs):
                        sink(*f.result())
            else:
                for i in todo:
                    sink(*_proxy_task(i, mixtures[i]))

    rows = sorted(done.values(), key=lambda r: int(r["index"]))
    if limit is None or len(rows) == len(mixtures):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, header, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    if failures:
        (out / FAILURES).write_text(json.dumps({str(k): v for k, v in sorted(failures.items())},
                                               indent=2) + "\n")
        if len(failures) > cfg.failure_budget * len(mixtures):
            raise FleetBudgetExceeded(len(failures), len(mixtures))
    return records_from_rows(rows, store.index, cfg.proxy)


# ---------------------------------------------------------------- regression

def holdout_split(n: int, n_holdout: int, seed: int) -> np.ndarray:
    split = np.array(["fit"] * n, dtype=object)
    perm = np.random.default_rng(derive_seed(seed, "holdout")).permutation(n)
    split[perm[:min(n_holdout, n)]] = "holdout"
    return split


def training_set(records: Sequence[CompressionRecord], n_holdout: int, seed: int) -> TrainingSet:
    if not records:
        raise ValidationError("no records")
    index = records[0].mixture.index
    X = np.array([r.mixture.weights for r in records])
    y = np.array([r.overall for r in records])
    return TrainingSet(index, X, y, holdout_split(len(records), n_holdout, seed),
                       [r.mixture_id for r in records])


def fit_and_evaluate(records: Sequence[CompressionRecord],
                     cfg: PipelineConfig) -> tuple[RegressionModel, EvalReport]:
    if len(records) < 16:
        raise ValidationError(f"need at least 16 records to fit, got {len(records)}")
    data = training_set(records, cfg.n_holdout, cfg.seed)
    model = fit(data.part("fit"), cfg.boosting)
    holdout = data.part("holdout")
    report = evaluate(model, holdout)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / MODEL)
    report.save(out / REPORT)
    with open(out / "holdout_predictions.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mixture_id", "actual", "predicted"])
        for mid, a, p in zip(holdout.ids, holdout.targets, model.predict_batch(holdout.features)):
            w.writerow([mid, repr(float(a)), repr(float(p))])
    return model, report


# ---------------------------------------------------------------- search

@dataclass
class SearchResult:
    best: Mixture
    predicted: float
    top: list[tuple[int, float, Mixture]]
    scanned: int
    wall_seconds: float

    def to_json(self) -> dict:
        return {
            "best": self.best.as_dict(decimals=None),
            "predicted": self.predicted,
            "top": [{"candidate": i, "predicted": p, "mixture": w.as_dict()} for i, p, w in self.top],
            "scanned": self.scanned,
            "wall_seconds": self.wall_seconds,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


def _score_block(model: RegressionModel, block: int, rows: np.ndarray, top_m: int, block_size: int):
    preds = model.predict_batch(rows)
    gidx = block * block_size + np.arange(len(rows))
    keep = np.lexsort((gidx, preds))[:top_m]
    return preds[keep], gidx[keep], rows[keep]


def search(model: RegressionModel, cfg: PipelineConfig, index: LanguageIndex,
           sizes: Sequence[float], n: int | None = None, jobs: int | None = None,
           top_m: int | None = None) -> SearchResult:
    """Score the candidate stream and keep the lowest predictions.

    Ties go to the earlier candidate, so a constant model returns candidate 0.
    """
    if model.k != len(index):
        raise ValidationError(f"model has k={model.k}, language index has {len(index)}")
    n = n or cfg.search_candidates
    jobs = jobs or cfg.jobs
    top_m = top_m or cfg.top_m
    seed = derive_seed(cfg.seed, "search")
    t0 = time.perf_counter()

    def work(item):
        b, rows = item
        return _score_block(model, b, rows, top_m, CANDIDATE_BLOCK)

    stream = candidate_blocks(index, sizes, n, seed)
    if jobs > 1:
        # numba kernel releases the GIL; blocks are scored concurrently, then reduced
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(work, stream))
    else:
        parts = [work(item) for item in stream]
    preds = np.concatenate([p[0] for p in parts])
    gidx = np.concatenate([p[1] for p in parts])
    rows = np.concatenate([p[2] for p in parts])
    order = np.lexsort((gidx, preds))[:top_m]
    top = [(int(gidx[o]), float(preds[o]), Mixture(index, rows[o])) for o in order]
    return SearchResult(top[0][2], top[0][1], top, n, time.perf_counter() - t0)


# ---------------------------------------------------------------- full scale

def train_full(w: Mixture, cfg: PipelineConfig, store: CorpusStore | None = None,
               name: str | None = None,
               reference: bpe.SubwordTokenizer | None = None) -> tuple[bpe.SubwordTokenizer, CompressionRecord]:
    store = store or load_corpus(cfg)
    reference = reference or reference_tokenizer(cfg, store, cfg.full)
    tok = train_on(store, w, cfg.full, derive_seed(cfg.seed, "full", w.digest()))
    rec = Evaluator(store, reference).record(tok, w, cfg.full)
    out = cfg.out_dir / "full"
    out.mkdir(parents=True, exist_ok=True)
    name = name or w.digest()
    tok.save(out / f"{name}.tokenizer.json")
    (out / f"{name}.record.json").write_text(json.dumps(rec.to_json(), indent=2) + "\n")
    return tok, rec


# ---------------------------------------------------------------- analyses

@dataclass
class RankInvarianceReport:
    scales: list[Scale]
    matrix: np.ndarray
    compressions: np.ndarray  # (n_scales, n_mixtures)
    flagged: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        m = self.matrix
        ok = ~np.isnan(m)
        assert np.array_equal(ok, ok.T) and np.allclose(m[ok], m.T[ok], atol=0, rtol=0)
        assert np.all(np.diag(m) == 1.0)

    def to_json(self) -> dict:
        return {
            "scales": [{"bytes": s.bytes, "vocab_size": s.vocab_size} for s in self.scales],
            "spearman": [[None if math.isnan(x) else x for x in row] for row in self.matrix.tolist()],
            "undefined_cells": [list(c) for c in self.flagged],
            "compression": self.compressions.tolist(),
        }


def rank_matrix(compressions: np.ndarray) -> tuple[np.ndarray, list[tuple[int, int]]]:
    s = len(compressions)
    mat = np.eye(s)
    flagged = []
    for a in range(s):
        for b in range(a + 1, s):
            try:
                mat[a, b] = mat[b, a] = spearman(compressions[a], compressions[b])
            except UndefinedCorrelation:
                mat[a, b] = mat[b, a] = np.nan
                flagged.append((a, b))
    return mat, flagged


def analyze_rank_invariance(mixtures: Sequence[Mixture], scales: Sequence[Scale], cfg: PipelineConfig,
                            store: CorpusStore | None = None) -> RankInvarianceReport:
    if len(mixtures) < 8 or len(scales) < 2:
        raise ValidationError("rank invariance needs at least 8 mixtures and 2 scales")
    store = store or load_corpus(cfg)
    comp = np.zeros((len(scales), len(mixtures)))
    for a, scale in enumerate(scales):
        ev = Evaluator(store, reference_tokenizer(cfg, store, scale))
        for i, w in enumerate(mixtures):
            tok = train_on(store, w, scale, derive_seed(cfg.seed, "rank-invariance", i))
            comp[a, i] = ev.record(tok, w, scale).overall
        log.info("rank invariance: scale %s done", scale.label())
    mat, flagged = rank_matrix(comp)
    return RankInvarianceReport(list(scales), mat, comp, flagged)


def analyze_entropy(records: Sequence[CompressionRecord]) -> list[tuple[str, float, float]]:
    if not records:
        raise ValidationError("no records")
    return [(r.mixture_id, mixture_entropy(r.mixture), r.overall) for r in records]


def write_entropy_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mixture_id", "entropy", "overall_nsl"])
        for mid, h, c in rows:
            w.writerow([mid, f"{h:.6f}", repr(c)])


@dataclass
class CostEstimate:
    baseline_hours: float
    baseline_nsl: float
    hours: dict[str, float]
    hardware: str = DEFAULT_HARDWARE
    adaptmix_iterations: int = ADAPTMIX_ITERATIONS

    def to_json(self) -> dict:
        return {
            "baseline_hours": self.baseline_hours,
            "baseline_nsl": self.baseline_nsl,
            "hardware": self.hardware,
            "adaptmix_iterations": self.adaptmix_iterations,
            "estimated_hours": self.hours,
        }


def estimate_cost(nsls: dict[str, float] | float, baseline_hours: float, baseline_nsl: float,
                  hardware: str = DEFAULT_HARDWARE) -> CostEstimate:
    """Training time under a linear-in-tokens model: hours scale with the NSL ratio."""
    if isinstance(nsls, (int, float)):
        nsls = {"mixture": float(nsls)}
    if not baseline_hours > 0 or not baseline_nsl > 0:
        raise ValidationError("baseline hours and baseline NSL must be positive")
    bad = [k for k, v in nsls.items() if not v > 0]
    if bad:
        raise ValidationError(f"NSL must be positive for {bad}")
    hours = {k: baseline_hours * v / baseline_nsl for k, v in nsls.items()}
    return CostEstimate(baseline_hours, baseline_nsl, hours, hardware)


def default_jobs() -> int:
    return max(1, min(8, os.cpu_count() or 1))
