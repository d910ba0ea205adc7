#!/usr/bin/env python3
"""Desk-scale end-to-end run on the synthetic corpus.

Generates the corpus, runs the proxy fleet, fits and evaluates the regressor,
searches for w*, trains full-scale tokenizers on w* and on the uniform mixture,
and writes summary.json with everything needed to compare them.

    python scripts/desk_experiment.py --seed 0 --out runs/desk-s0
"""

from __future__ import annotations

import argparse
import json
import logging
import time
from dataclasses import replace
from pathlib import Path

from mixtok import pipeline as P
from mixtok.config import DESK
from mixtok.mixture import Mixture
from mixtok.synthetic import write_corpus


def run(seed: int, out: Path, jobs: int) -> dict:
    manifest = out / "corpus" / "manifest.json"
    if not manifest.exists():
        write_corpus(out / "corpus", DESK.synthetic_langs, DESK.synthetic_bytes_per_lang, seed)
    cfg = replace(DESK, corpus=str(manifest), out=str(out / "run"), seed=seed, jobs=jobs)
    store = P.load_corpus(cfg)
    t0 = time.perf_counter()
    records = P.run_proxy_fleet(cfg, store)
    model, rep = P.fit_and_evaluate(records, cfg)
    t_fleet = time.perf_counter() - t0
    result = P.search(model, cfg, store.index, store.sizes)
    result.save(cfg.out_dir / P.SEARCH)
    _, best = P.train_full(result.best, cfg, store, "best")
    _, uni = P.train_full(Mixture.uniform(store.index), cfg, store, "uniform")
    return {
        "seed": seed,
        "holdout": rep.to_json(),
        "w_star": result.best.as_dict(),
        "predicted": result.predicted,
        "full_nsl": {"best": best.overall, "uniform": uni.overall},
        "per_language": {"best": best.per_language, "uniform": uni.per_language},
        "seconds": {"fleet_and_fit": t_fleet, "total": time.perf_counter() - t0},
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("runs/desk"))
    ap.add_argument("--jobs", type=int, default=P.default_jobs())
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    summary = run(args.seed, args.out, args.jobs)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps({k: summary[k] for k in ("holdout", "w_star", "full_nsl")}, indent=2))


if __name__ == "__main__":
    main()
