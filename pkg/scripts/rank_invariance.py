#!/usr/bin/env python3
"""Cross-scale rank agreement of mixture compression.

Trains one tokenizer per (mixture, scale) for the first N fleet mixtures and
prints the Spearman matrix between scales. Extra scales can be added with
--scale BYTES:VOCAB (repeatable).
"""

from __future__ import annotations

import argparse
import csv
from dataclasses import replace
from pathlib import Path

import numpy as np

from mixtok import pipeline as P
from mixtok.config import DESK, Scale
from mixtok.synthetic import write_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("runs/rank"))
    ap.add_argument("--mixtures", type=int, default=16)
    ap.add_argument("--scale", action="append", default=[])
    args = ap.parse_args()

    scales = [Scale.parse(s) for s in args.scale] or [Scale(256_000, 512), Scale(1_000_000, 1024)]
    manifest = args.out / "corpus" / "manifest.json"
    if not manifest.exists():
        write_corpus(args.out / "corpus", DESK.synthetic_langs, DESK.synthetic_bytes_per_lang, args.seed)
    cfg = replace(DESK, corpus=str(manifest), out=str(args.out / "run"), seed=args.seed)
    store = P.load_corpus(cfg)
    mixtures = P.fleet_mixtures(cfg, store, args.mixtures)
    rep = P.analyze_rank_invariance(mixtures, scales, cfg, store)

    labels = [s.label() for s in scales]
    with open(args.out / "compression.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mixture_id"] + [f"w:{t}" for t in store.index] + labels)
        for i, m in enumerate(mixtures):
            w.writerow([m.digest()] + [f"{x:.6f}" for x in m.weights] + [f"{c:.6f}" for c in rep.compressions[:, i]])
    np.set_printoptions(precision=3, suppress=True)
    print("scales:", ", ".join(labels))
    print(rep.matrix)


if __name__ == "__main__":
    main()
