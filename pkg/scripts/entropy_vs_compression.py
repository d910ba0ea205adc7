#!/usr/bin/env python3
"""Correlation between mixture entropy and proxy compression.

Reads a fleet's records.csv and reports the Spearman correlation between the
normalised entropy of each mixture and its overall NSL, plus the extremes.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from mixtok import pipeline as P
from mixtok.metrics import spearman
from mixtok.mixture import LanguageIndex


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("records", type=Path)
    args = ap.parse_args()
    rows = P.read_records(args.records)
    tags = tuple(c[2:] for c in rows[0] if c.startswith("w:"))
    recs = P.records_from_rows(rows, LanguageIndex(tags))
    table = P.analyze_entropy(recs)
    h = [r[1] for r in table]
    c = [r[2] for r in table]
    print(f"{len(table)} mixtures; spearman(entropy, NSL) = {spearman(h, c):.3f}")
    for mid, hh, cc in sorted(table, key=lambda r: r[2])[:3]:
        print(f"  best  {mid}  H={hh:.3f}  NSL={cc:.4f}")
    for mid, hh, cc in sorted(table, key=lambda r: r[2])[-3:]:
        print(f"  worst {mid}  H={hh:.3f}  NSL={cc:.4f}")


if __name__ == "__main__":
    main()
