"""Command-line entry point: `mixtok <subcommand>`.

Exit codes: 0 success, 1 invalid input, 2 runtime failure, 3 fleet failure budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline as P
from .bpe import SubwordTokenizer
from .config import PROFILES, PipelineConfig, Scale
from .corpus import ingest, split_corpus
from .errors import FleetBudgetExceeded, ValidationError
from .metrics import CompressionRecord
from .mixture import LanguageIndex, Mixture, load_mixture, mixture_from_dict, save_mixture
from .regressor import RegressionModel

log = logging.getLogger("mixtok")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_BUDGET = 0, 1, 2, 3


def _config(args) -> PipelineConfig:
    base = PROFILES[args.profile] if args.profile else None
    config = args.config
    if not config:
        # later stages reuse the config saved by `fleet` in the run directory
        saved = Path(args.out or (base or PROFILES["desk"]).out) / "config.json"
        config = str(saved) if saved.exists() else None
    if config:
        try:
            obj = json.loads(Path(config).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{config}: invalid JSON ({exc})") from None
        cfg = PipelineConfig.from_json(obj, base)
    else:
        cfg = base or PROFILES["desk"]
    return cfg.with_overrides(seed=args.seed, jobs=args.jobs, out=args.out,
                              corpus=getattr(args, "corpus", None))


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _records(cfg: PipelineConfig, store) -> list[CompressionRecord]:
    rows = P.read_records(cfg.out_dir / P.RECORDS, store.index)
    if not rows:
        raise ValidationError(f"no proxy records in {cfg.out_dir / P.RECORDS}; run `fleet` first")
    return P.records_from_rows(rows, store.index, cfg.proxy)


# ---------------------------------------------------------------- subcommands

def cmd_gen_corpus(args, cfg):
    from .synthetic import write_corpus
    manifest = write_corpus(cfg.out_dir, args.langs, args.bytes_per_lang, cfg.seed)
    print(manifest)


def cmd_ingest(args, cfg):
    pairs = []
    for spec in args.lang:
        tag, sep, path = spec.partition("=")
        if not sep or not tag or not path:
            raise ValidationError(f"--lang expects TAG=PATH, got {spec!r}")
        pairs.append((tag, Path(path).resolve()))
    index = LanguageIndex(tuple(t for t, _ in pairs))
    store = ingest(pairs, index)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    # manifest paths are stored relative to the manifest's directory when possible
    store.paths = [_relative(p, out.resolve()) for _, p in pairs]
    store.save_manifest(out / "manifest.json")
    for s in store.skipped:
        print(f"skipped {s.path}:{s.line}: {s.reason}", file=sys.stderr)
    print(out / "manifest.json")


def _relative(path: Path, base: Path) -> str:
    try:
        return str(path.relative_to(base))
    except ValueError:
        return str(path)


def cmd_split(args, cfg):
    from .corpus import load_manifest
    if not cfg.corpus:
        raise ValidationError("split needs --corpus")
    store = load_manifest(cfg.corpus)
    fraction = args.test_fraction if args.test_fraction is not None else cfg.test_fraction
    store = split_corpus(store, fraction, P.derive_seed(cfg.seed, "split"))
    store.save_manifest(cfg.corpus)
    n_test = sum(len(store.test_ids(i)) for i in range(len(store.index)))
    print(f"{cfg.corpus}: {n_test} test documents across {len(store.index)} languages")


def cmd_fleet(args, cfg):
    store = P.load_corpus(cfg)
    cfg.save(_ensure(cfg.out_dir) / "config.json")
    records = P.run_proxy_fleet(cfg, store, limit=args.limit)
    print(f"{len(records)} records in {cfg.out_dir / P.RECORDS}")


def _ensure(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_fit(args, cfg):
    store = P.load_corpus(cfg)
    model, report = P.fit_and_evaluate(_records(cfg, store), cfg)
    print(json.dumps(report.to_json()))


def cmd_search(args, cfg):
    store = P.load_corpus(cfg)
    model = RegressionModel.load(cfg.out_dir / P.MODEL, expected_k=len(store.index))
    result = P.search(model, cfg, store.index, store.sizes, n=args.candidates, top_m=args.top_m)
    result.save(cfg.out_dir / P.SEARCH)
    save_mixture(result.best, cfg.out_dir / "best_mixture.json")
    print(json.dumps({"best": result.best.as_dict(), "predicted": result.predicted,
                      "scanned": result.scanned, "wall_seconds": round(result.wall_seconds, 3)}))


def _resolve_mixture(spec: str, cfg: PipelineConfig, index: LanguageIndex) -> tuple[str, Mixture]:
    if spec == "uniform":
        return "uniform", Mixture.uniform(index)
    if spec == "best":
        path = cfg.out_dir / P.SEARCH
        if not path.exists():
            raise ValidationError(f"{path} not found; run `search` first")
        return "best", mixture_from_dict(json.loads(path.read_text())["best"], index)
    return Path(spec).stem, load_mixture(spec, index)


def cmd_train_full(args, cfg):
    store = P.load_corpus(cfg)
    reference = P.reference_tokenizer(cfg, store, cfg.full)
    rows = {}
    for spec in args.mixture:
        name, w = _resolve_mixture(spec, cfg, store.index)
        _, rec = P.train_full(w, cfg, store, name, reference)
        rows[name] = rec.overall
        print(f"{name}: overall NSL {rec.overall:.6f}")
    _write_json(cfg.out_dir / "full" / "summary.json", rows)


def cmd_evaluate(args, cfg):
    """Score tokenizer files on the test split; writes JSON plus a long CSV for plotting."""
    store = P.load_corpus(cfg)
    scale = cfg.full if args.scale == "full" else cfg.proxy
    ev = P.Evaluator(store, P.reference_tokenizer(cfg, store, scale))
    out = []
    for path in args.tokenizer:
        tok = SubwordTokenizer.load(path)
        per, overall = ev.score(tok)
        out.append({"tokenizer": str(path), "per_language": per, "overall": overall})
    long_rows = [(o["tokenizer"], t, v) for o in out for t, v in o["per_language"].items()]
    if args.records:
        for r in _records(cfg, store):
            long_rows += [(r.mixture_id, t, v) for t, v in r.per_language.items()]
    _write_json(cfg.out_dir / "evaluation.json", out)
    with open(cfg.out_dir / "evaluation_long.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "language", "nsl"])
        w.writerows((n, t, repr(float(v))) for n, t, v in long_rows)
    for o in out:
        print(f"{o['tokenizer']}: overall NSL {o['overall']:.6f}")


def cmd_rank_invariance(args, cfg):
    store = P.load_corpus(cfg)
    scales = [Scale.parse(s) for s in args.scale] or [Scale(256_000, 512), Scale(1_000_000, 1024)]
    mixtures = P.fleet_mixtures(cfg, store, args.mixtures)
    report = P.analyze_rank_invariance(mixtures, scales, cfg, store)
    _write_json(cfg.out_dir / "rank_invariance.json", report.to_json())
    with open(cfg.out_dir / "rank_invariance.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mixture_id"] + [s.label() for s in scales])
        for i, m in enumerate(mixtures):
            w.writerow([m.digest()] + [repr(float(x)) for x in report.compressions[:, i]])
    print(np.array2string(report.matrix, precision=4))


def cmd_entropy(args, cfg):
    store = P.load_corpus(cfg)
    rows = P.analyze_entropy(_records(cfg, store))
    P.write_entropy_csv(rows, cfg.out_dir / "entropy.csv")
    print(f"{len(rows)} rows in {cfg.out_dir / 'entropy.csv'}")


def cmd_estimate_cost(args, cfg):
    nsls = {}
    for spec in args.nsl:
        name, sep, val = spec.partition("=")
        try:
            nsls[name if sep else "mixture"] = float(val if sep else name)
        except ValueError:
            raise ValidationError(f"--nsl expects NAME=VALUE or VALUE, got {spec!r}") from None
    if args.summary:
        nsls.update(json.loads(Path(args.summary).read_text()))
    if not nsls:
        raise ValidationError("give at least one --nsl or --summary")
    est = P.estimate_cost(nsls, args.baseline_hours, args.baseline_nsl)
    _write_json(cfg.out_dir / "cost_estimate.json", est.to_json())
    for name, h in est.hours.items():
        print(f"{name}: {h:.1f} h")


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mixtok", description="Search for the compression-optimal "
                                "language mixture for training a byte-level BPE tokenizer.")
    p.add_argument("--config", help="JSON config overlaying a profile")
    p.add_argument("--profile", choices=sorted(PROFILES), help="named defaults (default: desk)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--jobs", type=int, help="worker processes / threads")
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def corpus_arg(sp):
        sp.add_argument("--corpus", help="corpus manifest.json")

    sp = sub.add_parser("gen-corpus", help="write a seeded synthetic corpus and its manifest")
    sp.add_argument("--langs", type=int, default=5)
    sp.add_argument("--bytes-per-lang", type=int, default=2_000_000)
    sp.set_defaults(func=cmd_gen_corpus)

    sp = sub.add_parser("ingest", help="build a manifest from one text file per language")
    sp.add_argument("--lang", action="append", required=True, metavar="TAG=PATH")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("split", help="hold out a test split (rewrites the manifest)")
    corpus_arg(sp)
    sp.add_argument("--test-fraction", type=float)
    sp.set_defaults(func=cmd_split)

    sp = sub.add_parser("fleet", help="train and score the proxy tokenizers (resumable)")
    corpus_arg(sp)
    sp.add_argument("--limit", type=int, help="process at most this many new mixtures")
    sp.set_defaults(func=cmd_fleet)

    sp = sub.add_parser("fit", help="fit the compression regressor on the proxy records")
    corpus_arg(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("search", help="scan candidate mixtures for the lowest prediction")
    corpus_arg(sp)
    sp.add_argument("--candidates", type=int)
    sp.add_argument("--top-m", type=int)
    sp.set_defaults(func=cmd_search)

    sp = sub.add_parser("train-full", help="train and score full-scale tokenizers")
    corpus_arg(sp)
    sp.add_argument("--mixture", action="append", default=None,
                    help="'best', 'uniform' or a mixture JSON file (repeatable)")
    sp.set_defaults(func=cmd_train_full)

    sp = sub.add_parser("evaluate", help="score tokenizer files on the test split")
    corpus_arg(sp)
    sp.add_argument("--tokenizer", action="extend", nargs="+", required=True, metavar="PATH")
    sp.add_argument("--scale", choices=["full", "proxy"], default="full",
                    help="which scale's reference to score against")
    sp.add_argument("--records", action="store_true", help="also flatten records.csv into the long CSV")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("analyze", help="rank-invariance and entropy analyses")
    asub = sp.add_subparsers(dest="analysis", required=True)
    ap = asub.add_parser("rank-invariance")
    corpus_arg(ap)
    ap.add_argument("--mixtures", type=int, default=16)
    ap.add_argument("--scale", action="append", default=[], metavar="BYTES:VOCAB")
    ap.set_defaults(func=cmd_rank_invariance)
    ap = asub.add_parser("entropy")
    corpus_arg(ap)
    ap.set_defaults(func=cmd_entropy)

    sp = sub.add_parser("estimate-cost", help="training hours under a linear-in-tokens model")
    sp.add_argument("--baseline-hours", type=float, required=True)
    sp.add_argument("--baseline-nsl", type=float, default=1.0)
    sp.add_argument("--nsl", action="append", default=[], metavar="NAME=VALUE")
    sp.add_argument("--summary", help="JSON {name: nsl}, e.g. full/summary.json")
    sp.set_defaults(func=cmd_estimate_cost)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "mixture", "unset") is None:
        args.mixture = ["best", "uniform"]
    try:
        cfg = _config(args)
        args.func(args, cfg)
    except FleetBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
