"""Acceptance checks, one test per criterion; each prints a PASS/FAIL line.

The desk-scale checks (6-10) share one end-to-end run on the shipped synthetic
corpus. Set MIXTOK_SEED to run them under another master seed.
"""

import os
import random
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE
from mixtok import pipeline as P
from mixtok.bpe import train, train_bruteforce
from mixtok.config import DESK, Scale
from mixtok.metrics import mape, nsl, spearman
from mixtok.mixture import DirichletConfig, LanguageIndex, Mixture, sample_mixtures
from mixtok.regressor import TrainingSet, evaluate, fit

SEED = int(os.environ.get("MIXTOK_SEED", "0"))


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE.append((n, ok, detail))
    assert ok, line


def random_text(rng: random.Random, n: int, alphabet: str) -> str:
    return "".join(rng.choice(alphabet) for _ in range(n))


# ------------------------------------------------------------------ small checks

def test_c01_bpe_matches_bruteforce():
    rng = random.Random(1)
    t0 = time.perf_counter()
    mismatches = 0
    for i in range(50):
        alphabet = rng.choice(["ab ", "abc \n", "xyz  é", "日本 語ab", "a\tb c"])
        texts, budget = [], rng.randint(20, 1000)
        while budget >= 3:  # at most 3 bytes per character in these alphabets
            t = random_text(rng, min(budget // 3, rng.randint(5, 200)), alphabet)
            texts.append(t)
            budget -= len(t.encode())
        assert sum(len(t.encode()) for t in texts) <= 1000
        vocab = rng.randint(257, 280)
        mismatches += train(texts, vocab).merges != train_bruteforce(texts, vocab)
    dt = time.perf_counter() - t0
    report(1, mismatches == 0 and dt < 10, f"50 corpora, {mismatches} mismatches, {dt:.2f}s (< 10s)")


def _random_string(rng: random.Random) -> str:
    out = []
    for _ in range(rng.randint(0, 40)):
        r = rng.random()
        if r < 0.4:
            out.append(chr(rng.randint(0x20, 0x7E)))
        elif r < 0.55:
            out.append(rng.choice(" \t\n\r  "))
        elif r < 0.9:
            cp = rng.randint(0x80, 0xFFFF)
            out.append(chr(cp) if not 0xD800 <= cp <= 0xDFFF else "x")
        else:
            out.append(chr(rng.randint(0x10000, 0x10FFFF)))
    return "".join(out)


ADVERSARIAL = [
    "", " ", "  ", "\n", "\r\n", "\x00", "\x00\x00 \x00",
    "é", "é", "日本語", "🎉", "👩‍👩‍👧", "🇩🇪🇫🇷",
    "aé日🎉" * 20, " " * 50 + "x", "x" + " " * 50, " nbsp em",
    "﻿bom", "\U0010ffff", "ࠀ߿￿", "a​b", "tab\t\tsep",
    "ÿ" * 30, "€€€ €€", "ab" * 200,
]


def test_c02_lossless():
    rng = random.Random(2)
    corpus = [_random_string(rng) for _ in range(300)] + ADVERSARIAL * 3
    tok = train(corpus, 600)
    # merges must cut through multi-byte characters for this to be adversarial
    split_chars = sum(1 for i in range(256, tok.vocab_size) if _cuts_char(tok.token_bytes(i)))
    t0 = time.perf_counter()
    strings = [_random_string(rng) for _ in range(10_000)] + ADVERSARIAL
    bad = sum(tok.decode(tok.encode(s)) != s for s in strings)
    dt = time.perf_counter() - t0
    report(2, bad == 0 and dt < 30,
           f"{len(strings)} strings, {bad} failures, {split_chars} merges split a character, {dt:.2f}s (< 30s)")


def _cuts_char(b: bytes) -> bool:
    try:
        b.decode("utf-8")
        return False
    except UnicodeDecodeError:
        return True


def test_c03_nsl_identities():
    rng = random.Random(3)
    docs = [random_text(rng, 200, "abcd efg\nhé") for _ in range(20)]
    pool = [train([random_text(rng, 400, "abcd efg\nhé")], rng.randint(260, 400)) for _ in range(12)]
    self_ok = all(nsl(t, t, docs) == 1.0 for t in pool)
    worst = 0.0
    for _ in range(20):
        a, b, c = rng.sample(pool, 3)
        worst = max(worst, abs(nsl(a, b, docs) * nsl(b, c, docs) - nsl(a, c, docs)))
    report(3, self_ok and worst < 1e-12, f"self-reference exact: {self_ok}; max telescoping error {worst:.1e} (< 1e-12)")


def _oracle_ranks(x):
    return [sum(b < a for b in x) + (sum(b == a for b in x) + 1) / 2 for a in x]


def _oracle_spearman(x, y):
    rx, ry = _oracle_ranks(x), _oracle_ranks(y)
    n = len(x)
    mx, my = sum(rx) / n, sum(ry) / n
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    return num / (sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry)) ** 0.5


def _oracle_mape(p, a):
    return 100.0 * sum(abs(x - y) / abs(y) for x, y in zip(p, a)) / len(a)


def test_c04_metric_oracles():
    rng = np.random.default_rng(4)
    worst_rho = worst_mape = 0.0
    ties = 0
    for i in range(1000):
        n = int(rng.integers(3, 60))
        if i % 2:  # integer draws force ties
            x = rng.integers(0, 5, n).astype(float)
            y = rng.integers(0, 5, n).astype(float)
        else:
            x, y = rng.normal(size=n), rng.normal(size=n)
        if len(set(x)) == 1 or len(set(y)) == 1:
            x[0], y[0] = x[0] + 1, y[0] + 1
        ties += len(set(x)) < n
        worst_rho = max(worst_rho, abs(spearman(x, y) - _oracle_spearman(list(x), list(y))))
        a = rng.uniform(0.5, 2, n)
        p = a * rng.uniform(0.8, 1.2, n)
        worst_mape = max(worst_mape, abs(mape(p, a) - _oracle_mape(p, a)))
    report(4, worst_rho < 1e-12 and worst_mape < 1e-12,
           f"1000 vector pairs ({ties} with ties): max |drho| {worst_rho:.1e}, max |dMAPE| {worst_mape:.1e} (< 1e-12)")


def test_c05_regressor_sanity():
    t0 = time.perf_counter()
    idx = LanguageIndex(tuple(f"l{i}" for i in range(5)))
    X = np.array([m.weights for m in sample_mixtures(idx, [1] * 5, DirichletConfig(seed=5), 512)])
    y = 0.8 + 0.2 * X[:, 0]
    split = np.array(["fit"] * 480 + ["holdout"] * 32, dtype=object)
    data = TrainingSet(idx, X, y, split)
    rep = evaluate(fit(data.part("fit"), DESK.boosting), data.part("holdout"))
    dt = time.perf_counter() - t0
    report(5, rep.mape <= 2.0 and rep.spearman >= 0.95 and dt < 60,
           f"MAPE {rep.mape:.3f} (<= 2.0), rho {rep.spearman:.3f} (>= 0.95), {dt:.1f}s (< 60s)")


def test_c11_cost_identities():
    same = P.estimate_cost(1.0, 1234.5, 1.0).hours["mixture"]
    ninety = P.estimate_cost(0.9, 1000.0, 1.0).hours["mixture"]
    scaled = P.estimate_cost(0.45, 1000.0, 0.5).hours["mixture"]
    ok = same == 1234.5 and ninety == 900.0 and scaled == 900.0
    report(11, ok, f"ratio 1 -> {same} h (1234.5), ratio 0.9 -> {ninety} h (900.0)")


# ------------------------------------------------------------------ desk-scale run

@pytest.fixture(scope="module")
def desk(tmp_path_factory):
    from mixtok.synthetic import write_corpus
    root = tmp_path_factory.mktemp("desk")
    manifest = write_corpus(root / "corpus", DESK.synthetic_langs, DESK.synthetic_bytes_per_lang, SEED)
    cfg = replace(DESK, corpus=str(manifest), out=str(root / "run"), seed=SEED, jobs=P.default_jobs())
    store = P.load_corpus(cfg)
    t = {}
    t0 = time.perf_counter()
    records = P.run_proxy_fleet(cfg, store)
    model, rep = P.fit_and_evaluate(records, cfg)
    t["fleet_fit"] = time.perf_counter() - t0
    result = P.search(model, cfg, store.index, store.sizes)
    _, best = P.train_full(result.best, cfg, store, "best")
    _, uni = P.train_full(Mixture.uniform(store.index), cfg, store, "uniform")
    t["end_to_end"] = time.perf_counter() - t0
    return dict(cfg=cfg, store=store, model=model, report=rep, result=result, best=best, uniform=uni, t=t)


def test_c06_proxy_fleet_regression(desk):
    rep, dt = desk["report"], desk["t"]["fleet_fit"]
    report(6, rep.mape <= 5.0 and rep.spearman >= 0.85 and dt < 600,
           f"MAPE {rep.mape:.3f} (<= 5.0), rho {rep.spearman:.3f} (>= 0.85) on {rep.n_points} holdout, {dt:.0f}s (< 600s)")


def test_c07_rank_invariance(desk):
    cfg, store = desk["cfg"], desk["store"]
    t0 = time.perf_counter()
    scales = [Scale(256_000, 512), Scale(1_000_000, 1024)]
    rep = P.analyze_rank_invariance(P.fleet_mixtures(cfg, store, 16), scales, cfg, store)
    dt = time.perf_counter() - t0
    rho = rep.matrix[0, 1]
    report(7, rho >= 0.8 and dt < 600, f"cross-scale rho {rho:.3f} (>= 0.8), {dt:.0f}s (< 600s)")


def test_c08_end_to_end(desk):
    best, uni, dt = desk["best"].overall, desk["uniform"].overall, desk["t"]["end_to_end"]
    w = ", ".join(f"{k}={v:.3f}" for k, v in desk["result"].best.as_dict().items())
    report(8, best <= uni and dt < 900,
           f"w* NSL {best:.4f} vs uniform {uni:.4f} (w* <= uniform), {dt:.0f}s (< 900s); w* = {w}")


def test_c09_determinism_and_resume(desk, tmp_path):
    # same corpus, smaller proxies: the property under test does not depend on scale
    base = replace(desk["cfg"], proxy=Scale(64_000, 512), n_mixtures=24, n_fit=16, n_holdout=8)
    store = desk["store"]
    runs = {}
    for name in ("a", "b"):
        cfg = replace(base, out=str(tmp_path / name))
        P.fit_and_evaluate(P.run_proxy_fleet(cfg, store), cfg)
        runs[name] = cfg.out_dir
    resumed = replace(base, out=str(tmp_path / "killed"))
    P.run_proxy_fleet(resumed, store, limit=9)
    with open(resumed.out_dir / P.RECORDS, "a") as fh:
        fh.write("9,0123456789abcdef,0.2")  # torn final row
    P.fit_and_evaluate(P.run_proxy_fleet(resumed, store), resumed)

    def same(a, b, f):
        return (a / f).read_bytes() == (b / f).read_bytes()

    identical = same(runs["a"], runs["b"], P.RECORDS) and same(runs["a"], runs["b"], P.MODEL)
    resume_ok = same(runs["a"], resumed.out_dir, P.RECORDS) and same(runs["a"], resumed.out_dir, P.MODEL)
    report(9, identical and resume_ok,
           f"identical-seed runs byte-identical: {identical}; killed+resumed matches: {resume_ok}")


def test_c10_search_scale(desk):
    cfg, store, model = desk["cfg"], desk["store"], desk["model"]
    n = 1_000_000
    t0 = time.perf_counter()
    one = P.search(model, cfg, store.index, store.sizes, n=n, jobs=1)
    dt = time.perf_counter() - t0
    eight = P.search(model, cfg, store.index, store.sizes, n=n, jobs=8)
    same = one.best == eight.best and one.top[0][0] == eight.top[0][0]
    report(10, dt < 30 and same, f"{n} candidates in {dt:.1f}s single-core (< 30s); same w* at jobs 1 and 8: {same}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
