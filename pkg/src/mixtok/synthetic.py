"""Seeded synthetic multilingual corpora with deliberately unequal compressibility.

Each pseudo-language has its own script (so UTF-8 width differs), lexicon size,
word-length distribution and Zipf exponent. The default set adds one log-like
language whose documents repeat their own random identifiers: BPE spends many merges
on those identifiers, yet none of them recur in held-out text, so giving that
language its size-proportional share wastes vocabulary the other languages could use.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .seeding import derive_seed


@dataclass(frozen=True)
class LanguageProfile:
    tag: str
    alphabet: str
    lexicon_size: int
    mean_word_len: float
    zipf: float
    words_per_doc: tuple[int, int] = (8, 40)
    # exponent of the rank-based letter distribution; 0 gives uniform letters
    letter_skew: float = 0.7
    # > 0: every document invents its own words and repeats each this many times,
    # like IDs in log files; words_per_doc then counts distinct words per document
    burst: int = 0
    # a dialect reuses its parent's lexicon, rewriting a fraction of the words
    dialect_of: str | None = None
    mutation: float = 0.0


def _block(start: int, count: int) -> str:
    return "".join(chr(c) for c in range(start, start + count))


# script families cycled when more than five languages are requested
_SCRIPTS = [
    ("Latn", _block(0x61, 26)),
    ("Latx", _block(0x61, 26) + "äöüßéèàç"),
    ("Grek", _block(0x3B1, 25)),
    ("Cyrl", _block(0x430, 32)),
    ("Hani", _block(0x4E00, 600)),
    ("Arab", _block(0x628, 20)),
    ("Deva", _block(0x915, 35)),
    ("Hebr", _block(0x5D0, 27)),
]

_ALNUM = _block(0x30, 10) + _block(0x41, 26) + _block(0x61, 26)

DEFAULT_PROFILES = [
    LanguageProfile("syn_Zyyy", _ALNUM, 0, 8.0, 1.0, (2, 6), burst=300),
    LanguageProfile("syn_Grek", _SCRIPTS[2][1], 20_000, 7.0, 1.0),
    LanguageProfile("syn_Cyrl", _SCRIPTS[3][1], 25_000, 8.0, 0.95),
    LanguageProfile("syn_Arab", _SCRIPTS[5][1], 20_000, 7.0, 1.0),
    LanguageProfile("syn_Hebr", _SCRIPTS[7][1], 20_000, 7.0, 1.0),
]


def profiles(k: int, seed: int = 0) -> list[LanguageProfile]:
    """The five default profiles, extended with seeded variations for k > 5."""
    if k <= len(DEFAULT_PROFILES):
        return DEFAULT_PROFILES[:k]
    out = list(DEFAULT_PROFILES)
    rng = np.random.default_rng(derive_seed(seed, "profiles"))
    for i in range(len(DEFAULT_PROFILES), k):
        script, alphabet = _SCRIPTS[i % len(_SCRIPTS)]
        out.append(LanguageProfile(
            f"s{i:02d}_{script}", alphabet,
            int(rng.integers(800, 10_000)),
            2.0 if script == "Hani" else float(rng.uniform(4.0, 8.0)),
            float(rng.uniform(0.8, 1.2)),
        ))
    return out


def _lexicon(p: LanguageProfile, seed: int) -> list[str]:
    rng = np.random.default_rng(derive_seed(seed, "lexicon", p.tag))
    alpha = np.array(list(p.alphabet))
    # skewed letter frequencies give BPE recurring bigrams to find
    letter_p = 1.0 / np.arange(1, len(alpha) + 1) ** p.letter_skew
    letter_p /= letter_p.sum()
    seen: set[str] = set()
    words: list[str] = []
    while len(words) < p.lexicon_size:
        n = 1 + rng.poisson(p.mean_word_len - 1)
        w = "".join(rng.choice(alpha, size=n, p=letter_p))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def _dialect(parent: list[str], p: LanguageProfile, seed: int) -> list[str]:
    rng = np.random.default_rng(derive_seed(seed, "dialect", p.tag))
    alpha = list(p.alphabet)
    out = []
    for w in parent[: p.lexicon_size]:
        if rng.random() < p.mutation:
            cut = int(rng.integers(0, len(w)))
            w = w[:cut] + "".join(rng.choice(alpha, size=int(rng.integers(1, 4))))
        out.append(w)
    return out


def _bursty_docs(p: LanguageProfile, n_bytes: int, seed: int) -> list[str]:
    rng = np.random.default_rng(derive_seed(seed, "bursty", p.tag))
    alpha = np.array(list(p.alphabet))
    lo, hi = p.words_per_doc
    docs: list[str] = []
    total = 0
    while total < n_bytes:
        words = ["".join(rng.choice(alpha, size=1 + rng.poisson(p.mean_word_len - 1)))
                 for _ in range(int(rng.integers(lo, hi + 1)))]
        picks = rng.permutation(np.repeat(np.arange(len(words)), p.burst))
        doc = " ".join(words[i] for i in picks)
        docs.append(doc)
        total += len(doc.encode("utf-8")) + 1
    return docs


def generate_language(p: LanguageProfile, n_bytes: int, seed: int,
                      parents: dict[str, LanguageProfile] | None = None) -> list[str]:
    """Documents (one line each) totalling at least n_bytes of UTF-8."""
    if p.burst:
        return _bursty_docs(p, n_bytes, seed)
    if p.dialect_of:
        parent = (parents or {}).get(p.dialect_of)
        if parent is None:
            raise ValueError(f"{p.tag}: parent language {p.dialect_of!r} not available")
        words = _dialect(_lexicon(parent, seed), p, seed)
    else:
        words = _lexicon(p, seed)
    rng = np.random.default_rng(derive_seed(seed, "synthetic", p.tag))
    lex = np.array(words, dtype=object)
    zipf = 1.0 / np.arange(1, len(lex) + 1) ** p.zipf
    zipf /= zipf.sum()
    lo, hi = p.words_per_doc
    docs: list[str] = []
    total = 0
    while total < n_bytes:
        lengths = rng.integers(lo, hi + 1, size=256)
        picks = rng.choice(len(lex), size=int(lengths.sum()), p=zipf)
        start = 0
        for n in lengths:
            doc = " ".join(lex[picks[start:start + n]])
            start += n
            docs.append(doc)
            total += len(doc.encode("utf-8")) + 1
            if total >= n_bytes:
                break
    return docs


def write_corpus(out_dir: str | Path, k: int, bytes_per_lang: int, seed: int) -> Path:
    """Write one <tag>.txt per language plus manifest.json; returns the manifest path."""
    from .corpus import ingest
    from .mixture import LanguageIndex

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    profs = profiles(k, seed)
    files = {}
    for p in profs:
        path = out / f"{p.tag}.txt"
        docs = generate_language(p, bytes_per_lang, seed, {q.tag: q for q in profs})
        path.write_text("\n".join(docs) + "\n", encoding="utf-8")
        files[p.tag] = path
    index = LanguageIndex(tuple(p.tag for p in profs))
    store = ingest(files, index)
    store.paths = [f"{p.tag}.txt" for p in profs]
    manifest = out / "manifest.json"
    m = store.manifest()
    m["generator"] = {"langs": k, "bytes_per_lang": bytes_per_lang, "seed": seed}
    manifest.write_text(json.dumps(m, indent=2) + "\n")
    return manifest
