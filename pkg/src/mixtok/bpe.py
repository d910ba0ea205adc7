"""Byte-level BPE: training, encoding, decoding and the JSON tokenizer format.

Pre-tokenization splits on whitespace and glues one leading whitespace character to
the following word; merges never cross pre-token boundaries. Merge selection is the
globally most frequent adjacent pair, ties broken by the pair's byte sequences
(left, then right) in ascending order, so training needs no randomness.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import ValidationError

FORMAT_VERSION = 1
PRETOKENIZER = "whitespace_leading_space"
N_BYTES = 256

_PRETOKEN_RE = re.compile(r"\s?\S+|\s+(?=\s\S)|\s+")
_CACHE_LIMIT = 1 << 18


def pretokenize(text: str) -> list[str]:
    return _PRETOKEN_RE.findall(text)


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple[int, ...]
    source_bytes: int

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class SubwordTokenizer:
    merges: list[tuple[int, int]]
    metadata: dict = field(default_factory=dict)
    _vocab: list[bytes] = field(init=False, repr=False)
    _ranks: dict[tuple[int, int], int] = field(init=False, repr=False)
    _cache: dict[str, tuple[int, ...]] = field(init=False, repr=False)

    def __post_init__(self):
        self.merges = [(int(a), int(b)) for a, b in self.merges]
        vocab = [bytes([i]) for i in range(N_BYTES)]
        for i, (a, b) in enumerate(self.merges):
            new_id = N_BYTES + i
            if not (0 <= a < new_id and 0 <= b < new_id):
                raise ValidationError(
                    f"merges[{i}] = [{a}, {b}] references an id not defined before {new_id}")
            vocab.append(vocab[a] + vocab[b])
        self._vocab = vocab
        self._ranks = {pair: i for i, pair in enumerate(self.merges)}
        self._cache = {}

    @property
    def vocab_size(self) -> int:
        return N_BYTES + len(self.merges)

    def token_bytes(self, token_id: int) -> bytes:
        return self._vocab[token_id]

    def digest(self) -> str:
        return hashlib.sha1(json.dumps(self.merges).encode()).hexdigest()[:16]

    def _encode_word(self, word: str) -> tuple[int, ...]:
        ids = self._cache.get(word)
        if ids is not None:
            return ids
        seq = list(word.encode("utf-8"))
        ranks = self._ranks
        while len(seq) > 1:
            best = None
            best_rank = None
            for pair in zip(seq, seq[1:]):
                r = ranks.get(pair)
                if r is not None and (best_rank is None or r < best_rank):
                    best, best_rank = pair, r
            if best is None:
                break
            new_id = N_BYTES + best_rank
            a, b = best
            out = []
            i = 0
            n = len(seq)
            while i < n:
                if i + 1 < n and seq[i] == a and seq[i + 1] == b:
                    out.append(new_id)
                    i += 2
                else:
                    out.append(seq[i])
                    i += 1
            seq = out
        ids = tuple(seq)
        if len(self._cache) >= _CACHE_LIMIT:
            self._cache.clear()
        self._cache[word] = ids
        return ids

    def encode(self, text: str) -> TokenSequence:
        ids: list[int] = []
        for word in pretokenize(text):
            ids.extend(self._encode_word(word))
        return TokenSequence(tuple(ids), len(text.encode("utf-8")))

    def count_tokens(self, text: str) -> int:
        return sum(len(self._encode_word(w)) for w in pretokenize(text))

    def decode(self, seq: TokenSequence | Iterable[int]) -> str:
        ids = seq.ids if isinstance(seq, TokenSequence) else list(seq)
        vocab = self._vocab
        n = len(vocab)
        for i in ids:
            if not 0 <= i < n:
                raise ValidationError(f"unknown token id {i}")
        return b"".join([vocab[i] for i in ids]).decode("utf-8")

    def to_json(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "vocab_size": self.vocab_size,
            "merges": [list(m) for m in self.merges],
            "pretokenizer": PRETOKENIZER,
            "metadata": self.metadata,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True) + "\n")

    @classmethod
    def from_json(cls, obj) -> "SubwordTokenizer":
        if not isinstance(obj, dict):
            raise ValidationError("tokenizer file: top level must be an object")
        if obj.get("version") != FORMAT_VERSION:
            raise ValidationError(f"tokenizer file: unsupported version {obj.get('version')!r}")
        if obj.get("pretokenizer", PRETOKENIZER) != PRETOKENIZER:
            raise ValidationError(f"tokenizer file: pretokenizer {obj['pretokenizer']!r} not supported")
        merges = obj.get("merges")
        if not isinstance(merges, list) or not all(
                isinstance(m, list) and len(m) == 2 and all(isinstance(x, int) for x in m)
                for m in merges):
            raise ValidationError("tokenizer file: merges must be a list of [left_id, right_id]")
        vs = obj.get("vocab_size")
        if vs != N_BYTES + len(merges):
            raise ValidationError(
                f"tokenizer file: vocab_size {vs!r} != 256 + {len(merges)} merges")
        meta = obj.get("metadata", {})
        if not isinstance(meta, dict):
            raise ValidationError("tokenizer file: metadata must be an object")
        return cls([tuple(m) for m in merges], meta)

    @classmethod
    def load(cls, path: str | Path) -> "SubwordTokenizer":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_json(obj)


def word_counts(texts: Iterable[str]) -> Counter:
    counts: Counter = Counter()
    for t in texts:
        counts.update(pretokenize(t))
    return counts


def _check_train_args(counts: Counter, vocab_size: int) -> None:
    if vocab_size < N_BYTES + 1:
        raise ValidationError(f"vocab_size must be at least 257, got {vocab_size}")
    if not counts:
        raise ValidationError("training text is empty")


def train(texts: Iterable[str], vocab_size: int, seed: int = 0,
          metadata: dict | None = None) -> SubwordTokenizer:
    """Greedy BPE with incremental pair counts and a lazily invalidated max-heap."""
    counts = word_counts(texts)
    _check_train_args(counts, vocab_size)

    # distinct words in first-seen order; nothing below depends on this order
    words = [list(w.encode("utf-8")) for w in counts]
    freqs = list(counts.values())
    vocab = [bytes([i]) for i in range(N_BYTES)]

    pair_counts: dict[tuple[int, int], int] = defaultdict(int)
    where: dict[tuple[int, int], set[int]] = defaultdict(set)
    for wi, (w, f) in enumerate(zip(words, freqs)):
        for p in zip(w, w[1:]):
            pair_counts[p] += f
            where[p].add(wi)

    heap = [(-c, vocab[p[0]], vocab[p[1]], p) for p, c in pair_counts.items()]
    heapq.heapify(heap)

    merges: list[tuple[int, int]] = []
    n_merges = vocab_size - N_BYTES
    while len(merges) < n_merges:
        best = None
        while heap:
            neg, _, _, p = heapq.heappop(heap)
            if pair_counts.get(p, 0) == -neg:
                best = p
                break
        if best is None or pair_counts[best] < 2:
            break
        a, b = best
        new_id = N_BYTES + len(merges)
        merges.append(best)
        vocab.append(vocab[a] + vocab[b])

        touched: set[tuple[int, int]] = set()
        for wi in where.pop(best):
            w = words[wi]
            if len(w) < 2:
                continue
            f = freqs[wi]
            # cheap containment check before rebuilding the word
            found = False
            for i in range(len(w) - 1):
                if w[i] == a and w[i + 1] == b:
                    found = True
                    break
            if not found:
                continue
            for p in zip(w, w[1:]):
                pair_counts[p] -= f
                touched.add(p)
            out = []
            i = 0
            n = len(w)
            while i < n:
                if i + 1 < n and w[i] == a and w[i + 1] == b:
                    out.append(new_id)
                    i += 2
                else:
                    out.append(w[i])
                    i += 1
            words[wi] = out
            for p in zip(out, out[1:]):
                pair_counts[p] += f
                where[p].add(wi)
                touched.add(p)
        for p in touched:
            c = pair_counts[p]
            if c > 0:
                heapq.heappush(heap, (-c, vocab[p[0]], vocab[p[1]], p))
            else:
                del pair_counts[p]

    meta = dict(metadata or {})
    meta.update(seed=seed, requested_vocab_size=vocab_size,
                early_stop=len(merges) < n_merges)
    return SubwordTokenizer(merges, meta)


def train_bruteforce(texts: Iterable[str], vocab_size: int) -> list[tuple[int, int]]:
    """Reference trainer: recount every pair from scratch on every iteration."""
    counts = word_counts(texts)
    _check_train_args(counts, vocab_size)
    words = [(list(w.encode("utf-8")), f) for w, f in counts.items()]
    vocab = [bytes([i]) for i in range(N_BYTES)]
    merges = []
    while N_BYTES + len(merges) < vocab_size:
        tally: dict[tuple[int, int], int] = {}
        for w, f in words:
            for p in zip(w, w[1:]):
                tally[p] = tally.get(p, 0) + f
        if not tally:
            break
        best = min(tally, key=lambda p: (-tally[p], vocab[p[0]], vocab[p[1]], p))
        if tally[best] < 2:
            break
        new_id = N_BYTES + len(merges)
        merges.append(best)
        vocab.append(vocab[best[0]] + vocab[best[1]])
        merged = []
        for w, f in words:
            out, i = [], 0
            while i < len(w):
                if i + 1 < len(w) and (w[i], w[i + 1]) == best:
                    out.append(new_id)
                    i += 2
                else:
                    out.append(w[i])
                    i += 1
            merged.append((out, f))
        words = merged
    return merges
