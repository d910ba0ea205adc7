from collections import Counter

from mixtok.synthetic import LanguageProfile, generate_language, profiles, write_corpus


def test_generation_is_seeded():
    p = profiles(1)[0]
    assert generate_language(p, 5_000, 3) == generate_language(p, 5_000, 3)
    assert generate_language(p, 5_000, 3) != generate_language(p, 5_000, 4)


def test_reaches_byte_budget():
    for p in profiles(5):
        docs = generate_language(p, 20_000, 0, {q.tag: q for q in profiles(5)})
        assert sum(len(d.encode()) + 1 for d in docs) >= 20_000


def test_bursty_words_stay_inside_their_document():
    p = LanguageProfile("x_Zyyy", "0123456789abcdefghijklmnopqrstuvwxyz", 0, 8.0, 1.0, (2, 4), burst=20)
    docs = generate_language(p, 30_000, 1)
    seen: Counter = Counter()
    for d in docs:
        counts = Counter(d.split())
        assert set(counts.values()) == {20}
        seen.update(counts.keys())
    # a repeat across documents would need a random 8-character collision
    assert max(seen.values()) <= 2


def test_more_languages_cycle_scripts(tmp_path):
    tags = [p.tag for p in profiles(9)]
    assert len(set(tags)) == 9
    manifest = write_corpus(tmp_path, 6, 3_000, 0)
    assert manifest.exists()
