import os

import pytest
from hypothesis import HealthCheck, settings

from mixtok.config import PipelineConfig, Scale
from mixtok.corpus import ingest, split_corpus
from mixtok.mixture import LanguageIndex

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Three synthetic languages, 60 KB each, split and ready to materialize."""
    from mixtok.synthetic import write_corpus
    root = tmp_path_factory.mktemp("small")
    return write_corpus(root, 3, 60_000, seed=7)


@pytest.fixture(scope="session")
def small_store(small_corpus):
    from mixtok.corpus import load_manifest
    return split_corpus(load_manifest(small_corpus), 0.01, seed=1)


@pytest.fixture
def tiny_config(small_corpus, tmp_path):
    return PipelineConfig(corpus=str(small_corpus), proxy=Scale(12_000, 300), full=Scale(30_000, 360),
                          n_mixtures=20, n_fit=16, n_holdout=4, search_candidates=4_000, top_m=5,
                          out=str(tmp_path / "run"))


def write_lang_files(tmp_path, texts: dict[str, str]):
    paths = {}
    for tag, body in texts.items():
        p = tmp_path / f"{tag}.txt"
        p.write_bytes(body.encode("utf-8") if isinstance(body, str) else body)
        paths[tag] = p
    return ingest(paths, LanguageIndex(tuple(texts)))


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
