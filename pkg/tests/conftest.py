import json

import pytest

from citerec import synthetic

# Small training budgets so the full pipeline runs in seconds.
FAST_CONFIG = {
    "hd2v": {"dim": 16, "epochs": 2},
    "doc2vec": {"dim": 16, "epochs": 2, "infer_epochs": 5},
    "lda": {"num_topics": 5, "iterations": 10},
    "fusion": {"n": 20000, "k": 50},
}


@pytest.fixture
def fast_config(tmp_path):
    path = tmp_path / "fast.json"
    path.write_text(json.dumps({"corpus": str(synthetic.bundled_path()), **FAST_CONFIG}), encoding="utf-8")
    return path


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
