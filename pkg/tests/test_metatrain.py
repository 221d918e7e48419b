import json
import re

import pytest
from hypothesis import given, settings, strategies as st

from iclparse.core import LogRecord, split_template
from iclparse.metatrain import TooFewExamples, emit, write_jsonl

DEMO = re.compile(r"Log: (.*)\nTemplate: (.*)")


def meta_set(n=12, datasets=("hdfs", "ssh")):
    out = []
    for i in range(n):
        ds = datasets[i % len(datasets)]
        out.append((LogRecord(i + 1, f"{ds} event {i} value {i * 7}", ds), split_template(f"{ds} event {i} value <*>")))
    return out


def parse_example(ex):
    """Split a prompt into its demonstration pairs and the query log."""
    pairs = DEMO.findall(ex.prompt_text)
    query = ex.prompt_text.rsplit("Log: ", 1)[1].removesuffix("\nTemplate:")
    return pairs, query


def test_six_shot_levels_in_order():
    examples = emit(meta_set(), max_shot=5, per_shot_count=4, seed=1)
    shots = [ex.shot for ex in examples]
    assert sorted(set(shots)) == [0, 1, 2, 3, 4, 5]
    assert shots == sorted(shots)
    assert all(shots.count(s) == 4 for s in range(6))


def test_default_per_shot_count_is_meta_set_size():
    assert len(emit(meta_set(8), max_shot=2)) == 3 * 8


def test_zero_shot_has_no_demonstrations():
    for ex in emit(meta_set(), max_shot=0, per_shot_count=5):
        pairs, _ = parse_example(ex)
        assert pairs == []
        assert ex.prompt_text.count("Log: ") == 1


def test_no_leakage_and_traceable():
    data = meta_set(20)
    known = {(r.content, t.text) for r, t in data}
    by_content = {r.content: (t.text, r.dataset) for r, t in data}
    for ex in emit(data, max_shot=5, per_shot_count=30, seed=3):
        pairs, query = parse_example(ex)
        assert len(pairs) == ex.shot
        assert query not in [log for log, _ in pairs]
        assert len(set(pairs)) == len(pairs)
        assert set(pairs) <= known
        assert by_content[query] == (ex.completion_text, ex.task_id)
        # demonstrations come from the query's own task
        assert all(by_content[log][1] == ex.task_id for log, _ in pairs)


def test_byte_identical_under_seed(tmp_path):
    a = write_jsonl(emit(meta_set(), 5, 10, seed=9), tmp_path / "a.jsonl").read_bytes()
    b = write_jsonl(emit(meta_set(), 5, 10, seed=9), tmp_path / "b.jsonl").read_bytes()
    c = write_jsonl(emit(meta_set(), 5, 10, seed=10), tmp_path / "c.jsonl").read_bytes()
    assert a == b
    assert a != c
    first = json.loads(a.splitlines()[0])
    assert set(first) == {"prompt", "completion", "shot", "task_id"}


def test_too_few_examples():
    with pytest.raises(TooFewExamples):
        emit(meta_set(5), max_shot=5)
    # enough overall, but no single task is big enough for 4-shot
    with pytest.raises(TooFewExamples):
        emit(meta_set(8, datasets=("a", "b")), max_shot=4)


@settings(max_examples=30)
@given(st.integers(2, 15), st.integers(0, 4), st.integers(0, 1000))
def test_shot_matches_demonstration_count(n, k, seed):
    if n <= k:
        return
    for ex in emit(meta_set(n, datasets=("x",)), k, per_shot_count=3, seed=seed):
        pairs, query = parse_example(ex)
        assert len(pairs) == ex.shot
        assert query not in {log for log, _ in pairs}
