import csv
import random

import pytest
from hypothesis import given, strategies as st

from iclparse.core import ParseResult, split_template
from iclparse.evaluator import LengthMismatch, evaluate, parsing_accuracy, template_accuracy, write_mismatches


def results_of(templates):
    return [ParseResult(i, f"line {i}", split_template(t), "llm") for i, t in enumerate(templates, start=1)]


def truth_of(templates):
    return [split_template(t) for t in templates]


def test_pa_three_of_four():
    produced = results_of(["a <*>", "b <*>", "c <*>", "wrong"])
    assert parsing_accuracy(produced, truth_of(["a <*>", "b <*>", "c <*>", "d <*>"])) == 0.75


def test_pta_half_rta_two_fifths():
    # truth has 5 groups; produced has 4, of which T1 and T2 are exact
    truth = ["T1", "T2", "T3", "T3", "T4", "T5"]
    produced = ["T1", "T2", "X", "X", "Y", "Y"]
    pta, rta, n_c, n_i, n_g = template_accuracy(results_of(produced), truth_of(truth))
    assert (n_c, n_i, n_g) == (2, 4, 5)
    assert (pta, rta) == (0.5, 0.4)


def test_subset_coverage_is_not_correct():
    truth = ["a <*>", "a <*>", "a <*>", "b"]
    produced = ["a <*>", "a <*>", "a 3", "b"]
    pta, rta, n_c, n_i, n_g = template_accuracy(results_of(produced), truth_of(truth))
    assert n_c == 1  # only "b"; "a <*>" covers lines {1,2} not {1,2,3}
    assert (n_i, n_g) == (3, 2)


def test_whitespace_difference_counts_as_correct():
    produced = results_of(["a  <*>  b "])
    assert parsing_accuracy(produced, truth_of(["a <*> b"])) == 1.0
    assert template_accuracy(produced, truth_of(["a <*> b"]))[:2] == (1.0, 1.0)


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        parsing_accuracy(results_of(["a"]), truth_of(["a", "b"]))
    with pytest.raises(LengthMismatch):
        template_accuracy(results_of(["a", "b"]), truth_of(["a"]))


def test_report_and_mismatch_dump(tmp_path):
    produced = results_of(["a <*>", "oops"])
    truth = truth_of(["a <*>", "b <*>"])
    report = evaluate(produced, truth, timings={"total_s": 1.5}, cache_stats={"misses": 2})
    assert report.pa == 0.5 and report.total_lines == 2
    assert "PTA" in report.table() and "time.total_s" in report.table()
    assert write_mismatches(produced, truth, tmp_path / "m.csv") == 1
    rows = list(csv.reader(open(tmp_path / "m.csv")))
    assert rows == [["LineId", "Content", "Produced", "Truth"], ["2", "line 2", "oops", "b <*>"]]


labels = st.lists(st.sampled_from(["a <*>", "b", "c <*> d", "e"]), min_size=1, max_size=30)


@given(labels)
def test_exact_parse_gives_perfect_template_scores(truth):
    produced = results_of(truth)
    assert parsing_accuracy(produced, truth_of(truth)) == 1.0
    assert template_accuracy(produced, truth_of(truth))[:2] == (1.0, 1.0)


@given(labels, st.randoms(use_true_random=False))
def test_template_scores_are_permutation_invariant(truth, rnd):
    noisy = [t if rnd.random() < 0.6 else rnd.choice(["a <*>", "x", "b"]) for t in truth]
    produced, gold = results_of(noisy), truth_of(truth)
    pairs = list(zip(produced, gold))
    rnd.shuffle(pairs)
    assert template_accuracy([p for p, _ in pairs], [g for _, g in pairs]) == template_accuracy(produced, gold)


@given(labels, st.randoms(use_true_random=False))
def test_counts_are_bounded(truth, rnd):
    noisy = [rnd.choice(["a <*>", "b", "z"]) for _ in truth]
    pta, rta, n_c, n_i, n_g = template_accuracy(results_of(noisy), truth_of(truth))
    assert 0 <= n_c <= min(n_i, n_g)
    assert pta == n_c / n_i and rta == n_c / n_g
