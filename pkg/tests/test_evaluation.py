import json
from fractions import Fraction
from types import SimpleNamespace

import pytest

from kgrag.agent import AggregatedEvidence
from kgrag.evaluation import (
    BenchmarkError,
    BenchmarkItem,
    compute_label_metrics,
    load_benchmark,
    parameter_accuracy,
    parse_benchmark,
    run_benchmark,
)

DEFECTS = ["porosity", "keyhole porosity", "lack of fusion", "cracking", "balling", "residual stress"]

# (gold size, predicted size) with every gold label predicted, so recall is 1
# and precision is gold/predicted: 3/5, 1/2, 2/3, 1/2, 1/2, 3/5, 1/2, 1/3, 3/5, 2/3
TABLE_ROWS = [(3, 5), (1, 2), (2, 3), (1, 2), (1, 2), (3, 5), (1, 2), (1, 3), (3, 5), (2, 3)]


class StubPipeline:
    def __init__(self, predictions):
        self.predictions = predictions

    def analyze(self, question):
        qtype, defects, params = self.predictions[question]
        agg = AggregatedEvidence(retained={"defect": list(defects), "parameter": list(params)})
        return SimpleNamespace(plan=SimpleNamespace(query_type=qtype), aggregated=agg)


def table_fixture():
    items, preds = [], {}
    for n, (g, p) in enumerate(TABLE_ROWS, start=1):
        q = f"question {n}"
        items.append(BenchmarkItem(f"Q{n}", q, "explanation", frozenset(DEFECTS[:g]), frozenset()))
        preds[q] = ("explanation", DEFECTS[:p], ())
    return items, StubPipeline(preds)


def test_row_arithmetic():
    m = compute_label_metrics({"porosity", "cracking", "balling"}, {"porosity", "cracking"})
    assert m.precision == pytest.approx(2 / 3) and m.recall == 1.0 and m.f1 == pytest.approx(0.8)
    assert round(m.precision, 3) == 0.667


def test_identity_and_empty_prediction():
    gold = {"porosity"}
    m = compute_label_metrics(gold, gold)
    assert (m.precision, m.recall, m.f1, m.accuracy) == (1.0, 1.0, 1.0, 1.0)
    m = compute_label_metrics(set(), gold)
    assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)


def test_empty_gold_rejected():
    with pytest.raises(BenchmarkError):
        compute_label_metrics({"porosity"}, set())


def test_parameter_accuracy():
    assert parameter_accuracy({"laser power"}, {"laser power", "scan speed"}) == 0.5
    assert parameter_accuracy(set(), set()) == 1.0


def test_table_shaped_means():
    items, pipe = table_fixture()
    report = run_benchmark(items, pipe)
    exact_p = sum(Fraction(g, p) for g, p in TABLE_ROWS) / len(TABLE_ROWS)
    exact_f1 = sum(2 * Fraction(g, p) / (Fraction(g, p) + 1) for g, p in TABLE_ROWS) / len(TABLE_ROWS)
    assert report.means["precision"] == pytest.approx(float(exact_p), abs=1e-12)
    assert report.means["f1"] == pytest.approx(float(exact_f1), abs=1e-12)
    assert abs(report.means["precision"] - 0.547) <= 1e-3
    assert report.means["recall"] == 1.0
    # the reference means average rows already rounded to 2 places, giving 0.703
    assert abs(report.means["f1"] - 0.703) <= 2e-3
    rounded_f1 = sum(round(r.metrics.f1, 2) for r in report.per_query) / len(TABLE_ROWS)
    assert abs(rounded_f1 - 0.703) <= 1e-3


def test_accuracy_mean():
    items = [BenchmarkItem("A", "a", "lookup", frozenset(["porosity"]), frozenset()),
             BenchmarkItem("B", "b", "lookup", frozenset(["porosity", "cracking"]), frozenset())]
    pipe = StubPipeline({"a": ("lookup", ["porosity"], ()), "b": ("lookup", ["porosity"], ())})
    report = run_benchmark(items, pipe)
    assert report.retrieval_accuracy == pytest.approx(0.75)


def test_parallel_matches_sequential():
    items, pipe = table_fixture()
    seq = run_benchmark(items, pipe).to_dict(include_timing=False)
    par = run_benchmark(items, pipe, parallel=4).to_dict(include_timing=False)
    assert seq == par


def test_report_outputs():
    items, pipe = table_fixture()
    report = run_benchmark(items, pipe)
    d = report.to_dict(include_timing=False)
    assert "latency_s" not in d["means"] and "latency_s" not in d["per_query"][0]
    assert json.loads(json.dumps(d)) == d
    table = report.table()
    assert table.splitlines()[0].startswith("Question ID") and "Latency (s)" in table
    assert table.splitlines()[-1].startswith("Mean")
    assert "Latency" not in report.table(include_timing=False)


def test_parse_benchmark_validation(vocab):
    good = {"qid": "Q1", "question": "Why?", "expected_type": "explanation",
            "gold_defects": ["porosity"], "gold_parameters": ["laser power"]}
    assert parse_benchmark([good], vocab)[0].gold_defects == frozenset(["porosity"])
    for bad in [
        [good, good],
        [{**good, "gold_defects": []}],
        [{**good, "gold_defects": ["warping"]}],
        [{**good, "expected_type": "poetry"}],
        [{**good, "question": " "}],
        [{"qid": "Q1"}],
        {"not": "a list"},
    ]:
        with pytest.raises(BenchmarkError):
            parse_benchmark(bad, vocab)


def test_bundled_benchmark_runs(fixture_pipeline):
    from kgrag.cli import default_benchmark_path

    items = load_benchmark(default_benchmark_path(), fixture_pipeline.vocab)
    assert len(items) == 10
    report = run_benchmark(items, fixture_pipeline)
    assert all(r.query_type == r.expected_type for r in report.per_query)
    assert 0.0 < report.means["f1"] <= 1.0
