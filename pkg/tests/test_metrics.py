"""The four prequential metrics and the per-step report."""
from __future__ import annotations

import numpy as np
import pytest

from proxystream.metrics import (
    ABSENT,
    METRIC_NAMES,
    MetricReport,
    cluster_rmse,
    entity_rmse,
    format_value,
    top_decile_f1,
    turnover_ape,
)


# -- RMSE pair -------------------------------------------------------------

def test_cluster_rmse_fixture():
    got = cluster_rmse(np.array([12.0, 16.0]), np.array([10.0, 20.0]))
    assert got == pytest.approx(np.sqrt(10.0))


def test_entity_rmse_basics():
    assert entity_rmse(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    assert entity_rmse(np.array([3.0]), np.array([0.0])) == 3.0
    assert entity_rmse(np.array([]), np.array([])) is None
    with pytest.raises(ValueError):
        entity_rmse(np.array([1.0]), np.array([1.0, 2.0]))


def test_error_cancellation_between_levels():
    # one cluster of two entities with truths 0 and 20, proxy prediction 10:
    # entity errors are +-10, the cluster-mean error is zero
    entity_truth = np.array([0.0, 20.0])
    inherited = np.array([10.0, 10.0])
    assert entity_rmse(inherited, entity_truth) == 10.0
    assert cluster_rmse(np.array([10.0]), np.array([entity_truth.mean()])) == 0.0


# -- top-decile F1 ---------------------------------------------------------

def test_f1_needs_ten_entities():
    n = 9
    assert top_decile_f1(np.zeros(n), np.zeros(n), np.zeros(n)) is None
    n = 10
    assert top_decile_f1(np.arange(n, dtype=float), np.zeros(n),
                         np.zeros(n)) is not None


def test_f1_perfect_and_disjoint():
    prev = np.arange(20.0)
    curr = np.zeros(20)          # drop equals previous outcome
    assert top_decile_f1(prev, curr, curr) == 1.0
    # predicted drops rank in exactly the opposite order
    pred = 2.0 * prev
    assert top_decile_f1(prev, curr, pred) == 0.0


def test_f1_half_overlap_fixture():
    # n=20 -> keep two; true top {19, 18}, predicted top {19, 17} -> F1 = 0.5
    prev = np.arange(20.0)
    curr = np.zeros(20)
    pred = curr.copy()
    pred[18] = prev[18]   # predicted drop 0 for entity 18
    pred[17] = -1.0       # predicted drop above everything else for 17
    got = top_decile_f1(prev, curr, pred)
    assert got == 0.5


def test_f1_ties_break_by_ascending_id():
    # all drops equal: the kept set is the lowest ids on both sides -> F1 1
    n = 10
    prev = np.full(n, 5.0)
    curr = np.zeros(n)
    assert top_decile_f1(prev, curr, curr) == 1.0
    # with reversed id labels the kept singleton follows ids, not positions
    ids = np.arange(n)[::-1]
    pred = curr.copy()
    got = top_decile_f1(prev, curr, pred, entity_ids=ids)
    assert got == 1.0  # same ties on both sides pick the same entity


def test_f1_is_shift_invariant_in_predictions():
    rng = np.random.default_rng(6)
    prev = rng.normal(size=30)
    curr = rng.normal(size=30)
    pred = rng.normal(size=30)
    base = top_decile_f1(prev, curr, pred)
    shifted = top_decile_f1(prev, curr, pred + 100.0)
    assert base == shifted


def test_f1_validates_lengths():
    with pytest.raises(ValueError):
        top_decile_f1(np.zeros(10), np.zeros(9), np.zeros(10))


# -- turnover APE ----------------------------------------------------------

def test_turnover_ape_fixture():
    got = turnover_ape(np.array([190.0]), np.array([200.0]))
    assert got == pytest.approx(5.0)


def test_turnover_ape_offsetting_errors_cancel():
    got = turnover_ape(np.array([105.0, 95.0]), np.array([100.0, 100.0]))
    assert got == 0.0


def test_turnover_ape_undefined_cases():
    assert turnover_ape(np.array([]), np.array([])) is None
    assert turnover_ape(np.array([5.0, -5.0]), np.array([10.0, -10.0])) is None
    with pytest.raises(ValueError):
        turnover_ape(np.array([1.0]), np.array([1.0, 2.0]))


# -- report ----------------------------------------------------------------

def test_report_unweighted_time_average():
    report = MetricReport()
    report.add_step(4, {"entity_rmse": 1.0, "top_decile_f1": None})
    report.add_step(5, {"entity_rmse": 3.0, "top_decile_f1": 0.5})
    report.add_step(6, {"entity_rmse": None, "top_decile_f1": 0.7})
    assert report.average("entity_rmse") == pytest.approx(2.0)
    assert report.average("top_decile_f1") == pytest.approx(0.6)
    assert report.average("turnover_ape") is None
    assert set(report.averages) == set(METRIC_NAMES)


def test_report_value_rows_order():
    report = MetricReport()
    report.add_step(2, {"entity_rmse": 1.5})
    report.add_step(3, {"cluster_rmse": 0.25})
    rows = report.value_rows()
    assert rows[0] == (2, "cluster_rmse", None)
    assert rows[1] == (2, "entity_rmse", 1.5)
    assert rows[4] == (3, "cluster_rmse", 0.25)
    assert len(rows) == 2 * len(METRIC_NAMES)


def test_format_value_serialization():
    assert format_value(None) == ABSENT == "NA"
    assert format_value(2.5) == "2.5"
    assert format_value(np.sqrt(10.0)) == repr(float(np.sqrt(10.0)))
