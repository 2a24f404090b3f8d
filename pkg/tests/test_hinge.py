"""Saw-tooth fitting, model selection by BIC, and event-timing labels."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chronoflow import SchemaError
from chronoflow.hinge import (
    EventTiming,
    HingeFit,
    classify_event_timing,
    fit_sawtooth,
    mg_timing_report,
    select_breakpoint_count,
)
from conftest import dataset_from_arrays


def sawtooth_points(noise=0.0, seed=0):
    """Two-hinge zigzag with breaks at -2.5 and -0.5, slopes -1, +1, -1."""
    x = np.linspace(-4.0, 1.0, 301)
    y = -(x + 4.0)
    y = np.where(x >= -2.5, -1.5 + (x + 2.5), y)
    y = np.where(x >= -0.5, 0.5 - (x + 0.5), y)
    if noise:
        y = y + np.random.default_rng(seed).normal(0.0, noise, x.size)
    return np.column_stack([x, y])


def reference_fit():
    return HingeFit(np.array([-2.5, -0.5]), np.array([-1.0, 1.0, -1.0]),
                    np.array([-4.0, 1.0, 0.0]), 0.0, 0.0)


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def test_fit_noiseless_sawtooth_exact():
    fit = fit_sawtooth(sawtooth_points(), n_breaks=2)
    np.testing.assert_allclose(fit.breakpoints, [-2.5, -0.5], atol=0.05)
    np.testing.assert_allclose(fit.segment_slopes, [-1.0, 1.0, -1.0],
                               atol=1e-6)
    assert fit.sse < 1e-12


def test_fit_zero_breaks_matches_ols():
    rng = np.random.default_rng(3)
    x = np.linspace(0.0, 5.0, 40)
    y = 2.0 * x - 1.0 + rng.normal(0.0, 0.3, 40)
    fit = fit_sawtooth(np.column_stack([x, y]), n_breaks=0)
    slope, intercept = np.polyfit(x, y, 1)
    assert fit.breakpoints.size == 0
    np.testing.assert_allclose(fit.segment_slopes, [slope], atol=1e-9)
    np.testing.assert_allclose(fit.segment_intercepts, [intercept], atol=1e-9)


def test_fit_sse_non_increasing_in_breaks():
    pts = sawtooth_points(noise=0.1, seed=1)
    sses = [fit_sawtooth(pts, k).sse for k in range(4)]
    assert all(a >= b - 1e-9 for a, b in zip(sses, sses[1:]))


def test_fit_predict_continuous_at_breaks():
    fit = fit_sawtooth(sawtooth_points(noise=0.1, seed=2), n_breaks=2)
    for b in fit.breakpoints:
        below = fit.predict(b - 1e-9)
        at = fit.predict(b)
        assert abs(float(at) - float(below)) < 1e-6


def test_fit_shift_equivariant():
    pts = sawtooth_points(noise=0.05, seed=4)
    shifted = pts + np.array([100.0, 0.0])
    a = fit_sawtooth(pts, n_breaks=2)
    b = fit_sawtooth(shifted, n_breaks=2)
    np.testing.assert_allclose(b.breakpoints, a.breakpoints + 100.0,
                               atol=1e-6)
    np.testing.assert_allclose(b.segment_slopes, a.segment_slopes, atol=1e-6)


def test_fit_errors():
    pts = sawtooth_points()
    with pytest.raises(SchemaError):
        fit_sawtooth(pts[:, 0], 1)
    with pytest.raises(SchemaError):
        fit_sawtooth(pts, -1)
    with pytest.raises(SchemaError):
        fit_sawtooth(pts, 1, restarts=0)
    with pytest.raises(SchemaError):
        fit_sawtooth(pts[:6], 2)  # needs 8 points for 2 breaks
    flat_x = np.column_stack([np.ones(20), np.arange(20.0)])
    with pytest.raises(SchemaError):
        fit_sawtooth(flat_x, 0)
    few = np.column_stack([np.repeat([0.0, 1.0, 2.0], 4),
                           np.arange(12.0)])
    with pytest.raises(SchemaError):
        fit_sawtooth(few, 2)  # one interior value cannot host two breaks


def test_hinge_fit_validation():
    with pytest.raises(SchemaError):
        HingeFit(np.array([0.0]), np.array([1.0]), np.array([0.0]), 0.0, 0.0)
    with pytest.raises(SchemaError):
        HingeFit(np.array([1.0, 0.5]), np.zeros(3), np.zeros(3), 0.0, 0.0)
    with pytest.raises(SchemaError):  # segments must meet at the break
        HingeFit(np.array([0.0]), np.array([1.0, 1.0]),
                 np.array([0.0, 5.0]), 0.0, 0.0)


# ---------------------------------------------------------------------------
# model selection
# ---------------------------------------------------------------------------

def test_select_recovers_two_breaks_under_noise():
    fit = select_breakpoint_count(sawtooth_points(noise=0.1, seed=0),
                                  max_breaks=4)
    assert fit.n_breaks == 2
    np.testing.assert_allclose(fit.breakpoints, [-2.5, -0.5], atol=0.2)


def test_select_prefers_line_for_linear_data():
    rng = np.random.default_rng(5)
    x = np.linspace(-2.0, 2.0, 120)
    y = 0.7 * x + 0.2 + rng.normal(0.0, 0.05, x.size)
    fit = select_breakpoint_count(np.column_stack([x, y]), max_breaks=3)
    assert fit.n_breaks == 0


def test_select_bends_for_curved_data():
    x = np.linspace(-1.0, 1.0, 101)
    fit = select_breakpoint_count(np.column_stack([x, x ** 2]), max_breaks=3)
    assert fit.n_breaks >= 1


def test_select_errors():
    with pytest.raises(SchemaError):
        select_breakpoint_count(sawtooth_points(), max_breaks=-1)


# ---------------------------------------------------------------------------
# event timing
# ---------------------------------------------------------------------------

def test_classify_labels_and_ties():
    fit = reference_fit()
    assert classify_event_timing(-3.0, fit).label == "before_first"
    assert classify_event_timing(-1.5, fit).label == "between"
    assert classify_event_timing(0.3, fit).label == "after_second"
    # a boundary value belongs to the segment on its right
    assert classify_event_timing(-2.5, fit).label == "between"
    assert classify_event_timing(-0.5, fit).label == "after_second"


def test_classify_margins_sign():
    timing = classify_event_timing(-1.0, reference_fit(), event_name="onset")
    assert timing.event_name == "onset"
    np.testing.assert_allclose(timing.margins, [1.5, -0.5])


def test_classify_needs_two_breaks():
    line = fit_sawtooth(sawtooth_points(), n_breaks=0)
    with pytest.raises(SchemaError):
        classify_event_timing(0.0, line)


@settings(max_examples=50, deadline=None)
@given(st.floats(-10.0, 10.0))
def test_classify_partitions_the_line(x):
    timing = classify_event_timing(x, reference_fit())
    b1, b2 = -2.5, -0.5
    expected = ("before_first" if x < b1
                else "between" if x < b2 else "after_second")
    assert timing.label == expected


def test_event_timing_label_validation():
    with pytest.raises(SchemaError):
        EventTiming("e", 0.0, "sideways", (0.0, 0.0))


# ---------------------------------------------------------------------------
# timing reports
# ---------------------------------------------------------------------------

def flat_series(score, n_points=2):
    times = np.arange(float(n_points))
    return times, np.full(n_points, float(score))


def test_report_counts_uniform_scores():
    rng = np.random.default_rng(8)
    scores = rng.uniform(-4.0, 1.0, 1000)
    data = dataset_from_arrays(
        {f"s{i:04d}": flat_series(v) for i, v in enumerate(scores)},
        ("score",))
    events = {f"s{i:04d}": 0.5 for i in range(1000)}
    report = mg_timing_report(data, events, reference_fit())
    counts = report.counts
    assert sum(counts.values()) == 1000
    assert report.censored == 0
    assert abs(counts["before_first"] / 1000 - 0.3) < 0.05
    assert abs(counts["between"] / 1000 - 0.4) < 0.05
    assert abs(counts["after_second"] / 1000 - 0.3) < 0.05


def test_report_interpolates_scores():
    times = np.array([0.0, 10.0])
    values = np.array([-4.0, 1.0])  # crosses both breaks on the way up
    data = dataset_from_arrays({"A": (times, values)}, ("score",))
    report = mg_timing_report(data, {"A": 5.0}, reference_fit())
    assert report.timings[0].label == "between"  # score(5) = -1.5
    assert report.counts["between"] == 1


def test_report_prefers_pc1_column():
    times = np.arange(2.0)
    values = np.column_stack([[5.0, 5.0], [-3.0, -3.0]])
    data = dataset_from_arrays({"A": (times, values)}, ("other", "pc1"))
    report = mg_timing_report(data, {"A": 0.5}, reference_fit())
    assert report.timings[0].label == "before_first"


def test_report_censors_and_extrapolates():
    data = dataset_from_arrays(
        {"with": flat_series(-3.0), "without": flat_series(0.0),
         "outside": flat_series(0.0)}, ("score",))
    events = {"with": 0.5, "outside": 99.0, "ghost": 0.0}
    report = mg_timing_report(data, events, reference_fit())
    assert report.censored == 1
    assert len(report.extrapolated) == 1
    assert report.extrapolated[0].event_name == "outside"
    assert sum(report.counts.values()) == 1
    data_dict = report.to_dict()
    assert data_dict["censored"] == 1
    assert len(data_dict["timings"]) == 1
