import math

import pytest
from hypothesis import given, settings, strategies as st

from tsa.engine.trace import SimTrace, StepRecord, VehicleRecord
from tsa.errors import DegenerateBoard
from tsa.metrics import CarbonCoeffs, Leaderboard, MetricsReport, carbon_rate, compute_metrics, mrr


def step(t, dep, fin, q=0, carbon=0.0, eta=0.0):
    return StepRecord(t, dep, fin, dep - fin, q, (q,), carbon, eta, 0.0, 0.0)


def test_carbon_example():
    assert carbon_rate(10, 0) == pytest.approx(0.62)
    assert carbon_rate(0, 3) == pytest.approx(0.4)
    assert carbon_rate(10, 1) == pytest.approx(0.62 + 3.0)
    assert carbon_rate(10, -2) == pytest.approx(0.62)
    assert carbon_rate(10, 0, "hybrid") < carbon_rate(10, 0, "diesel")
    with pytest.raises(ValueError):
        carbon_rate(-1, 0)
    with pytest.raises(ValueError):
        CarbonCoeffs(c0=-1)


@given(v=st.floats(0, 60), a=st.floats(-9, 3))
def test_carbon_at_least_idle(v, a):
    assert carbon_rate(v, a) >= CarbonCoeffs().c0


def test_empty_trace_is_zero_report():
    assert compute_metrics(SimTrace()) == MetricsReport()
    assert compute_metrics(None).tv == 0


def test_two_vehicle_att_and_delta_eta():
    vehicles = {"a": VehicleRecord("a", 0, 130, 100.0, 1000.0),
                "b": VehicleRecord("b", 10, 120, 100.0, 1000.0)}
    steps = [step(t, min(2, 1 + (t >= 10)), (t > 120) + (t > 130)) for t in range(140)]
    rep = compute_metrics(SimTrace(("J",), steps, vehicles, 2, 1.0, 140))
    assert rep.att_finished == pytest.approx(120.0)
    assert rep.delta_eta == pytest.approx(-20.0)
    assert rep.tp == 2 and rep.tv == 0


def test_aql_tce_ace():
    steps = [step(0, 1, 0, q=2, carbon=1.0), step(1, 2, 0, q=4, carbon=3.0)]
    vehicles = {v: VehicleRecord(v, 0, None, 10.0, 100.0) for v in "ab"}
    rep = compute_metrics(SimTrace(("J",), steps, vehicles, 2, 1.0, 2))
    assert rep.aql == 3.0 and rep.tce == 4.0 and rep.ace == 2.0
    assert rep.tv_series == [1, 2] and rep.att_finished == 0.0


def test_report_exports():
    rep = MetricsReport([1, 2], 1, 5.0, 10.0, 0.5, -1.0, 3.0, 1.5, 2)
    assert rep.to_csv().splitlines()[0] == "ATT-f,TV,AQL,ΔETA,ACE,ETA,TCE,TP"
    assert '"tv": 2' in rep.to_json()
    assert "tv_series" not in rep.to_dict(series=False)


@st.composite
def traces(draw):
    n = draw(st.integers(1, 8))
    horizon = draw(st.integers(1, 60))
    vehicles, events = {}, []
    for i in range(n):
        dep = draw(st.integers(0, horizon - 1))
        ff = draw(st.floats(1, 30))
        dur = draw(st.one_of(st.none(), st.integers(int(math.ceil(ff)), 80)))
        fin = None if dur is None or dep + dur > horizon else dep + dur
        vehicles[f"v{i}"] = VehicleRecord(f"v{i}", dep, fin, ff, 100.0)
    steps = []
    for t in range(horizon):
        dep = sum(v.departure_step <= t for v in vehicles.values())
        fin = sum(v.finish_step is not None and v.finish_step <= t for v in vehicles.values())
        steps.append(step(t, dep, fin, draw(st.integers(0, 5)), draw(st.floats(0, 10))))
    return SimTrace(("J",), steps, vehicles, n, 1.0, horizon)


@given(traces())
@settings(max_examples=100, deadline=None)
def test_metric_identities(trace):
    rep = compute_metrics(trace)
    assert rep.tp <= rep.departed
    assert rep.ace * max(1, rep.departed) == pytest.approx(rep.tce, rel=1e-9, abs=1e-12)
    assert all(r.tv == r.departed_cum - r.finished_cum for r in trace.steps)
    assert rep.delta_eta <= 1e-9


def board(rows, dirs):
    names = [f"m{i}" for i in range(len(rows))]
    return Leaderboard(names, [(f"k{j}", d) for j, d in enumerate(dirs)], rows)


def test_mrr_examples():
    scores = mrr(Leaderboard(["A", "B"], [("x", "lower_better"), ("y", "higher_better")],
                             [[1.0, 10.0], [2.0, 20.0]]))
    assert scores == {"A": 0.75, "B": 0.75}
    dom = mrr(Leaderboard(["A", "B"], [("x", "lower_better"), ("y", "higher_better")],
                          [[1.0, 30.0], [2.0, 20.0]]))
    assert dom["A"] == 1.0 and dom["B"] == 0.5
    tie = mrr(Leaderboard(["A", "B"], [("x", "lower_better")], [[1.0], [1.0]]))
    assert tie == {"A": 1 / 1.5, "B": 1 / 1.5}


def test_mrr_missing_cells_and_degenerate():
    scores = mrr(Leaderboard(["A", "B", "C"], [("x", "lower_better"), ("y", "lower_better")],
                             [[1.0, None], [2.0, 1.0], [3.0, 2.0]]))
    assert scores["A"] == 1.0 and scores["B"] == pytest.approx((0.5 + 1.0) / 2)
    with pytest.raises(DegenerateBoard):
        mrr(Leaderboard(["A"], [("x", "lower_better")], [[1.0]]))
    with pytest.raises(ValueError):
        Leaderboard(["A"], [("x", "sideways")], [[1.0]])


def test_leaderboard_from_reports():
    a = MetricsReport([3], 10, aql=1.0, att_finished=50.0)
    b = MetricsReport([5], 8, aql=2.0, att_finished=60.0)
    lb = Leaderboard.from_reports({"a": a, "b": b})
    assert lb.to_csv().splitlines()[0].endswith(",MRR")
    assert mrr(lb)["a"] > mrr(lb)["b"]


cells = st.floats(-100, 100, allow_nan=False)


@given(data=st.data(), m=st.integers(2, 5), k=st.integers(1, 4))
@settings(max_examples=150, deadline=None)
def test_mrr_properties(data, m, k):
    rows = [[data.draw(cells) for _ in range(k)] for _ in range(m)]
    dirs = [data.draw(st.sampled_from(["higher_better", "lower_better"])) for _ in range(k)]
    scores = mrr(board(rows, dirs))
    assert all(0 < s <= 1 for s in scores.values())
    perm = data.draw(st.permutations(range(m)))
    permuted = Leaderboard([f"m{i}" for i in perm], [(f"k{j}", d) for j, d in enumerate(dirs)],
                           [rows[i] for i in perm])
    assert mrr(permuted) == pytest.approx(scores)
    # a method strictly worse than everyone on every metric
    worst = [(min(r[j] for r in rows) - 1) if d == "higher_better" else (max(r[j] for r in rows) + 1)
             for j, d in enumerate(dirs)]
    grown = mrr(board(rows + [worst], dirs))
    for name, s in scores.items():
        assert grown[name] == pytest.approx(s)
