import json
import math
from types import SimpleNamespace

import pytest
from hypothesis import given, settings, strategies as st

from tsa.contract import HOLD, SET_PHASE, JunctionObservation, SignalAction, VehicleAction, VehicleObservation
from tsa.engine import SimConfig, run
from tsa.errors import EndpointUnreachable
from tsa.netmodel import Movement, build_grid_network
from tsa.policies import (
    AdaptiveController,
    DecisionRecord,
    FixedTimeController,
    FusionController,
    LlmController,
    LlmEndpoint,
    MaxPressureController,
    MockTranscript,
    RewardWeights,
    VehicleAgentController,
    adaptive_agent_decide,
    build_controller,
    build_prompt,
    composite_reward,
    llm_decide,
    max_pressure_decide,
    phase_pressure,
    select_algorithm,
    vehicle_agent_decide,
)
from tsa.policies.signal import queue_bucket

M = [Movement("a", "x"), Movement("b", "y"), Movement("c", "z"), Movement("d", "w")]


def obs_with(up, down=None, active=0, jid="J", neighbor=0, elapsed=10.0):
    """Two-phase observation: phase 0 serves M[0], M[1]; phase 1 serves M[2], M[3]."""
    down = down or [0, 0, 0, 0]
    return JunctionObservation(
        jid, active_phase=active, elapsed_in_phase=elapsed,
        queue_per_movement=dict(zip(M, up)), downstream_queue=dict(zip(M, down)),
        phase_movements=[frozenset(M[:2]), frozenset(M[2:])], green_phases=[0, 1],
        total_queue=sum(up), neighbor_total_queue=neighbor)


# -- pressure / MaxPressure -------------------------------------------------

def test_phase_pressure_example():
    obs = obs_with([5, 3, 0, 0], [1, 0, 0, 0])
    assert phase_pressure(obs, 0) == 7
    assert phase_pressure(obs_with([0, 0, 0, 0]), 1) == 0


def test_boundary_out_road_contributes_nothing():
    obs = obs_with([4, 0, 0, 0])
    del obs.downstream_queue[M[0]]
    assert phase_pressure(obs, 0) == 4


def test_max_pressure_examples():
    obs = obs_with([5, 3, 0, 0], [1, 0, 2, 0], active=1)
    assert phase_pressure(obs, 1) == -2
    assert max_pressure_decide(obs) == SignalAction.set_phase("J", 0)
    assert max_pressure_decide(obs_with([0] * 4, active=1)) == SignalAction.set_phase("J", 0)
    assert max_pressure_decide(obs_with([0] * 4, active=0)).kind == HOLD


def test_max_pressure_min_green_holds():
    obs = obs_with([0, 0, 9, 9], active=0, elapsed=2.0)
    assert max_pressure_decide(obs, min_green=5).kind == HOLD
    assert max_pressure_decide(obs, min_green=1) == SignalAction.set_phase("J", 1)


queues = st.lists(st.integers(0, 30), min_size=4, max_size=4)


@given(up=queues, down=queues, k=st.integers(1, 50), active=st.integers(0, 1))
@settings(max_examples=200, deadline=None)
def test_max_pressure_scale_invariance(up, down, k, active):
    a = max_pressure_decide(obs_with(up, down, active))
    b = max_pressure_decide(obs_with([k * q for q in up], [k * q for q in down], active))
    assert a == b


# -- composite reward -------------------------------------------------------

def test_composite_reward_examples():
    assert composite_reward(obs_with([0] * 4)) == 0
    # deficit 7 (phase 0 pressure 7 vs active phase 1 at 0), queue 10, neighbour 4
    obs = obs_with([4, 3, 3, 0], [0, 0, 3, 0], active=1, neighbor=4)
    assert obs.total_queue == 10
    assert composite_reward(obs) == -19
    assert composite_reward(obs, RewardWeights(0, 1, 0)) == -10


def test_reward_weights_validation():
    with pytest.raises(ValueError):
        RewardWeights(0, 0, 0)
    with pytest.raises(ValueError):
        RewardWeights(-1, 1, 1)


@given(up=queues, down=queues, active=st.integers(0, 1), nb=st.integers(0, 40))
@settings(max_examples=200, deadline=None)
def test_composite_reward_nonpositive(up, down, active, nb):
    obs = obs_with(up, down, active, neighbor=nb)
    r = composite_reward(obs)
    assert r <= 0
    best = max(phase_pressure(obs, 0), phase_pressure(obs, 1))
    zero = sum(up) == 0 and nb == 0 and phase_pressure(obs, active) == best
    assert (r == 0) == zero


# -- adaptive agent ---------------------------------------------------------

def rec(phase, reward, bucket=(0, 0), step=0):
    return DecisionRecord(step, "J", SignalAction.set_phase("J", phase), reward, "", phase, bucket)


def test_adaptive_empty_memory_is_max_pressure():
    obs = obs_with([1, 0, 6, 2], active=0)
    act, note = adaptive_agent_decide(obs, [], explore_eps=0.5)
    assert act == max_pressure_decide(obs)
    assert "max-pressure-fallback" in note


def test_adaptive_exploits_best_mean():
    obs = obs_with([0] * 4, active=1)
    memory = [rec(0, -4), rec(0, -6), rec(1, -20), rec(1, -20)]
    for r in memory:
        r.bucket = queue_bucket(obs)
    act, note = adaptive_agent_decide(obs, memory, explore_eps=0.0)
    assert act == SignalAction.set_phase("J", 0)
    assert "expected_reward: -5.000" in note


def test_adaptive_try_better_action_picks_least_tried():
    obs = obs_with([0] * 4, active=0)
    memory = [rec(0, -1, queue_bucket(obs)) for _ in range(3)]
    act, note = adaptive_agent_decide(obs, memory, explore_eps=1.0)
    assert act == SignalAction.set_phase("J", 1)
    assert note.startswith("strategy: try-better-action")


@given(n_good=st.integers(1, 6), n_bad=st.integers(0, 6), good=st.integers(0, 1),
       base=st.floats(-100, -1), gap=st.floats(0.01, 50), decile=st.integers(0, 9))
@settings(max_examples=150, deadline=None)
def test_adaptive_strictly_dominant_action(n_good, n_bad, good, base, gap, decile):
    obs = obs_with([0] * 4, active=0)
    b = (decile, 0, 0)
    memory = [rec(good, base, b) for _ in range(n_good)] + \
             [rec(1 - good, base - gap, b) for _ in range(n_bad)]
    act, _ = adaptive_agent_decide(obs, memory, explore_eps=0.0)
    chosen = act.phase if act.kind == SET_PHASE else obs.active_phase
    assert chosen == good


def test_adaptive_controller_scores_decisions_at_next_epoch():
    net = build_grid_network(2, 2, gates=True)
    from tsa.scenarios import congested_grid

    sc = congested_grid(seed=1, rows=2, cols=2, duration=200)
    seen = []
    ctl = AdaptiveController(seed=3, on_record=seen.append)
    run(sc.net, sc.trips, SimConfig(duration_step=200, llm_control_interval=10), ctl)
    assert len(seen) == 4 * (200 // 10 - 1)
    assert all(r.reward_after <= 0 and math.isfinite(r.reward_after) for r in seen)
    assert ctl.notes and all("strategy:" in n for n in ctl.notes)
    assert net.signalized_junctions


# -- vehicle agent ----------------------------------------------------------

def vobs(d, green, t_g=None, limit=13.89, ttc=None):
    return VehicleObservation("v", "r", 8.0, limit, d, green, ttc, t_g)


def test_vehicle_agent_examples():
    assert vehicle_agent_decide(vobs(100, False, 10)).advised_speed == pytest.approx(10.0)
    assert vehicle_agent_decide(vobs(100, True, 0, ttc=20)).advised_speed == 13.89
    assert vehicle_agent_decide(vobs(10, False, 30)).advised_speed == pytest.approx(0.3 * 13.89)


@given(d=st.floats(0, 2000), t=st.one_of(st.none(), st.floats(0, 500)), green=st.booleans(),
       limit=st.floats(1, 40))
@settings(max_examples=200, deadline=None)
def test_vehicle_agent_range(d, t, green, limit):
    v = vehicle_agent_decide(vobs(d, green, t, limit)).advised_speed
    assert 0 <= v <= limit


def test_vehicle_action_nonnegative():
    with pytest.raises(ValueError):
        VehicleAction("v", -1)


# -- algorithm selection ----------------------------------------------------

def task(objective, algorithm=None, scenario="tsc"):
    return SimpleNamespace(objective=objective, algorithm=algorithm, scenario_name=scenario)


def test_select_algorithm_rules():
    assert select_algorithm(task("minimize average travel time"), llm_configured=False) == "max_pressure"
    assert select_algorithm(task("reduce congestion while maintaining safety"),
                            llm_configured=False) == "adaptive_agent"
    assert select_algorithm(task("reduce congestion while maintaining safety"),
                            llm_configured=True) == "llm"
    assert select_algorithm(task("use MaxPressure while maintaining safety")) == "max_pressure"
    assert select_algorithm(task("anything", algorithm="fixed_time")) == "fixed_time"


# -- LLM adapter ------------------------------------------------------------

def test_llm_mock_replay():
    obs = obs_with([0] * 4, active=0)
    mock = MockTranscript(['{"phase": 1}'])
    assert llm_decide([obs], mock=mock) == [SignalAction.set_phase("J", 1)]
    assert "Step 0" in mock.prompts[0] and '"junction": "J"' in mock.prompts[0]


def test_llm_malformed_falls_back_after_one_retry():
    obs = obs_with([0, 0, 5, 5], active=0)
    mock = MockTranscript(["not json", "[{\"phase\": 7}]"])
    incidents = []
    assert llm_decide([obs], mock=mock, incidents=incidents) == [max_pressure_decide(obs)]
    assert mock.cursor == 2 and len(incidents) == 1


def test_llm_retry_succeeds():
    obs = obs_with([0] * 4)
    mock = MockTranscript(["garbage", '```json\n{"actions": [{"junction": "J", "phase": 1}]}\n```'])
    incidents = []
    assert llm_decide([obs], mock=mock, incidents=incidents) == [SignalAction.set_phase("J", 1)]
    assert incidents == []


def test_llm_batch_alignment_by_junction_id():
    batch = [obs_with([0] * 4, jid=j) for j in ("J2", "J0", "J1")]
    reply = json.dumps([{"junction": "J1", "phase": 1}, {"junction": "J0", "phase": 0},
                        {"junction": "J2", "phase": 1}])
    acts = llm_decide(batch, mock=MockTranscript([reply]))
    assert [a.junction_id for a in acts] == ["J0", "J1", "J2"]
    assert [a.kind for a in acts] == [HOLD, SET_PHASE, SET_PHASE]


def test_llm_unreachable_endpoint_degrades():
    def down(endpoint, prompt):
        raise EndpointUnreachable("connection refused")

    obs = obs_with([0, 0, 3, 0])
    incidents = []
    acts = llm_decide([obs], LlmEndpoint("http://127.0.0.1:9"), incidents=incidents, post=down)
    assert acts == [max_pressure_decide(obs)] and len(incidents) == 1
    assert llm_decide([obs], incidents=incidents) == [max_pressure_decide(obs)]


@given(text=st.text(max_size=80))
@settings(max_examples=200, deadline=None)
def test_llm_never_raises_on_arbitrary_completions(text):
    obs = obs_with([1, 2, 3, 4])
    acts = llm_decide([obs], mock=MockTranscript([text]))
    assert len(acts) == 1 and acts[0].junction_id == "J"
    assert acts[0].kind == HOLD or acts[0].phase in (0, 1)


def test_mock_transcript_file(tmp_path):
    p = tmp_path / "t.json"
    p.write_text(json.dumps({"responses": [{"phase": 1}, "[{\"phase\": 0}]"]}))
    mock = MockTranscript.load(str(p))
    assert mock.complete("x") == '{"phase": 1}' and mock.complete("y") == '[{"phase": 0}]'
    assert mock.complete("z") == '[{"phase": 0}]'


def test_build_prompt_lists_every_junction():
    batch = [obs_with([0] * 4, jid=j) for j in ("A", "B")]
    text = build_prompt(batch)
    assert '"junction": "A"' in text and '"junction": "B"' in text


# -- controllers ------------------------------------------------------------

def test_build_controller_matrix():
    assert isinstance(build_controller("fixed_time"), FixedTimeController)
    assert isinstance(build_controller("max_pressure"), MaxPressureController)
    assert isinstance(build_controller("adaptive_agent"), AdaptiveController)
    assert isinstance(build_controller("llm"), LlmController)
    assert isinstance(build_controller("max_pressure", "auto_drive"), VehicleAgentController)
    fusion = build_controller("max_pressure", "fusion")
    assert isinstance(fusion, FusionController) and isinstance(fusion.signal, MaxPressureController)
    assert build_controller("max_pressure", "medical_service") is None
    with pytest.raises(ValueError):
        build_controller("mplight")


def test_fusion_run_emits_both_action_kinds():
    from tsa.scenarios import congested_grid

    sc = congested_grid(seed=2, rows=2, cols=2, duration=300)
    kinds = set()

    class Spy(FusionController):
        def decide(self, junctions, vehicles, step):
            acts = super().decide(junctions, vehicles, step)
            kinds.update(type(a).__name__ for a in acts)
            return acts

    _, rep = run(sc.net, sc.trips, SimConfig(duration_step=300, scenario_name="fusion"),
                 Spy(MaxPressureController()))
    assert kinds == {"SignalAction", "VehicleAction"}
    assert rep.tp > 0


def test_auto_drive_keeps_plan_rotation():
    from tsa.scenarios import congested_grid

    sc = congested_grid(seed=2, rows=2, cols=2, duration=200)
    cfg = SimConfig(duration_step=200, scenario_name="auto_drive")
    _, rep = run(sc.net, sc.trips, cfg, VehicleAgentController())
    assert rep.departed > 0


def test_llm_controller_falls_back_for_whole_run():
    from tsa.scenarios import congested_grid

    sc = congested_grid(seed=0, rows=2, cols=2, duration=100)
    ctl = LlmController(LlmEndpoint("http://127.0.0.1:9", timeout=0.01),
                        post=lambda e, p: (_ for _ in ()).throw(EndpointUnreachable("down")))
    trace, _ = run(sc.net, sc.trips, SimConfig(duration_step=100, llm_control_interval=10), ctl)
    assert len(trace.steps) == 100 and len(ctl.incidents) == 10
