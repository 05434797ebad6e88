"""Online controllers wrapping the decision functions for the engine."""

from __future__ import annotations

from collections import deque

import numpy as np

from tsa.contract import Controller, SignalAction
from tsa.policies.llm import LlmEndpoint, MockTranscript, llm_decide
from tsa.policies.selection import signal_control_enabled, vehicle_agent_enabled
from tsa.policies.signal import (
    DecisionRecord,
    RewardWeights,
    adaptive_agent_decide,
    composite_reward,
    max_pressure_decide,
    queue_bucket,
    weights_for,
)
from tsa.policies.vehicle import vehicle_agent_decide

MIN_GREEN = 5.0


class FixedTimeController(Controller):
    """Replays each junction's plan rotation, one decision per step."""

    interval = 1

    def reset(self, net) -> None:
        self._durations = {j.id: [p.duration for p in j.signal_plan.phases]
                           for j in net.junctions if j.signal_plan is not None}

    def decide(self, junctions, vehicles, step):
        out = []
        for obs in junctions:
            durs = self._durations[obs.junction_id]
            if obs.elapsed_in_phase >= durs[obs.active_phase] - 1e-9:
                out.append(SignalAction.set_phase(obs.junction_id, (obs.active_phase + 1) % len(durs)))
            else:
                out.append(SignalAction.hold(obs.junction_id))
        return out


class MaxPressureController(Controller):
    def __init__(self, min_green: float = MIN_GREEN, interval: int | None = None):
        self.min_green = min_green
        self.interval = interval

    def decide(self, junctions, vehicles, step):
        return [max_pressure_decide(o, self.min_green) for o in junctions]


class AdaptiveController(Controller):
    """Composite-reward agent with per-junction action-reward memory.

    A decision's ``reward_after`` is the composite reward observed at the
    junction's next epoch.  ``on_record`` receives each completed record,
    which is how a session store mirrors the memory.
    """

    def __init__(self, weights: RewardWeights | None = None, explore_eps: float = 0.1,
                 seed: int = 0, min_green: float = MIN_GREEN, memory_size: int = 2000,
                 interval: int | None = None, on_record=None):
        self.weights = weights or RewardWeights()
        self.explore_eps = explore_eps
        self.seed = seed
        self.min_green = min_green
        self.memory_size = memory_size
        self.interval = interval
        self.on_record = on_record

    def reset(self, net) -> None:
        self.memory: dict[str, deque[DecisionRecord]] = {}
        self._pending: dict[str, DecisionRecord] = {}
        self.notes: list[str] = []
        self._rng = np.random.default_rng([self.seed, 71])

    def decide(self, junctions, vehicles, step):
        out = []
        for obs in junctions:
            jid = obs.junction_id
            mem = self.memory.setdefault(jid, deque(maxlen=self.memory_size))
            prev = self._pending.pop(jid, None)
            if prev is not None:
                prev.reward_after = composite_reward(obs, self.weights)
                mem.append(prev)
                if self.on_record is not None:
                    self.on_record(prev)
            act, note = adaptive_agent_decide(obs, list(mem), self.weights, self.explore_eps,
                                              rng=self._rng, min_green=self.min_green)
            phase = act.phase if act.phase is not None else obs.active_phase
            self._pending[jid] = DecisionRecord(step, jid, act, 0.0, note, phase, queue_bucket(obs))
            self.notes.append(f"[{step}] {jid} {note}")
            out.append(act)
        return out


class VehicleAgentController(Controller):
    controls_signals = False
    observes_vehicles = True

    def __init__(self, interval: int | None = None):
        self.interval = interval

    def decide(self, junctions, vehicles, step):
        return [vehicle_agent_decide(v) for v in vehicles]


class FusionController(Controller):
    """Signal controller and vehicle agent emitting one combined batch."""

    observes_vehicles = True

    def __init__(self, signal: Controller, interval: int | None = None):
        self.signal = signal
        self.interval = interval or signal.interval

    def reset(self, net) -> None:
        self.signal.reset(net)

    def decide(self, junctions, vehicles, step):
        return list(self.signal.decide(junctions, [], step)) + \
            [vehicle_agent_decide(v) for v in vehicles]

    def drain_incidents(self) -> list[str]:
        return getattr(self.signal, "drain_incidents", lambda: [])()


class LlmController(Controller):
    def __init__(self, endpoint: LlmEndpoint | None = None, mock: MockTranscript | None = None,
                 retries: int = 1, interval: int | None = None, post=None):
        self.endpoint = endpoint
        self.mock = mock
        self.retries = retries
        self.interval = interval
        self.post = post
        self.incidents: list[str] = []
        self._fresh: list[str] = []

    def decide(self, junctions, vehicles, step):
        kwargs = {"post": self.post} if self.post is not None else {}
        actions = llm_decide(junctions, self.endpoint, self.mock, self.retries, self._fresh, **kwargs)
        self.incidents.extend(self._fresh)
        return actions

    def drain_incidents(self) -> list[str]:
        fresh, self._fresh = self._fresh, []
        return fresh


class TargetedController(Controller):
    """Runs ``inner`` on ``targets`` only; every other junction keeps its plan.

    Decisions are taken every step so the plan rotation of the untargeted
    junctions stays exact; ``inner`` is consulted every ``inner_interval``
    steps and its targets hold in between.
    """

    interval = 1

    def __init__(self, inner: Controller, targets, inner_interval: int = 5):
        self.inner = inner
        self.targets = frozenset(targets)
        self.inner_interval = max(1, int(inner.interval or inner_interval))
        self._plan = FixedTimeController()
        self._start = None

    def reset(self, net) -> None:
        self._plan.reset(net)
        self.inner.reset(net)
        self._start = None

    def decide(self, junctions, vehicles, step):
        if self._start is None:
            self._start = step
        mine = [o for o in junctions if o.junction_id in self.targets]
        rest = [o for o in junctions if o.junction_id not in self.targets]
        out = list(self._plan.decide(rest, [], step))
        if (step - self._start) % self.inner_interval == 0:
            out.extend(self.inner.decide(mine, [], step))
        else:
            out.extend(SignalAction.hold(o.junction_id) for o in mine)
        return out

    def drain_incidents(self) -> list[str]:
        return getattr(self.inner, "drain_incidents", lambda: [])()


def build_controller(algorithm: str = "fixed_time", scenario_name: str = "tsc",
                     reward_type: str = "composite", seed: int = 0, explore_eps: float = 0.1,
                     endpoint: LlmEndpoint | None = None, mock: MockTranscript | None = None
                     ) -> Controller | None:
    """Controller for an (algorithm, scenario) pair; None leaves the plans running."""
    if scenario_name == "medical_service":
        return None
    signal: Controller | None = None
    if signal_control_enabled(scenario_name):
        if algorithm in ("fixed_time", "none", None):
            signal = FixedTimeController()
        elif algorithm == "max_pressure":
            signal = MaxPressureController()
        elif algorithm == "adaptive_agent":
            signal = AdaptiveController(weights_for(reward_type), explore_eps, seed)
        elif algorithm == "llm":
            signal = LlmController(endpoint or LlmEndpoint.from_env(), mock)
        else:
            raise ValueError(f"unknown algorithm {algorithm!r}")
    if vehicle_agent_enabled(scenario_name):
        if signal is None:
            return VehicleAgentController()
        return FusionController(signal)
    return signal
