"""Signal policies: MaxPressure, the composite reward and the adaptive agent."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tsa.contract import SET_PHASE, JunctionObservation, SignalAction
from tsa.policies.pressure import all_phase_pressures, phase_pressure


@dataclass(frozen=True)
class RewardWeights:
    w_pressure: float = 1.0
    w_queue: float = 1.0
    w_neighbor: float = 0.5

    def __post_init__(self):
        ws = (self.w_pressure, self.w_queue, self.w_neighbor)
        if min(ws) < 0:
            raise ValueError("reward weights must be nonnegative")
        if max(ws) == 0:
            raise ValueError("reward weights must not all be zero")


REWARD_TYPES = {
    "composite": RewardWeights(),
    "pressure_only": RewardWeights(1.0, 0.0, 0.0),
    "queue_only": RewardWeights(0.0, 1.0, 0.0),
}


def weights_for(reward_type: str) -> RewardWeights:
    try:
        return REWARD_TYPES[reward_type]
    except KeyError:
        raise ValueError(f"unknown reward_type {reward_type!r}") from None


@dataclass
class DecisionRecord:
    step: int
    junction_id: str
    action: SignalAction
    reward_after: float
    note: str = ""
    # phase in force after the action, and the observation bucket it was taken in
    phase: int | None = None
    bucket: tuple[int, ...] | None = None

    def __post_init__(self):
        if not math.isfinite(self.reward_after):
            raise ValueError("reward_after must be finite")

    def to_dict(self) -> dict:
        return {"step": self.step, "junction_id": self.junction_id, "action": self.action.to_dict(),
                "reward_after": self.reward_after, "note": self.note, "phase": self.phase,
                "bucket": list(self.bucket) if self.bucket is not None else None}

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionRecord":
        a = d["action"]
        act = SignalAction(a.get("junction", d["junction_id"]), a.get("kind", "hold"), a.get("phase"))
        bucket = tuple(d["bucket"]) if d.get("bucket") is not None else None
        return cls(d["step"], d["junction_id"], act, float(d["reward_after"]), d.get("note", ""),
                   d.get("phase"), bucket)


def _pressures(obs: JunctionObservation) -> dict[int, float]:
    return obs.pressure_per_phase or all_phase_pressures(obs)


def _greens(obs: JunctionObservation) -> list[int]:
    return list(obs.green_phases) or list(range(len(obs.phase_movements)))


def max_pressure_phase(obs: JunctionObservation) -> int:
    """Green phase with the highest pressure, lowest index on ties."""
    pressures = _pressures(obs)
    best, best_p = None, -math.inf
    for i in _greens(obs):
        p = pressures.get(i, 0.0)
        if p > best_p:
            best, best_p = i, p
    return obs.active_phase if best is None else best


def _action_for(obs: JunctionObservation, phase: int) -> SignalAction:
    if phase == obs.active_phase:
        return SignalAction.hold(obs.junction_id)
    return SignalAction.set_phase(obs.junction_id, phase)


def max_pressure_decide(obs: JunctionObservation, min_green: float = 0.0) -> SignalAction:
    """SetPhase on the max-pressure phase; Hold if it is already active.

    ``min_green`` holds the current phase until it has been active that long.
    """
    if obs.elapsed_in_phase < min_green and obs.active_phase in _greens(obs):
        return SignalAction.hold(obs.junction_id)
    return _action_for(obs, max_pressure_phase(obs))


def composite_reward(obs: JunctionObservation, w: RewardWeights | None = None) -> float:
    """Non-positive reward; 0 only for an empty neighbourhood on the best phase."""
    w = w or RewardWeights()
    pressures = _pressures(obs)
    greens = _greens(obs)
    best = max((pressures.get(i, 0.0) for i in greens), default=0.0)
    active = pressures.get(obs.active_phase, 0.0) if obs.phase_movements else 0.0
    deficit = max(0.0, best - active) if greens else 0.0
    return -(w.w_pressure * abs(deficit) + w.w_queue * obs.total_queue
             + w.w_neighbor * obs.neighbor_total_queue)


QUEUE_SCALE = 50


def queue_bucket(obs: JunctionObservation, scale: int = QUEUE_SCALE) -> tuple[int, ...]:
    """(total_queue decile on a 0..scale range, active phase, max-pressure phase).

    The max-pressure phase is part of the key so a bucket separates "the
    busy approach is already green" from "the busy approach is waiting";
    without it the two states alias and the memory cannot learn either.
    """
    decile = min(9, int(10 * obs.total_queue / scale))
    return (decile, obs.active_phase, max_pressure_phase(obs))


def _bucket_distance(a: tuple, b: tuple) -> tuple:
    # phase components must match before queue level matters
    mp_a = a[2] if len(a) > 2 else None
    mp_b = b[2] if len(b) > 2 else None
    return (mp_a != mp_b, a[1] != b[1], abs(a[0] - b[0]), b)


def _phase_after(rec: DecisionRecord) -> int | None:
    if rec.phase is not None:
        return rec.phase
    return rec.action.phase if rec.action.kind == SET_PHASE else None


def adaptive_agent_decide(obs: JunctionObservation, memory: list[DecisionRecord],
                          w: RewardWeights | None = None, explore_eps: float = 0.1,
                          seed: int = 0, rng: np.random.Generator | None = None,
                          min_green: float = 0.0) -> tuple[SignalAction, str]:
    """Pick a phase from action-reward memory, with try-better-action exploration.

    Exploitation looks up the nearest populated bucket (matching phases
    first, then the closest queue decile) and takes the phase with the best
    mean ``reward_after``.  Exploration picks the least-tried green phase
    in the current bucket.  An empty memory falls back to MaxPressure.
    """
    w = w or RewardWeights()
    greens = _greens(obs)
    if obs.elapsed_in_phase < min_green and obs.active_phase in greens:
        act = SignalAction.hold(obs.junction_id)
        return act, f"strategy: min-green-hold; action: hold; expected_reward: {composite_reward(obs, w):.3f}"
    if not memory:
        act = max_pressure_decide(obs)
        return act, (f"strategy: max-pressure-fallback; action: {_label(act, obs)}; "
                     f"expected_reward: {composite_reward(obs, w):.3f}")
    rng = rng if rng is not None else np.random.default_rng([seed, obs.step])
    here = queue_bucket(obs)
    if explore_eps > 0 and rng.random() < explore_eps:
        # least-tried phase in this bucket; the whole memory when the bucket is new
        same = [rec for rec in memory if rec.bucket == here] or memory
        tried = {i: 0 for i in greens}
        for rec in same:
            ph = _phase_after(rec)
            if ph in tried:
                tried[ph] += 1
        phase = min(greens, key=lambda i: (tried[i], i))
        act = _action_for(obs, phase)
        return act, f"strategy: try-better-action; action: {_label(act, obs)}; tried: {tried[phase]}"
    by_bucket: dict[tuple, list[DecisionRecord]] = {}
    for rec in memory:
        if rec.bucket is not None and _phase_after(rec) in greens:
            by_bucket.setdefault(rec.bucket, []).append(rec)
    if not by_bucket:
        act = max_pressure_decide(obs)
        return act, (f"strategy: max-pressure-fallback; action: {_label(act, obs)}; "
                     f"expected_reward: {composite_reward(obs, w):.3f}")
    nearest = min(by_bucket, key=lambda b: _bucket_distance(here, b))
    sums: dict[int, list[float]] = {}
    for rec in by_bucket[nearest]:
        sums.setdefault(_phase_after(rec), []).append(rec.reward_after)
    means = {ph: math.fsum(v) / len(v) for ph, v in sums.items()}
    phase = max(sorted(means), key=lambda ph: means[ph])
    act = _action_for(obs, phase)
    return act, (f"strategy: exploit-best-action; action: {_label(act, obs)}; "
                 f"expected_reward: {means[phase]:.3f}; bucket: {nearest}")


def _label(act: SignalAction, obs: JunctionObservation) -> str:
    return f"set_phase({act.phase})" if act.kind == SET_PHASE else f"hold({obs.active_phase})"


__all__ = [
    "DecisionRecord",
    "REWARD_TYPES",
    "RewardWeights",
    "adaptive_agent_decide",
    "composite_reward",
    "max_pressure_decide",
    "max_pressure_phase",
    "phase_pressure",
    "queue_bucket",
    "weights_for",
]
