"""Movement pressure, the score MaxPressure ranks phases by."""

from __future__ import annotations

from tsa.contract import JunctionObservation


def phase_pressure(obs: JunctionObservation, phase: int) -> float:
    """Sum over the phase's movements of upstream minus downstream queue."""
    total = 0.0
    for m in obs.phase_movements[phase]:
        total += obs.queue_per_movement.get(m, 0) - obs.downstream_queue.get(m, 0)
    return total


def all_phase_pressures(obs: JunctionObservation) -> dict[int, float]:
    return {i: phase_pressure(obs, i) for i in range(len(obs.phase_movements))}
