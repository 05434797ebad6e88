"""Departure-time curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tsa.errors import InvalidSpec

CURVE_KINDS = ("uniform", "gaussian_peak", "bimodal")


@dataclass(frozen=True)
class DepartureCurve:
    kind: str = "uniform"
    start_step: int = 0
    duration_step: int = 3600
    means: tuple[float, ...] = ()
    stds: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise InvalidSpec(f"unknown departure curve {self.kind!r}")
        if self.duration_step <= 0:
            raise InvalidSpec("duration_step must be positive")
        need = {"uniform": 0, "gaussian_peak": 1, "bimodal": 2}[self.kind]
        if len(self.means) < need or len(self.stds) < need:
            raise InvalidSpec(f"{self.kind} curve needs {need} means and stds")
        if self.kind == "bimodal" and len(self.weights) != len(self.means):
            raise InvalidSpec("bimodal curve needs one weight per mode")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "start_step": self.start_step,
                "duration_step": self.duration_step, "means": list(self.means),
                "stds": list(self.stds), "weights": list(self.weights)}

    @classmethod
    def from_dict(cls, d: dict) -> "DepartureCurve":
        return cls(d.get("kind", "uniform"), int(d.get("start_step", 0)),
                   int(d.get("duration_step", 3600)), tuple(d.get("means", ())),
                   tuple(d.get("stds", ())), tuple(d.get("weights", ())))


# (start_step, duration_step) of the standard analysis windows, seconds since midnight
TIME_WINDOWS = {
    "morning_peak": (27000, 3600),
    "evening_peak": (63000, 3600),
    "midnight": (0, 3600),
    "all_day": (0, 86400),
}


def curve_for_window(label: str, start_step: int | None = None,
                     duration_step: int | None = None) -> DepartureCurve:
    """Map a time-window label to its parametric curve.

    Peaks are Gaussian bumps centred in their window; anything else is
    uniform over the window.
    """
    default_start, default_dur = TIME_WINDOWS.get(label, (0, 3600))
    start = default_start if start_step is None else start_step
    dur = default_dur if duration_step is None else duration_step
    if label in ("morning_peak", "evening_peak"):
        return DepartureCurve("gaussian_peak", start, dur, (start + dur / 2,), (dur / 4,))
    return DepartureCurve("uniform", start, dur)


def sample_departures(n: int, curve: DepartureCurve, start_step: int | None = None,
                      duration_step: int | None = None, seed: int = 0) -> list[int]:
    """Draw ``n`` sorted integer departure steps inside the window."""
    start = curve.start_step if start_step is None else start_step
    dur = curve.duration_step if duration_step is None else duration_step
    if dur <= 0:
        raise InvalidSpec("duration_step must be positive")
    if n <= 0:
        return []
    rng = np.random.default_rng([seed, 21])
    if curve.kind == "uniform":
        steps = rng.integers(start, start + dur, size=n)
    else:
        if curve.kind == "gaussian_peak":
            comp = np.zeros(n, dtype=int)
        else:
            w = np.asarray(curve.weights, dtype=float)
            comp = rng.choice(len(w), size=n, p=w / w.sum())
        means = np.asarray(curve.means, dtype=float)[comp]
        stds = np.asarray(curve.stds, dtype=float)[comp]
        steps = np.rint(rng.normal(means, stds)).astype(np.int64)
        steps = np.clip(steps, start, start + dur - 1)
    return sorted(int(s) for s in steps)
