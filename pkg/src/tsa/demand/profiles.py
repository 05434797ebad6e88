"""Demographic profile specs and sampling."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from tsa.errors import InvalidSpec

Range = tuple[int, int, float]

EDUCATION_LEVELS = ("primary", "high_school", "bachelor", "master", "doctorate")


@dataclass(frozen=True)
class ProfileSpec:
    age_ranges: tuple[Range, ...] = ((18, 29, 0.25), (30, 44, 0.30), (45, 59, 0.28), (60, 80, 0.17))
    gender_distribution: dict = field(default_factory=lambda: {"female": 0.5, "male": 0.5})
    education_distribution: dict = field(default_factory=lambda: {
        "primary": 0.1, "high_school": 0.35, "bachelor": 0.4, "master": 0.12, "doctorate": 0.03})
    # consumption level as ordinal deciles 1..10
    cons_ranges: tuple[Range, ...] = ((1, 3, 0.3), (4, 7, 0.5), (8, 10, 0.2))

    def validate(self) -> "ProfileSpec":
        for name in ("age_ranges", "cons_ranges"):
            ranges = [tuple(r) for r in getattr(self, name)]
            if not ranges:
                raise InvalidSpec(f"{name} is empty")
            for lo, hi, w in ranges:
                if lo > hi or w < 0:
                    raise InvalidSpec(f"{name}: bad range ({lo}, {hi}, {w})")
            ordered = sorted(ranges)
            for (_, hi, _), (lo2, _, _) in zip(ordered, ordered[1:]):
                if lo2 <= hi:
                    raise InvalidSpec(f"{name}: overlapping ranges")
            _check_weights(name, [w for _, _, w in ranges])
        for name in ("gender_distribution", "education_distribution"):
            dist = getattr(self, name)
            if not dist or any(p < 0 for p in dist.values()):
                raise InvalidSpec(f"{name}: probabilities must be nonnegative")
            _check_weights(name, list(dist.values()))
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["age_ranges"] = [list(r) for r in self.age_ranges]
        d["cons_ranges"] = [list(r) for r in self.cons_ranges]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProfileSpec":
        base = cls()
        try:
            return cls(
                age_ranges=tuple(tuple(r) for r in d.get("age_ranges", base.age_ranges)),
                gender_distribution=dict(d.get("gender_distribution", base.gender_distribution)),
                education_distribution=dict(d.get("education_distribution",
                                                  base.education_distribution)),
                cons_ranges=tuple(tuple(r) for r in d.get("cons_ranges", base.cons_ranges)),
            ).validate()
        except (TypeError, ValueError) as exc:
            raise InvalidSpec(str(exc)) from exc

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _check_weights(name: str, weights: list[float]) -> None:
    if abs(math.fsum(weights) - 1.0) > 1e-9:
        raise InvalidSpec(f"{name}: weights sum to {math.fsum(weights)}, expected 1")


@dataclass
class DrivingParams:
    desired_speed_factor: float = 1.0
    max_accel: float = 0.73
    comfort_decel: float = 1.67
    headway: float = 1.5
    min_gap: float = 2.0

    def __post_init__(self):
        if not 0.5 <= self.desired_speed_factor <= 1.5:
            raise InvalidSpec("desired_speed_factor outside [0.5, 1.5]")
        if min(self.max_accel, self.comfort_decel, self.headway, self.min_gap) <= 0:
            raise InvalidSpec("driving parameters must be positive")


@dataclass
class Person:
    id: str
    age: int
    gender: str
    education: str
    consumption: int
    mode: str = "car"
    origin: str | None = None
    destination: str | None = None
    departure_step: int | None = None
    route: list[str] = field(default_factory=list)
    driving: DrivingParams = field(default_factory=DrivingParams)


def _pick_ranges(rng: np.random.Generator, ranges, n: int) -> np.ndarray:
    weights = np.array([w for _, _, w in ranges], dtype=float)
    idx = rng.choice(len(ranges), size=n, p=weights / weights.sum())
    lows = np.array([lo for lo, _, _ in ranges])[idx]
    highs = np.array([hi for _, hi, _ in ranges])[idx]
    return rng.integers(lows, highs + 1)


def _pick_labels(rng: np.random.Generator, dist: dict, n: int) -> list[str]:
    labels = list(dist)
    p = np.array([dist[k] for k in labels], dtype=float)
    return [labels[i] for i in rng.choice(len(labels), size=n, p=p / p.sum())]


def generate_profiles(n: int, spec: ProfileSpec | None = None, seed: int = 0) -> list[Person]:
    """Sample ``n`` independent demographic profiles.

    Each field draws from its own seeded substream, so changing one
    distribution never perturbs the draws of another.
    """
    spec = (spec or ProfileSpec()).validate()
    if n < 0:
        raise InvalidSpec("n must be nonnegative")
    if n == 0:
        return []
    ages = _pick_ranges(np.random.default_rng([seed, 11]), spec.age_ranges, n)
    genders = _pick_labels(np.random.default_rng([seed, 12]), spec.gender_distribution, n)
    edus = _pick_labels(np.random.default_rng([seed, 13]), spec.education_distribution, n)
    cons = _pick_ranges(np.random.default_rng([seed, 14]), spec.cons_ranges, n)
    width = len(str(n - 1))
    return [Person(f"p{i:0{width}d}", int(ages[i]), genders[i], edus[i], int(cons[i]))
            for i in range(n)]


def personalized_driving(person: Person) -> DrivingParams:
    """Profile-conditioned driving parameters.

    Desired speed drops with age; acceleration scales with the consumption
    decile as a stand-in for vehicle class.
    """
    factor = min(1.5, max(0.5, 1.15 - 0.004 * (person.age - 20)))
    accel = 0.73 * (0.8 + 0.04 * person.consumption)
    return DrivingParams(desired_speed_factor=factor, max_accel=accel)
