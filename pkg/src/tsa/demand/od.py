"""Gravity-model origin-destination matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from tsa.errors import TooFewAois
from tsa.netmodel.model import Aoi, RoadNetwork

DISTANCE_FLOOR = 100.0
DEFAULT_BETA = 2.0


@dataclass
class OdMatrix:
    entries: dict[tuple[str, str], int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.entries.values())

    def pairs(self) -> list[tuple[str, str]]:
        """Expanded trip list in sorted pair order, one element per trip."""
        out = []
        for key in sorted(self.entries):
            out.extend([key] * self.entries[key])
        return out

    def to_dict(self) -> dict:
        return {"entries": [[o, d, n] for (o, d), n in sorted(self.entries.items())]}

    @classmethod
    def from_dict(cls, d: dict) -> "OdMatrix":
        return cls({(o, dd): int(n) for o, dd, n in d.get("entries", [])})


def gravity_weights(aois: list[Aoi], beta: float = DEFAULT_BETA) -> tuple[list[tuple[str, str]], np.ndarray]:
    """Unnormalized weights a_i * a_j / max(d_ij, floor)^beta over ordered pairs i != j."""
    pairs, weights = [], []
    for a in aois:
        for b in aois:
            if a.id == b.id:
                continue
            d = max(math.dist(a.position, b.position), DISTANCE_FLOOR)
            pairs.append((a.id, b.id))
            weights.append(a.attractiveness * b.attractiveness / d ** beta)
    return pairs, np.asarray(weights, dtype=float)


def generate_od_matrix(net: RoadNetwork, n_trips: int, seed: int = 0, beta: float = DEFAULT_BETA,
                       aoi_ids: list[str] | None = None) -> OdMatrix:
    """Allocate ``n_trips`` over AOI pairs with a seeded multinomial draw."""
    aois = sorted(net.aois if aoi_ids is None else [net.aoi_index[i] for i in aoi_ids],
                  key=lambda a: a.id)
    if len(aois) < 2:
        raise TooFewAois(f"need at least 2 AOIs, have {len(aois)}")
    if n_trips <= 0:
        return OdMatrix()
    pairs, w = gravity_weights(aois, beta)
    total = w.sum()
    p = w / total if total > 0 else np.full(len(w), 1.0 / len(w))
    counts = np.random.default_rng([seed, 31]).multinomial(n_trips, p)
    return OdMatrix({pairs[i]: int(c) for i, c in enumerate(counts) if c > 0})
