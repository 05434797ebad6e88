"""Speed/acceleration emission polynomial."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class CarbonCoeffs:
    c0: float = 0.4     # idle, g/s
    c1: float = 0.02
    c2: float = 2e-5
    c3: float = 0.3

    def __post_init__(self):
        if min(self.c0, self.c1, self.c2, self.c3) < 0:
            raise ValueError("carbon coefficients must be nonnegative")


ENGINE_TYPES = {
    "gasoline": CarbonCoeffs(),
    "diesel": CarbonCoeffs(0.45, 0.022, 1.8e-5, 0.33),
    "hybrid": CarbonCoeffs(0.1, 0.015, 2e-5, 0.2),
}


def carbon_rate(speed: float, accel: float, coeffs: CarbonCoeffs | str | None = None) -> float:
    """Emission rate in g/s: c0 + c1 v + c2 v^3 + c3 v max(a, 0)."""
    if speed < 0:
        raise ValueError("speed must be nonnegative")
    if isinstance(coeffs, str):
        coeffs = ENGINE_TYPES[coeffs]
    c = coeffs or ENGINE_TYPES["gasoline"]
    return c.c0 + c.c1 * speed + c.c2 * speed ** 3 + c.c3 * speed * max(accel, 0.0)
