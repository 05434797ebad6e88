"""Recorded simulation series and their canonical export."""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field


@dataclass
class StepRecord:
    step: int
    departed_cum: int
    finished_cum: int
    tv: int
    queue_total: int
    junction_queues: tuple[int, ...]
    carbon: float
    eta: float
    speed_sum: float
    accel_sum: float


@dataclass
class VehicleRecord:
    vehicle_id: str
    departure_step: int
    finish_step: int | None
    free_flow_time: float
    route_length: float


@dataclass
class SimTrace:
    junction_ids: tuple[str, ...] = ()
    steps: list[StepRecord] = field(default_factory=list)
    vehicles: dict[str, VehicleRecord] = field(default_factory=dict)
    total_trips: int = 0
    dt: float = 1.0
    end_step: int = 0
    # optional per-step (vehicle id, speed, accel) samples
    vehicle_states: list[list[tuple[str, float, float]]] | None = None

    @property
    def departed(self) -> int:
        return len(self.vehicles)

    @property
    def finished(self) -> list[VehicleRecord]:
        return [v for v in self.vehicles.values() if v.finish_step is not None]

    def columns(self) -> list[str]:
        return (["step", "departed_cum", "finished_cum", "tv", "queue_total"]
                + [f"q:{j}" for j in self.junction_ids]
                + ["carbon", "eta", "speed_sum", "accel_sum"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns()) + "\n")
        for r in self.steps:
            cells = [str(r.step), str(r.departed_cum), str(r.finished_cum), str(r.tv),
                     str(r.queue_total), *map(str, r.junction_queues),
                     repr(r.carbon), repr(r.eta), repr(r.speed_sum), repr(r.accel_sum)]
            buf.write(",".join(cells) + "\n")
        buf.write("#vehicles\n")
        for vid in sorted(self.vehicles):
            v = self.vehicles[vid]
            finish = "" if v.finish_step is None else str(v.finish_step)
            buf.write(f"{vid},{v.departure_step},{finish},{v.free_flow_time!r},{v.route_length!r}\n")
        return buf.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.to_csv().encode()).hexdigest()

    def summary(self) -> dict:
        return {"steps": len(self.steps), "departed": self.departed,
                "finished": len(self.finished), "total_trips": self.total_trips,
                "end_step": self.end_step, "hash": self.digest()}

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)

    @classmethod
    def from_csv(cls, text: str, dt: float = 1.0) -> "SimTrace":
        """Inverse of ``to_csv``; float cells were written with repr so values are exact."""
        lines = text.splitlines()
        if not lines or not lines[0].startswith("step,"):
            raise ValueError("not a trace CSV")
        header = lines[0].split(",")
        jids = tuple(h[2:] for h in header if h.startswith("q:"))
        nq = len(jids)
        trace = cls(junction_ids=jids, dt=dt)
        i = 1
        while i < len(lines) and lines[i] != "#vehicles":
            c = lines[i].split(",")
            if len(c) != len(header):
                raise ValueError(f"line {i + 1}: expected {len(header)} cells")
            q = tuple(int(x) for x in c[5:5 + nq])
            rest = [float(x) for x in c[5 + nq:]]
            trace.steps.append(StepRecord(int(c[0]), int(c[1]), int(c[2]), int(c[3]), int(c[4]), q,
                                          *rest))
            i += 1
        for line in lines[i + 1:]:
            vid, dep, fin, ff, length = line.rsplit(",", 4)
            trace.vehicles[vid] = VehicleRecord(vid, int(dep), int(fin) if fin else None,
                                                float(ff), float(length))
        trace.total_trips = len(trace.vehicles)
        trace.end_step = trace.steps[-1].step + 1 if trace.steps else 0
        return trace
