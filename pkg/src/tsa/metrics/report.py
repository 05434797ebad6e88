"""The eight evaluation metrics computed from a simulation trace."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from tsa.engine.trace import SimTrace

# column order of the comparison tables
METRIC_COLUMNS = ("att_finished", "tv", "aql", "delta_eta", "ace", "eta", "tce", "tp")
COLUMN_LABELS = {"att_finished": "ATT-f", "tv": "TV", "aql": "AQL", "delta_eta": "ΔETA",
                 "ace": "ACE", "eta": "ETA", "tce": "TCE", "tp": "TP"}
DIRECTIONS = {"att_finished": "lower_better", "tv": "lower_better", "aql": "lower_better",
              "delta_eta": "higher_better", "ace": "lower_better", "eta": "lower_better",
              "tce": "lower_better", "tp": "higher_better"}


@dataclass
class MetricsReport:
    tv_series: list[int] = field(default_factory=list)
    tp: int = 0
    eta: float = 0.0
    att_finished: float = 0.0
    aql: float = 0.0
    delta_eta: float = 0.0
    tce: float = 0.0
    ace: float = 0.0
    departed: int = 0

    @property
    def tv(self) -> int:
        """Vehicles still travelling at the last recorded step."""
        return self.tv_series[-1] if self.tv_series else 0

    def row(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in METRIC_COLUMNS}

    def to_dict(self, series: bool = True) -> dict:
        d = asdict(self)
        d["tv"] = self.tv
        if not series:
            d.pop("tv_series")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        names = {f.name for f in fields(cls)}
        rep = cls(**{k: v for k, v in d.items() if k in names})
        if not rep.tv_series and d.get("tv"):
            rep.tv_series = [int(d["tv"])]
        return rep

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([COLUMN_LABELS[k] for k in METRIC_COLUMNS])
        w.writerow([self.row()[k] for k in METRIC_COLUMNS])
        return buf.getvalue()


def compute_metrics(trace: "SimTrace | None") -> MetricsReport:
    """Reduce a trace to the metric suite; an empty trace gives the zero report.

    Delta-ETA is free-flow time minus actual time, so it is negative under
    congestion and larger is better.  ETA sums, at every step, each en-route
    vehicle's elapsed time plus its free-flow remaining time.
    """
    if trace is None or not trace.steps:
        return MetricsReport()
    dt = trace.dt
    tv_series = [r.tv for r in trace.steps]
    finished = trace.finished
    actual = [(v.finish_step - v.departure_step) * dt for v in finished]
    att = math.fsum(actual) / len(actual) if actual else 0.0
    gaps = [v.free_flow_time - a for v, a in zip(finished, actual)]
    delta = math.fsum(gaps) / len(gaps) if gaps else 0.0
    aql = math.fsum(r.queue_total for r in trace.steps) / len(trace.steps)
    eta = math.fsum(r.eta for r in trace.steps)
    tce = math.fsum(r.carbon for r in trace.steps)
    departed = trace.departed
    return MetricsReport(tv_series, len(finished), eta, att, aql, delta, tce,
                         tce / max(1, departed), departed)
