"""Method-by-metric boards and mean reciprocal rank."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

from tsa.errors import DegenerateBoard
from tsa.metrics.report import COLUMN_LABELS, DIRECTIONS, METRIC_COLUMNS, MetricsReport

DIRECTION_KINDS = ("higher_better", "lower_better")


@dataclass
class Leaderboard:
    methods: list[str] = field(default_factory=list)
    metrics: list[tuple[str, str]] = field(default_factory=list)
    # values[i][k]: method i on metric k; None marks a missing cell
    values: list[list[float | None]] = field(default_factory=list)

    def __post_init__(self):
        for _, direction in self.metrics:
            if direction not in DIRECTION_KINDS:
                raise ValueError(f"unknown direction {direction!r}")
        if len(self.values) != len(self.methods) or any(len(r) != len(self.metrics)
                                                        for r in self.values):
            raise ValueError("values must be |methods| x |metrics|")

    @classmethod
    def from_reports(cls, reports: dict[str, MetricsReport],
                     columns=METRIC_COLUMNS) -> "Leaderboard":
        methods = list(reports)
        metrics = [(c, DIRECTIONS[c]) for c in columns]
        values = [[float(reports[m].row()[c]) for c in columns] for m in methods]
        return cls(methods, metrics, values)

    def to_dict(self) -> dict:
        return {"methods": self.methods, "metrics": [list(m) for m in self.metrics],
                "values": self.values, "mrr": mrr(self) if len(self.methods) >= 2 else None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        scores = mrr(self) if len(self.methods) >= 2 else {}
        w.writerow(["method"] + [COLUMN_LABELS.get(n, n) for n, _ in self.metrics] + ["MRR"])
        for name, row in zip(self.methods, self.values):
            w.writerow([name] + ["" if v is None else v for v in row] + [scores.get(name, "")])
        return buf.getvalue()


def _ranks(values: list[float], higher_better: bool) -> list[float]:
    """Competition ranks with ties sharing the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: -values[i] if higher_better else values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = (i + 1 + j + 1) / 2.0
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def mrr(board: Leaderboard) -> dict[str, float]:
    """Mean over metrics of 1/rank for each method; missing cells are skipped."""
    if len(board.methods) < 2:
        raise DegenerateBoard("MRR needs at least two methods")
    recips: dict[int, list[float]] = {i: [] for i in range(len(board.methods))}
    for k, (_, direction) in enumerate(board.metrics):
        present = [i for i, row in enumerate(board.values)
                   if row[k] is not None and not math.isnan(row[k])]
        if not present:
            continue
        ranks = _ranks([board.values[i][k] for i in present], direction == "higher_better")
        for i, r in zip(present, ranks):
            recips[i].append(1.0 / r)
    return {board.methods[i]: (math.fsum(rs) / len(rs) if rs else 0.0) for i, rs in recips.items()}
