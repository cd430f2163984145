"""Experiment reports and their JSON / CSV forms."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

from .stats import Estimate, ScalingFit

CSV_COLUMNS = ("x", "mean", "stderr", "n", "branch")


@dataclass
class GridEstimate:
    branch: str
    x: float
    estimate: Estimate
    replicas: tuple[int, int]      # first and last environment replica index

    def to_dict(self) -> dict:
        e = self.estimate
        return {"branch": self.branch, "x": self.x, "mean": e.mean, "stderr": e.stderr,
                "n": e.n, "replicas": list(self.replicas)}


@dataclass
class NamedFit:
    name: str
    fit: ScalingFit | None
    note: str = ""

    def to_dict(self) -> dict:
        d = {"name": self.name}
        if self.fit is None:
            d.update(slope=None, stderr=None, intercept=None, r2=None)
        else:
            d.update(self.fit.to_dict())
        if self.note:
            d["note"] = self.note
        return d


@dataclass
class ExperimentReport:
    name: str
    params: dict
    grid: dict
    seed: int
    estimates: list = field(default_factory=list)
    fits: list = field(default_factory=list)
    series: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    elapsed_s: float | None = None

    def branch(self, name: str) -> list:
        return [g for g in self.estimates if g.branch == name]

    def fit(self, name: str) -> ScalingFit | None:
        for f in self.fits:
            if f.name == name:
                return f.fit
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "params": self.params,
            "grid": self.grid,
            "estimates": [g.to_dict() for g in self.estimates],
            "fits": [f.to_dict() for f in self.fits],
            "seed": self.seed,
            "elapsed_s": self.elapsed_s,
            "series": self.series,
            "warnings": self.warnings,
        }

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), indent=2, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for g in self.estimates:
            e = g.estimate
            w.writerow([repr(float(g.x)), repr(e.mean), repr(e.stderr), e.n, g.branch])
        return buf.getvalue()

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return self.to_json()
        if fmt == "csv":
            return self.to_csv()
        raise ValueError(f"unknown format {fmt!r}")


def _clean(obj):
    """Replace non-finite floats by None so the JSON stays standard."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj
