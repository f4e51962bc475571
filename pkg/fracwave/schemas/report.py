import time
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field

COMPARISONS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


class Verdict(BaseModel):
    name: str
    value: Optional[float]
    comparison: str
    threshold: float
    passed: bool

    @classmethod
    def check(cls, name: str, value: Optional[float], comparison: str, threshold: float) -> "Verdict":
        """A named check `value <comparison> threshold`; a missing or NaN value fails"""
        passed = value is not None and value == value and COMPARISONS[comparison](value, threshold)
        return cls(name=name, value=value, comparison=comparison, threshold=threshold, passed=bool(passed))


class Fit(BaseModel):
    name: str
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    extra: Dict[str, float] = Field(default_factory=dict)


class ReportTable(BaseModel):
    name: str
    columns: List[str]
    rows: List[List[Any]] = Field(default_factory=list)

    def add(self, *values: Any):
        """Appends a row; numpy scalars are stored as the matching Python builtins"""
        if len(values) != len(self.columns):
            raise ValueError(f"Table '{self.name}' expects {len(self.columns)} values, got {len(values)}")
        self.rows.append([v.item() if isinstance(v, np.generic) else v for v in values])

    def column(self, name: str) -> List[Any]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]


class ExperimentReport(BaseModel):
    name: str
    config: Dict[str, Any] = Field(default_factory=dict)
    seed: int = 0
    tables: List[ReportTable] = Field(default_factory=list)
    fits: List[Fit] = Field(default_factory=list)
    verdicts: List[Verdict] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)
    # PhasePoint snapshots and a Trajectory; written as FWF1 files and CSV, not JSON
    snapshots: Dict[str, Any] = Field(default_factory=dict, exclude=True)
    trajectory: Optional[Any] = Field(default=None, exclude=True)
    started_at: float = Field(default_factory=time.perf_counter, exclude=True)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def table(self, name: str) -> ReportTable:
        for table in self.tables:
            if table.name == name:
                return table
        raise KeyError(name)

    def verdict(self, name: str) -> Verdict:
        for verdict in self.verdicts:
            if verdict.name == name:
                return verdict
        raise KeyError(name)

    def fit(self, name: str) -> Fit:
        for fit in self.fits:
            if fit.name == name:
                return fit
        raise KeyError(name)

    def finish(self) -> "ExperimentReport":
        self.wall_time = time.perf_counter() - self.started_at
        return self
