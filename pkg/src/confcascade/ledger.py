"""Wall-clock accounting per pipeline phase, converted to CO2 and dollars.

Phase times are summed per fold, then across folds, and only the grand
total is converted: dollars = hours * rate, kg CO2 = hours * GPU kW * PUE *
grid intensity. The power and carbon defaults are estimates for a single
data-center GPU (250 W card, 0.112 kg CO2/kWh, PUE 1.0) and are flagged as
such in reports; both are plain configuration fields.
"""

from __future__ import annotations

import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass

PHASES = (
    "representation",
    "classifier_training",
    "threshold_tuning",
    "llm_prompting",
    "prediction",
)


class LedgerError(ValueError):
    pass


@dataclass(frozen=True)
class PhaseTiming:
    phase: str
    seconds: float
    fold: int


@dataclass(frozen=True)
class CostModel:
    gpu_power_kw: float = 0.250
    carbon_intensity: float = 0.112  # kg CO2 per kWh
    pue: float = 1.0
    dollars_per_hour: float = 0.752
    folds: int = 5

    def __post_init__(self):
        for name in ("gpu_power_kw", "carbon_intensity", "pue", "dollars_per_hour", "folds"):
            if getattr(self, name) <= 0:
                raise LedgerError(f"{name} must be > 0")


class CostLedger:
    """Append-only sink; one record per (phase, fold) per run.

    With zero=True every recorded duration is stored as 0.0; replay/mock
    runs use this so rerunning a manifest yields byte-identical reports.
    """

    def __init__(self, zero: bool = False):
        self._records: list[PhaseTiming] = []
        self._seen: set[tuple[str, int]] = set()
        self._lock = threading.Lock()
        self._zero = zero

    def add(self, phase: str, seconds: float, fold: int = 0) -> None:
        if phase not in PHASES:
            raise LedgerError(f"unknown phase {phase!r}")
        if seconds < 0:
            raise LedgerError(f"negative duration {seconds} for phase {phase!r}")
        with self._lock:
            key = (phase, fold)
            if key in self._seen:
                raise LedgerError(f"duplicate record for phase {phase!r}, fold {fold}")
            self._seen.add(key)
            self._records.append(PhaseTiming(
                phase=phase, seconds=0.0 if self._zero else seconds, fold=fold))

    @contextmanager
    def record(self, phase: str, fold: int = 0):
        start = time.monotonic()
        yield
        self.add(phase, time.monotonic() - start, fold=fold)

    @property
    def records(self) -> list[PhaseTiming]:
        with self._lock:
            return list(self._records)


def total_time(timings: list[PhaseTiming]) -> tuple[dict[int, float], float]:
    """Per-fold second totals and the grand total across folds."""
    per_fold: dict[int, float] = {}
    for t in timings:
        per_fold[t.fold] = per_fold.get(t.fold, 0.0) + t.seconds
    return per_fold, sum(per_fold.values())


def dollars(total_seconds_all_folds: float, model: CostModel) -> float:
    """Exact dollar cost; use format_dollars for the cents-rounded display."""
    if total_seconds_all_folds < 0:
        raise LedgerError("total seconds must be >= 0")
    return total_seconds_all_folds / 3600.0 * model.dollars_per_hour


def co2_kg(total_seconds_all_folds: float, model: CostModel) -> float:
    if total_seconds_all_folds < 0:
        raise LedgerError("total seconds must be >= 0")
    hours = total_seconds_all_folds / 3600.0
    return hours * model.gpu_power_kw * model.pue * model.carbon_intensity


def format_dollars(amount: float) -> str:
    return f"{amount:.2f}"
