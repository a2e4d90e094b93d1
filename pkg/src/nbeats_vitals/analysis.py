"""Forecasted vs observed trend mismatch, drug overlap and mortality split."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import dtw
from .nbeats import (
    BasisKind,
    Configuration,
    NBeatsModel,
    UnsupportedConfigurationError,
    build_trend_basis,
    model_forward,
)


class MissingOutcomeError(ValueError):
    def __init__(self, patient_ids):
        super().__init__(f"no outcome for patients: {', '.join(patient_ids)}")
        self.patient_ids = list(patient_ids)


@dataclass(frozen=True)
class DrugEvent:
    patient_id: str
    drug_name: str
    start_min: float
    end_min: float

    def __post_init__(self):
        if not self.start_min < self.end_min:
            raise ValueError(f"drug event for {self.patient_id} has start >= end")


@dataclass(frozen=True)
class OutcomeLabel:
    patient_id: str
    died: bool


@dataclass
class MismatchRecord:
    window: object  # TimeSeriesWindow
    forecast_trend: np.ndarray
    actual_trend: np.ndarray
    trend_dtw: float
    drug_events: list[DrugEvent] = field(default_factory=list)
    flagged: bool = False

    @property
    def patient_id(self) -> str:
        return self.window.patient_id


def _require_interpretable(model: NBeatsModel):
    if model.configuration is not Configuration.INTERPRETABLE:
        raise UnsupportedConfigurationError(
            "trend analysis needs an interpretable model; got a generic one"
        )


def forecast_trend(model: NBeatsModel, window) -> np.ndarray:
    """Trend-stack partial of the model's forecast for one window."""
    _require_interpretable(model)
    lookback = getattr(window, "lookback", window)
    return model_forward(model, lookback).partials["trend"]


def actual_trend(horizon, degree: int) -> np.ndarray:
    """Least-squares polynomial of ``degree`` on the forecast time grid."""
    y = np.asarray(horizon, dtype=np.float64)
    if len(y) <= degree:
        raise ValueError(f"horizon of length {len(y)} cannot fit degree {degree}")
    basis = build_trend_basis(len(y), degree)
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return basis @ coef


def trend_degree(model: NBeatsModel) -> int:
    for stack in model.stacks:
        if stack.kind is BasisKind.TREND:
            return stack.blocks[0].forecast_basis.shape[1] - 1
    return model.config.trend_degree


def build_records(model: NBeatsModel, windows, events=()) -> list[MismatchRecord]:
    """Trend pair, trend DTW and overlapping drug events for every window."""
    _require_interpretable(model)
    p = trend_degree(model)
    by_patient: dict[str, list[DrugEvent]] = {}
    for ev in events:
        by_patient.setdefault(ev.patient_id, []).append(ev)
    records = []
    for w in windows:
        fc = forecast_trend(model, w)
        ac = actual_trend(w.horizon, p)
        rec = MismatchRecord(w, fc, ac, dtw(ac, fc))
        rec.drug_events = drug_overlap(rec, by_patient.get(w.patient_id, []))
        records.append(rec)
    return records


def rank_mismatch(records, quantile: float = 0.25):
    """Flag the ``ceil(quantile * N)`` records with the largest trend DTW.

    Ties keep input order (a stable sort on descending DTW).
    """
    records = list(records)
    n_flag = math.ceil(quantile * len(records))
    order = sorted(range(len(records)), key=lambda i: -records[i].trend_dtw)
    chosen = set(order[:n_flag])
    for i, rec in enumerate(records):
        rec.flagged = i in chosen
    return records


def drug_overlap(record, events) -> list[DrugEvent]:
    """Events whose ``[start, end)`` meets the horizon ``[cutoff, cutoff + H*step)``."""
    w = record.window
    lo, hi = w.cutoff_min, w.horizon_end_min
    return [ev for ev in events if ev.start_min < hi and ev.end_min > lo]


@dataclass
class MortalitySplit:
    matched_rate: float
    mismatched_rate: float
    matched_patients: int
    mismatched_patients: int
    matched_deaths: int
    mismatched_deaths: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def mortality_split(records, outcomes) -> MortalitySplit:
    """Per-patient death rates of the unflagged (matched) and flagged groups.

    A patient counts once per group; one with windows in both groups counts
    in both.
    """
    died = {}
    for o in outcomes:
        died[o.patient_id] = bool(o.died)
    missing = sorted({r.patient_id for r in records} - died.keys())
    if missing:
        raise MissingOutcomeError(missing)
    matched = {r.patient_id for r in records if not r.flagged}
    mismatched = {r.patient_id for r in records if r.flagged}

    def rate(group):
        deaths = sum(died[p] for p in group)
        return (deaths / len(group) if group else float("nan")), deaths

    m_rate, m_deaths = rate(matched)
    x_rate, x_deaths = rate(mismatched)
    return MortalitySplit(m_rate, x_rate, len(matched), len(mismatched), m_deaths, x_deaths)


def drug_fraction(records) -> tuple[float, float]:
    """Fraction of flagged and of unflagged records with any overlapping drug event."""
    flagged = [bool(r.drug_events) for r in records if r.flagged]
    rest = [bool(r.drug_events) for r in records if not r.flagged]
    f = sum(flagged) / len(flagged) if flagged else float("nan")
    u = sum(rest) / len(rest) if rest else float("nan")
    return f, u


def records_to_dicts(records) -> list[dict]:
    out = []
    for i, r in enumerate(records):
        w = r.window
        out.append({
            "record": i,
            "patient_id": w.patient_id,
            "cutoff_min": w.cutoff_min,
            "step_min": w.step_min,
            "lookback": [float(v) for v in w.lookback],
            "horizon": [float(v) for v in w.horizon],
            "forecast_trend": [float(v) for v in r.forecast_trend],
            "actual_trend": [float(v) for v in r.actual_trend],
            "trend_dtw": r.trend_dtw,
            "flagged": r.flagged,
            "drug_events": [
                {"drug_name": e.drug_name, "start_min": e.start_min, "end_min": e.end_min}
                for e in r.drug_events
            ],
        })
    return out
