"""Raw MBP series -> scaled lookback/horizon windows.

Per series: forward-fill gaps, cut the 9 h ending at the diagnosis time,
smooth with a trailing 3-point mean, scale by the fixed 0..190 mmHg range,
drop near-constant windows, split 72/36.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

MBP_MAX = 190.0


class SampleRejected(ValueError):
    """A series cannot produce a window. ``reason`` is a short report key."""

    def __init__(self, reason: str, message: str = ""):
        super().__init__(message or reason)
        self.reason = reason


@dataclass
class RawSeries:
    patient_id: str
    timestamps: np.ndarray  # minute offsets, strictly increasing
    values: np.ndarray  # mmHg, NaN where missing
    diagnosis_min: float

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.timestamps.shape != self.values.shape:
            raise ValueError("timestamps and values differ in length")
        if np.any(np.diff(self.timestamps) <= 0):
            raise ValueError(f"timestamps of patient {self.patient_id} are not strictly increasing")


@dataclass
class TimeSeriesWindow:
    patient_id: str
    lookback: np.ndarray
    horizon: np.ndarray
    cutoff_min: float  # time of the first horizon sample
    step_min: float = 5.0

    @property
    def horizon_end_min(self) -> float:
        return self.cutoff_min + len(self.horizon) * self.step_min

    def lookback_times(self) -> np.ndarray:
        n = len(self.lookback)
        return self.cutoff_min + self.step_min * np.arange(-n, 0)

    def horizon_times(self) -> np.ndarray:
        return self.cutoff_min + self.step_min * np.arange(len(self.horizon))


@dataclass
class PipelineConfig:
    step_min: float = 5.0
    lookback_hours: float = 6.0
    horizon_hours: float = 3.0
    smoothing_window: int = 3
    std_threshold: float = 0.025

    @property
    def lookback(self) -> int:
        return int(round(self.lookback_hours * 60 / self.step_min))

    @property
    def horizon(self) -> int:
        return int(round(self.horizon_hours * 60 / self.step_min))


@dataclass
class PipelineReport:
    total: int = 0
    accepted: int = 0
    rejected: Counter = field(default_factory=Counter)
    clipped_values: int = 0

    def merge(self, other: "PipelineReport") -> "PipelineReport":
        return PipelineReport(
            self.total + other.total,
            self.accepted + other.accepted,
            self.rejected + other.rejected,
            self.clipped_values + other.clipped_values,
        )

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "accepted": self.accepted,
            "rejected": dict(sorted(self.rejected.items())),
            "clipped_values": self.clipped_values,
        }


def fill_forward(values) -> np.ndarray:
    """Replace NaNs with the last observed value; leading NaNs take the first one."""
    v = np.array(values, dtype=np.float64)
    observed = ~np.isnan(v)
    if not observed.any():
        raise SampleRejected("all_missing", "series has no observed values")
    idx = np.where(observed, np.arange(len(v)), 0)
    np.maximum.accumulate(idx, out=idx)
    out = v[idx]
    first = np.argmax(observed)
    out[:first] = v[first]
    return out


def extract_window(series: RawSeries, config: PipelineConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Values on the regular grid of ``lookback + horizon`` points ending at diagnosis.

    The diagnosis-time sample is the last horizon point. Each grid point takes
    the latest reading at or before it, so the series must reach from the
    first grid point up to the diagnosis time. Values are expected to be
    already imputed.
    """
    cfg = config or PipelineConfig()
    n = cfg.lookback + cfg.horizon
    grid = series.diagnosis_min - cfg.step_min * np.arange(n - 1, -1, -1)
    ts = series.timestamps
    if len(ts) == 0 or ts[0] > grid[0] or ts[-1] < grid[-1]:
        raise SampleRejected(
            "insufficient_coverage",
            f"patient {series.patient_id}: need data from {grid[0]:g} to {grid[-1]:g} min",
        )
    pos = np.searchsorted(ts, grid, side="right") - 1
    window = series.values[pos]
    return window[:cfg.lookback], window[cfg.lookback:]


def moving_average(values, window: int = 3) -> np.ndarray:
    """Trailing mean; the first ``window - 1`` points average the available prefix."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("moving_average needs a non-empty input")
    csum = np.concatenate([[0.0], np.cumsum(v)])
    i = np.arange(1, len(v) + 1)
    lo = np.maximum(i - window, 0)
    return (csum[i] - csum[lo]) / (i - lo)


def variability_filter(values, threshold: float = 0.025) -> bool:
    """True (accept) iff the population std is strictly above ``threshold``."""
    return bool(np.std(np.asarray(values, dtype=np.float64)) > threshold)


def minmax_scale(values, upper: float = MBP_MAX) -> tuple[np.ndarray, int]:
    """Map mmHg onto [0, 1] via ``v / upper``. Returns ``(scaled, n_clipped)``."""
    v = np.asarray(values, dtype=np.float64)
    clipped = int(np.count_nonzero((v < 0) | (v > upper)))
    return np.clip(v, 0.0, upper) / upper, clipped


def inverse_scale(scaled, upper: float = MBP_MAX) -> np.ndarray:
    return np.asarray(scaled, dtype=np.float64) * upper


def process_series(series: RawSeries, config: PipelineConfig | None = None):
    """One series -> ``(window, n_clipped)``; raises ``SampleRejected``."""
    cfg = config or PipelineConfig()
    filled = RawSeries(series.patient_id, series.timestamps, fill_forward(series.values),
                       series.diagnosis_min)
    lb, hz = extract_window(filled, cfg)
    smooth = moving_average(np.concatenate([lb, hz]), cfg.smoothing_window)
    scaled, clipped = minmax_scale(smooth)
    # the threshold is in scaled units, so the filter runs after scaling
    if not variability_filter(scaled, cfg.std_threshold):
        raise SampleRejected("low_variability", f"patient {series.patient_id}: std <= {cfg.std_threshold}")
    window = TimeSeriesWindow(
        series.patient_id,
        scaled[:cfg.lookback],
        scaled[cfg.lookback:],
        cutoff_min=series.diagnosis_min - cfg.step_min * (cfg.horizon - 1),
        step_min=cfg.step_min,
    )
    return window, clipped


def run_pipeline(series_set, config: PipelineConfig | None = None):
    """Process every series; rejections are counted in the report, never raised."""
    cfg = config or PipelineConfig()
    windows = []
    report = PipelineReport()
    for s in series_set:
        report.total += 1
        try:
            window, clipped = process_series(s, cfg)
        except SampleRejected as exc:
            report.rejected[exc.reason] += 1
            continue
        report.accepted += 1
        report.clipped_values += clipped
        windows.append(window)
    return windows, report
