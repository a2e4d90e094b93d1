"""Forecast error metrics, the persistence baseline and Table-style reports."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MAPE_EPS = 1e-8
PERSISTENCE = "Persistence"


def _pair(actual, forecast):
    a = np.asarray(actual, dtype=np.float64)
    f = np.asarray(forecast, dtype=np.float64)
    if a.shape != f.shape or a.ndim != 1 or a.size == 0:
        raise ValueError(f"need two non-empty vectors of equal length, got {a.shape} and {f.shape}")
    return a, f


def mse(actual, forecast) -> float:
    a, f = _pair(actual, forecast)
    return float(np.mean((a - f) ** 2))


def mape(actual, forecast, eps: float = MAPE_EPS) -> float:
    """Mean absolute percentage error in percent."""
    a, f = _pair(actual, forecast)
    return float(100.0 * np.mean(np.abs(a - f) / np.maximum(np.abs(a), eps)))


def dtw(a, b) -> float:
    """Unnormalized DTW with absolute-difference cost and no warping window."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("dtw needs non-empty sequences")
    cost = np.abs(a[:, None] - b[None, :])
    n, m = cost.shape
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        prev, row = acc[i - 1], acc[i]
        c = cost[i - 1]
        for j in range(1, m + 1):
            row[j] = c[j - 1] + min(prev[j - 1], prev[j], row[j - 1])
    return float(acc[n, m])


def persistence_forecast(lookback, horizon: int) -> np.ndarray:
    lb = np.asarray(lookback, dtype=np.float64)
    if lb.size == 0 or horizon < 1:
        raise ValueError("need a non-empty lookback and horizon >= 1")
    return np.full(horizon, lb[-1])


METRICS = {"MSE": mse, "MAPE": mape, "DTW": dtw}


@dataclass
class EvalReport:
    models: list[str]
    aggregate: dict[str, dict[str, float]]
    details: list[dict] = field(default_factory=list)

    def row(self, name: str) -> dict[str, float]:
        return self.aggregate[name]

    def to_dict(self) -> dict:
        return {"models": self.models, "aggregate": self.aggregate, "details": self.details}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self) -> str:
        """Pipe-delimited table: one row per model, persistence first.

        Values are raw (scaled units). MSE in units of 1e-4 and DTW in units
        of 1e-3 are shown alongside for comparison with published numbers.
        """
        lines = [
            "# MSE and DTW in raw scaled units; 'MSE (1e-4)' = MSE / 1e-4, 'DTW (1e-3)' = DTW / 1e-3",
            "Model Configuration|MSE|MAPE|DTW|MSE (1e-4)|DTW (1e-3)",
        ]
        for name in self.models:
            r = self.aggregate[name]
            lines.append(
                f"{name}|{r['MSE']:.6e}|{r['MAPE']:.4f}|{r['DTW']:.6e}|"
                f"{r['MSE'] / 1e-4:.2f}|{r['DTW'] / 1e-3:.2f}"
            )
        return "\n".join(lines) + "\n"


def evaluate(models: dict, test_set) -> EvalReport:
    """Score each named forecast function plus the persistence baseline.

    ``models`` maps a display name to a callable taking a lookback vector and
    returning the horizon forecast. Persistence is always the first row.
    """
    test_set = list(test_set)
    if not test_set:
        raise ValueError("test set is empty")
    funcs = {PERSISTENCE: lambda lb, h=len(test_set[0].horizon): persistence_forecast(lb, h)}
    for name, fn in models.items():
        if name == PERSISTENCE:
            raise ValueError(f"model name {PERSISTENCE!r} is reserved for the baseline")
        funcs[name] = fn

    details = []
    sums = {name: {k: 0.0 for k in METRICS} for name in funcs}
    for i, w in enumerate(test_set):
        for name, fn in funcs.items():
            fc = np.asarray(fn(np.asarray(w.lookback)), dtype=np.float64)
            row = {"sample": i, "patient_id": w.patient_id, "model": name}
            for k, metric in METRICS.items():
                row[k] = metric(w.horizon, fc)
                sums[name][k] += row[k]
            details.append(row)
    n = len(test_set)
    aggregate = {name: {k: s / n for k, s in vals.items()} for name, vals in sums.items()}
    return EvalReport(list(funcs), aggregate, details)
