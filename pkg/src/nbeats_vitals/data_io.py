"""CSV ingestion, synthetic cohorts, patient-level splits and config files.

CSV schemas (UTF-8, comma separated, header row required)::

    series      patient_id,offset_min,mbp          empty or "∅" mbp = missing
    diagnoses   patient_id,diagnosis_min           one row per window to extract
    events      patient_id,drug_name,start_min,end_min
    outcomes    patient_id,died                    died is 0 or 1
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .analysis import DrugEvent, OutcomeLabel
from .nbeats import ModelConfig
from .preprocess import PipelineConfig, RawSeries
from .tensor_core import seeded_rng
from .training import TrainConfig

SERIES_HEADER = ["patient_id", "offset_min", "mbp"]
DIAGNOSES_HEADER = ["patient_id", "diagnosis_min"]
EVENTS_HEADER = ["patient_id", "drug_name", "start_min", "end_min"]
OUTCOMES_HEADER = ["patient_id", "died"]
MISSING = ("", "∅")
FORMAT_VERSION = 1


class DataFormatError(ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def _rows(path, header):
    """Yield ``(line_number, row)`` after checking the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first != header:
            raise DataFormatError(path, 1, f"expected header {','.join(header)}, got {first}")
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(path, reader.line_num, f"expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, row


def _number(path, line, text, what):
    try:
        v = float(text)
    except ValueError:
        raise DataFormatError(path, line, f"{what} {text!r} is not a number") from None
    if not math.isfinite(v):
        raise DataFormatError(path, line, f"{what} {text!r} is not finite")
    return v


def _fmt(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def load_diagnoses_csv(path) -> dict[str, list[float]]:
    out: dict[str, list[float]] = {}
    for line, (pid, t) in _rows(path, DIAGNOSES_HEADER):
        out.setdefault(pid, []).append(_number(path, line, t, "diagnosis_min"))
    return out


def load_series_csv(path, diagnoses=None) -> list[RawSeries]:
    """Read MBP readings grouped by patient and sorted by time.

    ``diagnoses`` (a mapping or a diagnoses CSV path) gives the diagnosis
    times; each one yields a separate ``RawSeries``. Patients without a
    diagnosis entry are skipped. Without ``diagnoses`` the last reading of
    each patient stands in for the diagnosis time.
    """
    readings: dict[str, dict[float, float]] = {}
    for line, (pid, t, mbp) in _rows(path, SERIES_HEADER):
        t = _number(path, line, t, "offset_min")
        v = np.nan if mbp.strip() in MISSING else _number(path, line, mbp, "mbp")
        per = readings.setdefault(pid, {})
        if t in per:
            raise DataFormatError(path, line, f"duplicate reading for patient {pid} at {_fmt(t)} min")
        per[t] = v
    if diagnoses is not None and not isinstance(diagnoses, dict):
        diagnoses = load_diagnoses_csv(diagnoses)

    out = []
    for pid, per in readings.items():
        ts = np.array(sorted(per))
        vals = np.array([per[t] for t in ts])
        times = diagnoses.get(pid, []) if diagnoses is not None else [ts[-1]]
        out.extend(RawSeries(pid, ts, vals, d) for d in times)
    return out


def load_events_csv(path) -> list[DrugEvent]:
    out = []
    for line, (pid, drug, start, end) in _rows(path, EVENTS_HEADER):
        s = _number(path, line, start, "start_min")
        e = _number(path, line, end, "end_min")
        if s >= e:
            raise DataFormatError(path, line, f"event start {start} is not before end {end}")
        out.append(DrugEvent(pid, drug, s, e))
    return out


def load_outcomes_csv(path) -> list[OutcomeLabel]:
    out, seen = [], set()
    for line, (pid, died) in _rows(path, OUTCOMES_HEADER):
        if died.strip() not in ("0", "1"):
            raise DataFormatError(path, line, f"died must be 0 or 1, got {died!r}")
        if pid in seen:
            raise DataFormatError(path, line, f"duplicate outcome for patient {pid}")
        seen.add(pid)
        out.append(OutcomeLabel(pid, died.strip() == "1"))
    return out


def _write(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_series_csv(path, series) -> None:
    """One row per reading; a patient with several diagnosis windows is written once."""
    rows, done = [], set()
    for s in series:
        if s.patient_id in done:
            continue
        done.add(s.patient_id)
        for t, v in zip(s.timestamps, s.values):
            rows.append([s.patient_id, _fmt(t), "" if np.isnan(v) else _fmt(v)])
    _write(path, SERIES_HEADER, rows)


def write_diagnoses_csv(path, series) -> None:
    _write(path, DIAGNOSES_HEADER, [[s.patient_id, _fmt(s.diagnosis_min)] for s in series])


def write_events_csv(path, events) -> None:
    _write(path, EVENTS_HEADER,
           [[e.patient_id, e.drug_name, _fmt(e.start_min), _fmt(e.end_min)] for e in events])


def write_outcomes_csv(path, outcomes) -> None:
    _write(path, OUTCOMES_HEADER, [[o.patient_id, "1" if o.died else "0"] for o in outcomes])


@dataclass
class DatasetBundle:
    series: list[RawSeries]
    events: list[DrugEvent] = field(default_factory=list)
    outcomes: list[OutcomeLabel] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        known = {s.patient_id for s in self.series}
        stray = sorted({x.patient_id for x in [*self.events, *self.outcomes]} - known)
        if stray:
            raise ValueError(f"events/outcomes reference unknown patients: {', '.join(stray)}")

    def patient_ids(self) -> list[str]:
        return list(dict.fromkeys(s.patient_id for s in self.series))

    def subset(self, patients) -> "DatasetBundle":
        keep = set(patients)
        return DatasetBundle(
            [s for s in self.series if s.patient_id in keep],
            [e for e in self.events if e.patient_id in keep],
            [o for o in self.outcomes if o.patient_id in keep],
            dict(self.provenance),
        )

    def write(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        write_series_csv(d / "series.csv", self.series)
        write_diagnoses_csv(d / "diagnoses.csv", self.series)
        write_events_csv(d / "events.csv", self.events)
        write_outcomes_csv(d / "outcomes.csv", self.outcomes)
        (d / "provenance.json").write_text(json.dumps(self.provenance, indent=2, sort_keys=True) + "\n")
        return d


def load_bundle(directory, events=None, outcomes=None) -> DatasetBundle:
    """Read ``series.csv`` and ``diagnoses.csv`` from ``directory``.

    Events and outcomes are read only from the paths passed in.
    """
    d = Path(directory)
    series = load_series_csv(d / "series.csv", d / "diagnoses.csv")
    ev = load_events_csv(events) if events else []
    oc = load_outcomes_csv(outcomes) if outcomes else []
    return DatasetBundle(series, ev, oc, {"source": str(d), "format_version": FORMAT_VERSION})


@dataclass
class SyntheticSpec:
    """Cohort generator settings; ranges are ``(low, high)`` with ``low <= high``.

    Each patient contributes ``windows_per_patient`` back-to-back 9 h segments,
    each ending at a diagnosis time. A segment is baseline + linear trend +
    sinusoid + Gaussian noise. With probability ``drug_probability`` a drug
    event starts ``drug_onset_min`` after the cutoff and ramps the MBP up by
    ``drug_magnitude`` mmHg over ``drug_ramp_min`` minutes.
    """

    n_patients: int = 200
    seed: int = 0
    windows_per_patient: int = 5
    step_min: float = 5.0
    lookback_hours: float = 6.0
    horizon_hours: float = 3.0
    baseline: tuple[float, float] = (65.0, 95.0)
    slope_per_hour: tuple[float, float] = (-3.0, 3.0)
    amplitude: tuple[float, float] = (2.0, 8.0)
    period_hours: tuple[float, float] = (1.5, 4.0)
    noise_std: float = 1.0
    missing_rate: float = 0.02
    drug_probability: float = 0.2
    drug_onset_min: float = 30.0
    drug_ramp_min: float = 30.0
    drug_magnitude: float = 20.0
    drug_duration_min: float = 240.0
    drug_names: tuple[str, ...] = ("norepinephrine", "vasopressin")
    base_mortality: float = 0.85
    mortality_link: float = 0.5

    def __post_init__(self):
        for name in ("baseline", "slope_per_hour", "amplitude", "period_hours"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range is reversed")
            setattr(self, name, (float(lo), float(hi)))
        self.drug_names = tuple(self.drug_names)
        for name in ("missing_rate", "drug_probability", "base_mortality"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.period_hours[0] <= 0 or self.n_patients < 1 or self.windows_per_patient < 1:
            raise ValueError("invalid synthetic spec")

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v)
                for f in fields(self)}


def drug_effect(t, start, magnitude, ramp_min, end=np.inf) -> np.ndarray:
    """Linear ramp from 0 at ``start`` to ``magnitude`` after ``ramp_min``, held until ``end``."""
    t = np.asarray(t, dtype=np.float64)
    if ramp_min > 0:
        frac = np.clip((t - start) / ramp_min, 0.0, 1.0)
    else:
        frac = (t >= start).astype(np.float64)
    return np.where(t < end, magnitude * frac, 0.0)


def generate_synthetic(spec: SyntheticSpec | None = None) -> DatasetBundle:
    """Deterministic synthetic cohort; a pure function of ``spec``."""
    spec = spec or SyntheticSpec()
    rng = seeded_rng(spec.seed)
    n_lb = int(round(spec.lookback_hours * 60 / spec.step_min))
    n_hz = int(round(spec.horizon_hours * 60 / spec.step_min))
    n = n_lb + n_hz
    seg_len = n * spec.step_min
    width = len(str(spec.n_patients - 1))

    series, events, outcomes = [], [], []
    for k in range(spec.n_patients):
        pid = f"P{k:0{width}d}"
        times, values, diag_times = [], [], []
        deviation = 0.0
        for j in range(spec.windows_per_patient):
            t = j * seg_len + spec.step_min * np.arange(n)
            rel_h = (t - t[0]) / 60.0
            base = rng.uniform(*spec.baseline)
            slope = rng.uniform(*spec.slope_per_hour)
            amp = rng.uniform(*spec.amplitude)
            period = rng.uniform(*spec.period_hours)
            phase = rng.uniform(0.0, 2 * np.pi)
            v = base + slope * rel_h + amp * np.sin(2 * np.pi * rel_h / period + phase)
            v = v + spec.noise_std * rng.standard_normal(n)
            diag = t[-1]
            if rng.uniform() < spec.drug_probability:
                cutoff = t[n_lb]
                start = cutoff + spec.drug_onset_min
                end = min(start + spec.drug_duration_min, diag + spec.step_min)
                drug = spec.drug_names[int(rng.integers(len(spec.drug_names)))]
                v = v + drug_effect(t, start, spec.drug_magnitude, spec.drug_ramp_min, end)
                events.append(DrugEvent(pid, drug, float(start), float(end)))
                deviation = max(deviation, abs(spec.drug_magnitude))
            gaps = rng.uniform(size=n) < spec.missing_rate
            # keep the diagnosis reading so coverage never depends on missingness
            gaps[-1] = False
            v = np.round(v, 2)
            v[gaps] = np.nan
            times.append(t)
            values.append(v)
            diag_times.append(float(diag))
        ts, vs = np.concatenate(times), np.concatenate(values)
        series.extend(RawSeries(pid, ts, vs, d) for d in diag_times)
        # survival odds shrink with the drug-induced deviation (per 10 mmHg)
        p_die = 1.0 - (1.0 - spec.base_mortality) * math.exp(-spec.mortality_link * deviation / 10.0)
        outcomes.append(OutcomeLabel(pid, bool(rng.uniform() < p_die)))
    return DatasetBundle(series, events, outcomes,
                         {"source": "synthetic", "format_version": FORMAT_VERSION, "spec": spec.to_dict()})


def split_sizes(n: int, fractions) -> list[int]:
    """Largest-remainder apportionment of ``n`` items; ties go to the earlier split."""
    exact = [f * n for f in fractions]
    sizes = [int(math.floor(x + 1e-9)) for x in exact]
    order = sorted(range(len(exact)), key=lambda i: -(exact[i] - sizes[i]))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def split_by_patient(bundle: DatasetBundle, fractions=(0.6, 0.2, 0.2), seed: int = 0):
    """Shuffle patients with ``seed`` and cut them into train/valid/test bundles."""
    fractions = [float(f) for f in fractions]
    if any(f <= 0 for f in fractions) or not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise ValueError("split fractions must be positive and sum to 1")
    patients = sorted(bundle.patient_ids())
    if len(patients) < len(fractions):
        raise ValueError(f"{len(patients)} patients cannot fill {len(fractions)} splits")
    order = seeded_rng(seed).permutation(len(patients))
    shuffled = [patients[i] for i in order]
    parts, start = [], 0
    for size in split_sizes(len(patients), fractions):
        parts.append(bundle.subset(shuffled[start:start + size]))
        start += size
    return tuple(parts)


@dataclass
class Settings:
    """Everything a run needs. Config files override fields by flat dotted keys,
    e.g. ``{"model.width": 64, "train.epochs": 100, "split.fractions": [0.6, 0.2, 0.2]}``.
    """

    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    synth: SyntheticSpec = field(default_factory=SyntheticSpec)
    split_fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    split_seed: int = 0
    quantile: float = 0.25

    def with_seed(self, seed: int) -> "Settings":
        """One seed drives weight init, batch order, splitting and synthesis."""
        return replace(
            self,
            train=replace(self.train, seed=seed),
            synth=replace(self.synth, seed=seed),
            split_seed=seed,
        )


_SECTIONS = {"model": ModelConfig, "train": TrainConfig, "pipeline": PipelineConfig, "synth": SyntheticSpec}
_TOP = {"split.fractions": "split_fractions", "split.seed": "split_seed", "analysis.quantile": "quantile"}


def settings_from_dict(flat: dict) -> Settings:
    s = Settings()
    grouped: dict[str, dict] = {k: {} for k in _SECTIONS}
    top = {}
    for key, value in flat.items():
        if key in _TOP:
            top[_TOP[key]] = tuple(value) if isinstance(value, list) else value
            continue
        section, _, name = key.partition(".")
        if section not in _SECTIONS or name not in {f.name for f in fields(_SECTIONS[section])}:
            raise KeyError(f"unknown config key {key!r}")
        grouped[section][name] = tuple(value) if isinstance(value, list) else value
    for section, values in grouped.items():
        if values:
            setattr(s, section, replace(getattr(s, section), **values))
    return replace(s, **top)


def load_config(path) -> Settings:
    """Read a flat JSON object of dotted keys."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict) or any(isinstance(v, dict) for v in data.values()):
        raise ValueError(f"{path}: config must be a flat JSON object")
    return settings_from_dict(data)
