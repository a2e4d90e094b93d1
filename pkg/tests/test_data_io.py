import json

import numpy as np
import pytest

from nbeats_vitals.analysis import DrugEvent, OutcomeLabel
from nbeats_vitals.data_io import (
    DataFormatError,
    DatasetBundle,
    SyntheticSpec,
    drug_effect,
    generate_synthetic,
    load_bundle,
    load_config,
    load_events_csv,
    load_outcomes_csv,
    load_series_csv,
    split_by_patient,
    split_sizes,
    write_events_csv,
    write_outcomes_csv,
    write_series_csv,
)
from nbeats_vitals.preprocess import RawSeries, run_pipeline


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_series_empty_file(tmp_path):
    assert load_series_csv(write(tmp_path, "s.csv", "patient_id,offset_min,mbp\n")) == []


def test_series_bad_number_names_line(tmp_path):
    p = write(tmp_path, "s.csv", "patient_id,offset_min,mbp\na,0,80\na,5,high\n")
    with pytest.raises(DataFormatError) as exc:
        load_series_csv(p)
    assert exc.value.line == 3 and ":3:" in str(exc.value)


def test_series_wrong_header(tmp_path):
    with pytest.raises(DataFormatError) as exc:
        load_series_csv(write(tmp_path, "s.csv", "pid,t,v\n"))
    assert exc.value.line == 1


def test_series_duplicate_timestamp(tmp_path):
    p = write(tmp_path, "s.csv", "patient_id,offset_min,mbp\na,0,80\nb,0,70\na,0,81\n")
    with pytest.raises(DataFormatError) as exc:
        load_series_csv(p)
    assert exc.value.line == 4


def test_series_interleaved_patients_sorted(tmp_path):
    p = write(tmp_path, "s.csv",
              "patient_id,offset_min,mbp\nb,10,71\na,5,\nb,0,70\na,0,80\na,10,∅\nb,5,72\n")
    series = load_series_csv(p)
    by = {s.patient_id: s for s in series}
    assert set(by) == {"a", "b"}
    np.testing.assert_array_equal(by["a"].timestamps, [0, 5, 10])
    np.testing.assert_array_equal(by["a"].values, [80, np.nan, np.nan])
    np.testing.assert_array_equal(by["b"].timestamps, [0, 5, 10])
    np.testing.assert_array_equal(by["b"].values, [70, 72, 71])
    assert by["a"].diagnosis_min == 10


def test_series_with_diagnoses(tmp_path):
    s = write(tmp_path, "s.csv", "patient_id,offset_min,mbp\na,0,80\na,5,81\nb,0,70\n")
    d = write(tmp_path, "d.csv", "patient_id,diagnosis_min\na,5\na,0\n")
    series = load_series_csv(s, d)
    assert [(x.patient_id, x.diagnosis_min) for x in series] == [("a", 5), ("a", 0)]


def test_events_fixture(tmp_path):
    text = ("patient_id,drug_name,start_min,end_min\n"
            "a,norepinephrine,10,70\nb,vasopressin,0,12.5\na,vasopressin,100,200\n")
    p = write(tmp_path, "e.csv", text)
    events = load_events_csv(p)
    assert events == [
        DrugEvent("a", "norepinephrine", 10, 70),
        DrugEvent("b", "vasopressin", 0, 12.5),
        DrugEvent("a", "vasopressin", 100, 200),
    ]
    out = tmp_path / "e2.csv"
    write_events_csv(out, events)
    assert out.read_bytes() == p.read_bytes()


def test_events_end_before_start(tmp_path):
    p = write(tmp_path, "e.csv", "patient_id,drug_name,start_min,end_min\na,x,10,70\na,x,50,40\n")
    with pytest.raises(DataFormatError) as exc:
        load_events_csv(p)
    assert exc.value.line == 3


def test_outcomes_duplicate(tmp_path):
    p = write(tmp_path, "o.csv", "patient_id,died\na,1\nb,0\na,0\n")
    with pytest.raises(DataFormatError) as exc:
        load_outcomes_csv(p)
    assert exc.value.line == 4


def test_outcomes_round_trip(tmp_path):
    p = write(tmp_path, "o.csv", "patient_id,died\na,1\nb,0\n")
    outcomes = load_outcomes_csv(p)
    assert outcomes == [OutcomeLabel("a", True), OutcomeLabel("b", False)]
    out = tmp_path / "o2.csv"
    write_outcomes_csv(out, outcomes)
    assert out.read_bytes() == p.read_bytes()


def test_outcomes_bad_flag(tmp_path):
    with pytest.raises(DataFormatError):
        load_outcomes_csv(write(tmp_path, "o.csv", "patient_id,died\na,yes\n"))


def test_series_round_trip(tmp_path):
    text = "patient_id,offset_min,mbp\na,0,80\na,5,\na,10,81.25\nb,0,70\n"
    p = write(tmp_path, "s.csv", text)
    out = tmp_path / "s2.csv"
    write_series_csv(out, load_series_csv(p))
    assert out.read_bytes() == p.read_bytes()


def test_bundle_rejects_unknown_patient():
    s = RawSeries("a", [0.0], [1.0], 0.0)
    with pytest.raises(ValueError):
        DatasetBundle([s], [DrugEvent("z", "x", 0, 1)], [])


def test_synthetic_deterministic(tmp_path):
    spec = SyntheticSpec(n_patients=12, seed=5)
    a = generate_synthetic(spec).write(tmp_path / "a")
    b = generate_synthetic(spec).write(tmp_path / "b")
    for name in ("series.csv", "diagnoses.csv", "events.csv", "outcomes.csv", "provenance.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    c = generate_synthetic(SyntheticSpec(n_patients=12, seed=6)).write(tmp_path / "c")
    assert (a / "series.csv").read_bytes() != (c / "series.csv").read_bytes()


def test_synthetic_degenerate_is_constant():
    spec = SyntheticSpec(n_patients=3, baseline=(80, 80), slope_per_hour=(0, 0), amplitude=(0, 0),
                         noise_std=0.0, missing_rate=0.0, drug_probability=0.0)
    bundle = generate_synthetic(spec)
    for s in bundle.series:
        np.testing.assert_array_equal(s.values, 80.0)
    assert bundle.events == []


def test_synthetic_drug_step_raises_horizon_mean():
    spec = SyntheticSpec(n_patients=4, windows_per_patient=1, baseline=(80, 80), slope_per_hour=(0, 0),
                         amplitude=(0, 0), noise_std=0.0, missing_rate=0.0, drug_probability=1.0,
                         drug_magnitude=20.0, drug_onset_min=30.0, drug_ramp_min=0.0)
    bundle = generate_synthetic(spec)
    assert len(bundle.events) == 4
    for s in bundle.series:
        lb, hz = s.values[:72], s.values[72:]
        # 30 of the 36 horizon samples start at or after cutoff + 30 min
        assert hz.mean() - lb.mean() == pytest.approx(20.0 * 30 / 36, abs=1e-9)


def test_synthetic_drug_ramp_analytic_mean():
    spec = SyntheticSpec(n_patients=1, windows_per_patient=1, baseline=(80, 80), slope_per_hour=(0, 0),
                         amplitude=(0, 0), noise_std=0.0, missing_rate=0.0, drug_probability=1.0,
                         drug_magnitude=20.0, drug_onset_min=30.0, drug_ramp_min=30.0)
    hz = generate_synthetic(spec).series[0].values[72:]
    # offsets 0..175 min; ramp fraction clip((k*5 - 30)/30, 0, 1)
    frac = np.clip((np.arange(36) * 5 - 30) / 30, 0, 1)
    assert hz.mean() - 80 == pytest.approx(20 * frac.mean(), abs=1e-9)


def test_drug_effect_window():
    np.testing.assert_array_equal(drug_effect([0, 10, 20, 30, 40], 10, 5.0, 20, end=40), [0, 0, 2.5, 5, 0])


def test_synthetic_events_sit_in_their_horizon():
    bundle = generate_synthetic(SyntheticSpec(n_patients=20, seed=2, drug_probability=0.5))
    windows, _ = run_pipeline(bundle.series)
    assert bundle.events
    for ev in bundle.events:
        diag = [s.diagnosis_min for s in bundle.series if s.patient_id == ev.patient_id]
        assert any(d - 175 < ev.start_min <= d for d in diag)
        assert any(ev.end_min <= d + 5 for d in diag)
    assert windows


def test_split_sizes_largest_remainder():
    assert split_sizes(10, [0.6, 0.2, 0.2]) == [6, 2, 2]
    assert split_sizes(7, [0.6, 0.2, 0.2]) == [4, 2, 1]
    assert sum(split_sizes(201, [0.6, 0.2, 0.2])) == 201


def test_split_by_patient_disjoint_and_deterministic():
    bundle = generate_synthetic(SyntheticSpec(n_patients=10, seed=1, windows_per_patient=2))
    parts = split_by_patient(bundle, (0.6, 0.2, 0.2), seed=4)
    ids = [set(p.patient_ids()) for p in parts]
    assert [len(i) for i in ids] == [6, 2, 2]
    assert not (ids[0] & ids[1] or ids[0] & ids[2] or ids[1] & ids[2])
    again = split_by_patient(bundle, (0.6, 0.2, 0.2), seed=4)
    assert [p.patient_ids() for p in again] == [p.patient_ids() for p in parts]
    for p in parts:
        assert {e.patient_id for e in p.events} <= set(p.patient_ids())


def test_split_errors():
    bundle = generate_synthetic(SyntheticSpec(n_patients=2))
    with pytest.raises(ValueError):
        split_by_patient(bundle)
    with pytest.raises(ValueError):
        split_by_patient(generate_synthetic(SyntheticSpec(n_patients=5)), (0.5, 0.6, -0.1))


def test_bundle_write_and_load(tmp_path):
    bundle = generate_synthetic(SyntheticSpec(n_patients=5, seed=3))
    d = bundle.write(tmp_path / "data")
    loaded = load_bundle(d, d / "events.csv", d / "outcomes.csv")
    assert len(loaded.series) == len(bundle.series)
    assert loaded.events == bundle.events and loaded.outcomes == bundle.outcomes
    for a, b in zip(loaded.series, bundle.series):
        np.testing.assert_array_equal(a.values, b.values)
        assert a.diagnosis_min == b.diagnosis_min


def test_config_overrides(tmp_path):
    p = write(tmp_path, "c.json", json.dumps({
        "model.width": 32, "model.configuration": "generic", "train.epochs": 7,
        "synth.amplitude": [1, 2], "split.fractions": [0.5, 0.25, 0.25], "pipeline.std_threshold": 0.01,
    }))
    s = load_config(p)
    assert s.model.width == 32 and s.model.configuration.value == "generic"
    assert s.train.epochs == 7 and s.synth.amplitude == (1.0, 2.0)
    assert s.split_fractions == (0.5, 0.25, 0.25) and s.pipeline.std_threshold == 0.01
    seeded = s.with_seed(9)
    assert seeded.train.seed == seeded.synth.seed == seeded.split_seed == 9


def test_config_rejects_unknown_and_nested(tmp_path):
    with pytest.raises(KeyError):
        load_config(write(tmp_path, "c.json", '{"model.depth": 3}'))
    with pytest.raises(ValueError):
        load_config(write(tmp_path, "d.json", '{"model": {"width": 3}}'))
