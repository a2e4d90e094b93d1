import csv
import hashlib
import json
import xml.etree.ElementTree as ET

import pytest

from nbeats_vitals.cli import main

TINY = {
    "synth.n_patients": 10,
    "synth.windows_per_patient": 2,
    "synth.drug_probability": 0.5,
    "model.width": 8,
    "model.trend_blocks": 1,
    "model.seasonality_blocks": 1,
    "model.generic_blocks": 1,
    "train.epochs": 3,
    "train.batch_size": 8,
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "tiny.json"
    cfg.write_text(json.dumps(TINY), encoding="utf-8")
    data = root / "data"
    assert main(["synth", "--config", str(cfg), "--seed", "3", "--out", str(data)]) == 0
    models = {}
    for arch in ("generic", "interpretable"):
        models[arch] = root / f"{arch}.nbw"
        argv = ["train", "--config", str(cfg), "--seed", "3", "--data", str(data),
                "--architecture", arch, "--out", str(models[arch])]
        assert main(argv) == 0
    return root, cfg, data, models


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_missing_data_is_usage_error(tmp_path, capsys):
    assert main(["train", "--out", str(tmp_path / "m.nbw")]) == 2
    assert "--data" in capsys.readouterr().err


def test_nonexistent_path_is_usage_error(tmp_path):
    assert main(["train", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "m.nbw")]) == 2


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["fly"])
    assert exc.value.code == 2


def test_train_writes_history(workspace):
    _, _, _, models = workspace
    for path in models.values():
        history = json.loads(path.with_name(path.name + ".history.json").read_text())
        assert len(history["history"]) <= 3 and history["best_epoch"] >= 1
        assert set(history["history"][0]) == {"epoch", "train_loss", "valid_loss"}


def test_train_is_reproducible(workspace, tmp_path):
    _, cfg, data, models = workspace
    again = tmp_path / "again.nbw"
    argv = ["train", "--config", str(cfg), "--seed", "3", "--data", str(data),
            "--architecture", "interpretable", "--out", str(again)]
    assert main(argv) == 0
    assert sha(again) == sha(models["interpretable"])


def test_bad_config_exits_1(workspace, tmp_path):
    _, _, data, _ = workspace
    bad = tmp_path / "bad.json"
    bad.write_text('{"model.depth": 2}', encoding="utf-8")
    assert main(["train", "--config", str(bad), "--data", str(data), "--out", str(tmp_path / "m")]) == 1


def test_evaluate_table(workspace, tmp_path):
    _, cfg, data, models = workspace
    out = tmp_path / "eval"
    argv = ["evaluate", "--config", str(cfg), "--seed", "3", "--data", str(data), "--out", str(out),
            "--model", str(models["generic"]), "--model", str(models["interpretable"])]
    assert main(argv) == 0
    rows = [ln for ln in (out / "report.txt").read_text().splitlines() if not ln.startswith("#")]
    assert len(rows) == 1 + 3
    assert [r.split("|")[0] for r in rows[1:]] == [
        "Persistence", "N-BEATS - Generic", "N-BEATS - Interpretable"]
    report = json.loads((out / "report.json").read_text())
    assert report["models"][0] == "Persistence"


def test_evaluate_duplicate_model_names(workspace, tmp_path):
    _, cfg, data, models = workspace
    out = tmp_path / "eval"
    argv = ["evaluate", "--config", str(cfg), "--seed", "3", "--data", str(data), "--out", str(out),
            "--model", str(models["generic"]), "--model", str(models["generic"])]
    assert main(argv) == 0
    assert len(json.loads((out / "report.json").read_text())["models"]) == 3


def test_forecast_csv(workspace, tmp_path):
    _, cfg, data, models = workspace
    out = tmp_path / "fc.csv"
    argv = ["forecast", "--config", str(cfg), "--data", str(data), "--model", str(models["interpretable"]),
            "--out", str(out)]
    assert main(argv) == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == {"patient_id", "cutoff_min", "step", "total", "trend", "seasonality"}
    assert len(rows) % 36 == 0 and rows
    for r in rows[:36]:
        parts = float(r["trend"]) + float(r["seasonality"])
        assert abs(parts - float(r["total"])) <= 1e-12


def test_analyze_rejects_generic(workspace, tmp_path):
    _, cfg, data, models = workspace
    argv = ["analyze", "--config", str(cfg), "--data", str(data), "--model", str(models["generic"]),
            "--out", str(tmp_path / "a")]
    assert main(argv) == 1


def test_analyze_without_events(workspace, tmp_path):
    _, cfg, data, models = workspace
    out = tmp_path / "a"
    argv = ["analyze", "--config", str(cfg), "--split", "all", "--data", str(data),
            "--model", str(models["interpretable"]), "--out", str(out)]
    assert main(argv) == 0
    result = json.loads((out / "analysis.json").read_text())
    assert result["summary"]["drug_fraction_flagged"] == 0.0
    assert "mortality" not in result["summary"]
    assert all(r["drug_events"] == [] for r in result["records"])


@pytest.fixture(scope="module")
def analyzed(workspace):
    root, cfg, data, models = workspace
    out = root / "analysis"
    argv = ["analyze", "--config", str(cfg), "--seed", "3", "--split", "all", "--data", str(data),
            "--model", str(models["interpretable"]), "--events", str(data / "events.csv"),
            "--outcomes", str(data / "outcomes.csv"), "--out", str(out)]
    assert main(argv) == 0
    return out / "analysis.json"


def test_analyze_summary(analyzed):
    result = json.loads(analyzed.read_text())
    s = result["summary"]
    assert s["n_flagged"] == -(-s["n_records"] // 4)
    assert set(s["mortality"]) >= {"matched_rate", "mismatched_rate"}
    assert (analyzed.parent / "summary.txt").read_text().startswith("records:")


def test_plot_deterministic_and_valid_svg(analyzed, tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    assert main(["plot", "--analysis", str(analyzed), "--out", str(a)]) == 0
    assert main(["plot", "--analysis", str(analyzed), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    root = ET.fromstring(a.read_text())
    assert root.tag.endswith("svg")


def test_plot_drug_band_only_with_events(analyzed, tmp_path):
    records = json.loads(analyzed.read_text())["records"]
    with_ev = next(r for r in records if r["drug_events"])
    without = next(r for r in records if not r["drug_events"])
    for rec, expect in ((with_ev, True), (without, False)):
        out = tmp_path / f"r{rec['record']}.svg"
        assert main(["plot", "--analysis", str(analyzed), "--record", str(rec["record"]), "--out", str(out)]) == 0
        assert ('class="drug-band"' in out.read_text()) is expect


def test_plot_flagged_directory(analyzed, tmp_path):
    out = tmp_path / "figs"
    assert main(["plot", "--analysis", str(analyzed), "--record", "flagged", "--out", str(out)]) == 0
    n_flagged = json.loads(analyzed.read_text())["summary"]["n_flagged"]
    assert len(list(out.glob("record_*.svg"))) == n_flagged


def test_plot_bad_record(analyzed, tmp_path):
    assert main(["plot", "--analysis", str(analyzed), "--record", "x", "--out", str(tmp_path / "p.svg")]) == 2
    assert main(["plot", "--analysis", str(analyzed), "--record", "99999", "--out", str(tmp_path / "p.svg")]) == 1
