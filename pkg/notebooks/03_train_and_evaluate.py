"""
Training and the evaluation table
=================================

Both configurations are trained on a patient-level split and then scored
against the persistence baseline with MSE, MAPE and DTW. Sizes here are
reduced so the script runs in a few seconds; the acceptance suite uses
the full defaults.
"""

# %%
from nbeats_vitals.data_io import SyntheticSpec, generate_synthetic, split_by_patient
from nbeats_vitals.metrics import evaluate
from nbeats_vitals.nbeats import ModelConfig, build_model
from nbeats_vitals.preprocess import run_pipeline
from nbeats_vitals.training import TrainConfig, train

bundle = generate_synthetic(SyntheticSpec(n_patients=40, seed=3))
parts = split_by_patient(bundle, (0.6, 0.2, 0.2), seed=3)
train_w, valid_w, test_w = (run_pipeline(p.series)[0] for p in parts)
print(len(train_w), len(valid_w), len(test_w), "windows")

# %%
models = {}
for name, cfg in [
    ("N-BEATS - Generic", ModelConfig(configuration="generic", width=32)),
    ("N-BEATS - Interpretable", ModelConfig(width=32)),
]:
    model = build_model(cfg, seed=3)
    result = train(model, train_w, valid_w, TrainConfig(epochs=60, patience=15, seed=3))
    print(f"{name}: best epoch {result.best_epoch}, valid MSE {result.best_valid_loss:.2e}")
    models[name] = model.forecast

# %%
# Persistence is added automatically and always comes first.
report = evaluate(models, test_w)
print(report.to_table())
