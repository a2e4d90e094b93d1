"""
Basis expansions and the additive forecast
==========================================

An interpretable model is two stacks of blocks. Trend blocks can only emit
low-degree polynomials of normalized time; seasonality blocks can only emit
Fourier series. The forecast is the sum of the stack outputs, so each part
can be read off directly.
"""

# %%
import numpy as np

from nbeats_vitals.nbeats import (
    ModelConfig,
    build_model,
    build_seasonality_basis,
    build_trend_basis,
    model_forward,
    time_grid,
)

H = 36
print("grid head:", time_grid(H)[:4])

# %%
# The trend basis has one column per power of t, t**0 up to t**p.
T = build_trend_basis(H, 2)
print("trend basis", T.shape)
print(T[:3])

# %%
# The seasonality basis holds cosines first, then sines. The all-zero sin(0)
# column is left out, so H = 36 gives 18 + 17 = 35 columns.
S = build_seasonality_basis(H)
print("seasonality basis", S.shape, "rank", np.linalg.matrix_rank(S))

# %%
# A randomly initialised model already obeys the structure: the trend
# partial has vanishing third differences and the seasonality partial lies
# in the column span of S.
model = build_model(ModelConfig(), seed=0)
x = np.random.default_rng(0).uniform(0.3, 0.7, size=72)
out = model_forward(model, x)

print("max |3rd difference| of trend:", np.abs(np.diff(out["trend"], n=3)).max())
coef, *_ = np.linalg.lstsq(S, out["seasonality"], rcond=None)
print("seasonality residual:", np.linalg.norm(out["seasonality"] - S @ coef))

# %%
# The total is the sum of partials, computed in the same order, so equality is exact.
print("exact additivity:", np.array_equal(out["trend"] + out["seasonality"], out.total))

# %%
# The generic configuration has one stack of learned bases and nothing to interpret.
generic = build_model(ModelConfig(configuration="generic"), seed=0)
print([s.name for s in generic.stacks], sum(p.size for p in generic.params()), "parameters")
