# Stationary Gaussian paths by circulant embedding

# A powered-exponential correlation with alpha = 1 is the Ornstein-Uhlenbeck
# kernel. We put it on a grid, embed it, and draw a few paths.

import numpy as np

from gpx import GridSpec, circulant_embed, powered_exponential, sample_stationary
from gpx.gaussim import stationary_blocks

model = powered_exponential(C=1.0, alpha=1.0)
grid = GridSpec(0.0, 10.0, 0.01)
emb = circulant_embed(model, grid)
print("embedding size", emb.size, "min/max eigenvalue", emb.worst)

# One ensemble of three independent copies.

ens = sample_stationary(model, grid, n=3, seed=1, embedding=emb)
print(ens.values.shape)

# The sample covariance at a few lags should sit close to exp(-|t|).

x = stationary_blocks(model, grid, 1, 20_000, seed=2, embedding=emb)[:, 0, :]
for lag in (0, 10, 50, 100):
    est = np.mean(x[:, 0] * x[:, lag])
    print(f"lag {lag * grid.mesh:4.2f}  sample {est:+.4f}  target {np.exp(-lag * grid.mesh):+.4f}")

# Same seed, different thread count, same bytes.

a = stationary_blocks(model, grid, 1, 500, seed=3, threads=1, embedding=emb)
b = stationary_blocks(model, grid, 1, 500, seed=3, threads=4, embedding=emb)
print("thread independent:", a.tobytes() == b.tobytes())
