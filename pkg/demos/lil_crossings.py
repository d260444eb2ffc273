# Running maxima and threshold crossings over a long horizon

from gpx import powered_exponential
from gpx.lil import LilConfig, lil_experiment

# C = 1/2 with alpha = 2 gives the crossing constant 1/(2 pi).

cfg = LilConfig(powered_exponential(0.5, 2.0), p=1.0, horizon=1e4, runs=10, seed=0)
rep = lil_experiment(cfg)
print("mesh", rep.mesh)
print("running max / sqrt(2 log t):", rep.runmax)
print("crossings:", rep.crossings["mean"], "predicted", round(rep.crossings["predicted_klogT"], 3))
for lo, obs, pred in zip(rep.crossings["bins"], rep.crossings["observed_per_bin"],
                         rep.crossings["predicted_per_bin"]):
    print(f"  from t={lo:8.1f}: observed {obs:.2f}  predicted {pred:.2f}")
print("gap over h_p:", rep.gaps["gap_over_h_p"])
