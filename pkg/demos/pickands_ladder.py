# Pickands constants from a short ladder

# For alpha = 2 the classical constant is 1/sqrt(pi). A small run with few
# replicates already lands in the right neighbourhood; the acceptance suite
# uses 4000 replicates and theta = 0.002.

import math

from gpx.extremes import pickands_constant, pickands_estimate, pickands_extrapolate

ladder = [pickands_estimate(2.0, 1, T, 0.01, 500, seed=0, stream=i) for i, T in enumerate((4.0, 8.0, 16.0))]
for e in ladder:
    print(f"T={e.T:5.1f}  H(T)/T={e.value:.4f} +- {e.ci_half_width:.4f}")
fit = pickands_extrapolate(ladder)
print(f"extrapolated {fit.intercept:.4f} (se {fit.intercept_se:.4f}) vs {1 / math.sqrt(math.pi):.4f}")

# The halving loop keeps shrinking theta until two limits agree.

H = pickands_constant(2.0, 1, Ts=(4.0, 8.0, 16.0), theta=0.02, replicates=300, seed=1)
print("stable:", H.stable, "at theta", H.theta, "value", round(H.value, 4))
