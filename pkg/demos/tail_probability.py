# Exceedance probability of the order-statistic process on [0, 1]

import math

from gpx import powered_exponential
from gpx.extremes import classical_pickands, tail_asymptotic
from gpx.orderstats import empirical_tail

model = powered_exponential(1.0, 2.0)

# Monte Carlo against the asymptotic formula for a single path at moderate levels.
# The ratio drifts toward 1 only slowly as u grows.

for u in (2.0, 2.5, 3.0):
    est = empirical_tail(model, 1, 1, u, 0.2, 50_000, seed=0)
    print(f"u={u}  p_hat={est.p_hat:.3e}  asym={est.asymptotic_value:.3e}  ratio={est.ratio:.2f}  stable={est.stable}")

# With two copies and r = 1 the minimum must exceed u, so rhat = 2 and the
# constant is H_{2,2}. Here we plug in a rough value.

print("two copies, u=2:", tail_asymptotic(2.0, 2, 1, 2.0, 1.0, 1.1))
print("classical H_2:", classical_pickands(2.0), 1 / math.sqrt(math.pi))
