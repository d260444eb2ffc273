# Stress-testing the order-statistics comparison inequality

import numpy as np

from gpx.berman import ComparisonInstance, check_batch, check_instance, fit_constants, random_instance

# Raising a correlation can only raise the non-exceedance probability, so
# going from 0 to 0.5 makes P0 - P1 negative and the ratio is 0.

fwd = ComparisonInstance(1, 1, [[1, 0], [0, 1]], [[1, 0.5], [0.5, 1]], [1.0, 1.0])
print(check_instance(fwd))

# The reverse direction has a positive difference but a zero bound.

rev = ComparisonInstance(1, 1, [[1, 0.5], [0.5, 1]], [[1, 0], [0, 1]], [1.0, 1.0])
print(check_instance(rev).status)

# A random family and the fitted constants per (n, r).

gen = np.random.default_rng(0)
reports = check_batch([random_instance(gen) for _ in range(60)])
print(fit_constants(reports))
print({s: sum(r.status == s for r in reports) for s in ("ok", "no-control", "undefined-clean")})
