# Which threshold families are crossed infinitely often

import math

from gpx.lil import (TailForm, ThresholdFamily, classify_dichotomy, f_p, gf_tail_form, h_p,
                     integral_If)

# f_p(s) decreases in p; the boundary between finitely and infinitely many
# crossings sits at p = 0.

for p in (-1.0, -0.1, 0.0, 0.5, 2.0):
    fam = ThresholdFamily(p, n=1, r=1, alpha=2.0, C=0.5)
    res = integral_If(gf_tail_form(fam), 20.0)
    print(f"p={p:5.1f}  f_p(1e4)={f_p(fam, 1e4):.4f}  verdict={classify_dichotomy(fam)}  integral={res.verdict}")

# A textbook convergent integrand: 1/(u log^2 u) from 2 integrates to 1/log 2.

print(integral_If(lambda u: 1 / (u * math.log(u) ** 2), 2.0, tail=TailForm(1.0, q=2.0)).value)

# The gap scale h_p outruns t itself, which is why it cannot be observed on a desk.

fam = ThresholdFamily(2.0, C=0.5)
print("h_p(e^10) =", h_p(fam, math.exp(10)), "vs t =", math.exp(10))
