"""Two recurrent surfaces of revolution whose summed ratio is finite.

Each factor keeps unit area on one interval in every four, which is
enough for the integral of 1/S to diverge.  The two factors take turns,
so their sum is always T(r) = 3 r^2 e^{r^3} and (V1+V2)/(S1+S2)
integrates to something finite.
"""

import numpy as np

from modelman import construct, criteria

e1, e2 = construct.build_recurrent_finite_ratio_pair()
r = np.array([4.0, 4.5, 5.5, 6.5, 7.5])
print("r     S1          S2")
for x, a, b in zip(r, e1.S(r), e2.S(r)):
    print(f"{x:<5} {a:<11.4g} {b:<11.4g}")

for name, e in (("S1", e1), ("S2", e2)):
    v = criteria.recurrence(e, r0=1.25)
    print(f"integral of 1/{name}: {v.verdict.value}, partial sum at R=40 is "
          f"{dict(v.partial_integrals)[40.0]:.3f}")

comb = criteria.model_completeness(construct.glue_two_ends(e1, e2), r0=4.0)
print(f"(V1+V2)/(S1+S2): {comb.verdict.value}, tail beyond {comb.R_max:g} "
      f"~ {comb.extrapolated_tail:.6f} (1/(3R) = {1 / (3 * comb.R_max):.6f})")
