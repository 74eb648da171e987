"""A manifold where the V/S integral diverges, yet mass still leaks.

End 1 is the cubic model seen from one unit inside (stochastically
incomplete on its own).  End 2 is built to balance it: long plateaus of
constant area whose values dominate the area of end 1 two steps ahead,
joined by short ramps.  Summed over both ends, each period contributes
a fixed amount to the integral of V/S, so the integral diverges linearly.
"""

import math

from modelman import construct, criteria, profile

base = profile.end_from_warping(profile.make_named_profile("power_exp", 2, 3.0), 2)
F = construct.dominating_area_envelope(base, d0=1.0, r_hi=34.0)
end2, plan = construct.build_balancing_end(F, n=2, k_max=30)
end1 = base.shifted(1.0)

print("first plateau values:", [f"{s:.4g}" for s in plan.plateau_values[:5]])
print("checked properties:", ", ".join(plan.bullets))

m = construct.glue_two_ends(end1, end2)
rep = construct.verify_counterexample(m, range(1, 31))
print(f"per-period integral A_k: min {min(rep.A):.4f} (needs >= {2 / 11:.4f})")
print(f"balancing-end integral B_k: max {max(rep.B):.5f} (needs <= {3 / 32:.5f})")
print(f"sum of A_k over 30 periods: {math.fsum(rep.A):.2f}")

print("V/S integral, glued manifold:", criteria.model_completeness(m).verdict.value)
print("V/S integral, end 1 alone:   ", criteria.model_completeness(end1).verdict.value)

ctrl = construct.verify_counterexample(construct.glue_two_ends(end1, end1), range(1, 31))
print(f"control (no balancing end): {sum(ctrl.passes)}/30 periods pass")
