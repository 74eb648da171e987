"""A bounded function whose Laplacian blows up near its supremum.

u = 1 - r^{-1/2} outside the unit ball, capped smoothly inside.  On the
cubic model the Laplacian grows like 1.5 r^{1/2}, so no sequence of
near-maximum points can have a nonpositive Laplacian in the limit.
"""

import numpy as np

from modelman import construct, criteria, profile

prof = profile.make_named_profile("power_exp", 3, 3.0)
u = construct.make_woymp_function(3.0, 0.5)
for r in (2.0, 4.0, 16.0, 49.0):
    print(f"r = {r:5.1f}: u = {float(u.u(r)):.4f}, Laplacian = {float(construct.woymp_laplacian(3.0, 0.5, r)):.4f}")

rep = criteria.woymp_report(u, prof, 3, criteria.WoympProbe(r0=2.0, R_max=50.0))
for eps, inf in zip(rep.eps_levels, rep.inf_delta_u):
    print(f"  on {{u >= {rep.u_ref:.4f} - {eps:g}}}: inf of Laplacian = {inf}")
print("violating on the sampled window", rep.window, ":", rep.violating)

# Compare with a function that attains its maximum: the Gaussian bump.
flat = profile.make_named_profile("euclidean", 3)
g = profile.RadialFunction(lambda r: np.exp(-np.asarray(r) ** 2), sup_u=1.0)
print("Gaussian on R^3 violating:", criteria.woymp_report(g, flat, 3).violating)
