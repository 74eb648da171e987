"""Two views of the same mass leak.

The heat equation on a ball of radius R with absorbing boundary loses
mass that the diffusion carries to infinity.  If the loss stabilises as
R grows, the manifold is stochastically incomplete, and the fraction of
simulated radial paths that explode by time T should agree with it.
"""

import os
import sys

from modelman import heat, profile, sde
from modelman.io import emit_series

n, alpha, T = 2, 3.0, 1.0
prof = profile.make_named_profile("power_exp", n, alpha)
end = profile.end_from_warping(prof, n)
bump = {"kind": "bump", "center": 2.0, "width": 0.1}

rep = heat.mass_deficit(end, T, (10.0, 20.0, 40.0), u0=bump)
for R, d in rep.deficits:
    print(f"R = {R:5.1f}: heat deficit 1 - M(T) = {d:.9f}")
print("deficits stabilised:", rep.converged)

paths = int(sys.argv[1]) if len(sys.argv) > 1 else 10_000
est = sde.explosion_probability(prof, n, 2.0, T, paths, base_seed=1, keep_paths=False)
print(f"explosion probability from {paths} paths: {est.p_hat:.4f} "
      f"[{est.ci_low:.4f}, {est.ci_high:.4f}], mean explosion time {est.mean_explosion_time:.3f}")

# Euclidean control: no leak at all.
flat = profile.end_from_warping(profile.make_named_profile("euclidean", 3), 3)
print("R^3 deficits:", [f"{d:.1e}" for _, d in heat.mass_deficit(flat, T, (20.0, 40.0)).deficits])

out = os.path.join(os.path.dirname(__file__), "output")
run = heat.solve_radial_heat(end, 20.0, 4000, T, 1e-3, bump)
emit_series("mass", zip(run.times, run.mass_trace), os.path.join(out, "mass_trace.csv"))
print("mass trace written to", os.path.join(out, "mass_trace.csv"))
