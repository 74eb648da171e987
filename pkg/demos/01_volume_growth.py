"""How fast can volume grow before Brownian motion escapes in finite time?

On the model with warping f(r) = r^{(a-1)/(n-1)} exp(r^a/(n-1)) the sphere
area is S ~ r^{a-1} e^{r^a}.  We ask the three volume-growth integrals
about each exponent and print what the classifier sees in the tail.
"""

from modelman import criteria, profile

print(f"{'n':>2} {'alpha':>5}  {'model V/S':<11} {'Grigoryan':<11} {'recurrence':<11} tail exponent")
for n in (2, 3):
    for alpha in (1.5, 2.0, 2.5, 3.0):
        end = profile.end_from_warping(profile.make_named_profile("power_exp", n, alpha), n)
        m = criteria.model_completeness(end)
        g = criteria.grigoryan(end)
        rec = criteria.recurrence(end)
        print(f"{n:>2} {alpha:>5}  {m.verdict.value:<11} {g.verdict.value:<11} "
              f"{rec.verdict.value:<11} {m.tail_exponent:.3f}")

# The ratio V/S decays like r^{1-alpha}: the tail exponent alpha - 1 crosses
# 1 exactly at alpha = 2, which is where both criteria switch sides.
print("\nEuclidean space for comparison:")
for n in (2, 3):
    end = profile.end_from_warping(profile.make_named_profile("euclidean", n), n)
    print(f"  R^{n}: model {criteria.model_completeness(end).verdict.value}, "
          f"recurrence {criteria.recurrence(end).verdict.value}")
