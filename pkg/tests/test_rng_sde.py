import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modelman import profile as P
from modelman import rng, sde
from modelman.errors import InputError, PolicyError


def test_philox_matches_numpy():
    # numpy advances the counter before each block, so its first block is ours at counter 1
    raw = np.random.Philox(key=5, counter=0).random_raw(8)
    ours = rng.philox4x64((1, 0, 0, 0), (5, 0)) + rng.philox4x64((2, 0, 0, 0), (5, 0))
    assert [int(v) for v in raw] == list(ours)


@settings(max_examples=30, deadline=None)
@given(key=st.integers(0, 2**64 - 1), c=st.integers(0, 2**40))
def test_philox_matches_numpy_random_keys(key, c):
    bg = np.random.Philox(key=key, counter=c)
    assert [int(v) for v in bg.random_raw(4)] == list(rng.philox4x64((c + 1, 0, 0, 0), (key, 0)))


def test_derived_seeds_distinct():
    seeds = {rng.derive_seed(7, j) for j in range(10_000)}
    assert len(seeds) == 10_000
    assert rng.derive_seed(7, 3) != rng.derive_seed(8, 3)


def test_normals_moments():
    z = rng.normals(rng.derive_seed(1, 0), range(40_000))
    assert abs(z.mean()) < 4 / math.sqrt(z.size)
    assert abs(z.var() - 1) < 0.03


def test_wilson_interval():
    lo, hi = rng.wilson_interval(0, 10_000)
    assert lo == 0.0 and hi <= 4e-4
    lo, hi = rng.wilson_interval(50, 100)
    assert lo < 0.5 < hi and hi - 0.5 == pytest.approx(0.5 - lo)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 10**6), frac=st.floats(0, 1))
def test_wilson_bounds_contain_estimate(n, frac):
    k = int(frac * n)
    lo, hi = rng.wilson_interval(k, n)
    assert 0 <= lo <= k / n <= hi <= 1


def test_certification_integral(cubic_prof):
    tab = sde.certification_table(cubic_prof, 2, 12.0)
    # drift (α-1)/ρ + αρ^{α-1} = 2/ρ + 3ρ²; integrate 2/b directly
    from scipy.integrate import quad
    want = quad(lambda x: 2 / (2 / x + 3 * x * x), 12, np.inf, epsabs=0, epsrel=1e-12)[0]
    assert tab.values[0] == pytest.approx(want, rel=1e-8)
    assert sde.certification_table(P.make_named_profile("euclidean", 3), 3, 1.0) is None


def test_zero_horizon_path(cubic_prof):
    out = sde.simulate_radial_path(cubic_prof, 2, 2.0, 0.0, seed=7)
    assert out.kind == "Survived" and out.value == 2.0 and out.steps == 0


def test_single_path_explodes(cubic_prof):
    out = sde.simulate_radial_path(cubic_prof, 2, 2.0, 1.0, seed=7)
    assert out.kind == "Exploded" and 0 < out.value <= 1.0


def test_euclidean_paths_survive():
    out = sde.simulate_radial_path(P.make_named_profile("euclidean", 3), 3, 1.0, 1.0, seed=7)
    assert out.kind == "Survived" and out.value >= 0


def test_explicit_cert_radius_rejected_when_divergent():
    with pytest.raises(PolicyError):
        sde.simulate_radial_path(P.make_named_profile("euclidean", 3), 3, 1.0, 1.0, 1,
                                 sde.SdePolicy(R_cert=12.0))


def test_bad_inputs(cubic_prof):
    with pytest.raises(InputError):
        sde.simulate_radial_path(cubic_prof, 2, 0.0, 1.0, 1)
    with pytest.raises(InputError):
        sde.simulate_radial_path(cubic_prof, 2, 1.0, -1.0, 1)


def test_majority_explode_with_fixed_cert(cubic_prof):
    est = sde.explosion_probability(cubic_prof, 2, 2.0, 1.0, 200, base_seed=3, workers=1,
                                    policy=sde.SdePolicy(R_cert=12.0))
    assert est.n_exploded > 100 and est.R_cert == 12.0


def test_worker_count_does_not_change_results(cubic_prof):
    a = sde.explosion_probability(cubic_prof, 2, 2.0, 0.2, 300, base_seed=11, workers=1)
    b = sde.explosion_probability(cubic_prof, 2, 2.0, 0.2, 300, base_seed=11, workers=3)
    assert a.same_as(b)
    assert a.to_json() == b.to_json()


def test_estimate_invariants_and_exports(cubic_prof):
    est = sde.explosion_probability(cubic_prof, 2, 2.0, 0.05, 200, base_seed=2, workers=2)
    assert 0 <= est.ci_low <= est.p_hat <= est.ci_high <= 1
    assert est.n_exploded + est.n_survived + est.n_censored == est.n_paths
    assert all(0 < o.value <= 0.05 for o in est.outcomes if o.kind == "Exploded")
    rows = est.paths_csv().splitlines()
    assert rows[0] == "seed,outcome,t_explode_or_r_T,steps" and len(rows) == 201
    assert json.loads(est.to_json())["n_paths"] == 200


def test_horizon_monotone_on_shared_seeds(cubic_prof):
    a = sde.explosion_probability(cubic_prof, 2, 2.0, 0.05, 400, base_seed=5)
    b = sde.explosion_probability(cubic_prof, 2, 2.0, 0.2, 400, base_seed=5)
    assert a.p_hat <= b.p_hat + (b.ci_high - b.ci_low)


def test_euclidean_second_moment():
    e3 = P.make_named_profile("euclidean", 3)
    est = sde.explosion_probability(e3, 3, 1.0, 1.0, 4000, base_seed=1)
    assert est.n_exploded == 0
    r2 = np.array([o.value for o in est.outcomes]) ** 2
    assert abs(r2.mean() - (1 + 2 * 3 * 1.0)) <= 3 * r2.std() / math.sqrt(r2.size)


@pytest.mark.parametrize("field", ["dt_max", "c_step"])
def test_step_halving_within_ci(cubic_prof, field):
    base = sde.SdePolicy()
    half = sde.SdePolicy(**{field: getattr(base, field) / 2})
    a = sde.explosion_probability(cubic_prof, 2, 2.0, 0.2, 10_000, base_seed=9, policy=base,
                                  keep_paths=False)
    b = sde.explosion_probability(cubic_prof, 2, 2.0, 0.2, 10_000, base_seed=9, policy=half,
                                  keep_paths=False)
    assert 0.05 < a.p_hat < 0.99
    assert abs(a.p_hat - b.p_hat) < a.ci_high - a.ci_low
