import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modelman import criteria as C
from modelman import profile as P
from modelman.construct import make_woymp_function
from modelman.errors import InputError, NumericError

D, CV, INC = C.Verdict.DIVERGES, C.Verdict.CONVERGES, C.Verdict.INCONCLUSIVE


def power_law(p):
    return lambda r: np.asarray(r, float) ** -p


def test_harmonic_tail_diverges():
    v = C.classify_improper_integral(power_law(1.0), 1.0)
    assert v.verdict is D
    assert v.tail_exponent == pytest.approx(1.0, abs=1e-6)
    inc = np.diff([0.0] + [I for _, I in v.partial_integrals])
    assert np.allclose(inc, math.log(2.0), rtol=1e-8)


def test_inverse_square_total_is_one():
    v = C.classify_improper_integral(power_law(2.0), 1.0)
    assert v.verdict is CV
    assert v.extrapolated_total == pytest.approx(1.0, rel=1e-8)


@pytest.mark.parametrize("p,want", [(0.5, D), (0.9, D), (1.1, CV), (3.0, CV)])
def test_power_law_family(p, want):
    assert C.classify_improper_integral(power_law(p), 1.0).verdict is want


def test_log_space_integrand_beyond_overflow():
    # e^{-r^3} underflows early; the log handle keeps the tail
    v = C.classify_improper_integral(log_g=lambda r: -np.asarray(r, float) ** 3, r0=1.0)
    assert v.verdict is CV


def test_negative_integrand_rejected():
    with pytest.raises(InputError):
        C.classify_improper_integral(lambda r: -np.ones_like(np.asarray(r, float)), 1.0)


def test_nan_integrand_reports_location():
    with pytest.raises(NumericError) as err:
        C.classify_improper_integral(lambda r: np.where(np.asarray(r) > 5, np.nan, 1.0), 1.0)
    assert err.value.where is not None


def test_verdict_json_keys():
    doc = json.loads(C.classify_improper_integral(power_law(2.0), 1.0).to_json())
    for k in ("verdict", "r0", "R_max", "tail_exponent", "partial"):
        assert k in doc
    assert {"R", "I"} <= set(doc["partial"][0])


@settings(max_examples=25, deadline=None)
@given(p=st.floats(0.0, 0.95), q=st.floats(1.2, 4.0), c=st.floats(1.0, 100.0))
def test_monotone_consistency(p, q, c):
    """A pointwise larger integrand than a divergent one never converges,
    and a pointwise smaller one than a convergent one never diverges."""
    assert C.classify_improper_integral(power_law(p), 1.0).verdict is D
    big = lambda r: c * np.asarray(r, float) ** -p + np.asarray(r, float) ** -q
    assert C.classify_improper_integral(big, 1.0).verdict is not CV
    small = lambda r: np.asarray(r, float) ** -q / c
    assert C.classify_improper_integral(small, 1.0).verdict is not D


def _end(kind, n, alpha=None):
    return P.end_from_warping(P.make_named_profile(kind, n, alpha), n)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("alpha", [1.5, 2.0, 2.5, 3.0])
def test_power_exp_dichotomy_and_implication(n, alpha):
    end = _end("power_exp", n, alpha)
    g, m = C.grigoryan(end).verdict, C.model_completeness(end).verdict
    want = D if alpha <= 2 else CV
    assert g is want and m is want
    if g is D:
        assert m is D


def test_grigoryan_examples(euclid3):
    assert C.grigoryan(euclid3).verdict is D


@pytest.mark.parametrize("n", [2, 3])
def test_euclidean_model_diverges(n):
    assert C.model_completeness(_end("euclidean", n)).verdict is D


def test_recurrence_plane_vs_space(euclid2, euclid3):
    assert C.recurrence(euclid2).verdict is D
    assert C.recurrence(euclid3).verdict is CV


def test_hyperbolic_plane_transient():
    assert C.recurrence(_end("hyperbolic", 2)).verdict is CV


def test_woymp_report_violating():
    prof = P.make_named_profile("power_exp", 3, 3.0)
    u = make_woymp_function(3.0, 0.5)
    rep = C.woymp_report(u, prof, 3, C.WoympProbe(r0=2.0, R_max=50.0))
    assert rep.violating
    assert rep.window == (2.0, 50.0)
    assert all(v is None or v >= 1e-3 for v in rep.inf_delta_u)


def test_woymp_gaussian_not_violating():
    prof = P.make_named_profile("euclidean", 3)
    u = P.RadialFunction(lambda r: np.exp(-np.asarray(r) ** 2),
                         lambda r: -2 * r * np.exp(-np.asarray(r) ** 2),
                         lambda r: (4 * np.asarray(r) ** 2 - 2) * np.exp(-np.asarray(r) ** 2),
                         sup_u=1.0)
    assert not C.woymp_report(u, prof, 3).violating


def test_woymp_constant_not_violating():
    prof = P.make_named_profile("euclidean", 3)
    u = P.RadialFunction(lambda r: 0 * np.asarray(r) + 2.0, lambda r: 0 * np.asarray(r),
                         lambda r: 0 * np.asarray(r), sup_u=2.0)
    assert not C.woymp_report(u, prof, 3).violating
