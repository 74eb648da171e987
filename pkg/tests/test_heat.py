import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modelman import heat as H
from modelman import profile as P
from modelman.errors import InputError

BUMP1 = {"kind": "bump", "center": 1.0, "width": 0.1}
BUMP2 = {"kind": "bump", "center": 2.0, "width": 0.1}


def flat_strip():
    """S ≡ 1: the cylinder over a point, reflected at 0."""
    return P.EndProfile(lambda r: np.zeros_like(np.asarray(r, float)),
                        lambda r: np.log(np.asarray(r, float)), S_at_zero=1.0)


def assert_mass_ok(run):
    M = run.mass_trace
    assert np.all(M >= 0) and np.all(M <= 1 + 1e-8)
    assert np.all(np.diff(M) <= 1e-12)


def test_x_over_sinh_small_and_large():
    assert float(H.log_x_over_sinh(0.0)) == 0.0
    assert float(H.log_x_over_sinh(1e-9)) == pytest.approx(-1e-18 / 6, abs=1e-30)
    assert float(H.log_x_over_sinh(800.0)) == pytest.approx(math.log(1600.0) - 800.0, rel=1e-12)


def test_plane_keeps_its_mass(euclid2):
    run = H.solve_radial_heat(euclid2, 40.0, 4000, 1.0, 1e-3, BUMP1)
    assert_mass_ok(run)
    assert run.final_mass >= 0.999
    assert 1 - run.final_mass < 1e-3


def test_cubic_end_loses_mass(cubic_end):
    run = H.solve_radial_heat(cubic_end, 20.0, 4000, 1.0, 1e-3, BUMP2)
    assert_mass_ok(run)
    assert run.final_mass < 0.9


def test_loss_monotone_in_horizon(cubic_end):
    a = H.solve_radial_heat(cubic_end, 10.0, 1000, 0.2, 1e-3, BUMP2).final_mass
    b = H.solve_radial_heat(cubic_end, 10.0, 1000, 0.1, 1e-3, BUMP2).final_mass
    assert a <= b


def test_flat_strip_cosine_mode():
    R, T = 10.0, 2.0
    run = H.solve_radial_heat(flat_strip(), R, 2000, T, 5e-4, lambda r: np.cos(math.pi * r / (2 * R)))
    assert run.final_mass == pytest.approx(math.exp(-(math.pi / (2 * R)) ** 2 * T), abs=1e-4)


def test_trbdf2_agrees_with_crank_nicolson(euclid2):
    a = H.solve_radial_heat(euclid2, 10.0, 1000, 0.5, 1e-3, BUMP2).final_mass
    b = H.solve_radial_heat(euclid2, 10.0, 1000, 0.5, 1e-3, BUMP2, scheme="trbdf2").final_mass
    assert a == pytest.approx(b, abs=1e-6)


def test_semigroup_error_is_second_order(euclid2):
    u0 = {"kind": "bump", "center": 2.0, "width": 0.3}
    consts = []
    for dt in (4e-3, 2e-3, 1e-3):
        whole = H.solve_radial_heat(euclid2, 10.0, 640, 0.4, dt, u0)
        half = H.solve_radial_heat(euclid2, 10.0, 640, 0.2, dt, u0)
        rest = H.solve_radial_heat(euclid2, 10.0, 640, 0.2, dt, half.state)
        consts.append(np.abs(whole.state - rest.state).sum() / dt**2)
    assert max(consts) / min(consts) < 1.1


def test_deficits_euclidean_space(euclid3):
    rep = H.mass_deficit(euclid3, 1.0, (20.0, 40.0))
    assert all(d < 1e-3 for _, d in rep.deficits)
    assert rep.converged


def test_deficits_cubic_end_stabilise(cubic_end):
    rep = H.mass_deficit(cubic_end, 1.0, (20.0, 40.0))
    (_, a), (_, b) = rep.deficits
    assert a > 0.01 and b > 0.01 and abs(a - b) <= 0.05 * max(a, b)
    assert rep.converged


def test_zero_horizon_no_deficit(cubic_end):
    rep = H.mass_deficit(cubic_end, 0.0, (10.0, 20.0))
    assert all(d == 0 for _, d in rep.deficits)


def test_input_gates(euclid2):
    with pytest.raises(InputError):
        H.solve_radial_heat(euclid2, 10.0, 32, 1.0, 1e-3)
    with pytest.raises(InputError):
        H.solve_radial_heat(euclid2, 10.0, 1000, 1e-3, 1.0)
    with pytest.raises(InputError):
        H.solve_radial_heat(euclid2, 10.0, 1000, -1.0, 1e-3)


def test_csv_outputs(euclid2):
    run = H.solve_radial_heat(euclid2, 5.0, 100, 0.01, 1e-3, BUMP1, snapshot_times=(0.005,))
    lines = run.to_csv().splitlines()
    assert lines[0] == "t,mass" and len(lines) == len(run.times) + 1
    assert run.field_csv().splitlines()[0] == "t,r,u"


@settings(max_examples=10, deadline=None)
@given(center=st.floats(0.5, 6.0), width=st.floats(0.05, 0.5), alpha=st.sampled_from([1.5, 2.5, 3.0]))
def test_mass_invariants_implicit_euler_coarse(center, width, alpha):
    end = P.end_from_warping(P.make_named_profile("power_exp", 2, alpha), 2)
    run = H.solve_radial_heat(end, 8.0, 256, 0.1, 2e-3, {"kind": "bump", "center": center, "width": width},
                              theta=1.0)
    assert_mass_ok(run)
    assert run.check_invariants()


@settings(max_examples=10, deadline=None)
@given(center=st.floats(0.5, 5.0), width=st.floats(0.05, 0.5), alpha=st.sampled_from([1.5, 2.5, 3.0]))
def test_mass_invariants_crank_nicolson(center, width, alpha):
    end = P.end_from_warping(P.make_named_profile("power_exp", 2, alpha), 2)
    run = H.solve_radial_heat(end, 6.0, 1200, 0.05, 1e-4, {"kind": "bump", "center": center, "width": width})
    assert_mass_ok(run)
    assert run.check_invariants()
