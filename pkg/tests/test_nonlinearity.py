import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nkglab.errors import ConfigError, ModelDomainError, ModelRangeError
from nkglab.nonlinearity import (
    NonlinearityModel,
    PolynomialR,
    TruncatedR,
    WellsR,
    check_conditions,
    decompose_negative_set,
    evaluate,
    load_model_file,
    model_hash,
    model_to_text,
    parse_model_text,
    truncate_model,
)


def test_evaluate_cubic_quintic_anchor_points(cubic_quintic):
    ev = evaluate(cubic_quintic, 1.0)
    assert ev.r == pytest.approx(0.0, abs=1e-15)
    assert ev.dr == pytest.approx(2.0)
    assert ev.f == pytest.approx(0.5)

    ev = evaluate(cubic_quintic, 0.5)
    assert ev.r == pytest.approx(-0.09375)
    assert ev.df == pytest.approx(0.0625)


def test_evaluate_vanishes_at_zero(cubic_quintic, deep_well_model, quartic_model):
    for m in (cubic_quintic, deep_well_model, quartic_model):
        ev = evaluate(m, 0.0)
        assert ev.r == 0.0 and ev.dr == 0.0 and ev.d2r == 0.0 and ev.f == 0.0


def test_evaluate_rejects_negative_amplitude(cubic_quintic):
    with pytest.raises(ModelDomainError):
        cubic_quintic.r(-0.1)


def test_declared_range_enforced():
    m = NonlinearityModel(
        omega=1.0, dimension=3,
        r_spec=PolynomialR((0.0, 0.0, 0.0, -1.0, 0.0, 1.0)),
        p_exponent=3.0, q_exponent=5.0, s_eval_max=2.0,
    )
    assert m.r(1.9) is not None
    with pytest.raises(ModelRangeError):
        m.r(2.5)


def test_growth_exponent_window_enforced():
    spec = PolynomialR((0.0, 0.0, 0.0, -1.0))
    with pytest.raises(ValueError):
        NonlinearityModel(omega=1.0, dimension=3, r_spec=spec, p_exponent=2.0, q_exponent=3.0)
    with pytest.raises(ValueError):
        NonlinearityModel(omega=1.0, dimension=3, r_spec=spec, p_exponent=3.0, q_exponent=6.0)
    with pytest.raises(ValueError):
        NonlinearityModel(omega=1.0, dimension=3, r_spec=spec, p_exponent=4.0, q_exponent=3.0)


def test_polynomial_low_order_terms_must_vanish():
    with pytest.raises(ValueError):
        PolynomialR((0.0, 0.0, 0.5, -1.0))


def test_df_over_s_fills_removable_singularity(cubic_quintic):
    assert float(cubic_quintic.df_over_s(0.0)) == pytest.approx(1.0)
    # continuous approach to the limit
    s = np.geomspace(1e-8, 1e-2, 20)
    vals = cubic_quintic.df_over_s(s)
    assert np.all(np.abs(vals - 1.0) < 0.05)


@given(st.floats(min_value=0.0, max_value=7.5))
@settings(max_examples=60, deadline=None)
def test_derivative_matches_finite_difference(s):
    m = NonlinearityModel(
        omega=1.0, dimension=3,
        r_spec=PolynomialR((0.0, 0.0, 0.0, -1.0, 0.0, 1.0)),
        p_exponent=3.0, q_exponent=5.0,
    )
    h = 1e-5
    lo = max(s - h, 0.0)
    fd = (float(m.r(s + h)) - float(m.r(lo))) / (s + h - lo)
    scale = max(1.0, abs(float(m.dr(s))))
    assert abs(float(m.dr(max(s, 0.5 * h))) - fd) < 2e-6 * scale


def test_wells_derivative_matches_finite_difference(two_well_model):
    s = np.linspace(0.05, 3.5, 173)
    h = 1e-5
    fd = (two_well_model.r(s + h) - two_well_model.r(np.maximum(s - h, 0.0))) / (2 * h)
    an = two_well_model.dr(s)
    assert np.max(np.abs(an - fd)) < 1e-6 * max(1.0, float(np.max(np.abs(an))))


# ---------------------------------------------------------------- conditions


def test_conditions_cubic_quintic(cubic_quintic):
    rep = check_conditions(cubic_quintic)
    assert rep.hypotheses_ok
    assert rep.nc_status == "holds"
    # fitted leading exponent must sit below the binding cap 2 + 4/N
    assert 0.0 < rep.nc_epsilon < 4.0 / 3.0
    assert rep.zc_status == "fails"
    assert rep.coercivity_c1 > 0.0


def test_conditions_quartic(quartic_model):
    rep = check_conditions(quartic_model)
    assert rep.hypotheses_ok
    assert rep.nc_status == "fails"
    assert rep.h2_ok and float(quartic_model.r(rep.h2_witness_s)) < 0.0


def test_conditions_deep_well(deep_well_model):
    rep = check_conditions(deep_well_model)
    assert rep.hypotheses_ok
    assert rep.zc_status == "holds"
    assert rep.zc_witness_s == pytest.approx(2.0, abs=1e-6)
    assert rep.nc_status == "fails"  # compact support, R = 0 near 0


def test_conditions_flag_floor_violation():
    # well twice too deep: F dips negative around the center
    bad = NonlinearityModel(
        omega=1.0, dimension=3,
        r_spec=WellsR(centers=(2.0,), widths=(1.0,), depths=(1.0,)),
        p_exponent=3.0, q_exponent=5.0,
    )
    rep = check_conditions(bad)
    assert not rep.h1_ok
    assert float(bad.f(rep.h1_witness_s)) < 0.0
    assert not rep.hypotheses_ok


def test_conditions_h2_needs_a_negative_value():
    flat = NonlinearityModel(
        omega=1.0, dimension=3,
        r_spec=PolynomialR((0.0, 0.0, 0.0, 0.0)),
        p_exponent=3.0, q_exponent=5.0,
    )
    rep = check_conditions(flat)
    assert rep.h0_ok and rep.h1_ok
    assert not rep.h2_ok


def test_coercivity_constants_found_for_every_admissible_fixture(
    cubic_quintic, quartic_model, deep_well_model, two_well_model
):
    # near zero the static density must dominate a parabola
    for m in (cubic_quintic, quartic_model, deep_well_model, two_well_model):
        rep = check_conditions(m)
        c1, delta = rep.coercivity_c1, rep.coercivity_delta
        assert c1 > 0.0 and delta > 0.0
        s = np.linspace(1e-9, delta, 997)
        assert np.all(m.f(s) >= c1 * s**2 * (1.0 - 1e-9))


def test_f_nonnegative_whenever_floor_holds(cubic_quintic, deep_well_model, two_well_model):
    s = np.linspace(0.0, 8.0, 4001)
    for m in (cubic_quintic, deep_well_model, two_well_model):
        assert check_conditions(m).h1_ok
        assert np.all(m.f(s) >= -1e-12)


# ---------------------------------------------------------------- negative set


def test_decompose_cubic_quintic(cubic_quintic):
    dec = decompose_negative_set(cubic_quintic)
    assert dec.count == 1
    xi, eta = dec.intervals[0]
    assert xi == pytest.approx(0.0, abs=1e-10)
    assert eta == pytest.approx(1.0, abs=1e-9)


def test_decompose_two_sign_chart_wells():
    # s^3 (s-1)(s-2)(s-3)(s-4) is negative exactly on (1,2) and (3,4)
    spec = PolynomialR((0.0, 0.0, 0.0, 24.0, -50.0, 35.0, -10.0, 1.0))
    m = NonlinearityModel(omega=1.0, dimension=3, r_spec=spec, p_exponent=3.0, q_exponent=5.0)
    dec = decompose_negative_set(m, s_scan_max=5.0)
    assert dec.count == 2
    (a1, b1), (a2, b2) = dec.intervals
    assert (a1, b1) == (pytest.approx(1.0, abs=1e-9), pytest.approx(2.0, abs=1e-9))
    assert (a2, b2) == (pytest.approx(3.0, abs=1e-9), pytest.approx(4.0, abs=1e-9))


def test_decompose_nonnegative_model_is_empty():
    m = NonlinearityModel(
        omega=1.0, dimension=3,
        r_spec=PolynomialR((0.0, 0.0, 0.0, 0.0, 1.0)),
        p_exponent=3.0, q_exponent=4.0,
    )
    assert decompose_negative_set(m).count == 0


def test_decompose_endpoints_are_roots(two_well_model):
    dec = decompose_negative_set(two_well_model, root_tol=1e-10)
    assert dec.count == 2
    for xi, eta in dec.intervals:
        if xi > 0.0:
            assert abs(float(two_well_model.r(xi))) <= 1e-9
        assert abs(float(two_well_model.r(eta))) <= 1e-9
    # intervals strictly ordered and disjoint
    flat = [v for pair in dec.intervals for v in pair]
    assert flat == sorted(flat)
    assert dec.intervals[0][1] < dec.intervals[1][0]


def test_decompose_interior_really_negative(two_well_model):
    dec = decompose_negative_set(two_well_model)
    for xi, eta in dec.intervals:
        s = np.linspace(xi + 1e-6, eta - 1e-6, 257)
        assert np.all(two_well_model.r(s) < 0.0)


# ---------------------------------------------------------------- truncation


def test_truncate_identity_below_cut(two_well_model):
    t1 = truncate_model(two_well_model, 1)
    eta1 = decompose_negative_set(two_well_model).intervals[0][1]
    s = np.linspace(0.0, eta1, 400)
    np.testing.assert_allclose(t1.r(s), two_well_model.r(s), rtol=0, atol=1e-14)


def test_truncate_monotone_above_cut(two_well_model):
    t1 = truncate_model(two_well_model, 1)
    eta1 = decompose_negative_set(two_well_model).intervals[0][1]
    s = np.linspace(eta1, 8.0, 800)
    assert np.all(t1.dr(s) >= -1e-12)


def test_truncate_drops_outer_wells(two_well_model):
    t1 = truncate_model(two_well_model, 1)
    dec = decompose_negative_set(t1)
    assert dec.count == 1
    xi, eta = dec.intervals[0]
    orig = decompose_negative_set(two_well_model).intervals[0]
    assert xi == pytest.approx(orig[0], abs=1e-8)
    assert eta == pytest.approx(orig[1], abs=1e-8)


def test_truncate_at_last_well_changes_nothing_below(two_well_model):
    t2 = truncate_model(two_well_model, 2)
    eta2 = decompose_negative_set(two_well_model).intervals[1][1]
    s = np.linspace(0.0, eta2, 600)
    np.testing.assert_allclose(t2.r(s), two_well_model.r(s), rtol=0, atol=1e-14)


def test_truncate_idempotent(two_well_model):
    t1 = truncate_model(two_well_model, 1)
    t11 = truncate_model(t1, 1)
    s = np.linspace(0.0, 8.0, 1600)
    # endpoints are re-resolved to root_tol, so exact equality is too much
    np.testing.assert_allclose(t11.r(s), t1.r(s), rtol=1e-9, atol=1e-9)


def test_truncated_model_keeps_hypotheses(two_well_model):
    rep = check_conditions(truncate_model(two_well_model, 1))
    assert rep.h0_ok and rep.h1_ok and rep.h3_ok


# ---------------------------------------------------------------- model files


MODEL_TEXT = """
[model]
kind = polynomial
omega = 1.0
dimension = 3
p_exponent = 3.0
q_exponent = 5.0

[polynomial]
coefficients = 0, 0, 0, -1.0, 0, 1.0
"""


def test_parse_model_text_roundtrip(cubic_quintic):
    m = parse_model_text(MODEL_TEXT)
    s = np.linspace(0.0, 4.0, 200)
    np.testing.assert_allclose(m.r(s), cubic_quintic.r(s), rtol=0, atol=0)
    assert model_hash(m) == model_hash(cubic_quintic)


def test_model_to_text_roundtrip(two_well_model):
    m = parse_model_text(model_to_text(two_well_model))
    assert model_hash(m) == model_hash(two_well_model)


def test_parse_rejects_malformed_input():
    with pytest.raises(ConfigError):
        parse_model_text("[model]\nkind = polynomial\n")  # missing everything
    with pytest.raises(ConfigError):
        parse_model_text(MODEL_TEXT.replace("kind = polynomial", "kind = rational"))
    with pytest.raises(ConfigError):
        parse_model_text(MODEL_TEXT.replace("omega = 1.0", "omega = zero"))


def test_load_model_file(tmp_path, cubic_quintic):
    path = tmp_path / "model.ini"
    path.write_text(model_to_text(cubic_quintic))
    assert model_hash(load_model_file(path)) == model_hash(cubic_quintic)


def test_model_hash_distinguishes_parameters(cubic_quintic, quartic_model):
    assert model_hash(cubic_quintic) != model_hash(quartic_model)


def test_wells_truncation_takes_the_drop_fast_path(two_well_model):
    # dropping the outer well needs no generic continuation
    t1 = truncate_model(two_well_model, 1)
    assert isinstance(t1.r_spec, WellsR)
    assert len(t1.r_spec.centers) == 1


def test_truncated_models_refuse_serialization(cubic_quintic):
    t1 = truncate_model(cubic_quintic, 1)
    assert isinstance(t1.r_spec, TruncatedR)
    with pytest.raises(ValueError):
        model_to_text(t1)


TRUNCATED_TEXT = """
[model]
kind = truncated
omega = 1.0
dimension = 3
p_exponent = 3.0
q_exponent = 5.0

[truncated]
base_kind = wells
cut_index = 1

[wells]
centers = 1.0 2.5
widths = 0.5 0.5
depths = 0.40 0.49
"""


def test_parse_truncated_model(two_well_model):
    m = parse_model_text(TRUNCATED_TEXT)
    t1 = truncate_model(two_well_model, 1)
    s = np.linspace(0.0, 8.0, 900)
    np.testing.assert_allclose(m.r(s), t1.r(s), rtol=1e-12, atol=1e-12)
    assert model_hash(m) == model_hash(t1)
