"""Nilpotent classification tests: implicit series, leading data, tables."""
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from nilcyc.exactalg import MPoly, YSeries, parse_poly, poly_eval
from nilcyc.nilclass import (
    CENTER_OR_FOCUS,
    CUSP,
    NOT_ISOLATED,
    SADDLE,
    NilpotentData,
    classify,
    classify_half,
    fg_data,
    implicit_series,
    monodromic_candidate,
    multiplicity_of_family,
    nilpotent_parts,
)
from nilcyc.sysmodel import Z2CubicParams, build_z2_cubic, shift_to_origin


def shifted(params: Z2CubicParams):
    return shift_to_origin(build_z2_cubic(params), (1, 0))


# -- implicit series --------------------------------------------------------

def test_implicit_series_zero():
    assert implicit_series(MPoly.zero(), 6) == YSeries.zero(6)


def test_implicit_series_quadratic_example():
    phi = parse_poly("3/2*x^2 + 1/2*x^3 + y^2")
    f = implicit_series(phi, 5)
    assert f[2] == -1 and f[3] == 0 and f[4] == F(-3, 2)


def test_implicit_series_rejects_linear_terms():
    with pytest.raises(ValueError):
        implicit_series(parse_poly("x + y^2"), 4)
    with pytest.raises(ValueError):
        implicit_series(parse_poly("x^2"), 1)


def residual_orders(phi, order):
    f = implicit_series(phi, order)
    y = MPoly.variable("y")
    f_poly = sum((c * y**k for k, c in enumerate(f.coeffs) if c != 0),
                 MPoly.zero())
    res = f_poly + phi.subs({"x": f_poly})
    bad = []
    for expo, coeff in res.terms.items():
        deg = expo[res.variables.index("y")] if "y" in res.variables else 0
        if deg <= order and coeff != 0:
            bad.append((deg, coeff))
    return bad


phi_terms = st.fractions(min_value=-3, max_value=3, max_denominator=6)


@st.composite
def phis(draw):
    terms = {}
    for _ in range(draw(st.integers(1, 5))):
        i = draw(st.integers(0, 3))
        j = draw(st.integers(max(0, 2 - i), 3))
        terms[(i, j)] = draw(phi_terms)
    return MPoly(("x", "y"), terms)


@given(phis())
@settings(max_examples=50, deadline=None)
def test_implicit_series_residual_vanishes(phi):
    assert residual_orders(phi, 12) == []


# -- leading data -----------------------------------------------------------

def g1_f2_f3(params, sign):
    """Closed forms of the leading coefficients on the shifted family."""
    s = 1 if sign == "upper" else -1
    g1 = 2 * (params.a21 + s * params.b02 + params.b12)
    f2 = s * params.a02 + params.a12
    f3 = params.a03 - 2 * s * params.a21 * params.b02 - 2 * params.a21 * params.b12
    return g1, f2, f3


def test_fg_data_instance():
    params = Z2CubicParams(a21=1, b02=0, b12=2, a02=1, a12=-1, a03=-4)
    psi, phi = nilpotent_parts(shifted(params).upper)
    data = fg_data(psi, phi, 6)
    assert data.g_series[1] == 6
    assert data.f_series[2] == 0
    assert data.f_series[3] == -8
    assert data.m == 3 and data.n == 1


def test_fg_data_trivial():
    data = fg_data(parse_poly("y^2"), parse_poly("x^2"), 6)
    assert data.f_series[2] == 1 and data.m == 2


def test_fg_data_separatrix_example_lower():
    params = Z2CubicParams(a02=1, b12=1, a21=-1, a12=-1, a03=-4, b03=F(1, 3))
    psi, phi = nilpotent_parts(shifted(params).lower)
    data = fg_data(psi, phi, 6)
    assert data.f_series[2] == 2 * params.a12 == -2
    assert data.m == 2


@given(st.builds(Z2CubicParams, *[phi_terms] * 8))
@settings(max_examples=100, deadline=None)
def test_fg_closed_forms_on_family(params):
    sys = shifted(params)
    for half, field in (("upper", sys.upper), ("lower", sys.lower)):
        g1, f2, f3 = g1_f2_f3(params, half)
        data = fg_data(*nilpotent_parts(field), 4)
        assert data.g_series[1] == g1
        assert data.f_series[2] == f2
        if f2 == 0:
            assert data.f_series[3] == f3


# -- classification ---------------------------------------------------------

def witness_data(m=None, f_m=None, n=None, g_n=None):
    order = max(filter(None, (m, n, 3)))
    f = [F(0)] * (order + 1)
    g = [F(0)] * (order + 1)
    if m is not None:
        f[m] = F(f_m)
    if n is not None:
        g[n] = F(g_n)
    delta = None
    if m is not None and n is not None:
        delta = 4 * (n + 1) * f[m] + g[n] ** 2
    return NilpotentData(YSeries(order, f), YSeries(order, g), m, n, delta)


def test_classify_saddle_row():
    assert classify(witness_data(m=3, f_m=1)).kind == SADDLE
    assert classify(witness_data(m=3, f_m=1, n=1, g_n=5)).kind == SADDLE


def test_classify_center_row():
    out = classify(witness_data(m=3, f_m=-1, n=1, g_n=-2))
    assert out.kind == CENTER_OR_FOCUS
    assert out.multiplicity == 3
    assert out.witness[4] == -4  # discriminant 4(n+1) f_m + g_n^2


def test_classify_mixed_and_node_rows():
    # k > n with odd n: one hyperbolic and one elliptic sector
    assert classify(witness_data(m=5, f_m=-1, n=1, g_n=1)).kind == "HyperbolicElliptic"
    # k > n with even n: node
    assert classify(witness_data(m=7, f_m=-1, n=2, g_n=1)).kind == "Node"
    # k = n, discriminant >= 0
    assert classify(witness_data(m=3, f_m=F(-1, 100), n=1, g_n=2)).kind == "HyperbolicElliptic"


def test_classify_even_rows():
    assert classify(witness_data(m=2, f_m=3)).kind == CUSP
    assert classify(witness_data(m=2, f_m=3, n=1, g_n=1)).kind == CUSP
    assert classify(witness_data(m=4, f_m=-2, n=1, g_n=1)).kind == "SaddleNode"


def test_classify_is_pure():
    data = witness_data(m=3, f_m=-1, n=1, g_n=-2)
    assert classify(data) == classify(data)


def test_classify_half_golden_cusp():
    params = Z2CubicParams(a02=1, b12=1, a21=-1, a12=-1, a03=-4, b03=F(1, 3))
    out = classify_half(shifted(params).lower)
    assert out.kind == CUSP
    assert out.multiplicity == 2


def test_classify_half_golden_center_or_focus():
    out = classify_half(shifted(Z2CubicParams(a21=-1, a03=-1)).upper)
    assert out.kind == CENTER_OR_FOCUS
    assert out.multiplicity == 3
    m, n, f_m, g_n, delta = out.witness
    assert (f_m, g_n, delta) == (-1, -2, -4)


# -- multiplicity -----------------------------------------------------------

def test_multiplicity_six_instance():
    # Built by forcing the first four F coefficients to vanish:
    # a03 = 2 a21 (b02 + b12), then the b03 and b02 eliminations.
    params = Z2CubicParams(a21=1, a12=1, a02=-1, b21=0, b02=F(1, 4),
                           b12=0, b03=F(-1, 8), a03=F(1, 2))
    assert multiplicity_of_family(params, "upper") == 6
    data = fg_data(*nilpotent_parts(shifted(params).upper), 6)
    assert data.f_series[6] == F(1, 32)


def test_multiplicity_three_and_two():
    assert multiplicity_of_family(Z2CubicParams(a21=-1, a03=-1), "upper") == 3
    params = Z2CubicParams(a02=1, b12=1, a21=-1, a12=-1, a03=-4, b03=F(1, 3))
    assert multiplicity_of_family(params, "lower") == 2


def test_multiplicity_not_isolated():
    # The zero field has ydot = 0 on the whole curve x + phi = 0.
    assert multiplicity_of_family(Z2CubicParams(), "upper") == NOT_ISOLATED


@given(st.builds(Z2CubicParams, *[phi_terms] * 8))
@settings(max_examples=200, deadline=None)
def test_multiplicity_bounded_by_six(params):
    out = multiplicity_of_family(params, "upper")
    if out != NOT_ISOLATED:
        assert 2 <= out <= 6


# -- monodromy candidate ----------------------------------------------------

def test_monodromic_candidate_reversible_instance():
    assert monodromic_candidate(Z2CubicParams(a21=-1, a03=-1))


def test_monodromic_candidate_rejects_saddle():
    # f3 = a03 > 0 with f2 = 0 gives a saddle in the upper half
    assert not monodromic_candidate(Z2CubicParams(a21=-1, a03=2))


def test_monodromic_candidate_sign_restrictions():
    # cusp/cusp pair (m=2 both halves) passes only with the stated signs
    assert monodromic_candidate(
        Z2CubicParams(a02=-4, a21=-1, b03=-1, a12=3, a03=1, b12=1))
    assert not monodromic_candidate(
        Z2CubicParams(a02=1, a12=-1, a21=-1, a03=-4, b12=1, b03=F(1, 3)))
