"""Classification of nilpotent singular points of half-systems.

A half-system shifted to the origin with linear part (0, x) is analyzed
through the implicit curve x = f(y) solving ydot = 0, the induced series
F(y) = P(f(y), y) and G(y) = (dP/dx + d(Q - x)/dy)(f(y), y), and an exact
table lookup on the leading coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .exactalg import MPoly, YSeries, poly_derivative
from .sysmodel import PlanarField, SwitchingSystem, Z2CubicParams, build_z2_cubic, shift_to_origin

CENTER_OR_FOCUS = "CenterOrFocus"
SADDLE = "Saddle"
CUSP = "Cusp"
SADDLE_NODE = "SaddleNode"
NODE = "Node"
HYPERBOLIC_ELLIPTIC = "HyperbolicElliptic"
NOT_ISOLATED = "NotIsolated"
UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class NilpotentData:
    """Leading series data at a nilpotent origin.

    m is the order of the first nonzero F coefficient, n that of G; delta
    is the discriminant 4(n+1) f_m + g_n^2 when both orders exist.
    """

    f_series: YSeries
    g_series: YSeries
    m: Optional[int]
    n: Optional[int]
    delta: Optional[Fraction]
    f_identically_zero: bool = False


@dataclass(frozen=True)
class NilpotentClass:
    kind: str
    multiplicity: Optional[int]
    witness: tuple


def _truncate_y(poly: MPoly, order: int) -> MPoly:
    if "y" not in poly.variables:
        return poly
    i = poly.variables.index("y")
    kept = {e: c for e, c in poly.terms.items() if e[i] <= order}
    return MPoly(poly.variables, kept)


def _check_no_low_terms(poly: MPoly, label: str):
    for expo, _ in poly.terms.items():
        xy_degree = sum(
            e for var, e in zip(poly.variables, expo) if var in ("x", "y")
        )
        if xy_degree < 2:
            raise ValueError(f"{label} must have no constant or linear terms")


def implicit_series(phi: MPoly, order: int) -> YSeries:
    """Series x = f(y) solving x + phi(x, y) = 0 through the given order.

    phi must start at degree 2 in (x, y).  The fixed point of
    x <- -phi(x, y) gains at least one correct order per pass, so
    order - 1 passes settle everything up to y^order.
    """
    if order < 2:
        raise ValueError("order must be at least 2")
    _check_no_low_terms(phi, "phi")
    f = MPoly.zero()
    for _ in range(order - 1):
        f = _truncate_y(-phi.subs({"x": f}), order)
    coeffs = f.coeffs_in("y")
    return YSeries(order, coeffs[: order + 1])


def fg_data(psi: MPoly, phi: MPoly, order: int) -> NilpotentData:
    """Leading data (F, G, m, n, delta) for the nilpotent origin."""
    _check_no_low_terms(psi, "psi")
    f = implicit_series(phi, order)
    f_poly = _series_to_poly(f)
    F = _truncate_y(psi.subs({"x": f_poly}), order)
    g_source = poly_derivative(psi, "x") + poly_derivative(phi, "y")
    G = _truncate_y(g_source.subs({"x": f_poly}), order)
    f_series = YSeries(order, [_scalarize(c) for c in F.coeffs_in("y")[: order + 1]])
    g_series = YSeries(order, [_scalarize(c) for c in G.coeffs_in("y")[: order + 1]])
    m = _first_nonzero(f_series, start=1)
    n = _first_nonzero(g_series, start=1)
    delta = None
    if m is not None and n is not None:
        delta = 4 * (n + 1) * f_series[m] + g_series[n] ** 2
    return NilpotentData(f_series, g_series, m, n, delta,
                         f_identically_zero=psi.is_zero())


def _scalarize(coeff):
    """Constant polynomials become plain rationals; others pass through."""
    if isinstance(coeff, MPoly) and coeff.is_constant():
        return coeff.constant_value()
    return coeff


def _series_to_poly(s: YSeries) -> MPoly:
    result = MPoly.zero()
    y = MPoly.variable("y")
    for k, c in enumerate(s.coeffs):
        if c != 0:
            result = result + c * y**k
    return result


def _first_nonzero(s: YSeries, start: int) -> Optional[int]:
    for k in range(start, s.order + 1):
        if s[k] != 0:
            return k
    return None


def classify(data: NilpotentData) -> NilpotentClass:
    """Type of the nilpotent origin from its leading-coefficient witness.

    Deterministic table lookup: for odd m the sign of f_m separates
    saddle from the center/focus, node, and mixed-sector cases (decided
    by n and the discriminant); for even m the point is a cusp or a
    saddle-node.
    """
    m, n = data.m, data.n
    if m is None:
        if data.f_identically_zero:
            return NilpotentClass(NOT_ISOLATED, None, (m, n, None, None, None))
        return NilpotentClass(UNDETERMINED, None, (m, n, None, None, None))
    f_m = data.f_series[m]
    g_n = data.g_series[n] if n is not None else None
    witness = (m, n, f_m, g_n, data.delta)

    if n is None:
        # No rotation-breaking term up to the truncation order.
        if m % 2 == 1:
            kind = CENTER_OR_FOCUS if f_m < 0 else SADDLE
        else:
            kind = CUSP
        return NilpotentClass(kind, m, witness)

    delta = data.delta
    if m % 2 == 1:
        k = (m - 1) // 2
        if f_m > 0:
            kind = SADDLE
        elif k > n or (k == n and delta >= 0):
            kind = HYPERBOLIC_ELLIPTIC if n % 2 == 1 else NODE
        else:
            kind = CENTER_OR_FOCUS
    else:
        k = m // 2
        kind = SADDLE_NODE if k > n else CUSP
    return NilpotentClass(kind, m, witness)


def nilpotent_parts(field: PlanarField):
    """Split a shifted half-system into (psi, phi) with ydot = x + phi.

    Verifies the linear part is exactly (0, x).
    """
    x = MPoly.variable("x")
    psi = field.P
    phi = field.Q - x
    _check_no_low_terms(psi, "xdot")
    _check_no_low_terms(phi, "ydot - x")
    return psi, phi


def classify_half(field: PlanarField, order: int = 8) -> NilpotentClass:
    """Classify the nilpotent origin of one half-system."""
    psi, phi = nilpotent_parts(field)
    return classify(fg_data(psi, phi, order))


Multiplicity = Union[int, str]


def multiplicity_of_family(params: Z2CubicParams, which: str = "upper") -> Multiplicity:
    """Order of the first nonzero F coefficient at the right-hand point.

    Computed through order 6; for the cubic family an isolated nilpotent
    point cannot be more degenerate than that, so full vanishing means
    the singular point is not isolated.
    """
    if which not in ("upper", "lower"):
        raise ValueError("which must be 'upper' or 'lower'")
    sys = shift_to_origin(build_z2_cubic(params), (1, 0))
    field = sys.upper if which == "upper" else sys.lower
    psi, phi = nilpotent_parts(field)
    data = fg_data(psi, phi, 6)
    return data.m if data.m is not None else NOT_ISOLATED


def monodromic_candidate(params: Z2CubicParams) -> bool:
    """Whether orbits can turn around the combined switching point.

    Requires both half-classifications to allow rotation (center/focus or
    cusp), together with the sign restrictions on the even quadratic
    coefficients that orient the two half-flows consistently.
    """
    sys = shift_to_origin(build_z2_cubic(params), (1, 0))
    kinds = set()
    for field in (sys.upper, sys.lower):
        kinds.add(classify_half(field).kind)
    if not kinds <= {CENTER_OR_FOCUS, CUSP}:
        return False
    a02, a12 = params.a02, params.a12
    if a02 + a12 == 0:
        return a12 >= 0
    return (a02 == a12 and a12 < 0) or a02 + abs(a12) < 0
