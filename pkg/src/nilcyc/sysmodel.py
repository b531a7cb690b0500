"""Data model for planar switching systems split by the x-axis.

Provides the symmetric cubic family with nilpotent points at (+-1, 0),
coordinate transforms (translation along the axis, the anisotropic
epsilon scaling), perturbed-family builders, and structural detectors:
Hamiltonian structure, x-axis reversibility for switching systems, and
inverse integrating factors.
"""
from __future__ import annotations

from dataclasses import dataclass, fields as dc_fields
from fractions import Fraction
from typing import Union

from .exactalg import MPoly, exact_div, parse_poly, poly_derivative, rational

X = MPoly.variable("x")
Y = MPoly.variable("y")

Eps = Union[Fraction, int, str]


@dataclass(frozen=True)
class PlanarField:
    """Right-hand side (P, Q) of a planar polynomial vector field."""

    P: MPoly
    Q: MPoly

    def divergence(self) -> MPoly:
        return poly_derivative(self.P, "x") + poly_derivative(self.Q, "y")

    def subs(self, assignment) -> "PlanarField":
        return PlanarField(self.P.subs(assignment), self.Q.subs(assignment))

    def numeric_vars_only(self) -> bool:
        """True when both components involve no parameters beyond x, y."""
        used = set()
        for poly in (self.P, self.Q):
            for expo, _ in poly.terms.items():
                for var, e in zip(poly.variables, expo):
                    if e:
                        used.add(var)
        return used <= {"x", "y"}


@dataclass(frozen=True)
class SwitchingSystem:
    """Two half-fields separated by the switching line y = 0.

    `upper` governs y > 0 and `lower` governs y < 0; the manifold is
    always the x-axis.
    """

    upper: PlanarField
    lower: PlanarField

    @property
    def manifold(self) -> str:
        return "y=0"

    def subs(self, assignment) -> "SwitchingSystem":
        return SwitchingSystem(self.upper.subs(assignment),
                               self.lower.subs(assignment))

    def is_smooth(self) -> bool:
        return self.upper.P == self.lower.P and self.upper.Q == self.lower.Q


@dataclass(frozen=True)
class Z2CubicParams:
    """Coefficients of the symmetric cubic family with nilpotent (+-1, 0)."""

    a02: Fraction = Fraction(0)
    a12: Fraction = Fraction(0)
    a21: Fraction = Fraction(0)
    a03: Fraction = Fraction(0)
    b02: Fraction = Fraction(0)
    b12: Fraction = Fraction(0)
    b21: Fraction = Fraction(0)
    b03: Fraction = Fraction(0)

    def __post_init__(self):
        for field in dc_fields(self):
            object.__setattr__(self, field.name, rational(getattr(self, field.name)))

    @staticmethod
    def from_mapping(values) -> "Z2CubicParams":
        names = {f.name for f in dc_fields(Z2CubicParams)}
        unknown = set(values) - names
        if unknown:
            raise ValueError(f"unknown coefficient(s): {sorted(unknown)}")
        return Z2CubicParams(**{k: rational(v) for k, v in values.items()})


@dataclass(frozen=True)
class PerturbationParams:
    """Second-order perturbation coefficients for the unfolded family.

    The symmetry of the family ties the lower-half coefficients to the
    upper-half ones, so only the upper set is free.
    """

    p21: Fraction = Fraction(0)
    p02: Fraction = Fraction(0)
    p12: Fraction = Fraction(0)
    p03: Fraction = Fraction(0)
    q21: Fraction = Fraction(0)
    q02: Fraction = Fraction(0)
    q12: Fraction = Fraction(0)
    q03: Fraction = Fraction(0)

    def __post_init__(self):
        for field in dc_fields(self):
            object.__setattr__(self, field.name, rational(getattr(self, field.name)))


def build_z2_cubic(params: Z2CubicParams) -> SwitchingSystem:
    """Cubic switching system with nilpotent singular points at (+-1, 0).

    The two halves differ exactly in the sign of the y^2 terms, which
    makes the system equivariant under (x, y) -> (-x, -y) as a switching
    system.
    """
    p = params
    upper_P = (-p.a21 * Y + p.a02 * Y**2 + p.a21 * X**2 * Y
               + p.a12 * X * Y**2 + p.a03 * Y**3)
    upper_Q = (Fraction(-1, 2) * X - p.b21 * Y + p.b02 * Y**2
               + Fraction(1, 2) * X**3 + p.b21 * X**2 * Y
               + p.b12 * X * Y**2 + p.b03 * Y**3)
    lower_P = upper_P - 2 * p.a02 * Y**2
    lower_Q = upper_Q - 2 * p.b02 * Y**2
    return SwitchingSystem(PlanarField(upper_P, upper_Q),
                           PlanarField(lower_P, lower_Q))


def shift_to_origin(sys: SwitchingSystem, point) -> SwitchingSystem:
    """Translate a point on the switching line to the origin (x -> x + c)."""
    c, d = (rational(point[0]), rational(point[1]))
    if d != 0:
        raise ValueError("shift point must lie on the switching line y = 0")
    assignment = {"x": X + c}
    return SwitchingSystem(
        PlanarField(sys.upper.P.subs(assignment), sys.upper.Q.subs(assignment)),
        PlanarField(sys.lower.P.subs(assignment), sys.lower.Q.subs(assignment)),
    )


def scale_epsilon(sys: SwitchingSystem, eps: Eps) -> SwitchingSystem:
    """Apply the anisotropic rescaling (x, y, t) -> (e^3 x, e^2 y, t/e).

    The new right-hand sides are P(e^3 x, e^2 y)/e^4 and
    Q(e^3 x, e^2 y)/e^3.  `eps` may be a nonzero rational, or a variable
    name for a symbolic scaling (in which case every term must carry
    enough powers of the symbol for the division to stay polynomial).
    """
    if isinstance(eps, str):
        e = MPoly.variable(eps)

        def scaled(poly: MPoly, drop: int) -> MPoly:
            moved = poly.subs({"x": e**3 * X, "y": e**2 * Y})
            return exact_div(moved, e**drop)
    else:
        eps = rational(eps)
        if eps == 0:
            raise ValueError("scaling parameter must be nonzero")

        def scaled(poly: MPoly, drop: int) -> MPoly:
            moved = poly.subs({"x": eps**3 * X, "y": eps**2 * Y})
            return moved / eps**drop

    return SwitchingSystem(
        PlanarField(scaled(sys.upper.P, 4), scaled(sys.upper.Q, 3)),
        PlanarField(scaled(sys.lower.P, 4), scaled(sys.lower.Q, 3)),
    )


def perturbed_family(
    params: Z2CubicParams,
    pert: PerturbationParams = PerturbationParams(),
    eps: Eps = Fraction(1),
    delta1=0,
    b=0,
    scale: bool = True,
) -> SwitchingSystem:
    """Unfolded family around the right-hand nilpotent point.

    Starts from the symmetric cubic shifted so the singular point sits at
    the origin, then adds, with the stated powers of eps:

    - the linear unfolding term  -eps^2 y  in xdot,
    - a trace term delta1 (preserving the symmetry of the family),
    - a boundary-equilibrium offset b in ydot (splitting the two halves'
      zeros on the switching line),
    - eps^2-order quadratic/cubic perturbations whose lower-half
      coefficients are determined by the symmetry constraints.

    With scale=True the anisotropic eps rescaling is applied at the end,
    which brings the linear part to (-y, x) plus delta1 times identity.
    """
    delta1 = _coeff(delta1)
    b = _coeff(b)
    e = MPoly.variable(eps) if isinstance(eps, str) else rational(eps)
    p = pert

    base = shift_to_origin(build_z2_cubic(params), (1, 0))

    common_P = (-(e**2) * Y
                + delta1 * e * (X + Fraction(3, 2) * X**2 + Fraction(1, 2) * X**3))
    common_Q = delta1 * e * Y

    pert_P_upper = (e**2) * (p.p21 * (2 * X * Y + X**2 * Y) + p.p02 * Y**2
                             + p.p12 * X * Y**2 + p.p03 * Y**3)
    pert_P_lower = (e**2) * (p.p21 * (2 * X * Y + X**2 * Y)
                             + (2 * p.p12 - p.p02) * Y**2
                             + p.p12 * X * Y**2 + p.p03 * Y**3)
    pert_Q_upper = (e**2) * (p.q21 * (2 * X * Y + X**2 * Y) + p.q02 * Y**2
                             + p.q12 * X * Y**2 + p.q03 * Y**3)
    pert_Q_lower = (e**2) * (p.q21 * (2 * X * Y + X**2 * Y)
                             + (2 * p.q12 - p.q02) * Y**2
                             + p.q12 * X * Y**2 + p.q03 * Y**3)

    b_upper = -Fraction(1, 2) * b * e**3 * (X + X**2)
    b_lower = Fraction(1, 2) * b * e**3 * (2 + 3 * X + X**2)

    sys = SwitchingSystem(
        PlanarField(base.upper.P + common_P + pert_P_upper,
                    base.upper.Q + common_Q + pert_Q_upper + b_upper),
        PlanarField(base.lower.P + common_P + pert_P_lower,
                    base.lower.Q + common_Q + pert_Q_lower + b_lower),
    )
    return scale_epsilon(sys, eps) if scale else sys


def _coeff(value):
    if isinstance(value, MPoly):
        return value
    return rational(value)


def hamiltonian_of(field: PlanarField):
    """Hamiltonian H with xdot = dH/dy, ydot = -dH/dx, or None.

    Exists exactly when the divergence vanishes identically; normalized
    so H(0,0) = 0.
    """
    if not field.divergence().is_zero():
        return None
    # Integrate P in y, then fix the y-free part from Q(x, 0).
    H = _integrate(field.P, "y")
    residual = -poly_derivative(H, "x") - field.Q
    # residual is y-free when the divergence vanishes; fold it into H.
    H = H + _integrate(residual, "x")
    if poly_derivative(H, "y") != field.P or -poly_derivative(H, "x") != field.Q:
        return None
    const = H.subs({"x": 0, "y": 0})
    return H - const.constant_value() if not const.is_zero() else H


def _integrate(poly: MPoly, var: str) -> MPoly:
    if var not in poly.variables:
        return poly * MPoly.variable(var)
    i = poly.variables.index(var)
    out = {}
    for expo, coeff in poly.terms.items():
        new = list(expo)
        new[i] += 1
        out[tuple(new)] = coeff / new[i]
    return MPoly(poly.variables, out)


def check_center_symmetry(sys: SwitchingSystem) -> bool:
    """True when (x, y, t) -> (x, -y, -t) swaps the two half-fields.

    For a smooth system (equal halves) this is classical reversibility
    in the x-axis.
    """
    flip = {"y": -Y}
    return (sys.lower.P == -(sys.upper.P.subs(flip))
            and sys.lower.Q == sys.upper.Q.subs(flip))


def verify_inverse_integrating_factor(field: PlanarField, factor: MPoly) -> bool:
    """Check P dI/dx + Q dI/dy = I div(P, Q) as an exact identity."""
    if factor.is_zero():
        raise ValueError("inverse integrating factor must be nonzero")
    lhs = (field.P * poly_derivative(factor, "x")
           + field.Q * poly_derivative(factor, "y"))
    return lhs == factor * field.divergence()


def parse_field(p_text: str, q_text: str) -> PlanarField:
    """Build a field from the polynomial text grammar."""
    return PlanarField(parse_poly(p_text), parse_poly(q_text))
