"""Limit-cycle machinery for the switching family.

Four pieces live here: exact sliding-segment analysis on the switching
line, a finite-difference independence Jacobian for the constants of a
parametrized family, sequential-perturbation cycle certification from a
certified center, and the pseudo-Hopf extra cycle found with a direct
arbitrary-precision return map.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Mapping, Optional, Sequence, Tuple, Union

import gmpy2
from gmpy2 import mpfr

from .exactalg import MPoly, rational
from .lyapunov import (
    BigFloat,
    DEFAULT_PRECISION,
    decimal_str,
    displacement_coeffs,
    precision_digits,
)
from .sysmodel import (
    PerturbationParams,
    SwitchingSystem,
    Z2CubicParams,
    perturbed_family,
)

log = logging.getLogger(__name__)

Endpoint = Union[Fraction, Tuple[Fraction, Fraction]]


class RootIsolationError(RuntimeError):
    """Real-root isolation could not separate or refine the roots."""


class TruncationOrderError(RuntimeError):
    """The series order was too low to resolve the requested cycles."""


# -- univariate helpers (dense Fraction coefficient lists) -------------------

def _univariate(poly: MPoly, var: str = "x") -> List[Fraction]:
    """Dense coefficient list (constant term first) of a univariate poly."""
    for name in poly.variables:
        if name != var and poly.degree(name) > 0:
            raise ValueError(f"polynomial is not univariate in {var}")
    coeffs = [Fraction(0)] * (poly.degree(var) + 1)
    for expo, c in poly.terms.items():
        k = 0
        if var in poly.variables:
            k = expo[poly.variables.index(var)]
        coeffs[k] += c
    return _u_trim(coeffs)


def _u_trim(c: List[Fraction]) -> List[Fraction]:
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return c


def _u_eval(c: Sequence[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for coeff in reversed(c):
        acc = acc * x + coeff
    return acc


def _u_deriv(c: Sequence[Fraction]) -> List[Fraction]:
    if len(c) <= 1:
        return [Fraction(0)]
    return [k * c[k] for k in range(1, len(c))]


def _u_rem(a: Sequence[Fraction], b: Sequence[Fraction]) -> List[Fraction]:
    a = list(a)
    db, lead = len(b) - 1, b[-1]
    while len(a) - 1 >= db and any(a):
        if a[-1] == 0:
            a.pop()
            continue
        factor = a[-1] / lead
        shift = len(a) - 1 - db
        for i in range(db + 1):
            a[shift + i] -= factor * b[i]
        a.pop()
    return _u_trim(a) if a else [Fraction(0)]


def _u_gcd(a: Sequence[Fraction], b: Sequence[Fraction]) -> List[Fraction]:
    a, b = list(a), list(b)
    while any(b):
        a, b = b, _u_rem(a, b)
    return [x / a[-1] for x in a] if any(a) else [Fraction(1)]


def _u_divroot(c: Sequence[Fraction], r: Fraction) -> List[Fraction]:
    """Exact deflation of a known root: c(x) / (x - r) by synthetic division."""
    n = len(c) - 1
    out = [Fraction(0)] * n
    acc = c[n]
    for k in range(n - 1, -1, -1):
        out[k] = acc
        acc = c[k] + acc * r
    return out


def _squarefree(c: Sequence[Fraction]) -> List[Fraction]:
    g = _u_gcd(c, _u_deriv(c))
    if len(g) == 1:
        return list(c)
    # exact division c / g by synthetic long division
    out, rem = [], list(c)
    dg = len(g) - 1
    while len(rem) - 1 >= dg:
        factor = rem[-1] / g[-1]
        out.append(factor)
        shift = len(rem) - 1 - dg
        for i in range(dg + 1):
            rem[shift + i] -= factor * g[i]
        rem.pop()
    out.reverse()
    return _u_trim(out)


def _sturm_chain(c: Sequence[Fraction]) -> List[List[Fraction]]:
    chain = [list(c), _u_deriv(c)]
    while any(chain[-1]) and len(chain[-1]) > 1:
        nxt = [-x for x in _u_rem(chain[-2], chain[-1])]
        chain.append(nxt)
    if not any(chain[-1]):
        chain.pop()
    return chain


def _variations(chain: Sequence[Sequence[Fraction]], x: Fraction) -> int:
    signs = []
    for poly in chain:
        v = _u_eval(poly, x)
        if v:
            signs.append(1 if v > 0 else -1)
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def _root_bound(c: Sequence[Fraction]) -> Fraction:
    lead = abs(c[-1])
    return 1 + max((abs(x) for x in c[:-1]), default=Fraction(0)) / lead


def isolate_real_roots(c: Sequence[Fraction]) -> List[Endpoint]:
    """All distinct real roots of a Fraction polynomial.

    Rational roots come back exactly; irrational ones as isolating open
    intervals with a sign change of the squarefree part.  Results are
    sorted ascending.
    """
    c = _u_trim(list(c))
    if len(c) == 1:
        if c[0] == 0:
            raise ValueError("zero polynomial has no isolated roots")
        return []
    p = _squarefree(c)
    exact: List[Fraction] = []
    while True:
        bound = _root_bound(p)
        lo, hi = -bound - 1, bound + 1
        chain = _sturm_chain(p)
        intervals: List[Tuple[Fraction, Fraction]] = []
        restart = False
        stack = [(lo, hi, _variations(chain, lo), _variations(chain, hi))]
        guard = 0
        while stack:
            guard += 1
            if guard > 100000:
                raise RootIsolationError("root isolation did not terminate")
            a, b, va, vb = stack.pop()
            count = va - vb
            if count == 0:
                continue
            if count == 1:
                intervals.append((a, b))
                continue
            mid = (a + b) / 2
            if _u_eval(p, mid) == 0:
                exact.append(mid)
                p = _u_trim(_u_divroot(p, mid))
                restart = True
                break
            vm = _variations(chain, mid)
            stack.append((a, mid, va, vm))
            stack.append((mid, b, vm, vb))
        if not restart:
            break
        if len(p) == 1:
            intervals = []
            break
    roots: List[Endpoint] = list(exact)
    for a, b in intervals:
        roots.append(_recover_root(p, a, b))
    return sorted(roots, key=_endpoint_value)


def _endpoint_value(e: Endpoint) -> Fraction:
    if isinstance(e, tuple):
        return (e[0] + e[1]) / 2
    return e


def _simplest_rational(lo: Fraction, hi: Fraction) -> Fraction:
    """A smallest-denominator rational strictly inside (lo, hi).

    Continued-fraction descent: whenever an integer sits inside the
    interval it is the answer, otherwise recurse on the reciprocal of
    the fractional parts.
    """
    if lo >= hi:
        raise ValueError("empty interval")
    if lo < 0 < hi:
        return Fraction(0)
    if hi <= 0:
        return -_simplest_rational(-hi, -lo)
    floor_lo = lo.numerator // lo.denominator
    candidate = Fraction(floor_lo + 1)
    if lo < candidate < hi:
        return candidate
    if lo == floor_lo:
        # lo itself is an integer but excluded: take n + 1/k for minimal k
        recip = 1 / (hi - floor_lo)
        k = recip.numerator // recip.denominator + 1
        return floor_lo + Fraction(1, k)
    return floor_lo + 1 / _simplest_rational(1 / (hi - floor_lo),
                                             1 / (lo - floor_lo))


def _refine_sign_change(p, lo, hi, s_lo):
    mid = (lo + hi) / 2
    v = _u_eval(p, mid)
    if v == 0:
        return mid, mid, Fraction(0)
    if (v > 0) == (s_lo > 0):
        return mid, hi, v
    return lo, mid, v


def _recover_root(p: Sequence[Fraction], lo: Fraction, hi: Fraction,
                  width: Fraction = Fraction(1, 2 ** 128)) -> Endpoint:
    """Exact rational root if one exists in (lo, hi), else a tight interval."""
    v_lo = _u_eval(p, lo)
    if v_lo == 0:
        return lo
    if _u_eval(p, hi) == 0:
        return hi
    s_lo = 1 if v_lo > 0 else -1
    while hi - lo > width:
        cand = _simplest_rational(lo, hi)
        if _u_eval(p, cand) == 0:
            return cand
        lo2, hi2, v = _refine_sign_change(p, lo, hi, s_lo)
        if lo2 == hi2:
            return lo2
        if lo2 != lo:
            s_lo = 1 if v > 0 else -1
        lo, hi = lo2, hi2
    return (lo, hi)


# -- sliding segments --------------------------------------------------------

@dataclass(frozen=True)
class SlidingSegment:
    """Maximal manifold segment with opposing normal components.

    `endpoints` are x-values on y = 0, sorted ascending; each is exact
    (Fraction) or an isolating interval.  At each endpoint at least one
    of the boundary functions g+(x,0), g-(x,0) vanishes; strictly
    between them their product is negative.  `regime` is "sliding" when
    both half-fields point toward the manifold, "escaping" when both
    point away, and "degenerate" when the segment is a single point.
    """

    endpoints: Tuple[Endpoint, Endpoint]
    regime: str
    vanishing: Tuple[str, str]

    def is_degenerate(self) -> bool:
        return self.endpoints[0] == self.endpoints[1]

    def to_json_dict(self) -> dict:
        def enc(e):
            if isinstance(e, tuple):
                return {"interval": [str(e[0]), str(e[1])]}
            return str(e)

        return {
            "endpoints": [enc(e) for e in self.endpoints],
            "regime": self.regime,
            "vanishing": list(self.vanishing),
        }


def _boundary_polys(sys: SwitchingSystem):
    g_up = sys.upper.Q.subs({"y": Fraction(0)})
    g_lo = sys.lower.Q.subs({"y": Fraction(0)})
    if g_up.is_zero() or g_lo.is_zero():
        raise ValueError("boundary functions g(x, 0) must not vanish identically")
    return _univariate(g_up), _univariate(g_lo)


def sliding_segment(sys: SwitchingSystem) -> Optional[SlidingSegment]:
    """The sliding (or escaping) segment adjacent to the origin, if any.

    Returns None when the neighbourhood of the origin is pure crossing.
    A common root of both boundary functions without a surrounding
    sign-change region gives a degenerate single-point segment, except
    for smooth systems where no switching dynamics exists at all.
    """
    cu, cl = _boundary_polys(sys)
    roots_u = isolate_real_roots(cu)
    roots_l = isolate_real_roots(cl)
    marks = sorted(
        [(r, "upper") for r in roots_u] + [(r, "lower") for r in roots_l],
        key=lambda t: _endpoint_value(t[0]))
    merged: List[Tuple[Endpoint, str]] = []
    for root, side in marks:
        if merged and merged[-1][0] == root:
            merged[-1] = (root, "both")
        else:
            merged.append((root, side))
    if not merged:
        return None

    def product_sign(x: Fraction) -> int:
        v = _u_eval(cu, x) * _u_eval(cl, x)
        return 0 if v == 0 else (1 if v > 0 else -1)

    # examine the gaps between consecutive roots for a negative product
    for i in range(len(merged) - 1):
        a, sa = merged[i]
        b, sb = merged[i + 1]
        av, bv = _endpoint_value(a), _endpoint_value(b)
        if isinstance(a, tuple):
            av = a[1]
        if isinstance(b, tuple):
            bv = b[0]
        if av >= bv:
            raise RootIsolationError(
                "isolating intervals overlap; raise the refinement depth")
        mid = (av + bv) / 2
        if product_sign(mid) >= 0:
            continue
        closure_lo = av if not isinstance(a, tuple) else a[0]
        closure_hi = bv if not isinstance(b, tuple) else b[1]
        if closure_lo <= 0 <= closure_hi:
            regime = "sliding" if _u_eval(cu, mid) < 0 else "escaping"
            return SlidingSegment(endpoints=(a, b), regime=regime,
                                  vanishing=(sa, sb))
    # no sign-change gap touching the origin; a shared boundary
    # equilibrium still marks the degenerate limit of a segment
    if not sys.is_smooth():
        for root, side in merged:
            if side == "both" and _endpoint_value(root) == 0:
                return SlidingSegment(endpoints=(root, root),
                                      regime="degenerate",
                                      vanishing=("both", "both"))
    return None


# -- independence Jacobian ---------------------------------------------------

@dataclass(frozen=True)
class JacobianReport:
    """Finite-difference Jacobian determinant with its error budget."""

    determinant: BigFloat
    error_estimate: BigFloat
    inconclusive: bool
    entries: Tuple[Tuple[BigFloat, ...], ...]
    entry_errors: Tuple[Tuple[BigFloat, ...], ...]
    v_indices: Tuple[int, ...]
    parameters: Tuple[str, ...]
    fd_step: Fraction
    precision_bits: int

    def to_json_dict(self) -> dict:
        digits = precision_digits(self.precision_bits)
        return {
            "determinant": decimal_str(self.determinant, digits),
            "error_estimate": decimal_str(self.error_estimate, 4),
            "inconclusive": self.inconclusive,
            "v_indices": list(self.v_indices),
            "parameters": list(self.parameters),
            "fd_step": str(self.fd_step),
            "precision_bits": self.precision_bits,
        }


def _lu_det(rows: List[List[BigFloat]]) -> BigFloat:
    n = len(rows)
    rows = [list(r) for r in rows]
    det = mpfr(1)
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(rows[r][col]))
        if rows[pivot][col] == 0:
            return mpfr(0)
        if pivot != col:
            rows[col], rows[pivot] = rows[pivot], rows[col]
            det = -det
        det *= rows[col][col]
        inv = 1 / rows[col][col]
        for r in range(col + 1, n):
            factor = rows[r][col] * inv
            if factor:
                for c in range(col, n):
                    rows[r][c] -= factor * rows[col][c]
    return det


def _minor(rows, i, j):
    return [[rows[r][c] for c in range(len(rows)) if c != j]
            for r in range(len(rows)) if r != i]


def independence_jacobian(
    family: Callable[[Mapping[str, Fraction]], SwitchingSystem],
    point: Mapping[str, Fraction],
    v_indices: Sequence[int],
    parameters: Sequence[str],
    precision: int = DEFAULT_PRECISION,
    fd_step: Optional[Fraction] = None,
    order: Optional[int] = None,
) -> JacobianReport:
    """det of the FD Jacobian of selected constants w.r.t. parameters.

    Central differences at steps h and h/2 are combined by one level of
    Richardson extrapolation; the per-entry spread feeds a cofactor
    error estimate for the determinant.  When the estimate exceeds the
    magnitude of the determinant the report is flagged inconclusive.
    """
    v_indices = tuple(int(i) for i in v_indices)
    parameters = tuple(parameters)
    if len(v_indices) != len(parameters):
        raise ValueError("need as many constants as parameters")
    if any(i < 1 for i in v_indices):
        raise ValueError("constant indices are 1-based")
    if fd_step is None:
        fd_step = Fraction(1, 2 ** (precision // 4))
    fd_step = rational(fd_step)
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    K = order if order is not None else max(v_indices)
    point = {k: rational(v) for k, v in point.items()}

    def column(name: str, h: Fraction) -> List[BigFloat]:
        shift_p = dict(point)
        shift_p[name] = shift_p.get(name, Fraction(0)) + h
        shift_m = dict(point)
        shift_m[name] = shift_m.get(name, Fraction(0)) - h
        rep_p = displacement_coeffs(family(shift_p), K, precision)
        rep_m = displacement_coeffs(family(shift_m), K, precision)
        scale = 1 / (2 * _to_big(h))
        return [(rep_p.V[i - 1] - rep_m.V[i - 1]) * scale for i in v_indices]

    with gmpy2.context(precision=precision):
        cols, col_errs = [], []
        for name in parameters:
            d_h = column(name, fd_step)
            d_h2 = column(name, fd_step / 2)
            cols.append([(4 * b - a) / 3 for a, b in zip(d_h, d_h2)])
            col_errs.append([abs(b - a) / 3 for a, b in zip(d_h, d_h2)])
        k = len(parameters)
        entries = [[cols[j][i] for j in range(k)] for i in range(k)]
        entry_errors = [[col_errs[j][i] for j in range(k)] for i in range(k)]
        det = _lu_det(entries)
        err = abs(det) * mpfr(2) ** (-(precision - 24)) * k * k
        for i in range(k):
            for j in range(k):
                e = entry_errors[i][j]
                if e:
                    err += abs(_lu_det(_minor(entries, i, j))) * e
        inconclusive = bool(err >= abs(det))
    return JacobianReport(
        determinant=det, error_estimate=err, inconclusive=inconclusive,
        entries=tuple(tuple(r) for r in entries),
        entry_errors=tuple(tuple(r) for r in entry_errors),
        v_indices=v_indices, parameters=parameters,
        fd_step=fd_step, precision_bits=precision)


def _to_big(fr: Fraction) -> BigFloat:
    return mpfr(fr.numerator) / mpfr(fr.denominator)


# -- the scaled nine-parameter unfolding ------------------------------------

SCALED_PARAMETER_NAMES = ("delta1", "Q022", "Q032", "Q212", "A03", "A21",
                          "B03", "A02", "P212")


def scaled_unfolding_system(values: Mapping[str, Fraction],
                            eps: Fraction) -> SwitchingSystem:
    """The nine-parameter scaled family around the translated center.

    The capital parameters absorb fixed powers of eps so that the
    constants come out as clean monomials: V_1 is linear in delta1, V_2
    carries eps^3 Q022, V_3 carries eps^6, and so on in steps of eps^3.
    """
    eps = rational(eps)
    if eps == 0:
        raise ValueError("eps must be nonzero")
    vals = {name: rational(values.get(name, Fraction(0))) for name in
            SCALED_PARAMETER_NAMES}
    unknown = set(values) - set(SCALED_PARAMETER_NAMES)
    if unknown:
        raise ValueError(f"unknown scaled parameter(s): {sorted(unknown)}")
    params = Z2CubicParams(
        a21=eps ** 2 * vals["A21"],
        a02=eps ** 3 * vals["A02"],
        b03=eps ** 3 * vals["B03"],
        a03=eps ** 4 * vals["A03"],
        # the family keeps the structural center relations of the cubic
        a12=-3 * eps ** 3 * vals["B03"],
        b12=-eps ** 2 * vals["A21"],
    )
    pert = PerturbationParams(
        p21=vals["P212"],
        q21=vals["Q212"] / eps,
        q02=vals["Q022"],
        q03=eps * vals["Q032"],
    )
    return perturbed_family(params, pert, eps=eps, delta1=vals["delta1"])


# -- sequential-perturbation cycle certification ----------------------------

@dataclass(frozen=True)
class CycleCertificate:
    """Sign-change brackets of the truncated displacement series.

    Each bracket (lo, hi) satisfies d(lo) d(hi) < 0 with both values
    above the series error budget; the count is certified only at the
    stated series order.
    """

    brackets: Tuple[Tuple[Fraction, Fraction], ...]
    count: int
    method: str
    order: int
    precision_bits: int
    eps: Optional[Fraction]
    endpoint_values: Tuple[Tuple[str, str], ...]

    def __post_init__(self):
        prev_hi = None
        for lo, hi in self.brackets:
            if not lo < hi:
                raise ValueError("bracket endpoints must be increasing")
            if prev_hi is not None and lo < prev_hi:
                raise ValueError("brackets must be pairwise disjoint and ordered")
            prev_hi = hi
        if self.count != len(self.brackets):
            raise ValueError("count must equal the number of brackets")

    def to_json_dict(self) -> dict:
        return {
            "brackets": [[str(lo), str(hi)] for lo, hi in self.brackets],
            "count": self.count,
            "method": self.method,
            "order": self.order,
            "precision_bits": self.precision_bits,
            "eps": None if self.eps is None else str(self.eps),
            "endpoint_values": [list(pair) for pair in self.endpoint_values],
        }


_Z2_NAMES = {"a02", "a12", "a21", "a03", "b02", "b12", "b21", "b03"}
_PERT_NAMES = {"p21", "p02", "p12", "p03", "q21", "q02", "q12", "q03"}


def apply_schedule(center: Z2CubicParams,
                   schedule: Sequence[Tuple[str, Fraction]]):
    """Accumulate schedule perturbations onto a center instance.

    Returns (Z2CubicParams, PerturbationParams, delta1).  Entries name
    either a cubic coefficient, a perturbation coefficient, or delta1.
    """
    z2 = {name: getattr(center, name) for name in _Z2_NAMES}
    pert = {name: Fraction(0) for name in _PERT_NAMES}
    delta1 = Fraction(0)
    for name, magnitude in schedule:
        magnitude = rational(magnitude)
        if name in _Z2_NAMES:
            z2[name] += magnitude
        elif name in _PERT_NAMES:
            pert[name] += magnitude
        elif name == "delta1":
            delta1 += magnitude
        elif name == "b":
            raise ValueError(
                "the boundary offset b breaks the series setting; "
                "use pseudo_hopf_cycle for it")
        else:
            raise ValueError(f"unknown schedule parameter {name!r}")
    return Z2CubicParams(**z2), PerturbationParams(**pert), delta1


def _series_value(V, tol, rho: Fraction):
    x = _to_big(rho)
    acc = mpfr(0)
    for v in reversed(V):
        acc = acc * x + v
    acc *= x
    budget = mpfr(0)
    for t in reversed(tol):
        budget = budget * x + t
    budget *= x
    return acc, budget


def unfold_cycles(center: Z2CubicParams,
                  schedule: Sequence[Tuple[str, Fraction]],
                  precision: int = DEFAULT_PRECISION,
                  order: int = 6,
                  eps: Fraction = Fraction(1, 10),
                  rho_max: Fraction = Fraction(1, 4),
                  rho_min: Optional[Fraction] = None,
                  grid_per_decade: int = 8,
                  expected_count: Optional[int] = None) -> CycleCertificate:
    """Bracket the zeros of the truncated displacement after a schedule.

    The schedule perturbs a center instance (conventionally listed from
    the highest-order constant down, with alternating signs and sharply
    decaying magnitudes); the displacement series of the perturbed
    family is then scanned on (rho_min, rho_max] for sign changes that
    clear the series error budget.
    """
    params, pert, delta1 = apply_schedule(center, schedule)
    eps = rational(eps)
    rho_max = rational(rho_max)
    if rho_min is None:
        rho_min = rho_max / 10 ** 10
    rho_min = rational(rho_min)
    if not 0 < rho_min < rho_max:
        raise ValueError("need 0 < rho_min < rho_max")
    sys = perturbed_family(params, pert, eps=eps, delta1=delta1)
    rep = displacement_coeffs(sys, order, precision, eps=eps)

    with gmpy2.context(precision=precision):
        grid = _geometric_grid(rho_min, rho_max, grid_per_decade)
        brackets: List[Tuple[Fraction, Fraction]] = []
        values: List[Tuple[str, str]] = []
        digits = precision_digits(precision)
        prev = None  # (rho, value) of the last point above the budget
        for rho in grid:
            val, budget = _series_value(rep.V, rep.tolerance_estimate, rho)
            if abs(val) <= 4 * budget:
                continue
            if prev is not None and (val > 0) != (prev[1] > 0):
                lo, hi = _bisect_bracket(rep, prev[0], rho, prev[1] > 0)
                v_lo, _ = _series_value(rep.V, rep.tolerance_estimate, lo)
                v_hi, _ = _series_value(rep.V, rep.tolerance_estimate, hi)
                brackets.append((lo, hi))
                values.append((decimal_str(v_lo, digits),
                               decimal_str(v_hi, digits)))
            prev = (rho, val)
    if expected_count is not None and len(brackets) < expected_count:
        raise TruncationOrderError(
            f"resolved {len(brackets)} of {expected_count} requested "
            f"brackets at series order {order}; increase the order")
    return CycleCertificate(
        brackets=tuple(brackets), count=len(brackets),
        method="series-evaluation", order=order, precision_bits=precision,
        eps=eps, endpoint_values=tuple(values))


def _geometric_grid(lo: Fraction, hi: Fraction, per_decade: int):
    # rational geometric ladder: fixed rational approximation of the
    # per-decade step keeps every sample exactly representable
    step = Fraction(int(10 ** 6 * 10 ** (1 / per_decade)) + 1, 10 ** 6)
    grid, x = [], lo
    while x < hi:
        grid.append(x)
        x = _round_fraction(x * step, 80)
    grid.append(hi)
    return grid


def _bisect_bracket(rep, lo: Fraction, hi: Fraction, lo_positive: bool,
                    iterations: int = 80):
    for _ in range(iterations):
        mid = (lo + hi) / 2
        val, budget = _series_value(rep.V, rep.tolerance_estimate, mid)
        if abs(val) <= 4 * budget:
            break
        if (val > 0) == lo_positive:
            lo = mid
        else:
            hi = mid
        if hi - lo < hi / 2 ** 40:
            break
    return lo, hi


def check_certificate(sys: SwitchingSystem, cert: CycleCertificate,
                      precision: int) -> bool:
    """Re-verify every bracket of a certificate at another precision."""
    rep = displacement_coeffs(sys, cert.order, precision, eps=cert.eps)
    with gmpy2.context(precision=precision):
        for lo, hi in cert.brackets:
            v_lo, b_lo = _series_value(rep.V, rep.tolerance_estimate, lo)
            v_hi, b_hi = _series_value(rep.V, rep.tolerance_estimate, hi)
            if abs(v_lo) <= 4 * b_lo or abs(v_hi) <= 4 * b_hi:
                return False
            if (v_lo > 0) == (v_hi > 0):
                return False
    return True


# -- direct return map and the pseudo-Hopf cycle ----------------------------

class _TaylorFlow:
    """Time-domain Taylor integrator for one polynomial half-field."""

    def __init__(self, field, precision: int, tol):
        self.prec = precision
        with gmpy2.context(precision=precision):
            self.terms = {}
            for name, poly in (("P", field.P), ("Q", field.Q)):
                packed = []
                for expo, coeff in poly.terms.items():
                    i = expo[poly.variables.index("x")] if "x" in poly.variables else 0
                    j = expo[poly.variables.index("y")] if "y" in poly.variables else 0
                    packed.append((_to_big(coeff), i, j))
                self.terms[name] = packed
            self.tol = mpfr(tol)

    def _series(self, x0, y0, T: int):
        """Taylor coefficients of the solution through (x0, y0)."""
        zero = mpfr(0)
        xs, ys = [x0] + [zero] * T, [y0] + [zero] * T
        for k in range(T):
            pk = self._rhs_coeff(self.terms["P"], xs, ys, k)
            qk = self._rhs_coeff(self.terms["Q"], xs, ys, k)
            xs[k + 1] = pk / (k + 1)
            ys[k + 1] = qk / (k + 1)
        return xs, ys

    @staticmethod
    def _rhs_coeff(packed, xs, ys, k: int):
        # k-th Taylor coefficient of sum c x^i y^j given series to order k
        acc = xs[0] * 0
        n = k + 1
        cache = {}

        def power(series, key, e):
            if e == 0:
                return None
            got = cache.get((key, e))
            if got is not None:
                return got
            if e == 1:
                out = series[:n]
            else:
                half = power(series, key, e - 1)
                out = [acc * 0 for _ in range(n)]
                for a in range(n):
                    if half[a]:
                        for b in range(n - a):
                            if series[b]:
                                out[a + b] += half[a] * series[b]
            cache[(key, e)] = out
            return out

        for c, i, j in packed:
            px = power(xs, "x", i)
            py = power(ys, "y", j)
            if px is None and py is None:
                if k == 0:
                    acc += c
                continue
            if px is None:
                acc += c * py[k]
            elif py is None:
                acc += c * px[k]
            else:
                s = acc * 0
                for a in range(n):
                    if px[a] and py[k - a]:
                        s += px[a] * py[k - a]
                acc += c * s
        return acc

    @staticmethod
    def _eval(series, t):
        acc = series[-1]
        for c in reversed(series[:-1]):
            acc = acc * t + c
        return acc

    def half_turn(self, x0, max_time=12.0):
        """Follow the flow from (x0, 0) back to the switching line.

        Returns the landing x-coordinate after one half revolution.
        """
        with gmpy2.context(precision=self.prec):
            T = max(10, self.prec // 10)
            x, y = mpfr(x0), mpfr(0)
            t_total = mpfr(0)
            armed = False
            step_tol = self.tol / 64
            for _ in range(100000):
                xs, ys = self._series(x, y, T)
                h = self._step_size(xs, ys, T, step_tol)
                x_new, y_new = self._eval(xs, h), self._eval(ys, h)
                if armed and (y_new == 0 or (y_new > 0) != (y > 0)):
                    t_star = self._event_time(ys, h, y > 0)
                    return self._eval(xs, t_star)
                x, y = x_new, y_new
                if not armed and y != 0:
                    armed = True
                t_total += h
                if t_total > max_time:
                    raise RuntimeError("return-map arc did not close in time")
            raise RuntimeError("return-map step count exploded")

    @staticmethod
    def _step_size(xs, ys, T: int, step_tol):
        h = mpfr("0.25")
        for _ in range(60):
            tail = (abs(xs[T]) + abs(ys[T])) * h ** T \
                + (abs(xs[T - 1]) + abs(ys[T - 1])) * h ** (T - 1)
            if tail < step_tol:
                return h
            h /= 2
        raise RuntimeError("step size underflow in the return map")

    def _event_time(self, ys, h, was_positive: bool):
        lo, hi = mpfr(0), h
        for _ in range(self.prec + 16):
            mid = (lo + hi) / 2
            val = self._eval(ys, mid)
            if val == 0:
                return mid
            if (val > 0) == was_positive:
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2


def return_displacement(sys: SwitchingSystem, rho: Fraction,
                        precision: int = 128, tol=None):
    """d(rho) = full return map minus identity, by direct integration.

    Starts on the positive x-axis, carries the upper field through the
    upper half plane, continues with the lower field, and reports the
    landing offset on the positive axis.
    """
    with gmpy2.context(precision=precision):
        if tol is None:
            tol = mpfr(2) ** (-(precision - 48))
        upper = _TaylorFlow(sys.upper, precision, tol)
        lower = _TaylorFlow(sys.lower, precision, tol)
        x_mid = upper.half_turn(_to_big(rational(rho)))
        x_back = lower.half_turn(x_mid)
        return x_back - _to_big(rational(rho))


@dataclass(frozen=True)
class PseudoHopfCycle:
    """A bracketed crossing cycle born from the sliding-segment split."""

    bracket: Tuple[Fraction, Fraction]
    amplitude: Fraction
    b: Fraction
    precision_bits: int
    endpoint_values: Tuple[str, str]

    def to_json_dict(self) -> dict:
        return {
            "bracket": [str(self.bracket[0]), str(self.bracket[1])],
            "amplitude": str(self.amplitude),
            "b": str(self.b),
            "precision_bits": self.precision_bits,
            "endpoint_values": list(self.endpoint_values),
        }


def pseudo_hopf_cycle(sys_family: Callable[[Fraction], SwitchingSystem],
                      b: Fraction,
                      precision: int = 128,
                      window: Tuple[Fraction, Fraction] = (Fraction(5, 4),
                                                           Fraction(64)),
                      grid_points: int = 14) -> Optional[PseudoHopfCycle]:
    """Bracket the crossing cycle that splits off the sliding segment.

    The family maps the boundary offset b to a switching system; for
    b = 0 the segment is a single point and no extra cycle exists.  The
    search window is given in multiples of |b| and the fixed point is
    located on the direct numeric return map, never on series data.
    """
    b = rational(b)
    if b == 0:
        return None
    sys = sys_family(b)
    lo_mult, hi_mult = (rational(window[0]), rational(window[1]))
    if not 1 < lo_mult < hi_mult:
        raise ValueError("window multiples must satisfy 1 < lo < hi")
    scale = abs(b)
    span = float(hi_mult) / float(lo_mult)
    samples = []
    for i in range(grid_points):
        mult = float(lo_mult) * span ** (i / (grid_points - 1))
        samples.append(scale * _round_fraction(Fraction(mult), 60))

    with gmpy2.context(precision=precision):
        digits = precision_digits(precision)
        prev = None
        for rho in samples:
            val = return_displacement(sys, rho, precision)
            log.debug("pseudo-hopf scan rho=%s d=%s", rho,
                      decimal_str(val, 6))
            if val == 0:
                prev = None
                continue
            if prev is not None and (val > 0) != (prev[1] > 0):
                lo, hi = prev[0], rho
                v_lo, v_hi = prev[1], val
                for _ in range(48):
                    mid = (lo + hi) / 2
                    vm = return_displacement(sys, mid, precision)
                    if vm == 0:
                        break
                    if (vm > 0) == (v_lo > 0):
                        lo, v_lo = mid, vm
                    else:
                        hi, v_hi = mid, vm
                    if hi - lo < (hi + lo) / 2 ** 24:
                        break
                return PseudoHopfCycle(
                    bracket=(lo, hi), amplitude=(lo + hi) / 2, b=b,
                    precision_bits=precision,
                    endpoint_values=(decimal_str(v_lo, digits),
                                     decimal_str(v_hi, digits)))
            prev = (rho, val)
    log.debug("pseudo-hopf: no sign change for b=%s in window %s..%s",
              b, samples[0], samples[-1])
    return None


def check_pseudo_hopf(sys_family: Callable[[Fraction], SwitchingSystem],
                      cycle: PseudoHopfCycle, precision: int) -> bool:
    """Re-confirm a pseudo-Hopf bracket on the return map at another precision."""
    sys = sys_family(cycle.b)
    with gmpy2.context(precision=precision):
        v_lo = return_displacement(sys, cycle.bracket[0], precision)
        v_hi = return_displacement(sys, cycle.bracket[1], precision)
        return bool(v_lo != 0 and v_hi != 0 and (v_lo > 0) != (v_hi > 0))


def _round_fraction(x: Fraction, bits: int) -> Fraction:
    return Fraction(round(x * 2 ** bits), 2 ** bits)
