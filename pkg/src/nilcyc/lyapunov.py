"""Generalized Lyapunov constants via high-precision half-return maps.

The system is written in polar coordinates around the origin, where the
amplitude obeys

    dr/dtheta = (delta r + sum_m alpha_m(theta) r^m)
                / (lambda + sum_m beta_m(theta) r^(m-1)),

with alpha_m, beta_m trigonometric polynomials assembled from the
homogeneous parts of the field.  The return map of each half-plane is
carried as a truncated series in the initial amplitude whose
coefficients are advanced in theta by an arbitrary-order Taylor method
over arbitrary-precision floats.  The displacement series

    d(rho) = U_plus(rho) - inverse(U_minus)(rho)

then yields the constants V_k as its coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence

import gmpy2
from gmpy2 import mpfr

from .exactalg import MPoly, series_compose, series_reversion
from .sysmodel import PlanarField, SwitchingSystem

BigFloat = mpfr

DEFAULT_PRECISION = 256
_MAX_HALVINGS = 8


class IntegrationError(RuntimeError):
    """The step controller could not meet its error target."""


class FitError(RuntimeError):
    """A polynomial fit in epsilon left too large a residual."""


def decimal_str(x, digits: int) -> str:
    """Deterministic scientific-notation decimal string for a BigFloat."""
    if gmpy2.is_nan(x):
        return "nan"
    if gmpy2.is_infinite(x):
        return "-inf" if x < 0 else "inf"
    if x == 0:
        return "0"
    mantissa, exp, _ = gmpy2.digits(x, 10, digits)
    sign = ""
    if mantissa.startswith("-"):
        sign, mantissa = "-", mantissa[1:]
    return f"{sign}{mantissa[0]}.{mantissa[1:]}e{exp - 1}"


def precision_digits(bits: int) -> int:
    return int(bits * 0.30103) + 2


@dataclass(frozen=True)
class LyapunovReport:
    """Displacement-series coefficients with their numeric provenance."""

    order: int
    V: List[BigFloat]
    eps: Optional[Fraction]
    precision_bits: int
    tolerance_estimate: List[BigFloat]

    def to_json_dict(self) -> dict:
        digits = precision_digits(self.precision_bits)
        return {
            "order": self.order,
            "precision_bits": self.precision_bits,
            "eps": None if self.eps is None else str(self.eps),
            "V": [decimal_str(v, digits) for v in self.V],
            "tol": [decimal_str(t, 4) for t in self.tolerance_estimate],
        }


@dataclass(frozen=True)
class EpsilonExpansion:
    """Coefficients of each V_k as a polynomial in epsilon."""

    coefficients: Dict[int, List[BigFloat]]
    degree_bound: int
    residuals: Dict[int, BigFloat]
    precision_bits: int


# -- field preparation ------------------------------------------------------

def _split_field(field: PlanarField):
    """Linear data (delta, lambda) and the trig tables of the nonlinearity.

    Returns (delta, lam, tables) with tables[m] = (alpha_m, beta_m),
    each a list of (Fraction coefficient, cos power, sin power) with
    total trig degree m + 1.
    """
    if not field.numeric_vars_only():
        raise ValueError("field must be numeric in (x, y); substitute parameters first")
    lin = {"P": {}, "Q": {}}
    tables: dict = {}
    for name, poly in (("P", field.P), ("Q", field.Q)):
        for expo, coeff in poly.terms.items():
            i = expo[poly.variables.index("x")] if "x" in poly.variables else 0
            j = expo[poly.variables.index("y")] if "y" in poly.variables else 0
            deg = i + j
            if deg == 0:
                raise ValueError("field must vanish at the origin")
            if deg == 1:
                lin[name][(i, j)] = coeff
                continue
            alpha, beta = tables.setdefault(deg, ([], []))
            if name == "P":
                alpha.append((coeff, i + 1, j))
                beta.append((-coeff, i, j + 1))
            else:
                alpha.append((coeff, i, j + 1))
                beta.append((coeff, i + 1, j))
    delta = lin["P"].get((1, 0), Fraction(0))
    lam = lin["Q"].get((1, 0), Fraction(0))
    if lin["Q"].get((0, 1), Fraction(0)) != delta:
        raise ValueError("linear part must be (delta x - lambda y, lambda x + delta y)")
    if lin["P"].get((0, 1), Fraction(0)) != -lam:
        raise ValueError("linear part must be (delta x - lambda y, lambda x + delta y)")
    if lam <= 0:
        raise ValueError("rotation rate lambda must be positive")
    return delta, lam, tables


def _to_mpfr(fr: Fraction) -> BigFloat:
    return mpfr(fr.numerator) / mpfr(fr.denominator)


# -- small dense series helpers over mpfr -----------------------------------

def _rho_mul(a: Sequence, b: Sequence, K: int, zero) -> list:
    out = [zero] * (K + 1)
    for i, ai in enumerate(a):
        if not ai:
            continue
        for k in range(K + 1 - i):
            bk = b[k]
            if bk:
                out[i + k] += ai * bk
    return out


def _rho_recip(a: Sequence, K: int, one):
    inv0 = one / a[0]
    out = [inv0] + [one * 0] * K
    for k in range(1, K + 1):
        acc = out[0] * 0
        for i in range(1, k + 1):
            if a[i]:
                acc += a[i] * out[k - i]
        out[k] = -inv0 * acc
    return out


def _scalar_series_mul(a: Sequence, b: Sequence, T: int, zero) -> list:
    out = [zero] * (T + 1)
    for i, ai in enumerate(a):
        if not ai:
            continue
        for j in range(T + 1 - i):
            if b[j]:
                out[i + j] += ai * b[j]
    return out


def _taylor_order(radius: float, budget: float) -> int:
    """Smallest order whose factorial tail falls below the budget."""
    T = 8
    while T < 512:
        tail = T * math.log(max(radius, 1e-30)) - math.lgamma(T + 1)
        if tail < math.log(budget):
            return T
        T += 2
    raise IntegrationError("Taylor order bound exceeded; reduce step or order")


# -- the half-map integrator ------------------------------------------------

class _HalfMap:
    """Advances the amplitude series of one half-field in theta."""

    def __init__(self, field: PlanarField, order: int, precision: int,
                 tolerance=None):
        if order < 1:
            raise ValueError("series order must be at least 1")
        delta, lam, tables = _split_field(field)
        self.K = order
        self.prec = precision
        with gmpy2.context(precision=precision):
            self.delta = _to_mpfr(delta)
            self.lam = _to_mpfr(lam)
            self.tables = {
                m: (
                    [(_to_mpfr(c), i, j) for c, i, j in alpha],
                    [(_to_mpfr(c), i, j) for c, i, j in beta],
                )
                for m, (alpha, beta) in tables.items()
            }
            self.zero = mpfr(0)
            self.one = mpfr(1)
            if tolerance is None:
                tolerance = mpfr(2) ** (-(precision - 33))
            self.tolerance = mpfr(tolerance)
        self.max_m = max(self.tables) if self.tables else 1

    def integrate(self, theta0, theta1):
        """Amplitude series at theta1 starting from the identity at theta0.

        Returns (coefficients v_0..v_K, accumulated tail estimate).
        """
        with gmpy2.context(precision=self.prec):
            pi = gmpy2.const_pi()
            span = (theta1 - theta0) * pi
            r = [self.zero] * (self.K + 1)
            r[1] = self.one
            theta = mpfr(theta0) * pi
            remaining = span
            h_nominal = span / 16
            acc_tail = mpfr(0)
            budget = self.tolerance / 32
            guard = 0
            while remaining > 0:
                h = h_nominal if remaining > h_nominal else remaining
                for attempt in range(_MAX_HALVINGS + 1):
                    result = self._step(theta, h, r, budget * (h / span))
                    if result is not None:
                        break
                    h = h / 2
                else:
                    raise IntegrationError(
                        "step error target unreachable; achieved about "
                        + decimal_str(acc_tail + budget, 4))
                r, tail = result
                acc_tail += tail
                theta += h
                remaining -= h
                guard += 1
                if guard > 100000:
                    raise IntegrationError("step count exploded")
            return r, acc_tail

    def _step(self, theta, h, r0, budget):
        K, zero, one = self.K, self.zero, self.one
        # Coefficient j of the tau-expansion grows roughly like
        # ((K+1) h)^j / j!: the rho^K coefficient couples K copies of the
        # rotation frequency.  Size the order so that factorial decay has
        # beaten that growth by a margin before truncation.
        radius = float((self.K + self.max_m) * h) * 1.3 + 0.05
        T = _taylor_order(radius, max(float(budget), 1e-300))

        cos_t, sin_t = self._trig_series(theta, T)
        alpha_ser, beta_ser = self._table_series(cos_t, sin_t, T)

        R = [list(r0)] + [None] * T
        pows: Dict[int, list] = {1: [R[0]] + [None] * T}
        for p in range(2, self.max_m + 1):
            prev = pows[p - 1][0]
            pows[p] = [_rho_mul(prev, R[0], K, zero)] + [None] * T

        D = [None] * (T + 1)
        F = [None] * T
        D[0] = self._assemble(self.lam, beta_ser, pows, 0, shift=-1)
        invD0 = _rho_recip(D[0], K, one)

        for j in range(T):
            N_j = self._assemble(None, alpha_ser, pows, j, shift=0)
            if self.delta:
                for k in range(K + 1):
                    N_j[k] += self.delta * R[j][k]
            if j > 0:
                D[j] = self._assemble(None, beta_ser, pows, j, shift=-1)
            correction = N_j
            for i in range(1, j + 1):
                di = D[i]
                if any(di):
                    prod = _rho_mul(di, F[j - i], K, zero)
                    correction = [a - b for a, b in zip(correction, prod)]
            F[j] = _rho_mul(invD0, correction, K, zero)
            nxt = [c / (j + 1) for c in F[j]]
            R[j + 1] = nxt
            # extend the power ladder to tau-order j+1
            pows[1][j + 1] = R[j + 1]
            for p in range(2, self.max_m + 1):
                acc = [zero] * (K + 1)
                for i in range(j + 2):
                    left = pows[p - 1][i]
                    right = R[j + 1 - i]
                    term = _rho_mul(left, right, K, zero)
                    for k in range(K + 1):
                        acc[k] += term[k]
                pows[p][j + 1] = acc

        tail = mpfr(0)
        hT = h ** (T - 1)
        for row in (R[T - 1], R[T]):
            for c in row:
                mag = abs(c) * hT
                if mag > tail:
                    tail = mag
            hT *= h
        if tail > budget:
            return None
        out = list(R[T])
        for j in range(T - 1, -1, -1):
            out = [o * h + c for o, c in zip(out, R[j])]
        return out, tail

    def _trig_series(self, theta, T):
        c0, s0 = gmpy2.cos(theta), gmpy2.sin(theta)
        cos_t, sin_t = [], []
        fact = self.one
        cyc_c = (c0, -s0, -c0, s0)
        cyc_s = (s0, c0, -s0, -c0)
        for j in range(T + 1):
            if j:
                fact = fact * j
            cos_t.append(cyc_c[j % 4] / fact)
            sin_t.append(cyc_s[j % 4] / fact)
        return cos_t, sin_t

    def _table_series(self, cos_t, sin_t, T):
        zero = self.zero
        max_c = max((i for _, tab in self.tables.items()
                     for c, i, j in tab[0] + tab[1]), default=0)
        max_s = max((j for _, tab in self.tables.items()
                     for c, i, j in tab[0] + tab[1]), default=0)
        cpow = [[self.one] + [zero] * T, cos_t]
        while len(cpow) <= max_c:
            cpow.append(_scalar_series_mul(cpow[-1], cos_t, T, zero))
        spow = [[self.one] + [zero] * T, sin_t]
        while len(spow) <= max_s:
            spow.append(_scalar_series_mul(spow[-1], sin_t, T, zero))

        def build(monomials):
            out = [zero] * (T + 1)
            for coeff, i, j in monomials:
                term = _scalar_series_mul(cpow[i], spow[j], T, zero)
                for t in range(T + 1):
                    if term[t]:
                        out[t] += coeff * term[t]
            return out

        alpha_ser = {m: build(tab[0]) for m, tab in self.tables.items()}
        beta_ser = {m: build(tab[1]) for m, tab in self.tables.items()}
        return alpha_ser, beta_ser

    def _assemble(self, const, table_ser, pows, j, shift):
        """Tau-coefficient j of  const + sum_m table_m(tau) * R^(m+shift)."""
        out = [self.zero] * (self.K + 1)
        if const is not None and j == 0:
            out[0] = const
        for m, ser in table_ser.items():
            p = m + shift
            ladder = pows[p]
            for i in range(j + 1):
                s = ser[i]
                if not s:
                    continue
                row = ladder[j - i]
                for k in range(self.K + 1):
                    if row[k]:
                        out[k] += s * row[k]
        return out


def half_return_map(field: PlanarField, half: str, order: int,
                    precision: int = DEFAULT_PRECISION, tolerance=None):
    """Series coefficients v_1..v_K of one half-plane return map.

    The upper map takes the positive x-axis to the negative one
    (theta from 0 to pi); the lower map continues from pi to 2 pi.
    Returns (coefficients, tail_estimate).
    """
    if half not in ("upper", "lower"):
        raise ValueError("half must be 'upper' or 'lower'")
    hm = _HalfMap(field, order, precision, tolerance)
    theta0, theta1 = (0, 1) if half == "upper" else (1, 2)
    coeffs, tail = hm.integrate(theta0, theta1)
    return coeffs[1:], tail


def displacement_coeffs(sys: SwitchingSystem, order: int,
                        precision: int = DEFAULT_PRECISION,
                        eps: Optional[Fraction] = None,
                        tolerance=None) -> LyapunovReport:
    """Coefficients V_1..V_K of the displacement series.

    d(rho) = U_plus(rho) - inverse(U_minus)(rho); a fixed point of the
    full return map corresponds to a zero of d.
    """
    with gmpy2.context(precision=precision):
        up, tail_up = half_return_map(sys.upper, "upper", order, precision,
                                      tolerance)
        low, tail_low = half_return_map(sys.lower, "lower", order, precision,
                                        tolerance)
        zero, one = mpfr(0), mpfr(1)
        low_series = [zero] + list(low)
        inv_low = series_reversion(low_series, order, zero, one)
        V = [u - w for u, w in zip(up, inv_low[1:])]
        # inversion can amplify the half-map tails by the size of the
        # inverse coefficients; fold that into the per-entry estimate
        base = tail_up + tail_low + mpfr(2) ** (-(precision - 16))
        amplification = one
        tol = []
        for k in range(order):
            amplification += abs(inv_low[k + 1])
            tol.append(base * amplification)
    return LyapunovReport(order=order, V=V, eps=eps,
                          precision_bits=precision, tolerance_estimate=tol)


def epsilon_expansion(sysbuilder: Callable[[Fraction], SwitchingSystem],
                      eps_samples: Sequence[Fraction], order: int,
                      degree_bound: int,
                      precision: int = DEFAULT_PRECISION,
                      residual_tol=None) -> EpsilonExpansion:
    """Polynomial-in-epsilon structure of the constants of a family.

    The first degree_bound + 1 samples determine the coefficients by a
    Vandermonde solve; remaining samples cross-validate and their worst
    misfit is reported as the residual.
    """
    samples = [Fraction(e) for e in eps_samples]
    if len(set(samples)) != len(samples):
        raise ValueError("epsilon samples must be distinct")
    if any(e == 0 for e in samples):
        raise ValueError("epsilon samples must be nonzero")
    J = degree_bound
    if len(samples) < J + 1:
        raise ValueError("need at least degree_bound + 1 samples")
    reports = [
        displacement_coeffs(sysbuilder(e), order, precision, eps=e)
        for e in samples
    ]
    with gmpy2.context(precision=precision):
        if residual_tol is None:
            residual_tol = mpfr(2) ** (-(precision // 2))
        xs = [_to_mpfr(e) for e in samples]
        coefficients: Dict[int, List[BigFloat]] = {}
        residuals: Dict[int, BigFloat] = {}
        for k in range(1, order + 1):
            ys = [rep.V[k - 1] for rep in reports]
            coeffs = _solve_vandermonde(xs[: J + 1], ys[: J + 1])
            worst = mpfr(0)
            for x, y in zip(xs[J + 1:], ys[J + 1:]):
                pred = coeffs[-1]
                for c in reversed(coeffs[:-1]):
                    pred = pred * x + c
                err = abs(pred - y)
                if err > worst:
                    worst = err
            if worst > residual_tol:
                raise FitError(
                    f"V_{k} misfits its degree-{J} model by "
                    + decimal_str(worst, 4)
                    + "; increase the degree bound, precision, or sample count")
            coefficients[k] = coeffs
            residuals[k] = worst
    return EpsilonExpansion(coefficients=coefficients, degree_bound=J,
                            residuals=residuals, precision_bits=precision)


def _solve_vandermonde(xs, ys):
    n = len(xs)
    rows = [[x ** j for j in range(n)] + [y] for x, y in zip(xs, ys)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(rows[r][col]))
        rows[col], rows[pivot] = rows[pivot], rows[col]
        if not rows[col][col]:
            raise FitError("singular fit system (coincident samples?)")
        inv = 1 / rows[col][col]
        for r in range(col + 1, n):
            factor = rows[r][col] * inv
            if factor:
                for c in range(col, n + 1):
                    rows[r][c] -= factor * rows[col][c]
    out = [None] * n
    for col in range(n - 1, -1, -1):
        acc = rows[col][n]
        for c in range(col + 1, n):
            acc -= rows[col][c] * out[c]
        out[col] = acc / rows[col][col]
    return out
