"""Exact arithmetic kernel.

Rationals, sparse multivariate polynomials over the rationals, truncated
univariate power series, Sylvester resultants via fraction-free (Bareiss)
elimination, and compositional inversion of series.  Everything in here is
exact: no floating point, no rounding.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

Rational = Fraction

Scalar = Union[Fraction, int]


def rational(text) -> Fraction:
    """Parse a rational from a string like '-3/10' (or pass through numbers)."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"malformed rational: {text!r}") from exc


class MPoly:
    """Sparse multivariate polynomial over Rational in named variables.

    Terms are stored as a map from exponent vector to nonzero coefficient;
    the variable tuple is kept sorted so equal polynomials have equal
    representations.  Instances are immutable.
    """

    __slots__ = ("variables", "terms")

    def __init__(self, variables: Sequence[str], terms: Mapping[tuple, Scalar]):
        variables = tuple(variables)
        if list(variables) != sorted(variables):
            order = sorted(range(len(variables)), key=lambda i: variables[i])
            remapped = {}
            for expo, coeff in terms.items():
                remapped[tuple(expo[i] for i in order)] = coeff
            variables = tuple(sorted(variables))
            terms = remapped
        clean = {}
        for expo, coeff in terms.items():
            coeff = Fraction(coeff)
            if coeff:
                if len(expo) != len(variables):
                    raise ValueError("exponent vector length mismatch")
                clean[tuple(expo)] = coeff
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("MPoly is immutable")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def constant(value: Scalar) -> "MPoly":
        value = Fraction(value)
        return MPoly((), {(): value} if value else {})

    @staticmethod
    def variable(name: str) -> "MPoly":
        return MPoly((name,), {(1,): Fraction(1)})

    @staticmethod
    def zero() -> "MPoly":
        return MPoly((), {})

    # -- structure ---------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(all(e == 0 for e in expo) for expo in self.terms)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("polynomial is not constant")
        return self.terms.get((0,) * len(self.variables), Fraction(0))

    def degree(self, var: str | None = None) -> int:
        """Total degree, or degree in one variable.  Zero polynomial: -1."""
        if not self.terms:
            return -1
        if var is None:
            return max(sum(expo) for expo in self.terms)
        if var not in self.variables:
            return 0
        i = self.variables.index(var)
        return max(expo[i] for expo in self.terms)

    def _aligned(self, other: "MPoly"):
        """Remap both operands onto the union of their variable tuples."""
        if self.variables == other.variables:
            return self.variables, self.terms, other.terms
        merged = tuple(sorted(set(self.variables) | set(other.variables)))

        def remap(poly: "MPoly"):
            pos = [merged.index(v) for v in poly.variables]
            out = {}
            for expo, coeff in poly.terms.items():
                new = [0] * len(merged)
                for p, e in zip(pos, expo):
                    new[p] = e
                out[tuple(new)] = coeff
            return out

        return merged, remap(self), remap(other)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other) -> "MPoly":
        other = _as_poly(other)
        variables, a, b = self._aligned(other)
        out = dict(a)
        for expo, coeff in b.items():
            out[expo] = out.get(expo, Fraction(0)) + coeff
        return MPoly(variables, out)

    __radd__ = __add__

    def __neg__(self) -> "MPoly":
        return MPoly(self.variables, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other) -> "MPoly":
        return self + (-_as_poly(other))

    def __rsub__(self, other) -> "MPoly":
        return _as_poly(other) - self

    def __mul__(self, other) -> "MPoly":
        other = _as_poly(other)
        variables, a, b = self._aligned(other)
        out: dict = {}
        for ea, ca in a.items():
            for eb, cb in b.items():
                key = tuple(x + y for x, y in zip(ea, eb))
                out[key] = out.get(key, Fraction(0)) + ca * cb
        return MPoly(variables, out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "MPoly":
        if n < 0:
            raise ValueError("negative power of a polynomial")
        result = MPoly.constant(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __truediv__(self, scalar) -> "MPoly":
        scalar = Fraction(scalar)
        return MPoly(self.variables, {e: c / scalar for e, c in self.terms.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, (MPoly, int, Fraction)):
            return NotImplemented
        diff = self - _as_poly(other)
        return diff.is_zero()

    def __hash__(self):
        variables = tuple(
            v for i, v in enumerate(self.variables)
            if any(e[i] for e in self.terms)
        )
        normal = MPoly(variables, {
            tuple(e[self.variables.index(v)] for v in variables): c
            for e, c in self.terms.items()
        }) if variables != self.variables else self
        return hash((normal.variables, frozenset(normal.terms.items())))

    # -- substitution and friends -----------------------------------------

    def subs(self, assignment: Mapping[str, "MPoly | Scalar"]) -> "MPoly":
        """Substitute polynomials (or scalars) for some variables."""
        values = {k: _as_poly(v) for k, v in assignment.items()}
        result = MPoly.zero()
        power_cache: dict = {}
        for expo, coeff in self.terms.items():
            term = MPoly.constant(coeff)
            for var, e in zip(self.variables, expo):
                if e == 0:
                    continue
                if var in values:
                    key = (var, e)
                    if key not in power_cache:
                        power_cache[key] = values[var] ** e
                    term = term * power_cache[key]
                else:
                    term = term * MPoly((var,), {(e,): Fraction(1)})
            result = result + term
        return result

    def coeffs_in(self, var: str) -> list:
        """Coefficients of powers of `var`, as polynomials in the rest.

        Index k holds the coefficient of var**k; the list has degree+1
        entries (a single zero entry for the zero polynomial).
        """
        if var not in self.variables:
            return [self]
        i = self.variables.index(var)
        rest = tuple(v for j, v in enumerate(self.variables) if j != i)
        buckets: dict = {}
        for expo, coeff in self.terms.items():
            reduced = tuple(e for j, e in enumerate(expo) if j != i)
            buckets.setdefault(expo[i], {})[reduced] = coeff
        deg = max(buckets) if buckets else 0
        return [MPoly(rest, buckets.get(k, {})) for k in range(deg + 1)]

    def __repr__(self):
        return f"MPoly({format_poly(self)!r})"


def _as_poly(value) -> MPoly:
    if isinstance(value, MPoly):
        return value
    if isinstance(value, (int, Fraction)):
        return MPoly.constant(value)
    raise TypeError(f"cannot coerce {type(value).__name__} to MPoly")


def poly_eval(p: MPoly, assignment: Mapping[str, Scalar]) -> Fraction:
    """Exact value of p at a full assignment of its variables."""
    for var in p.variables:
        if var not in assignment and any(
            e[p.variables.index(var)] for e in p.terms
        ):
            raise ValueError(f"assignment missing variable {var!r}")
    total = Fraction(0)
    for expo, coeff in p.terms.items():
        value = coeff
        for var, e in zip(p.variables, expo):
            if e:
                value *= Fraction(assignment[var]) ** e
        total += value
    return total


def poly_derivative(p: MPoly, var: str) -> MPoly:
    """Exact partial derivative with respect to `var`."""
    if not isinstance(var, str) or not var:
        raise ValueError("derivative variable must be a name")
    if var not in p.variables:
        return MPoly.zero()
    i = p.variables.index(var)
    out = {}
    for expo, coeff in p.terms.items():
        if expo[i] == 0:
            continue
        new = list(expo)
        new[i] -= 1
        key = tuple(new)
        out[key] = out.get(key, Fraction(0)) + coeff * expo[i]
    return MPoly(p.variables, out)


# ---------------------------------------------------------------------------
# Exact division (used by Bareiss elimination; the quotient must be exact).

def exact_div(a: MPoly, b: MPoly) -> MPoly:
    """Divide a by b, requiring zero remainder."""
    if b.is_zero():
        raise ZeroDivisionError("division by zero polynomial")
    if b.is_constant():
        return a / b.constant_value()
    variables, ta, tb = a._aligned(b)
    dividend = dict(ta)
    # Leading term of b in lex order on the unified variables.
    lead = max(tb)
    lead_c = tb[lead]
    quotient: dict = {}
    while dividend:
        expo = max(dividend)
        coeff = dividend[expo]
        q_expo = tuple(x - y for x, y in zip(expo, lead))
        if any(e < 0 for e in q_expo):
            raise ValueError("inexact polynomial division")
        q_coeff = coeff / lead_c
        quotient[q_expo] = q_coeff
        for eb, cb in tb.items():
            key = tuple(x + y for x, y in zip(q_expo, eb))
            value = dividend.get(key, Fraction(0)) - q_coeff * cb
            if value:
                dividend[key] = value
            else:
                dividend.pop(key, None)
    return MPoly(variables, quotient)


def resultant(f: MPoly, g: MPoly, var: str) -> MPoly:
    """Resultant of f and g with respect to `var`.

    The Sylvester matrix is eliminated with Bareiss' fraction-free scheme,
    which keeps all intermediate entries polynomial.
    """
    if f.is_zero() or g.is_zero():
        raise ValueError("resultant of a zero polynomial")
    fc = f.coeffs_in(var)
    gc = g.coeffs_in(var)
    m, n = len(fc) - 1, len(gc) - 1
    if m < 1 or n < 1:
        raise ValueError(f"both polynomials must have positive degree in {var!r}")
    size = m + n
    rows = []
    for i in range(n):  # rows of f coefficients
        row = [MPoly.zero()] * size
        for k, c in enumerate(fc):
            row[i + m - k] = c
        rows.append(row)
    for i in range(m):  # rows of g coefficients
        row = [MPoly.zero()] * size
        for k, c in enumerate(gc):
            row[i + n - k] = c
        rows.append(row)
    return _bareiss_determinant(rows)


def _bareiss_determinant(rows: list) -> MPoly:
    n = len(rows)
    sign = 1
    prev = MPoly.constant(1)
    for k in range(n - 1):
        if rows[k][k].is_zero():
            for i in range(k + 1, n):
                if not rows[i][k].is_zero():
                    rows[k], rows[i] = rows[i], rows[k]
                    sign = -sign
                    break
            else:
                return MPoly.zero()
        pivot = rows[k][k]
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = rows[i][j] * pivot - rows[i][k] * rows[k][j]
                rows[i][j] = exact_div(num, prev)
            rows[i][k] = MPoly.zero()
        prev = pivot
    det = rows[n - 1][n - 1]
    return -det if sign < 0 else det


# ---------------------------------------------------------------------------
# Truncated power series in one variable.
#
# The generic helpers below work over any commutative coefficient ring that
# supports +, -, * and (for inversion) /; YSeries wraps them for rational or
# polynomial coefficients, and the high-precision code reuses them with
# arbitrary-precision floats.

def series_mul(a: Sequence, b: Sequence, order: int, zero):
    out = [zero] * (order + 1)
    for i, ai in enumerate(a[: order + 1]):
        if ai == zero:
            continue
        for j, bj in enumerate(b[: order + 1 - i]):
            out[i + j] = out[i + j] + ai * bj
    return out


def series_compose(outer: Sequence, inner: Sequence, order: int, zero, one):
    """outer(inner(y)) truncated at `order`; inner must have no constant term."""
    if len(inner) > 0 and inner[0] != zero:
        raise ValueError("inner series must have zero constant term")
    result = [zero] * (order + 1)
    power = [one] + [zero] * order
    if len(outer) > 0:
        result[0] = outer[0]
    for k in range(1, min(len(outer), order + 1)):
        power = series_mul(power, inner, order, zero)
        if outer[k] == zero:
            continue
        for i in range(order + 1):
            result[i] = result[i] + outer[k] * power[i]
    return result


def series_reversion(s: Sequence, order: int, zero, one):
    """Compositional inverse t with s(t(y)) = y + O(y^(order+1)).

    Requires s(0)=0 and an invertible linear coefficient.  Triangular solve:
    the y^k defect of s(t) is linear in t_k with coefficient s_1.
    """
    if len(s) < 2 or s[0] != zero:
        raise ValueError("series must have zero constant term")
    s1 = s[1]
    if s1 == zero:
        raise ValueError("series has zero linear coefficient; not invertible")
    t = [zero] * (order + 1)
    t[1] = one / s1
    for k in range(2, order + 1):
        comp = series_compose(list(s[: k + 1]), t, k, zero, one)
        t[k] = -comp[k] / s1
    return t


class YSeries:
    """Truncated power series in y with Rational (or MPoly) coefficients."""

    __slots__ = ("order", "coeffs")

    def __init__(self, order: int, coeffs: Iterable):
        coeffs = list(coeffs)
        if len(coeffs) > order + 1:
            raise ValueError("more coefficients than the truncation order allows")
        coeffs += [Fraction(0)] * (order + 1 - len(coeffs))
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "coeffs", tuple(coeffs))

    def __setattr__(self, name, value):
        raise AttributeError("YSeries is immutable")

    @staticmethod
    def zero(order: int) -> "YSeries":
        return YSeries(order, [])

    @staticmethod
    def identity(order: int) -> "YSeries":
        return YSeries(order, [Fraction(0), Fraction(1)])

    def __getitem__(self, k: int):
        return self.coeffs[k]

    def __eq__(self, other):
        if not isinstance(other, YSeries):
            return NotImplemented
        return self.order == other.order and all(
            a == b for a, b in zip(self.coeffs, other.coeffs)
        )

    def __add__(self, other: "YSeries") -> "YSeries":
        order = min(self.order, other.order)
        return YSeries(order, [a + b for a, b in
                               zip(self.coeffs[: order + 1], other.coeffs[: order + 1])])

    def __sub__(self, other: "YSeries") -> "YSeries":
        order = min(self.order, other.order)
        return YSeries(order, [a - b for a, b in
                               zip(self.coeffs[: order + 1], other.coeffs[: order + 1])])

    def __mul__(self, other) -> "YSeries":
        if isinstance(other, YSeries):
            order = min(self.order, other.order)
            return YSeries(order, series_mul(self.coeffs, other.coeffs,
                                             order, Fraction(0)))
        return YSeries(self.order, [c * other for c in self.coeffs])

    __rmul__ = __mul__

    def compose(self, inner: "YSeries") -> "YSeries":
        order = min(self.order, inner.order)
        return YSeries(order, series_compose(self.coeffs, inner.coeffs,
                                             order, Fraction(0), Fraction(1)))

    def __repr__(self):
        return f"YSeries(order={self.order}, coeffs={list(self.coeffs)!r})"


def series_compose_invert(s: YSeries) -> YSeries:
    """Compositional inverse of s: returns t with s(t(y)) = y + O(y^(N+1))."""
    return YSeries(s.order, series_reversion(s.coeffs, s.order,
                                             Fraction(0), Fraction(1)))


# ---------------------------------------------------------------------------
# Polynomial text grammar: signed terms, rational literals p/q, identifiers,
# '^' nonnegative integer powers, '*' optional between factors.

class PolyParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class _Scanner:
    def __init__(self, text: str, line_offset: int = 1, col_offset: int = 1):
        self.text = text
        self.pos = 0
        self.line = line_offset
        self.col = col_offset

    def error(self, message: str):
        raise PolyParseError(message, self.line, self.col)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r\n":
            if self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def advance(self, n: int = 1) -> str:
        chunk = self.text[self.pos: self.pos + n]
        self.pos += n
        self.col += n
        return chunk

    def take_integer(self) -> int:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.advance()
        if self.pos == start:
            self.error("expected an integer")
        return int(self.text[start: self.pos])

    def take_identifier(self) -> str:
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] == "_"
        ):
            self.advance()
        name = self.text[start: self.pos]
        if not name or name[0].isdigit():
            self.error("expected an identifier")
        return name


def parse_poly(text: str, line_offset: int = 1, col_offset: int = 1) -> MPoly:
    """Parse the polynomial grammar into an MPoly.

    Raises PolyParseError with line/column on malformed input.
    """
    sc = _Scanner(text, line_offset, col_offset)
    sc.skip_ws()
    if not sc.peek():
        sc.error("empty polynomial")
    result = MPoly.zero()
    first = True
    while True:
        sc.skip_ws()
        sign = 1
        if sc.peek() in "+-":
            if sc.advance() == "-":
                sign = -1
        elif not first:
            break
        first = False
        result = result + _parse_term(sc, sign)
        sc.skip_ws()
        if not sc.peek():
            return result
        if sc.peek() not in "+-":
            sc.error(f"unexpected character {sc.peek()!r}")


def _parse_term(sc: _Scanner, sign: int) -> MPoly:
    term = MPoly.constant(sign)
    saw_factor = False
    while True:
        sc.skip_ws()
        ch = sc.peek()
        if ch.isdigit():
            num = sc.take_integer()
            if sc.peek() == "/":
                sc.advance()
                den = sc.take_integer()
                if den == 0:
                    sc.error("zero denominator")
                term = term * Fraction(num, den)
            else:
                term = term * num
            saw_factor = True
        elif ch.isalpha() or ch == "_":
            name = sc.take_identifier()
            power = 1
            if sc.peek() == "^":
                sc.advance()
                sc.skip_ws()
                if not sc.peek().isdigit():
                    sc.error("expected a nonnegative integer exponent after '^'")
                power = sc.take_integer()
            term = term * (MPoly.variable(name) ** power)
            saw_factor = True
        else:
            if not saw_factor:
                sc.error("expected a term")
            return term
        sc.skip_ws()
        if sc.peek() == "*":
            sc.advance()
            sc.skip_ws()
            if not (sc.peek().isdigit() or sc.peek().isalpha() or sc.peek() == "_"):
                sc.error("expected a factor after '*'")


def format_poly(p: MPoly) -> str:
    """Canonical text form; parses back to an equal polynomial."""
    if p.is_zero():
        return "0"
    items = sorted(p.terms.items(), key=lambda kv: (sum(kv[0]), kv[0]))
    pieces = []
    for expo, coeff in items:
        factors = []
        for var, e in zip(p.variables, expo):
            if e == 1:
                factors.append(var)
            elif e > 1:
                factors.append(f"{var}^{e}")
        magnitude = abs(coeff)
        if not factors or magnitude != 1:
            factors.insert(0, str(magnitude))
        body = "*".join(factors)
        pieces.append(("- " if coeff < 0 else "+ ") + body)
    text = " ".join(pieces)
    return text[2:] if text.startswith("+ ") else "-" + text[2:]
