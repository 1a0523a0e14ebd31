"""Exact and P-bit tables of the plane invariants n_{0,d} and n_{1,d}.

``n_{0,d}`` is the number of rational degree-d plane curves through 3d-1
general points divided by (3d-1)!; it obeys the quadratic recursion with
weights :func:`kontsevich_weight`.  ``n_{1,d}`` is defined through the
generating function ``F1 = sum n_{1,d} e^{dz}`` and the genus-one relation

    (27 + 2 F0' - 3 F0'') F1' = (F0''' - 3 F0'' + 2 F0') / 8,

whose e^{dz} coefficient gives

    27 d n_{1,d} = d(d-1)(d-2) n_{0,d} / 8
                   + sum_{j=1}^{d-1} j(3j-2) n_{0,j} (d-j) n_{1,d-j}.

Exact tables use :class:`fractions.Fraction`; the "scaled" tables hold gmpy2
``mpfr`` values whose unbounded exponent range covers ``e^{-d x0}`` for
d in the thousands.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import gmpy2
from gmpy2 import mpfr

from ._mp import to_mpfr, working_precision
from .series import TruncatedSeries

__all__ = [
    "InvariantTable",
    "ComparisonSpec",
    "F1_SPEC",
    "F2_SPEC",
    "WdvvReport",
    "kontsevich_weight",
    "genus0_table",
    "genus1_table",
    "genus0_scaled",
    "genus1_scaled",
    "build_tables",
    "verify_wdvv_series",
    "verify_bounds",
    "comparison_sequence",
    "catalan",
]


@dataclass(frozen=True)
class InvariantTable:
    """Invariants n_{g,d} for d = 1..dmax.

    ``values`` holds exact rationals (possibly only for a prefix of the
    range); ``scaled`` holds ``precision_bits``-bit floating values for the
    whole range when present.
    """

    genus: int
    dmax: int
    values: Mapping[int, Fraction]
    scaled: Mapping[int, mpfr] | None = None
    precision_bits: int | None = None

    def __post_init__(self):
        if self.genus not in (0, 1):
            raise ValueError(f"genus must be 0 or 1, got {self.genus}")
        if self.dmax < 1:
            raise ValueError("dmax must be positive")

    @property
    def exact_dmax(self) -> int:
        d = 0
        while d + 1 in self.values:
            d += 1
        return d

    def covers(self, dmax: int) -> bool:
        return dmax <= self.dmax

    def value(self, d: int) -> mpfr:
        """n_{g,d} as an mpfr at the current context precision."""
        if self.scaled is not None and d in self.scaled:
            return +self.scaled[d]
        if d in self.values:
            return to_mpfr(self.values[d])
        raise KeyError(f"degree {d} not in table (dmax={self.dmax})")

    def exact(self, d: int) -> Fraction:
        return self.values[d]

    def log_value(self, d: int) -> mpfr:
        """Natural log of n_{g,d} (-inf for the vanishing genus-one entries)."""
        return gmpy2.log(self.value(d))

    def replace(self, d: int, new) -> "InvariantTable":
        """Copy with a single entry replaced (used for perturbation probes)."""
        values = dict(self.values)
        scaled = dict(self.scaled) if self.scaled is not None else None
        if isinstance(new, Fraction) or isinstance(new, int):
            values[d] = Fraction(new)
            if scaled is not None and d in scaled:
                with working_precision(self.precision_bits):
                    scaled[d] = to_mpfr(Fraction(new))
        else:
            if scaled is None:
                raise ValueError("table has no floating entries")
            scaled[d] = new
            values.pop(d, None)
        return InvariantTable(self.genus, self.dmax, values, scaled, self.precision_bits)


def kontsevich_weight(d1: int, d2: int) -> Fraction:
    """T(d1, d2) = d1 d2 (3 d1 d2 (d+2) - 2 d^2) / (2 (3d-3)(3d-2)(3d-1)), d = d1 + d2."""
    if d1 < 1 or d2 < 1:
        raise ValueError(f"degrees must be positive, got ({d1}, {d2})")
    d = d1 + d2
    return Fraction(d1 * d2 * (3 * d1 * d2 * (d + 2) - 2 * d * d),
                    2 * (3 * d - 3) * (3 * d - 2) * (3 * d - 1))


def _weight_numerator(j: int, k: int, d: int) -> int:
    return j * k * (3 * j * k * (d + 2) - 2 * d * d)


def genus0_table(dmax: int) -> InvariantTable:
    """Exact n_{0,d}, d <= dmax, from n_{0,1} = 1/2 and the quadratic recursion."""
    if dmax < 1:
        raise ValueError("dmax must be positive")
    n = {1: Fraction(1, 2)}
    for d in range(2, dmax + 1):
        acc = Fraction(0)
        for j in range(1, d // 2 + 1):
            k = d - j
            term = _weight_numerator(j, k, d) * n[j] * n[k]
            acc += term if j == k else 2 * term
        n[d] = acc / (2 * (3 * d - 3) * (3 * d - 2) * (3 * d - 1))
    return InvariantTable(0, dmax, n)


def genus1_table(dmax: int, g0: InvariantTable) -> InvariantTable:
    """Exact n_{1,d}, d <= dmax, from the genus-one relation."""
    if g0.genus != 0:
        raise ValueError("second argument must be the genus-0 table")
    if g0.exact_dmax < dmax:
        raise ValueError(f"genus-0 table covers d <= {g0.exact_dmax} exactly, need {dmax}")
    n0 = g0.values
    n1 = {}
    for d in range(1, dmax + 1):
        acc = Fraction(d * (d - 1) * (d - 2), 8) * n0[d]
        for j in range(1, d):
            if n1[d - j]:
                acc += j * (3 * j - 2) * (d - j) * n0[j] * n1[d - j]
        n1[d] = acc / (27 * d)
    return InvariantTable(1, dmax, n1)


def _guard_bits(dmax: int) -> int:
    return 32 + dmax.bit_length()


def _genus0_work(dmax: int, work: int) -> list:
    with working_precision(work):
        n = [mpfr(0), mpfr(1) / 2]
        for d in range(2, dmax + 1):
            acc = mpfr(0)
            d2 = 2 * d * d
            dp2 = d + 2
            for j in range(1, d // 2 + 1):
                k = d - j
                jk = j * k
                term = n[j] * n[k] * (jk * (3 * jk * dp2 - d2))
                acc += term if j == k else 2 * term
            n.append(acc / (2 * (3 * d - 3) * (3 * d - 2) * (3 * d - 1)))
    return n


def _genus1_work(n0: list, dmax: int, work: int) -> list:
    with working_precision(work):
        pre = [mpfr(0)] + [n0[j] * (j * (3 * j - 2)) for j in range(1, dmax + 1)]
        n1 = [mpfr(0)] * (dmax + 1)
        for d in range(3, dmax + 1):
            acc = n0[d] * (d * (d - 1) * (d - 2)) / 8
            # n_{1,k} vanishes for k <= 2
            for j in range(1, d - 2):
                k = d - j
                acc += pre[j] * n1[k] * k
            n1[d] = acc / (27 * d)
    return n1


def _rounded(work_values: list, dmax: int, bits: int) -> dict:
    with working_precision(bits):
        return {d: +work_values[d] for d in range(1, dmax + 1)}


def genus0_scaled(dmax: int, precision_bits: int = 256,
                  exact: InvariantTable | None = None) -> InvariantTable:
    """n_{0,d} for d <= dmax in P-bit arithmetic (plus internal guard bits).

    All terms of the running sums are positive, so rounding errors do not
    cancel; the guard bits keep the stored values within an ulp of the
    exact ones.
    """
    n = _genus0_work(dmax, precision_bits + _guard_bits(dmax))
    values = dict(exact.values) if exact is not None else {}
    return InvariantTable(0, dmax, values, _rounded(n, dmax, precision_bits), precision_bits)


def genus1_scaled(dmax: int, g0: InvariantTable, precision_bits: int | None = None,
                  exact: InvariantTable | None = None) -> InvariantTable:
    """n_{1,d} for d <= dmax from a scaled genus-0 table."""
    if g0.scaled is None or g0.dmax < dmax:
        raise ValueError(f"need a scaled genus-0 table covering d <= {dmax}")
    if precision_bits is None:
        precision_bits = g0.precision_bits
    n0 = [mpfr(0)] + [g0.scaled[d] for d in range(1, dmax + 1)]
    n1 = _genus1_work(n0, dmax, precision_bits + _guard_bits(dmax))
    values = dict(exact.values) if exact is not None else {}
    return InvariantTable(1, dmax, values, _rounded(n1, dmax, precision_bits), precision_bits)


def build_tables(d_exact: int = 200, d_float: int = 5000,
                 precision_bits: int = 256) -> tuple[InvariantTable, InvariantTable]:
    """Genus-0 and genus-1 tables: exact through d_exact, P-bit through d_float."""
    if d_exact > d_float:
        raise ValueError("d_exact must not exceed d_float")
    e0 = genus0_table(d_exact)
    e1 = genus1_table(d_exact, e0)
    work = precision_bits + _guard_bits(d_float)
    n0 = _genus0_work(d_float, work)
    n1 = _genus1_work(n0, d_float, work)
    g0 = InvariantTable(0, d_float, dict(e0.values), _rounded(n0, d_float, precision_bits),
                        precision_bits)
    g1 = InvariantTable(1, d_float, dict(e1.values), _rounded(n1, d_float, precision_bits),
                        precision_bits)
    return g0, g1


# -- checks -------------------------------------------------------------------

@dataclass(frozen=True)
class WdvvReport:
    residuals: tuple  # coefficients of q^1 .. q^order
    order: int

    @property
    def first_nonzero(self) -> int | None:
        for k, r in enumerate(self.residuals, start=1):
            if r != 0:
                return k
        return None

    @property
    def ok(self) -> bool:
        return self.first_nonzero is None


def verify_wdvv_series(g0, order: int) -> WdvvReport:
    """Exact residual of (27 + 2F' - 3F'')F''' - (6F - 33F' + 54F'' + F''^2).

    ``F = sum n_{0,d} q^d`` with ``q = e^z``, so each z-derivative multiplies
    the q^d coefficient by d.  Accepts a table or a plain mapping d -> n_d;
    missing degrees count as zero.
    """
    values = g0.values if isinstance(g0, InvariantTable) else g0
    if isinstance(g0, InvariantTable) and order > g0.dmax:
        raise ValueError(f"order {order} exceeds table range {g0.dmax}")
    coeffs = [Fraction(0)] + [Fraction(values.get(d, 0)) for d in range(1, order + 1)]

    def deriv(j):
        return TruncatedSeries([d ** j * c for d, c in enumerate(coeffs)], "q")

    F, F1, F2, F3 = (deriv(j) for j in range(4))
    lhs = (27 + 2 * F1 - 3 * F2) * F3
    rhs = 6 * F - 33 * F1 + 54 * F2 + F2 * F2
    res = lhs - rhs
    return WdvvReport(tuple(res.coeffs[1:]), order)


def verify_bounds(g0: InvariantTable, dmax: int | None = None) -> list[int]:
    """Degrees d violating (1/27)^d d^{-7/2} <= n_{0,d} <= 3 (4/15)^d d^{-7/2}.

    Exact entries are compared after squaring, in integers:
    ``1 <= n^2 27^{2d} d^7`` and ``n^2 (15/4)^{2d} d^7 <= 9``.  Floating
    entries are compared in logarithms with a relative guard of 2^-(P-16).
    """
    if dmax is None:
        dmax = g0.dmax
    bad = []
    for d in range(1, dmax + 1):
        if d in g0.values:
            n = Fraction(g0.values[d])
            lower_ok = n > 0 and n * n * Fraction(27) ** (2 * d) * d ** 7 >= 1
            upper_ok = n * n * Fraction(15, 4) ** (2 * d) * d ** 7 <= 9
        else:
            bits = g0.precision_bits or 256
            with working_precision(bits):
                v = g0.value(d)
                if not v > 0:
                    bad.append(d)
                    continue
                guard = gmpy2.mul_2exp(mpfr(1), -(bits - 16)) * (1 + d)
                logn = gmpy2.log(v)
                ld = gmpy2.log(mpfr(d))
                lower = -d * gmpy2.log(mpfr(27)) - mpfr(7) / 2 * ld
                upper = gmpy2.log(mpfr(3)) + d * gmpy2.log(mpfr(4) / 15) - mpfr(7) / 2 * ld
                lower_ok = logn >= lower - guard * abs(lower)
                upper_ok = logn <= upper + guard * abs(upper)
        if not (lower_ok and upper_ok):
            bad.append(d)
    return bad


# -- comparison sequences ----------------------------------------------------

@dataclass(frozen=True)
class ComparisonSpec:
    """Weight function f > 0 and seed n_1 for n_d = sum f(j)f(d-j)/f(d) n_j n_{d-j}."""

    f: Callable[[int], Fraction]
    seed: Fraction = Fraction(1, 2)
    name: str = field(default="f", compare=False)


F1_SPEC = ComparisonSpec(lambda d: Fraction(d * (3 * d - 2), 54), Fraction(1, 2), "f1")
F2_SPEC = ComparisonSpec(lambda d: Fraction(2 * d * d, 15), Fraction(1, 2), "f2")


def catalan(k: int) -> int:
    return math.comb(2 * k, k) // (k + 1)


def comparison_sequence(spec: ComparisonSpec, dmax: int) -> dict[int, Fraction]:
    """Recursive comparison sequence, checked against m_d = f(d) n_d = C_{d-1} m_1^d.

    Raises ArithmeticError if the Catalan closed form disagrees with the
    recursion at any degree (it cannot, for a positive f).
    """
    seed = Fraction(spec.seed)
    if seed <= 0:
        raise ValueError(f"seed must be positive, got {seed}")
    f = {d: Fraction(spec.f(d)) for d in range(1, dmax + 1)}
    if any(v <= 0 for v in f.values()):
        raise ValueError("weight function must be positive on 1..dmax")
    n = {1: seed}
    for d in range(2, dmax + 1):
        n[d] = sum((f[j] * f[d - j] / f[d] * n[j] * n[d - j] for j in range(1, d)), Fraction(0))
    m1 = f[1] * seed
    for d in range(1, dmax + 1):
        if f[d] * n[d] != catalan(d - 1) * m1 ** d:
            raise ArithmeticError(f"Catalan closed form fails at d = {d}")
    return n
