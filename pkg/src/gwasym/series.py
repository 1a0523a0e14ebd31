"""Truncated power series, half-integer Puiseux series and F0 evaluation.

Coefficients may be exact (``int``/``Fraction``) or gmpy2 ``mpfr``/``mpc``;
the arithmetic below is written once for both.  A series of order ``K``
knows its coefficients through ``K`` and nothing beyond: every operation
propagates that bound instead of padding with zeros.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import gmpy2
from gmpy2 import mpc, mpfr

from ._mp import (
    from_decimal,
    is_exact,
    sqrt_any,
    to_decimal,
    to_mpfr,
    ulp_scale,
    working_precision,
)
from .errors import AccuracyError

__all__ = [
    "TruncatedSeries",
    "PuiseuxSeries",
    "series_mul",
    "series_div",
    "series_integrate",
    "series_differentiate",
    "puiseux_mul",
    "puiseux_div",
    "compose_puiseux",
    "revert_even",
    "composition_residual",
    "SeriesEvaluator",
    "eval_F0",
    "series_to_json",
    "series_from_json",
]


# -- coefficient-list kernels -------------------------------------------------

def _conv(a: Sequence, b: Sequence, n: int) -> list:
    """First ``n`` coefficients of the Cauchy product."""
    out = []
    for k in range(n):
        lo, hi = max(0, k - len(b) + 1), min(k, len(a) - 1)
        s = 0
        for i in range(lo, hi + 1):
            s += a[i] * b[k - i]
        out.append(s)
    return out


def _inv(a: Sequence, n: int) -> list:
    if a[0] == 0:
        raise ZeroDivisionError("constant term is zero")
    inv0 = 1 / a[0] if not is_exact(a[0]) else Fraction(1) / a[0]
    out = [inv0]
    for k in range(1, n):
        s = 0
        for i in range(1, min(k, len(a) - 1) + 1):
            s += a[i] * out[k - i]
        out.append(-s * inv0)
    return out


def _div(a: Sequence, b: Sequence, n: int) -> list:
    if b[0] == 0:
        raise ZeroDivisionError("constant term of divisor is zero")
    inv0 = 1 / b[0] if not is_exact(b[0]) else Fraction(1) / b[0]
    out = []
    for k in range(n):
        s = a[k] if k < len(a) else 0
        for i in range(1, min(k, len(b) - 1) + 1):
            s -= b[i] * out[k - i]
        out.append(s * inv0)
    return out


def _sqrt(a: Sequence, n: int) -> list:
    r0 = sqrt_any(a[0])
    if r0 == 0:
        raise ValueError("square root of a series with zero constant term")
    out = [r0]
    for k in range(1, n):
        s = a[k] if k < len(a) else 0
        for i in range(1, k):
            s -= out[i] * out[k - i]
        out.append(s / (2 * r0))
    return out


def _horner(outer: Sequence, inner: Sequence, n: int) -> list:
    """outer(inner(u)) through u**(n-1); inner[0] must be zero."""
    acc = [outer[-1]] + [0] * (n - 1)
    for c in reversed(outer[:-1]):
        acc = _conv(acc, inner, n)
        acc[0] += c
    return acc


def _scalar(x) -> bool:
    return isinstance(x, (int, Fraction, mpfr, mpc, float))


# -- integer-power series -----------------------------------------------------

class TruncatedSeries:
    """Power series ``c_0 + c_1 v + ... + c_K v**K + O(v**(K+1))``."""

    __slots__ = ("coeffs", "var")

    def __init__(self, coeffs: Sequence, var: str = "t"):
        if len(coeffs) == 0:
            raise ValueError("a truncated series needs at least one coefficient")
        self.coeffs = tuple(coeffs)
        self.var = var

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, k):
        return self.coeffs[k]

    def __iter__(self):
        return iter(self.coeffs)

    def __repr__(self):
        return f"TruncatedSeries({list(self.coeffs)!r}, var={self.var!r})"

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return self.var == other.var and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.coeffs, self.var))

    def _check(self, other: "TruncatedSeries"):
        if self.var != other.var:
            raise ValueError(f"variable mismatch: {self.var!r} vs {other.var!r}")

    def truncate(self, order: int) -> "TruncatedSeries":
        if order > self.order:
            raise ValueError(f"cannot raise order {self.order} to {order}")
        return TruncatedSeries(self.coeffs[: order + 1], self.var)

    def __add__(self, other):
        if _scalar(other):
            return TruncatedSeries((self.coeffs[0] + other,) + self.coeffs[1:], self.var)
        self._check(other)
        n = min(len(self), len(other))
        return TruncatedSeries([a + b for a, b in zip(self.coeffs[:n], other.coeffs[:n])], self.var)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries([-c for c in self.coeffs], self.var)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if _scalar(other):
            return TruncatedSeries([c * other for c in self.coeffs], self.var)
        self._check(other)
        n = min(len(self), len(other))
        return TruncatedSeries(_conv(self.coeffs, other.coeffs, n), self.var)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if _scalar(other):
            return TruncatedSeries([c / other for c in self.coeffs], self.var)
        self._check(other)
        if other.coeffs[0] == 0:
            raise ZeroDivisionError(
                "divisor has zero constant term; use puiseux_div for Laurent/Puiseux quotients"
            )
        n = min(len(self), len(other))
        return TruncatedSeries(_div(self.coeffs, other.coeffs, n), self.var)

    def __rtruediv__(self, other):
        return TruncatedSeries([other] + [0] * self.order, self.var) / self

    def __pow__(self, e: int):
        if not isinstance(e, int):
            raise TypeError("only integer powers are supported")
        if e < 0:
            return 1 / (self ** (-e))
        out = TruncatedSeries([1] + [0] * self.order, self.var)
        base = self
        while e:
            if e & 1:
                out = out * base
            e >>= 1
            if e:
                base = base * base
        return out

    def sqrt(self) -> "TruncatedSeries":
        return TruncatedSeries(_sqrt(self.coeffs, len(self)), self.var)

    def differentiate(self) -> "TruncatedSeries":
        if self.order == 0:
            raise ValueError("derivative of an order-0 series carries no information")
        return TruncatedSeries([k * self.coeffs[k] for k in range(1, len(self))], self.var)

    def integrate(self, constant=0) -> "TruncatedSeries":
        tail = [self.coeffs[k] / (k + 1) if not is_exact(self.coeffs[k])
                else Fraction(self.coeffs[k]) / (k + 1) for k in range(len(self))]
        return TruncatedSeries([constant] + tail, self.var)

    def compose(self, inner: "TruncatedSeries") -> "TruncatedSeries":
        """``self(inner(v))`` for an inner series with zero constant term."""
        if inner.coeffs[0] != 0:
            raise ValueError("inner series must vanish at the origin")
        n = min(len(self), len(inner))
        return TruncatedSeries(_horner(self.coeffs, inner.coeffs, n), inner.var)

    def __call__(self, v):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * v + c
        return acc


def series_mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    return a * b


def series_div(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    return a / b


def series_integrate(a: TruncatedSeries, constant=0) -> TruncatedSeries:
    return a.integrate(constant)


def series_differentiate(a: TruncatedSeries) -> TruncatedSeries:
    return a.differentiate()


# -- half-integer Puiseux series ----------------------------------------------

class PuiseuxSeries:
    """``sum_{k=m}^{K} g_k s**(k/2) + O(s**((K+1)/2))``.

    ``m`` is the minimal half-exponent; leading exact zeros are stripped on
    construction, so ``coeffs[0] != 0`` unless the series is zero to order K
    (then ``coeffs`` is empty and ``m == K + 1``).
    """

    __slots__ = ("m", "coeffs", "order", "var")

    def __init__(self, m: int, coeffs: Sequence, order: int | None = None, var: str = "s"):
        coeffs = list(coeffs)
        if order is None:
            order = m + len(coeffs) - 1
        if len(coeffs) != order - m + 1:
            raise ValueError(f"need {order - m + 1} coefficients for half-exponents {m}..{order}")
        while coeffs and coeffs[0] == 0:
            coeffs.pop(0)
            m += 1
        self.m = m
        self.coeffs = tuple(coeffs)
        self.order = order
        self.var = var

    @classmethod
    def from_sqrt_series(cls, ts: TruncatedSeries, var: str = "s") -> "PuiseuxSeries":
        """Reinterpret a power series in ``u`` as a series in ``s = u**2``."""
        return cls(0, ts.coeffs, ts.order, var)

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def leading(self):
        if self.is_zero:
            raise ValueError("zero series has no leading coefficient")
        return self.coeffs[0]

    def coefficient(self, k: int):
        if k > self.order:
            raise IndexError(f"half-exponent {k} is beyond the known order {self.order}")
        if k < self.m:
            return 0
        return self.coeffs[k - self.m]

    def __repr__(self):
        return (f"PuiseuxSeries(m={self.m}, coeffs={list(self.coeffs)!r}, "
                f"order={self.order}, var={self.var!r})")

    def _dense(self, lo: int, hi: int) -> list:
        return [self.coefficient(k) for k in range(lo, hi + 1)]

    def __add__(self, other):
        if _scalar(other):
            order = max(self.order, 0)
            other = PuiseuxSeries(0, [other] + [0] * order, order, self.var)
        if self.var != other.var:
            raise ValueError(f"variable mismatch: {self.var!r} vs {other.var!r}")
        order = min(self.order, other.order)
        lo = min(self.m, other.m)
        if lo > order:
            return PuiseuxSeries(order + 1, [], order, self.var)
        vals = [a + b for a, b in zip(self._dense(lo, order), other._dense(lo, order))]
        return PuiseuxSeries(lo, vals, order, self.var)

    __radd__ = __add__

    def __neg__(self):
        return PuiseuxSeries(self.m, [-c for c in self.coeffs], self.order, self.var)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if _scalar(other):
            return PuiseuxSeries(self.m, [c * other for c in self.coeffs], self.order, self.var)
        return puiseux_mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if _scalar(other):
            return PuiseuxSeries(self.m, [c / other for c in self.coeffs], self.order, self.var)
        return puiseux_div(self, other)

    def drop_leading(self, tol) -> "PuiseuxSeries":
        """Treat a numerically negligible leading coefficient as an exact zero."""
        if self.is_zero:
            return self
        if abs(self.coeffs[0]) > tol:
            raise AccuracyError(
                f"leading coefficient {self.coeffs[0]} at half-exponent {self.m} exceeds {tol}"
            )
        return PuiseuxSeries(self.m + 1, self.coeffs[1:], self.order, self.var)

    def __call__(self, s):
        r = gmpy2.sqrt(s) if not is_exact(s) else sqrt_any(Fraction(s))
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * r + c
        return acc * r ** self.m if self.m >= 0 else acc / r ** (-self.m)


def puiseux_mul(a: PuiseuxSeries, b: PuiseuxSeries) -> PuiseuxSeries:
    if a.var != b.var:
        raise ValueError(f"variable mismatch: {a.var!r} vs {b.var!r}")
    order = min(a.order + b.m, b.order + a.m)
    m = a.m + b.m
    n = order - m + 1
    if n <= 0 or a.is_zero or b.is_zero:
        return PuiseuxSeries(order + 1, [], order, a.var)
    return PuiseuxSeries(m, _conv(a.coeffs, b.coeffs, n), order, a.var)


def puiseux_div(a: PuiseuxSeries, b: PuiseuxSeries) -> PuiseuxSeries:
    if a.var != b.var:
        raise ValueError(f"variable mismatch: {a.var!r} vs {b.var!r}")
    if b.is_zero:
        raise ZeroDivisionError("division by a series that vanishes to its known order")
    m = a.m - b.m
    if a.is_zero:
        order = a.order - b.m
        return PuiseuxSeries(order + 1, [], order, a.var)
    n = min(len(a.coeffs), len(b.coeffs))
    return PuiseuxSeries(m, _div(a.coeffs, b.coeffs, n), m + n - 1, a.var)


def compose_puiseux(outer: TruncatedSeries, inner: PuiseuxSeries) -> PuiseuxSeries:
    """``outer(inner(s))`` where ``inner`` vanishes at ``s = 0`` (``inner.m >= 1``)."""
    if inner.is_zero:
        raise ValueError("inner series is zero to its known order")
    if inner.m < 1:
        raise ValueError("inner series must vanish at s = 0")
    # outer truncation costs u**((K+1)m); inner truncation costs u**(K_in + 1)
    order = min((outer.order + 1) * inner.m - 1, inner.order)
    n = order + 1
    dense = [0] * inner.m + list(inner.coeffs)
    return PuiseuxSeries(0, _horner(outer.coeffs, dense[:n], n), order, inner.var)


def revert_even(z_series: TruncatedSeries, tol=None) -> PuiseuxSeries:
    """Invert ``z(tau) = b0 + b2 tau**2 + b3 tau**3 + ...`` (``b2 < 0``) near tau = 0.

    Returns ``tau`` as a series in ``s = b0 - z`` on the branch ``tau < 0``:
    ``tau = -s**(1/2)/sqrt(-b2) + ...``.  Writing ``s = -b2 tau**2 h(tau)**2``
    with ``h = sqrt(1 + (b3/b2) tau + ...)``, the map ``phi(tau) = tau h(tau)``
    equals ``-s**(1/2)/sqrt(-b2)`` and is reverted by Lagrange inversion:
    ``[v**n] phi^{-1} = [tau**(n-1)] h**(-n) / n``.
    """
    b = z_series.coeffs
    K = z_series.order
    if K < 2:
        raise ValueError("need the series through tau**2")
    b1, b2 = b[1], b[2]
    if is_exact(b1) and is_exact(b2):
        if b1 != 0:
            raise ValueError(f"linear coefficient must vanish, got {b1}")
    else:
        if tol is None:
            tol = ulp_scale(gmpy2.get_context().precision // 2) * max(1, abs(b2))
        if abs(b1) > tol:
            raise ValueError(f"linear coefficient {b1} exceeds tolerance {tol}")
    if not b2 < 0:
        raise ValueError(f"quadratic coefficient must be negative, got {b2}")

    n_terms = K - 1  # h is known through tau**(K-2)
    ratio = [Fraction(c) / b2 if is_exact(c) and is_exact(b2) else c / b2 for c in b[2:]]
    h = _sqrt(ratio, n_terms)
    hinv = _inv(h, n_terms)
    e1 = 1 / sqrt_any(-b2) if not is_exact(b2) else Fraction(1) / sqrt_any(-Fraction(b2))

    tau = []
    power = [1] + [0] * (n_terms - 1)
    scale = 1
    for n in range(1, n_terms + 1):
        power = _conv(power, hinv, n_terms)
        scale = scale * (-e1)
        coeff = power[n - 1]
        coeff = Fraction(coeff) / n if is_exact(coeff) else coeff / n
        tau.append(coeff * scale)
    return PuiseuxSeries(1, tau, n_terms, "s")


def composition_residual(z_series: TruncatedSeries, tau: PuiseuxSeries) -> PuiseuxSeries:
    """``z(tau(s)) - (b0 - s)``; vanishes through ``tau.order`` for a correct reversion."""
    shifted = TruncatedSeries((0,) + z_series.coeffs[1:], z_series.var)
    composed = compose_puiseux(shifted, tau)
    order = max(composed.order, 2)
    return composed + PuiseuxSeries(2, [1] + [0] * (order - 2), order, tau.var)


# -- evaluation of F0 and weighted relatives ------------------------------------

LN_15_4 = Fraction(15, 4)


@dataclass(frozen=True)
class SeriesValue:
    value: object
    terms: int
    tail_bound: object


def _poly_weight(weight: Sequence[int]) -> Callable[[int], int]:
    def w(d: int) -> int:
        acc = 0
        for c in reversed(weight):
            acc = acc * d + c
        return acc
    return w


class SeriesEvaluator:
    """Evaluate ``sum_d w(d) n_{0,d} e^{dz}`` for polynomial weights ``w``.

    Weights are integer coefficient tuples ``(c0, c1, ...)`` meaning
    ``c0 + c1 d + ...``; ``F0`` derivatives use ``(0,)*j + (1,)``.  When
    ``e^{Re z} < 15/4`` the tail is bounded with ``n_{0,d} <= 3 (4/15)^d d^{-7/2}``;
    closer to the singularity the last ten term ratios are extrapolated
    geometrically with a safety factor.
    """

    def __init__(self, table, precision_bits: int = 256, x0_hint=None,
                 margin: float = 0.01, safety: int = 10, ratio_max: float = 0.99):
        if table.genus != 0:
            raise ValueError("evaluator needs the genus-0 table")
        self.table = table
        self.precision_bits = precision_bits
        self.x0_hint = x0_hint
        self.margin = margin
        self.safety = safety
        self.ratio_max = ratio_max

    def evaluate(self, z, weight: Sequence[int], abs_err) -> SeriesValue:
        with working_precision(self.precision_bits):
            complex_arg = isinstance(z, (complex, mpc))
            z = mpc(z) if complex_arg else to_mpfr(z)
            re = z.real if complex_arg else z
            abs_err = to_mpfr(abs_err)
            if not abs_err > 0:
                raise ValueError("abs_err must be positive")
            if self.x0_hint is not None and re >= to_mpfr(self.x0_hint) - self.margin:
                raise AccuracyError(
                    f"Re z = {float(re):.6g} is within {self.margin} of x0 = {float(self.x0_hint):.6g}"
                )
            wfun = _poly_weight(weight)
            wdeg = len(weight) - 1
            wbound = sum(abs(c) for c in weight)
            q = gmpy2.exp(z)
            r_bound = 4 * gmpy2.exp(re) / 15
            dmax = self.table.dmax
            total = mpc(0) if complex_arg else mpfr(0)
            qd = mpc(1) if complex_arg else mpfr(1)
            mags: list = []
            for d in range(1, dmax + 1):
                qd *= q
                term = wfun(d) * self.table.value(d) * qd
                total += term
                mags.append(abs(term))
                if r_bound < 1:
                    expo = wdeg - Fraction(7, 2)
                    tail = (3 * wbound * mpfr(d + 1) ** mpfr(float(expo))
                            * r_bound ** (d + 1) / (1 - r_bound))
                    if tail < abs_err:
                        return SeriesValue(total, d, tail)
                elif d >= 20:
                    window = mags[-11:]
                    ratios = [b / a for a, b in zip(window, window[1:]) if a != 0]
                    rho = max(ratios) if ratios else mpfr(0)
                    if rho > self.ratio_max:
                        raise AccuracyError(
                            f"term ratio {float(rho):.4f} exceeds {self.ratio_max}; z too close to x0"
                        )
                    tail = self.safety * mags[-1] * rho / (1 - rho)
                    if tail < abs_err:
                        return SeriesValue(total, d, tail)
            raise AccuracyError(
                f"tail above {float(abs_err):.3g} after all {dmax} table entries at z = {z}"
            )

    def eval_F0(self, z, deriv_order: int = 0, abs_err=1e-30):
        if deriv_order not in (0, 1, 2, 3):
            raise ValueError("deriv_order must be 0..3")
        return self.evaluate(z, (0,) * deriv_order + (1,), abs_err).value


def eval_F0(table, z, deriv_order: int = 0, abs_err=1e-30, precision_bits: int = 256,
            x0_hint=None):
    return SeriesEvaluator(table, precision_bits, x0_hint).eval_F0(z, deriv_order, abs_err)


# -- JSON records -----------------------------------------------------------------

def series_to_json(series) -> dict:
    """``{var, min_half_exponent, exponent_step, coeffs, precision_bits}``.

    ``exponent_step`` is 2 for integer-power series (coefficient i multiplies
    ``var**i``) and 1 for Puiseux series (``var**((m+i)/2)``).
    """
    if isinstance(series, TruncatedSeries):
        m, step, coeffs, order = 0, 2, series.coeffs, series.order
    else:
        m, step, coeffs, order = series.m, 1, series.coeffs, series.order
    bits = [c.precision for c in coeffs if isinstance(c, mpfr)]
    return {
        "var": series.var,
        "min_half_exponent": m,
        "exponent_step": step,
        "order": order,
        "coeffs": [to_decimal(c) for c in coeffs],
        "precision_bits": max(bits) if bits else None,
    }


def series_from_json(rec: dict):
    bits = rec.get("precision_bits")
    coeffs = [from_decimal(c, bits) for c in rec["coeffs"]]
    if rec.get("exponent_step", 1) == 2:
        return TruncatedSeries(coeffs, rec["var"])
    return PuiseuxSeries(rec["min_half_exponent"], coeffs, rec.get("order"), rec["var"])
