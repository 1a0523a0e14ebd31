"""Working-precision helpers around gmpy2.

Every P-bit computation in the package runs inside :func:`working_precision`,
which also widens the exponent range so that quantities like ``n_{0,5000}``
(about ``2**-14300``) never underflow.
"""
from __future__ import annotations

import math
from contextlib import contextmanager
from fractions import Fraction

import gmpy2
from gmpy2 import mpc, mpfr

DEFAULT_PRECISION = 256


@contextmanager
def working_precision(bits: int):
    """Run the enclosed block with ``bits``-bit round-to-nearest arithmetic."""
    if bits < 2:
        raise ValueError(f"precision must be at least 2 bits, got {bits}")
    ctx = gmpy2.context(
        gmpy2.get_context(),
        precision=bits,
        real_prec=bits,
        imag_prec=bits,
        emin=gmpy2.get_emin_min(),
        emax=gmpy2.get_emax_max(),
    )
    with ctx:
        yield ctx


def current_precision() -> int:
    return gmpy2.get_context().precision


def to_mpfr(v) -> mpfr:
    """Convert int, Fraction, str or float to an mpfr at the current precision."""
    if isinstance(v, Fraction):
        return mpfr(v.numerator) / v.denominator
    if isinstance(v, str) and "/" in v:
        return to_mpfr(Fraction(v))
    return mpfr(v)


def is_exact(v) -> bool:
    return isinstance(v, (int, Fraction))


def ulp_scale(bits: int | None = None) -> mpfr:
    """``2**-bits`` (defaults to the current precision)."""
    if bits is None:
        bits = current_precision()
    return gmpy2.mul_2exp(mpfr(1), -bits)


def sqrt_exact(q: Fraction) -> Fraction:
    """Exact square root of a nonnegative rational; ValueError if irrational."""
    q = Fraction(q)
    if q < 0:
        raise ValueError(f"negative radicand {q}")
    rn, rd = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if rn * rn != q.numerator or rd * rd != q.denominator:
        raise ValueError(f"{q} is not the square of a rational")
    return Fraction(rn, rd)


def sqrt_any(v):
    if is_exact(v):
        return sqrt_exact(v)
    return gmpy2.sqrt(v)


def gamma_half(k: int) -> mpfr:
    """Gamma(k + 1/2) = sqrt(pi) * (2k-1)!! / 2**k for integer k >= 0."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    dfact = 1
    for j in range(1, 2 * k, 2):
        dfact *= j
    return gmpy2.sqrt(gmpy2.const_pi()) * dfact / mpfr(2) ** k


# -- serialization ---------------------------------------------------------

def decimal_digits(bits: int) -> int:
    """Decimal digits needed for a round trip of a ``bits``-bit mantissa."""
    return int(math.ceil(bits * math.log10(2))) + 2


def to_decimal(v, digits: int | None = None) -> str:
    """Decimal string, full precision unless ``digits`` is given.

    Exact rationals are written ``"num/den"``.
    """
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}" if v.denominator != 1 else str(v.numerator)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, mpc):
        raise TypeError("complex values are not serialized")
    if not gmpy2.is_finite(v):
        return str(v)
    if v == 0:
        return "0"
    digits, exp10, _ = v.digits(10, digits or decimal_digits(v.precision))
    sign = ""
    if digits.startswith("-"):
        sign, digits = "-", digits[1:]
    return f"{sign}{digits[0]}.{digits[1:]}e{exp10 - 1}"


def from_decimal(s: str, bits: int | None = None):
    """Inverse of :func:`to_decimal`; exact strings come back as Fraction."""
    if "/" in s or ("." not in s and "e" not in s.lower() and "n" not in s.lower()):
        return Fraction(s)
    if bits is None:
        return mpfr(s)
    return mpfr(s, bits)


def to_hex(v: mpfr) -> str:
    """Exact binary encoding ``"<hex mantissa>p<binary exponent>"``."""
    man, exp = v.as_mantissa_exp()
    sign = "-" if man < 0 else ""
    return f"{sign}0x{abs(int(man)):x}p{int(exp)}"


def from_hex(s: str, bits: int) -> mpfr:
    body, exp = s.split("p")
    man = int(body, 16)
    with working_precision(max(bits, abs(man).bit_length(), 2)):
        return gmpy2.mul_2exp(mpfr(man), int(exp))
