"""The singularity x0 of F0 and the coefficients of the asymptotic expansions.

Everything is done on the real side ``s = x0 - z > 0``.  With
``w(x0 - s) = sum c'_k s^{k/2}`` and ``F1'(x0 - s) = sum g'_d s^{d/2}``, the
coefficients of

    n_{0,d} e^{d x0} ~ sum_{k>=3} a0_k d^{-k-1/2}
    n_{1,d} e^{d x0} ~ 1/(48 d) + sum_{k>=0} a1_k d^{-k-3/2}

are

    a0_k = 4 (-1)^k Gamma(k+1/2) c'_{2k-5} / (pi (2k-1)(2k-3))
    a1_k = (-1)^k Gamma(k+1/2) g'_{2k-1} / pi

(a term ``f s^{alpha}`` of the s-side expansion contributes
``f d^{-alpha-1} / Gamma(-alpha)`` and ``1/Gamma(1/2 - k) = (-1)^k Gamma(k+1/2)/pi``).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import mpmath
import numpy as np
from gmpy2 import mpfr

from ._mp import from_decimal, gamma_half, to_decimal, to_mpfr, ulp_scale, working_precision
from .errors import InvariantViolation
from .flow import EventResult, init_state, integrate_to_event
from .series import PuiseuxSeries, compose_puiseux, revert_even

log = logging.getLogger(__name__)

__all__ = [
    "X0_BRACKET",
    "DEFAULT_D_LIST",
    "SingularityReport",
    "x0_from_flow",
    "series_root",
    "x0_from_series",
    "cprime_from_local",
    "boundary_values",
    "genus0_coeffs",
    "genus1_coeffs",
    "cprime_growth",
    "analyze",
]

# e^{-x0} lies between 1/27 and 4/15 by the two-sided bound on n_{0,d}
X0_BRACKET = (Fraction(15, 4), Fraction(27))
DEFAULT_D_LIST = (250, 500, 1000, 2000, 4000, 5000)


def _bracket():
    return gmpy2.log(mpfr(15) / 4), gmpy2.log(mpfr(27))


def x0_from_flow(ev: EventResult) -> mpfr:
    """x0 = z(t1), checked against [ln(15/4), ln 27]."""
    with working_precision(ev.precision_bits):
        x0 = +ev.state.z
        lo, hi = _bracket()
        if not lo <= x0 <= hi:
            raise InvariantViolation(f"x0 = {x0} outside [ln(15/4), ln 27]")
        return x0


def series_root(g0, D: int, precision_bits: int | None = None, lo=None, hi=None) -> mpfr:
    """Root x(D) of sum_{d<=D} d(3d-2) n_{0,d} e^{dx} = 27.

    The left side is increasing and convex in x; bisection narrows the
    bracket before Newton takes over.  ``hi`` defaults to ln 54 (the D = 1
    root, an upper bound for every D).
    """
    if D > g0.dmax:
        raise ValueError(f"D = {D} exceeds the table range {g0.dmax}")
    bits = precision_bits or g0.precision_bits or 256
    with working_precision(bits):
        coef = [mpfr(0)] + [g0.value(d) * (d * (3 * d - 2)) for d in range(1, D + 1)]

        def f_and_df(x):
            q = gmpy2.exp(x)
            qd = mpfr(1)
            s = ds = mpfr(0)
            for d in range(1, D + 1):
                qd *= q
                t = coef[d] * qd
                s += t
                ds += d * t
            return s - 27, ds

        lo = gmpy2.log(mpfr(15) / 4) if lo is None else to_mpfr(lo)
        hi = gmpy2.log(mpfr(54)) if hi is None else to_mpfr(hi)
        if f_and_df(lo)[0] >= 0 or f_and_df(hi)[0] < 0:
            raise ValueError(f"no root of the degree-{D} truncation in [{lo}, {hi}]")
        while hi - lo > mpfr(1) / (4 * D):
            mid = (lo + hi) / 2
            if f_and_df(mid)[0] < 0:
                lo = mid
            else:
                hi = mid
        x = hi
        floor = ulp_scale(bits - 4)
        for _ in range(200):
            fx, dfx = f_and_df(x)
            if fx < 0:
                lo = x
            else:
                hi = x
            step = fx / dfx
            nx = x - step
            if not lo <= nx <= hi:
                nx = (lo + hi) / 2
            if abs(nx - x) <= floor * abs(x):
                return nx
            x = nx
        return x


def x0_from_series(g0, D_list=DEFAULT_D_LIST, precision_bits: int | None = None,
                   return_roots: bool = False):
    """Extrapolate the truncated roots x(D) to D -> infinity.

    The tail beyond D is ~D^{-1/2} while the derivative of the truncated sum
    is ~D^{1/2}, so ``x(D) - x0`` starts at order 1/D and continues in
    half-integer steps: the model ``x0 + sum_j alpha_j D^{-1-j/2}`` with
    ``len(D_list) - 1`` terms is solved exactly on the given points.
    """
    D_list = tuple(D_list)
    if len(D_list) < 3:
        raise ValueError("need at least three truncation orders")
    if any(b <= a for a, b in zip(D_list, D_list[1:])):
        raise ValueError("D_list must be strictly increasing")
    bits = precision_bits or g0.precision_bits or 256
    roots = []
    hi = None
    for D in D_list:
        r = series_root(g0, D, bits, hi=hi)
        if roots and not r < roots[-1]:
            raise InvariantViolation(
                f"x(D) not decreasing: x({D}) = {r} >= x(previous) = {roots[-1]}"
            )
        roots.append(r)
        hi = r * (1 + ulp_scale(bits - 8))
    with mpmath.workprec(bits):
        rows = []
        for D in D_list:
            rows.append([mpmath.mpf(1)] + [mpmath.mpf(D) ** (-(1 + mpmath.mpf(j) / 2))
                                           for j in range(len(D_list) - 1)])
        rhs = [mpmath.mpf(tuple(int(v) for v in r.as_mantissa_exp())) for r in roots]
        sol = mpmath.lu_solve(mpmath.matrix(rows), mpmath.matrix(rhs))
        man, exp = sol[0].man_exp
    with working_precision(bits):
        x0 = gmpy2.mul_2exp(mpfr(int(man)), int(exp))
        lo, hi = _bracket()
        if not lo <= x0 <= hi:
            raise InvariantViolation(f"series x0 = {x0} outside [ln(15/4), ln 27]")
    if return_roots:
        return x0, dict(zip(D_list, roots))
    return x0


def cprime_from_local(ev: EventResult, K: int | None = None) -> list:
    """c'_0..c'_K with w(x0 - s) = sum c'_k s^{k/2} (real branch t < t1)."""
    with working_precision(ev.precision_bits):
        tau = revert_even(ev.local_z, tol=ev.tol * 8)
        ws = compose_puiseux(ev.local_w, tau)
        if K is None:
            K = ws.order
        if K > ws.order:
            raise ValueError(f"local series only determine c' through {ws.order}")
        return [ws.coefficient(k) for k in range(K + 1)]


def boundary_values(ev: EventResult):
    """(F0(x0), F0'(x0)) from x = 9F'' - 9F' + 2F, y = 3F'' - F', w = F''."""
    with working_precision(ev.precision_bits):
        s = ev.state
        return (s.x + 18 * s.w - 9 * s.y) / 2, 3 * s.w - s.y


def genus0_coeffs(cprime, N: int, strict: bool = True) -> dict:
    """a0_k for k = 3..N; ``strict`` rejects a0_3 <= 0."""
    if len(cprime) < 2 * N - 4:
        raise ValueError(f"need c' through index {2 * N - 5}")
    pi = gmpy2.const_pi()
    out = {}
    for k in range(3, N + 1):
        out[k] = (4 * (-1) ** k * gamma_half(k) * cprime[2 * k - 5]
                  / (pi * (2 * k - 1) * (2 * k - 3)))
    if strict and not out[3] > 0:
        raise InvariantViolation(f"a0_3 = {out[3]} is not positive")
    return out


def genus1_coeffs(cprime, F0p, N: int | None = None, tol=None):
    """Puiseux coefficients g'_d of F1'(x0 - s) and a1_k for k = 0..N.

    Builds ``D(s) = 27 + 2F0'(x0-s) - 3w(x0-s)`` and
    ``Numer(s) = (F0''' - 3F0'' + 2F0')(x0-s) / 8`` from the c' and divides.
    ``D`` has no constant term at the singularity; its numerical remainder
    must be below ``tol``.  Returns ``(G, a1)`` with G a PuiseuxSeries.
    """
    K = len(cprime) - 1
    if tol is None:
        tol = ulp_scale(gmpy2.get_context().precision // 2 - 8)
    W = PuiseuxSeries(0, cprime, K)
    # F0'(x0 - s) = F0' - sum 2 c'_k/(k+2) s^{(k+2)/2}
    fp = [F0p, 0] + [-2 * cprime[k] / (k + 2) for k in range(K + 1)]
    Fp = PuiseuxSeries(0, fp, K + 2)
    # F0'''(x0 - s) = -sum (k/2) c'_k s^{(k-2)/2}
    F3 = PuiseuxSeries(-2, [0] + [-k * cprime[k] / 2 for k in range(1, K + 1)], K - 2)
    Dser = 2 * Fp - 3 * W + 27
    if Dser.m == 0:
        Dser = Dser.drop_leading(tol)
    elif Dser.m < 0:
        raise InvariantViolation("denominator series has a negative power")
    numer = (F3 - 3 * W + 2 * Fp) / 8
    G = numer / Dser
    g_m2 = G.coefficient(-2)
    if abs(g_m2 - mpfr(1) / 48) > max(tol, ulp_scale(gmpy2.get_context().precision // 2)):
        raise InvariantViolation(f"g'_-2 = {g_m2}, expected 1/48")
    kmax = (G.order + 1) // 2
    if N is not None:
        if N > kmax:
            raise ValueError(f"c' determine a1_k only through k = {kmax}")
        kmax = N
    pi = gmpy2.const_pi()
    a1 = {k: (-1) ** k * gamma_half(k) * G.coefficient(2 * k - 1) / pi for k in range(kmax + 1)}
    return G, a1


@dataclass(frozen=True)
class SingularityReport:
    x0: mpfr
    x0_alt: mpfr | None
    b: list
    c: list
    cprime: list
    F0_at_x0: mpfr
    F0prime_at_x0: mpfr
    a0: dict
    a1: dict
    gprime: list  # g'_{-2}, g'_{-1}, ...
    precision_bits: int
    N: int
    meta: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c["pass"] for c in self.checks.values())

    def to_json(self) -> dict:
        return {
            "x0": to_decimal(self.x0),
            "x0_alt": to_decimal(self.x0_alt) if self.x0_alt is not None else None,
            "b": [to_decimal(v) for v in self.b],
            "c": [to_decimal(v) for v in self.c],
            "cprime": [to_decimal(v) for v in self.cprime],
            "F0_at_x0": to_decimal(self.F0_at_x0),
            "F0prime_at_x0": to_decimal(self.F0prime_at_x0),
            "a0": {str(k): to_decimal(v) for k, v in self.a0.items()},
            "a1": {str(k): to_decimal(v) for k, v in self.a1.items()},
            "gprime": [to_decimal(v) for v in self.gprime],
            "precision_bits": self.precision_bits,
            "N": self.N,
            "meta": self.meta,
            "checks": self.checks,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "SingularityReport":
        bits = rec["precision_bits"]

        def num(s):
            return None if s is None else from_decimal(s, bits)

        return cls(
            x0=num(rec["x0"]),
            x0_alt=num(rec["x0_alt"]),
            b=[num(v) for v in rec["b"]],
            c=[num(v) for v in rec["c"]],
            cprime=[num(v) for v in rec["cprime"]],
            F0_at_x0=num(rec["F0_at_x0"]),
            F0prime_at_x0=num(rec["F0prime_at_x0"]),
            a0={int(k): num(v) for k, v in rec["a0"].items()},
            a1={int(k): num(v) for k, v in rec["a1"].items()},
            gprime=[num(v) for v in rec["gprime"]],
            precision_bits=bits,
            N=rec["N"],
            meta=rec.get("meta", {}),
            checks=rec.get("checks", {}),
        )


def _check(passed: bool, **detail) -> dict:
    return {"pass": bool(passed), **{k: (to_decimal(v) if isinstance(v, mpfr) else v)
                                     for k, v in detail.items()}}


def cprime_growth(cp) -> dict | None:
    """Empirical geometric growth of ``|c'_k|`` from a log-linear fit over k >= 2.

    ``ratio`` is the fitted ``|c'_{k+1}| / |c'_k|``; since the terms are powers
    of ``s^{1/2}``, ``radius = ratio^-2`` estimates where the expansion in s
    stops converging.
    """
    pts = [(k, float(gmpy2.log(abs(c)))) for k, c in enumerate(cp) if k >= 2 and c != 0]
    if len(pts) < 3:
        return None
    ks, logs = zip(*pts)
    slope = float(np.polyfit(ks, logs, 1)[0])
    ratio = math.exp(slope)
    return {"ratio": ratio, "radius": ratio ** -2, "terms": len(pts)}


def analyze(g0, precision_bits: int = 256, z_init=-30, taylor_order: int = 30,
            N: int = 8, local_order: int | None = None, D_list=DEFAULT_D_LIST,
            cross_tol: float = 1e-8, event: EventResult | None = None) -> SingularityReport:
    """Flow to the event, derive all local data and both coefficient families.

    Fatal inconsistencies (x0 outside its bracket, a0_3 <= 0, g'_-2 != 1/48)
    raise InvariantViolation; softer checks are recorded in ``checks``.
    """
    if local_order is None:
        local_order = 2 * N + 8
    if event is None:
        s0 = init_state(z_init, g0, precision_bits=precision_bits)
        event = integrate_to_event(s0, order=taylor_order, local_order=local_order,
                                   precision_bits=precision_bits, record_steps=False)
    x0 = x0_from_flow(event)
    x0_alt = None
    if D_list and g0.dmax >= max(D_list):
        x0_alt = x0_from_series(g0, D_list, precision_bits)
    with working_precision(precision_bits):
        cp = cprime_from_local(event)
        F0, F0p = boundary_values(event)
        b2 = event.b[2]
        c1 = event.c[1]
        a0 = genus0_coeffs(cp, min(N + 2, (len(cp) + 4) // 2))
        G, a1 = genus1_coeffs(cp, F0p)
        gprime = [G.coefficient(k) for k in range(-2, G.order + 1)]
        ev_tol = ulp_scale(precision_bits // 2 - 8)
        checks = {
            "x0_bracket": _check(True, x0=x0),
            "event_boundary": _check(abs(27 + 2 * F0p - 3 * cp[0]) <= ev_tol,
                                     residual=abs(27 + 2 * F0p - 3 * cp[0])),
            "cprime0_equals_c0": _check(cp[0] == event.c[0]),
            "cprime1_formula": _check(
                abs(cp[1] + c1 / gmpy2.sqrt(-b2)) <= ulp_scale(precision_bits - 16) * abs(cp[1]),
                cprime1=cp[1]),
            "cprime1_negative": _check(cp[1] < 0, cprime1=cp[1]),
            "a0_3_positive": _check(a0[3] > 0, a0_3=a0[3]),
            "gprime_m2_is_1_48": _check(abs(gprime[0] - mpfr(1) / 48) <= mpfr("1e-10"),
                                        gprime_m2=gprime[0]),
        }
        if x0_alt is not None:
            checks["x0_cross_method"] = _check(abs(x0 - x0_alt) <= cross_tol,
                                               difference=abs(x0 - x0_alt))
    meta = {
        "z_init": to_decimal(to_mpfr(z_init)) if not isinstance(z_init, str) else z_init,
        "taylor_order": taylor_order,
        "local_order": local_order,
        "t1": to_decimal(event.t1),
        "event_tol": to_decimal(event.tol),
        "D_list": list(D_list) if x0_alt is not None else None,
        "cprime_growth": cprime_growth(cp),
    }
    for name, chk in checks.items():
        log.info("check %-22s %s", name, "pass" if chk["pass"] else "FAIL")
    return SingularityReport(
        x0=x0, x0_alt=x0_alt, b=list(event.b[2:]), c=list(event.c), cprime=cp,
        F0_at_x0=F0, F0prime_at_x0=F0p, a0=a0, a1=a1, gprime=gprime,
        precision_bits=precision_bits, N=N, meta=meta, checks=checks,
    )
