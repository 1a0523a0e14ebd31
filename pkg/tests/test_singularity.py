import json
from fractions import Fraction

import gmpy2
import pytest
from gmpy2 import mpfr
from hypothesis import given
from hypothesis import strategies as st

from gwasym import working_precision
from gwasym._mp import gamma_half
from gwasym.errors import InvariantViolation
from gwasym.flow import local_taylor
from gwasym.invariants import InvariantTable, genus0_table
from gwasym.series import SeriesEvaluator, composition_residual, revert_even
from gwasym.singularity import (
    SingularityReport,
    boundary_values,
    cprime_from_local,
    genus0_coeffs,
    genus1_coeffs,
    series_root,
    x0_from_flow,
    x0_from_series,
)

LN_15_4 = 1.3217558
LN_27 = 3.2958370


def test_bracket_constants():
    import math

    # seven-decimal bracket, rounded outward
    assert LN_15_4 <= math.log(15 / 4) < LN_15_4 + 1e-7
    assert LN_27 - 1e-6 < math.log(27) <= LN_27


def test_x0_in_bracket(event):
    x0 = x0_from_flow(event)
    assert LN_15_4 <= x0 <= LN_27


def test_one_term_root():
    g0 = InvariantTable(0, 1, {1: Fraction(1, 2)})
    with working_precision(256):
        r = series_root(g0, 1, 256, hi=gmpy2.log(mpfr(60)))
        assert abs(r - gmpy2.log(mpfr(54))) <= mpfr(2) ** -240


def test_roots_decrease(g0, report):
    x0, roots = x0_from_series(g0, (250, 500, 1000, 2000), return_roots=True)
    vals = list(roots.values())
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert all(v > report.x0 for v in vals)


def test_series_matches_flow(g0, report):
    x0 = x0_from_series(g0)
    assert abs(x0 - report.x0) <= 1e-8


def test_series_three_points(g0, report):
    # three points only carry the D^-1 and D^-3/2 terms
    x0 = x0_from_series(g0, (500, 1000, 2000))
    assert abs(x0 - report.x0) <= 1e-6


def test_series_rejects_corrupt(g0):
    with working_precision(256):
        bad = g0.replace(700, g0.scaled[700] * mpfr(10) ** 200)
    with pytest.raises((InvariantViolation, ValueError)):
        x0_from_series(bad, (250, 500, 1000))


def test_series_list_checks(g0):
    with pytest.raises(ValueError):
        x0_from_series(g0, (500, 1000))
    with pytest.raises(ValueError):
        x0_from_series(g0, (1000, 500, 2000))


def test_cprime_leading(event):
    with working_precision(256):
        cp = cprime_from_local(event, 6)
        assert cp[0] == event.c[0]
        expected = -event.c[1] / gmpy2.sqrt(-event.b[2])
        assert abs(cp[1] - expected) <= abs(expected) * mpfr(2) ** -240
        assert cp[1] < 0


def test_cprime_recomposition(event):
    with working_precision(256):
        tau = revert_even(event.local_z, tol=8 * event.tol)
        res = composition_residual(event.local_z, tau)
        scale = max(abs(c) for c in event.local_z.coeffs)
        assert all(abs(c) <= scale * mpfr(2) ** -200 for c in res.coeffs)


def test_cprime_against_series(g0, event, report):
    """Puiseux side at s = 0.5 against the invariant series at z = x0 - 0.5."""
    ev = SeriesEvaluator(g0, 256, x0_hint=report.x0)
    with working_precision(256):
        s = mpfr("0.5")
        puiseux = sum(c * s ** (mpfr(k) / 2) for k, c in enumerate(report.cprime))
        direct = ev.eval_F0(report.x0 - s, 2, mpfr("1e-30"))
        assert abs(puiseux - direct) <= mpfr("1e-9")


def test_cprime_order_limit(event):
    with pytest.raises(ValueError):
        cprime_from_local(event, 500)


def test_boundary_identity(event):
    with working_precision(256):
        F0, F0p = boundary_values(event)
        assert abs(27 + 2 * F0p - 3 * event.state.w) <= mpfr(2) ** -(128 - 8)


def test_boundary_at_checkpoint(event, g0):
    """The same linear solve at an early state reproduces F0 and F0'."""
    rec = min(event.steps, key=lambda r: abs(r.state.z + 5))
    ev = SeriesEvaluator(g0, 256)
    with working_precision(256):
        s = rec.state
        F0 = (s.x + 18 * s.w - 9 * s.y) / 2
        F0p = 3 * s.w - s.y
        ref0 = ev.eval_F0(s.z, 0, mpfr("1e-80"))
        ref1 = ev.eval_F0(s.z, 1, mpfr("1e-80"))
        assert abs(F0 - ref0) <= 1000 * event.tol * ref0
        assert abs(F0p - ref1) <= 1000 * event.tol * ref1


def test_boundary_values_are_limits(report, g0):
    ev = SeriesEvaluator(g0, 256, x0_hint=report.x0)
    with working_precision(256):
        z = report.x0 - mpfr("0.3")
        assert ev.eval_F0(z, 0, 1e-20) < report.F0_at_x0
        assert ev.eval_F0(z, 1, 1e-20) < report.F0prime_at_x0


class TestGenus0Coeffs:
    def test_k3(self):
        with working_precision(256):
            cp = [mpfr(5), mpfr(-2), mpfr(1), mpfr(3), mpfr(7)]
            a = genus0_coeffs(cp, 4)
            expected = -4 * cp[1] * gamma_half(3) / (15 * gmpy2.const_pi())
            assert abs(a[3] - expected) <= mpfr(2) ** -250 * expected

    def test_k4_from_transform(self):
        """a0_4 from a_7 = 4 i^{-7} c'_3/(7*5) and a0_4 = a_7 Gamma(9/2)/(pi i)."""
        with working_precision(256):
            cp = [mpfr(0), mpfr(-1), mpfr(0), mpfr(3)]
            a = genus0_coeffs(cp, 4)
            # i^{-7} = i, so a_7 = 4 i c'_3 / 35 and a0_4 = 4 c'_3 Gamma(9/2) / (35 pi)
            expected = 4 * cp[3] * gamma_half(4) / (35 * gmpy2.const_pi())
            assert abs(a[4] - expected) <= mpfr(2) ** -250 * abs(expected)

    def test_gamma_half(self):
        with working_precision(256):
            sp = gmpy2.sqrt(gmpy2.const_pi())
            assert abs(gamma_half(0) - sp) <= mpfr(2) ** -250
            assert abs(gamma_half(3) - sp * 15 / 8) <= mpfr(2) ** -250

    def test_all_zero(self):
        a = genus0_coeffs([0] * 12, 8, strict=False)
        assert all(v == 0 for v in a.values())
        with pytest.raises(InvariantViolation):
            genus0_coeffs([0] * 12, 8)

    def test_needs_enough_terms(self):
        with pytest.raises(ValueError):
            genus0_coeffs([1, -1], 5)


class TestGenus1Coeffs:
    def test_single_c1(self):
        c = Fraction(-3, 2)
        cp = [Fraction(0), c] + [Fraction(0)] * 6
        G, a1 = genus1_coeffs(cp, Fraction(-27, 2), tol=Fraction(0))
        assert G.coefficient(-2) == Fraction(1, 48)
        assert all(isinstance(v, Fraction) for v in G.coeffs)

    @given(st.lists(st.fractions(-5, 5, max_denominator=7), min_size=9, max_size=9),
           st.fractions(-5, 5, max_denominator=7).filter(lambda v: v != 0))
    def test_one_over_48_any_coefficients(self, rest, c1):
        cp = [rest[0], c1] + rest[1:]
        F0p = (3 * cp[0] - 27) / 2
        G, _ = genus1_coeffs(cp, F0p, tol=Fraction(0))
        assert G.m == -2 and G.leading == Fraction(1, 48)

    def test_a1_0_is_gprime_over_root_pi(self, report):
        with working_precision(256):
            expected = report.gprime[1] / gmpy2.sqrt(gmpy2.const_pi())
            assert abs(report.a1[0] - expected) <= mpfr(2) ** -240

    def test_nonvanishing_constant_rejected(self):
        cp = [Fraction(1), Fraction(-1)] + [Fraction(0)] * 6
        with working_precision(128):
            with pytest.raises(Exception):
                genus1_coeffs([mpfr(v) for v in cp], mpfr(100))


def test_report_invariants(report):
    assert report.ok, report.checks
    assert report.cprime[0] == report.c[0]
    assert report.cprime[1] < 0 < report.a0[3]
    assert abs(report.gprime[0] - mpfr(1) / 48) <= 1e-10


def test_order_stability(event, report, g0):
    """a0_3, a0_4, a1_0 agree between local orders K and K + 4."""
    from gwasym.flow import EventResult

    with working_precision(256):
        series = local_taylor(event.state, 28, event.tol, 256)
        longer = EventResult(event.t1, event.state, *series, 256, event.z_init, event.tol)
        cp = cprime_from_local(longer)
        F0, F0p = boundary_values(longer)
        a0 = genus0_coeffs(cp, 4)
        _, a1 = genus1_coeffs(cp, F0p, N=0)
        for u, v in ((a0[3], report.a0[3]), (a0[4], report.a0[4]), (a1[0], report.a1[0])):
            assert abs(u - v) <= mpfr("1e-10")


def test_report_json_roundtrip(report):
    rec = json.loads(json.dumps(report.to_json()))
    back = SingularityReport.from_json(rec)
    assert back.x0 == report.x0
    assert back.a0 == report.a0 and back.a1 == report.a1
    assert back.checks == report.checks


def test_exact_table_fixture_root():
    # adding positive terms moves the root left
    g0 = genus0_table(3)
    with working_precision(128):
        r1 = series_root(g0, 1, 128, hi=gmpy2.log(mpfr(60)))
        r2 = series_root(g0, 2, 128, hi=gmpy2.log(mpfr(60)))
        r3 = series_root(g0, 3, 128, hi=gmpy2.log(mpfr(60)))
        assert r3 < r2 < r1


def test_growth_of_geometric_coefficients():
    from gwasym.singularity import cprime_growth

    with working_precision(128):
        cp = [mpfr(1), mpfr(-1)] + [mpfr(3) * mpfr("0.5") ** k * (-1) ** k for k in range(2, 20)]
        g = cprime_growth(cp)
    assert abs(g["ratio"] - 0.5) <= 1e-12 and abs(g["radius"] - 4) <= 1e-10
    assert cprime_growth([1, 1, 1]) is None


def test_report_carries_growth(report):
    g = report.meta["cprime_growth"]
    assert 0 < g["ratio"] and g["terms"] >= 10
