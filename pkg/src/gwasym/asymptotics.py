"""Truncated asymptotic expansions of n_{0,d}, n_{1,d} and their validation.

Models are compared with the tables after multiplying both by ``e^{d x0}``,
so the exponential factor never has to be formed on its own and the only
effect of an error in x0 is the visible ``d * dx0`` drift.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

import gmpy2
import numpy as np
from gmpy2 import mpfr

from ._mp import to_decimal, to_mpfr, ulp_scale, working_precision
from .errors import AccuracyError, InvariantViolation

log = logging.getLogger(__name__)

__all__ = [
    "AsymptoticModel",
    "model_eval",
    "scaled_values",
    "residuals",
    "residual_order_fit",
    "RootDiagnostics",
    "root_convergence",
    "leading_ratios",
    "validation_report",
    "plot_rows",
    "write_plot_csv",
]


@dataclass(frozen=True)
class AsymptoticModel:
    """``e^{-d x0}`` times a sum of powers of d.

    genus 0: ``sum_{k=3}^{N-1} a_k d^{-k-1/2}``;
    genus 1: ``1/(48 d) + sum_{k=0}^{N-1} a_k d^{-k-3/2}``.
    ``coeffs`` maps k to a_k and must cover the range implied by N.
    """

    genus: int
    x0: object
    coeffs: dict
    N: int

    def __post_init__(self):
        if self.genus not in (0, 1):
            raise ValueError(f"genus must be 0 or 1, got {self.genus}")
        need = range(3, self.N) if self.genus == 0 else range(0, self.N)
        missing = [k for k in need if k not in self.coeffs]
        if missing:
            raise ValueError(f"missing coefficients for k = {missing}")
        object.__setattr__(self, "coeffs", {k: self.coeffs[k] for k in need})

    @classmethod
    def from_report(cls, report, genus: int, N: int) -> "AsymptoticModel":
        coeffs = report.a0 if genus == 0 else report.a1
        return cls(genus, report.x0, dict(coeffs), N)

    def exponents(self):
        """(k, power of d) for every retained term, leading 1/48 term excluded."""
        shift = mpfr("0.5") if self.genus == 0 else mpfr("1.5")
        return [(k, -k - shift) for k in self.coeffs]

    def scaled(self, d):
        """The model multiplied by ``e^{d x0}``."""
        if d < 1:
            raise ValueError(f"d must be >= 1, got {d}")
        dd = mpfr(d)
        acc = mpfr(1) / (48 * dd) if self.genus == 1 else mpfr(0)
        for k, p in self.exponents():
            acc += to_mpfr(self.coeffs[k]) * dd ** p
        return acc


def model_eval(m: AsymptoticModel, d: int):
    """``(-d x0, mantissa)``: the model value is ``mantissa * exp(-d x0)``."""
    return -d * to_mpfr(m.x0), m.scaled(d)


def scaled_values(table, x0, ds):
    """``n_{g,d} e^{d x0}`` for d in ``ds``."""
    x0 = to_mpfr(x0)
    return [table.value(d) * gmpy2.exp(d * x0) for d in ds]


def residuals(table, m: AsymptoticModel, ds):
    """``E(d) = |n_{g,d} e^{d x0} - model e^{d x0}|`` for d in ``ds``."""
    if table.genus != m.genus:
        raise ValueError("table and model genus differ")
    return [abs(v - m.scaled(d)) for d, v in zip(ds, scaled_values(table, m.x0, ds))]


def _trimmed(n: int, trim: float) -> slice:
    cut = int(n * trim)
    return slice(cut, n - cut)


def residual_order_fit(table, m: AsymptoticModel, d_window, trim: float = 0.1,
                       noise_bits: int = 24) -> float:
    """Least-squares slope of ``log E(d)`` against ``log d`` on ``d_window``.

    The first and last ``trim`` fraction of the window are dropped.  A
    residual within ``2^(noise_bits - P)`` of the scaled value means the
    difference is rounding noise and raises AccuracyError.
    """
    ds = list(d_window)
    if len(ds) < 8:
        raise ValueError("window must contain at least 8 degrees")
    if max(ds) > table.dmax:
        raise ValueError(f"window exceeds table range {table.dmax}")
    bits = table.precision_bits or 256
    with working_precision(bits):
        vals = scaled_values(table, m.x0, ds)
        floor = ulp_scale(bits - noise_bits)
        logs = []
        for d, v in zip(ds, vals):
            e = abs(v - m.scaled(d))
            if e <= floor * abs(v):
                raise AccuracyError(f"residual at d = {d} is at the noise floor; "
                                    "raise precision or shrink the window")
            logs.append(float(gmpy2.log(e)))
    sl = _trimmed(len(ds), trim)
    x = np.log(np.asarray(ds, dtype=float))[sl]
    y = np.asarray(logs)[sl]
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def leading_ratios(table, report, ds):
    """genus 0: ``n e^{dx0} d^{7/2} / a0_3``; genus 1: ``48 d e^{dx0} n``."""
    bits = table.precision_bits or report.precision_bits
    with working_precision(bits):
        vals = scaled_values(table, report.x0, ds)
        if table.genus == 0:
            a3 = to_mpfr(report.a0[3])
            return [v * mpfr(d) ** mpfr("3.5") / a3 for d, v in zip(ds, vals)]
        return [48 * d * v for d, v in zip(ds, vals)]


@dataclass(frozen=True)
class RootDiagnostics:
    ds: list
    r0: list
    r1: list
    gap0: list
    gap1: list
    cross: list
    decreasing: dict
    final: dict
    thresholds: dict

    @property
    def degenerate(self) -> bool:
        return len(self.ds) < 2

    @property
    def ok(self) -> bool:
        if self.degenerate:
            return True
        return all(self.decreasing.values()) and all(
            self.final[k] < self.thresholds[k] for k in self.final)

    def to_json(self) -> dict:
        return {
            "window": [self.ds[0], self.ds[-1]] if self.ds else [],
            "decreasing": self.decreasing,
            "final": {k: to_decimal(v) for k, v in self.final.items()},
            "thresholds": self.thresholds,
            "ok": self.ok,
        }


def _strictly_decreasing(seq) -> bool:
    return all(b < a for a, b in zip(seq, seq[1:]))


def root_convergence(table0, table1, x0, window=None, thresholds=1e-2,
                     strict: bool = True) -> RootDiagnostics:
    """d-th roots ``n_{g,d}^{1/d}`` against ``e^{-x0}`` and against each other.

    ``window`` defaults to the last half of the common range; degrees with a
    zero genus-1 entry are skipped.  With ``strict`` a gap that fails to
    decrease or ends above its threshold raises InvariantViolation.
    """
    top = min(table0.dmax, table1.dmax)
    if window is None:
        window = range(max(1, top // 2), top + 1)
    if isinstance(thresholds, (int, float)):
        thresholds = {"gap0": thresholds, "gap1": thresholds, "cross": thresholds}
    bits = max(table0.precision_bits or 256, table1.precision_bits or 256)
    with working_precision(bits):
        target = gmpy2.exp(-to_mpfr(x0))
        ds, r0, r1 = [], [], []
        for d in window:
            v1 = table1.value(d)
            if v1 == 0:
                continue
            ds.append(d)
            r0.append(gmpy2.exp(gmpy2.log(table0.value(d)) / d))
            r1.append(gmpy2.exp(gmpy2.log(v1) / d))
        gap0 = [abs(r - target) for r in r0]
        gap1 = [abs(r - target) for r in r1]
        cross = [abs(a - b) for a, b in zip(r0, r1)]
    seqs = {"gap0": gap0, "gap1": gap1, "cross": cross}
    if len(ds) < 2:
        diag = RootDiagnostics(ds, r0, r1, gap0, gap1, cross, {}, {}, thresholds)
        return diag
    diag = RootDiagnostics(
        ds, r0, r1, gap0, gap1, cross,
        decreasing={k: _strictly_decreasing(v) for k, v in seqs.items()},
        final={k: v[-1] for k, v in seqs.items()},
        thresholds=thresholds,
    )
    if strict and not diag.ok:
        bad = [k for k, v in diag.decreasing.items() if not v]
        bad += [k for k, v in diag.final.items() if not v < thresholds[k]]
        raise InvariantViolation(f"d-th root convergence fails for {sorted(set(bad))}")
    return diag


def _window_stats(ratios):
    dev = [abs(r - 1) for r in ratios]
    return {"min": to_decimal(min(ratios)), "max": to_decimal(max(ratios)),
            "max_deviation": float(max(dev))}


def _fit_window(window, top):
    """Shrink ``(lo, hi)`` proportionally when the tables stop before ``hi``."""
    lo, hi = window
    if hi <= top:
        return lo, hi
    return max(1, lo * top // hi), top


def validation_report(g0, g1, report, fit_N0=(4, 5, 6), fit_N1=(0, 1, 2),
                      ratio_window0=(2000, 5000), ratio_window1=(500, 5000),
                      fit_window=None, tol_ratio0=0.01, tol_ratio1=0.1,
                      tol_slope=0.25) -> dict:
    """Compare both expansions with the tables; returns a JSON-ready summary.

    Every entry carries ``pass``; the top-level ``pass`` is their conjunction.
    """
    top = min(g0.dmax, g1.dmax)
    if fit_window is None:
        fit_window = range(top // 2, top + 1)
    ratio_window0 = _fit_window(ratio_window0, top)
    ratio_window1 = _fit_window(ratio_window1, top)
    out = {"x0": to_decimal(report.x0), "checks": {}}
    checks = out["checks"]
    with working_precision(report.precision_bits):
        lo, hi = ratio_window0[0], min(ratio_window0[1], top)
        r0 = leading_ratios(g0, report, range(lo, hi + 1))
        st = _window_stats(r0)
        checks["genus0_leading_ratio"] = {"window": [lo, hi], **st,
                                          "pass": st["max_deviation"] <= tol_ratio0}
        lo, hi = ratio_window1[0], min(ratio_window1[1], top)
        ds1 = list(range(lo, hi + 1))
        r1 = leading_ratios(g1, report, ds1)
        st = _window_stats(r1)
        sl = _trimmed(len(ds1), 0.1)
        gaps = np.array([float(abs(r - 1)) for r in r1])
        gap_slope = float(np.polyfit(np.log(np.asarray(ds1, float))[sl], np.log(gaps[sl]), 1)[0])
        checks["genus1_leading_ratio"] = {
            "window": [lo, hi], **st, "gap_slope": gap_slope,
            "pass": st["max_deviation"] <= tol_ratio1 and abs(gap_slope + 0.5) <= tol_slope,
        }
        for genus, Ns, table in ((0, fit_N0, g0), (1, fit_N1, g1)):
            shift = 0.5 if genus == 0 else 1.5
            for N in Ns:
                m = AsymptoticModel.from_report(report, genus, N)
                name = f"genus{genus}_fit_N{N}"
                try:
                    slope = residual_order_fit(table, m, fit_window)
                except AccuracyError as exc:
                    checks[name] = {"pass": False, "error": str(exc)}
                    continue
                expected = -(N + shift)
                checks[name] = {"slope": slope, "expected": expected,
                                "pass": abs(slope - expected) <= tol_slope}
        # one more term never increases the worst residual in the asymptotic regime
        dom_ds = [d for d in fit_window if d >= 1000]
        for genus, Ns, table in ((0, fit_N0, g0), (1, fit_N1, g1)):
            worst = []
            for N in sorted(Ns):
                m = AsymptoticModel.from_report(report, genus, N)
                worst.append(max(residuals(table, m, dom_ds)) if dom_ds else mpfr(0))
            checks[f"genus{genus}_weak_dominance"] = {
                "max_residuals": [to_decimal(w) for w in worst],
                "pass": all(b <= a for a, b in zip(worst, worst[1:])),
            }
    diag = root_convergence(g0, g1, report.x0, strict=False)
    checks["root_convergence"] = {**diag.to_json(), "pass": diag.ok}
    out["pass"] = all(c["pass"] for c in checks.values())
    return out


def plot_rows(table, m: AsymptoticModel, ds):
    """Rows ``(genus, d, exact, model, residual)`` on the ``e^{d x0}`` scale."""
    rows = []
    for d, v in zip(ds, scaled_values(table, m.x0, ds)):
        mv = m.scaled(d)
        rows.append((table.genus, d, v, mv, v - mv))
    return rows


def write_plot_csv(path_or_buf, rows, digits: int = 20):
    """CSV ``genus,d,exact,model,residual`` (values scaled by ``e^{d x0}``)."""
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["genus", "d", "exact", "model", "residual"])
        for g, d, v, mv, r in rows:
            wr.writerow([g, d] + [to_decimal(x, digits) for x in (v, mv, r)])
    finally:
        if own:
            fh.close()


def plot_csv_text(rows, digits: int = 20) -> str:
    buf = io.StringIO()
    write_plot_csv(buf, rows, digits)
    return buf.getvalue()
