"""Taylor-method integration of the autonomous polynomial system

    x' = 27x + 4y^2
    y' = 9x + 18y + 2yw
    w' = 3x + 6y + 9w + w^2
    z' = 27 - 2y + 3w

where ``x = 9F0'' - 9F0' + 2F0``, ``y = 3F0'' - F0'``, ``w = F0''`` along the
real axis and ``dt/dz = 1/(27 + 2F0' - 3F0'')``.  The trajectory starts deep
in the convergent region and is followed to the event ``2y - 3w = 27``
(where ``z' = 0``); the z-coordinate there is the singularity x0.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr

from ._mp import to_decimal, to_mpfr, ulp_scale, working_precision
from .errors import AccuracyError, EventNotReached, InvariantViolation
from .series import SeriesEvaluator, TruncatedSeries, series_to_json

log = logging.getLogger(__name__)

__all__ = [
    "FlowState",
    "StepRecord",
    "EventResult",
    "vector_field",
    "taylor_coefficients",
    "init_state",
    "integrate_to_event",
    "local_taylor",
    "X_WEIGHT",
    "Y_WEIGHT",
    "W_WEIGHT",
]

# series weights in d for x, y, w (coefficients of 1, d, d^2)
X_WEIGHT = (2, -9, 9)   # (3d-1)(3d-2)
Y_WEIGHT = (0, -1, 3)   # d(3d-1)
W_WEIGHT = (0, 0, 1)    # d^2


@dataclass(frozen=True)
class FlowState:
    t: mpfr
    x: mpfr
    y: mpfr
    w: mpfr
    z: mpfr

    @property
    def gap(self):
        """``2y - 3w``; the event is ``gap == 27``."""
        return 2 * self.y - 3 * self.w

    def as_tuple(self):
        return (self.x, self.y, self.w, self.z)


@dataclass(frozen=True)
class StepRecord:
    t: mpfr
    state: FlowState
    h: mpfr
    error_estimate: mpfr
    identity_residual: mpfr


@dataclass(frozen=True)
class EventResult:
    t1: mpfr
    state: FlowState
    local_x: TruncatedSeries
    local_y: TruncatedSeries
    local_w: TruncatedSeries
    local_z: TruncatedSeries
    precision_bits: int
    z_init: mpfr
    tol: mpfr
    steps: tuple = field(default=(), repr=False, compare=False)

    @property
    def b(self):
        return self.local_z.coeffs

    @property
    def c(self):
        return self.local_w.coeffs

    def to_json(self) -> dict:
        s = self.state
        return {
            "t1": to_decimal(self.t1),
            "state": {k: to_decimal(getattr(s, k)) for k in ("x", "y", "w", "z")},
            "b": [to_decimal(v) for v in self.b],
            "c": [to_decimal(v) for v in self.c],
            "local": {name: series_to_json(getattr(self, f"local_{name}"))
                      for name in ("x", "y", "w", "z")},
            "precision_bits": self.precision_bits,
            "z_init": to_decimal(self.z_init),
            "tolerances": {"event": to_decimal(self.tol)},
            "steps": len(self.steps),
        }


def vector_field(s: FlowState):
    """Right-hand side ``(x', y', w', z')`` at a state."""
    x, y, w = s.x, s.y, s.w
    return (
        27 * x + 4 * y * y,
        9 * x + 18 * y + 2 * y * w,
        3 * x + 6 * y + 9 * w + w * w,
        27 - 2 * y + 3 * w,
    )


def taylor_coefficients(state, order: int):
    """Taylor coefficients of (x, y, w, z) at ``state`` through ``order``.

    ``(k+1) X_{k+1}`` is the k-th coefficient of the polynomial right-hand
    side, the quadratic terms being Cauchy products of lower coefficients.
    """
    x, y, w, z = ([v] for v in state.as_tuple())
    for k in range(order):
        yy = yw = ww = 0
        for i in range(k + 1):
            yy += y[i] * y[k - i]
            yw += y[i] * w[k - i]
            ww += w[i] * w[k - i]
        kp = k + 1
        x.append((27 * x[k] + 4 * yy) / kp)
        y.append((9 * x[k] + 18 * y[k] + 2 * yw) / kp)
        w.append((3 * x[k] + 6 * y[k] + 9 * w[k] + ww) / kp)
        z.append(((27 if k == 0 else 0) - 2 * y[k] + 3 * w[k]) / kp)
    return x, y, w, z


def _horner(c, h):
    acc = 0
    for a in reversed(c):
        acc = acc * h + a
    return acc


def init_state(z_init, g0, eps=None, precision_bits: int = 256) -> FlowState:
    """Initial (x, y, w, z) at ``z = z_init`` from the genus-0 series; ``t = 0``.

    ``eps`` is the absolute error budget for x, y, w; the default
    ``e^{z_init} 2^-P`` keeps initialization below working precision.
    """
    with working_precision(precision_bits):
        z0 = to_mpfr(z_init)
        if z0 > -5:
            raise ValueError(f"z_init must be <= -5 (deep in the convergent region), got {z0}")
        if eps is None:
            eps = gmpy2.exp(z0) * ulp_scale(precision_bits)
        ev = SeriesEvaluator(g0, precision_bits)
        x = ev.evaluate(z0, X_WEIGHT, eps).value
        y = ev.evaluate(z0, Y_WEIGHT, eps).value
        w = ev.evaluate(z0, W_WEIGHT, eps).value
        return FlowState(mpfr(0), x, y, w, z0)


def _step_size(coeffs, order: int, eps, h_max):
    """Largest h with |X_k| h^k <= eps |X_0| for the last two orders, per component."""
    h = h_max
    for i, c in enumerate(coeffs):
        scale = abs(c[0]) if i < 3 else max(abs(c[0]), mpfr(1))
        if scale == 0:
            continue
        for k in (order - 1, order):
            if c[k] != 0:
                hk = (eps * scale / abs(c[k])) ** (mpfr(1) / k)
                h = min(h, hk)
    return h * mpfr("0.9")


def _locate_event(cy, cw, h, tol, iters: int = 200):
    """Root of 2y(tau) - 3w(tau) - 27 in (0, h]: bisection, then Newton."""
    g = [2 * a - 3 * b for a, b in zip(cy, cw)]
    g[0] -= 27
    dg = [k * g[k] for k in range(1, len(g))]
    lo, hi = mpfr(0), h
    for _ in range(60):
        mid = (lo + hi) / 2
        if _horner(g, mid) < 0:
            lo = mid
        else:
            hi = mid
    tau = (lo + hi) / 2
    floor = ulp_scale() * 4
    for _ in range(iters):
        step = _horner(g, tau) / _horner(dg, tau)
        tau -= step
        if abs(step) <= floor * max(abs(tau), mpfr(1)):
            break
    if abs(_horner(g, tau)) > tol:
        raise AccuracyError(f"event refinement stalled at residual {_horner(g, tau)}")
    return tau


def integrate_to_event(s0: FlowState, tol=None, order: int = 30, local_order: int = 24,
                       precision_bits: int = 256, t_horizon=20, h_max=None,
                       record_steps: bool = True) -> EventResult:
    """Integrate from ``s0`` to the first time with ``2y - 3w = 27``.

    Step control keeps the two highest retained Taylor terms of every
    component below ``2^-P`` relative to that component, so the truncation
    error sits at the rounding level.  Within a step the Taylor polynomial
    is the dense output used to bracket and refine the event.
    """
    with working_precision(precision_bits):
        tol = ulp_scale(precision_bits // 2) if tol is None else to_mpfr(tol)
        eps = ulp_scale(precision_bits)
        h_max = mpfr(1) / 27 if h_max is None else to_mpfr(h_max)
        horizon = to_mpfr(t_horizon)
        state = FlowState(*(to_mpfr(v) for v in (s0.t, s0.x, s0.y, s0.w, s0.z)))
        if not state.gap < 27:
            raise ValueError("initial state must satisfy 2y - 3w < 27")
        z_init = state.z
        records = []
        while True:
            coeffs = taylor_coefficients(state, order)
            cx, cy, cw, cz = coeffs
            h = _step_size(coeffs, order, eps, h_max)
            if h < ulp_scale(precision_bits - 10) * max(abs(state.t), mpfr(1)):
                raise AccuracyError(f"step size underflow at t = {state.t}")
            # local error: the two highest terms plus a rounding allowance
            trunc = max(abs(c[order - 1]) * h ** (order - 1) + abs(c[order]) * h ** order
                        for c in coeffs)
            size = max(abs(v) for v in state.as_tuple()[:3])
            err = trunc + eps * 64 * (27 + size) * (1 + size)
            identity = abs((2 * cy[1] - 3 * cw[1])
                           - (9 * state.x + (9 + state.w) * state.gap + 2 * state.w * state.y))
            if record_steps:
                records.append(StepRecord(state.t, state, h, err, identity))
            g_end = 2 * _horner(cy, h) - 3 * _horner(cw, h) - 27
            if g_end >= 0:
                tau = _locate_event(cy, cw, h, tol)
                state = FlowState(state.t + tau, *(_horner(c, tau) for c in coeffs))
                break
            state = FlowState(state.t + h, *(_horner(c, h) for c in coeffs))
            if state.t > horizon:
                raise EventNotReached(
                    f"2y - 3w = {float(state.gap):.4g} < 27 at t = {float(state.t):.4g} (horizon)"
                )
        log.debug("event at t1=%s after %d steps", state.t, len(records))
        lx, ly, lw, lz = local_taylor(state, local_order, tol, precision_bits)
        return EventResult(state.t, state, lx, ly, lw, lz, precision_bits, z_init, tol,
                           tuple(records))


def local_taylor(state: FlowState, K: int, tol=None, precision_bits: int | None = None):
    """Taylor series of (x, y, w, z) in ``tau = t - t1`` through order K.

    Checks ``|b1| <= tol``, ``b2 < 0`` and ``c1 > 0`` for ``z = x0 + sum b_k tau^k``
    and ``w = sum c_k tau^k``; a vacuum state (x = y = w = 0) is returned as
    constant series without checks.
    """
    bits = precision_bits or max(v.precision for v in state.as_tuple())
    with working_precision(bits):
        cx, cy, cw, cz = taylor_coefficients(state, K)
        series = tuple(TruncatedSeries(c, "tau") for c in (cx, cy, cw, cz))
        if state.x == 0 and state.y == 0 and state.w == 0:
            return series
        tol = ulp_scale(bits // 2) if tol is None else to_mpfr(tol)
        if abs(cz[1]) > tol * 8:
            raise InvariantViolation(f"z'(t1) = {cz[1]} is not zero to tolerance {tol}")
        if K >= 2 and not cz[2] < 0:
            raise InvariantViolation(f"b2 = {cz[2]} must be negative")
        if K >= 1 and not cw[1] > 0:
            raise InvariantViolation(f"c1 = {cw[1]} must be positive")
        return series
