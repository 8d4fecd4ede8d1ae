"""Optimal dividend policies built on scale functions.

Four problems are covered: the classical barrier problem, the bail-out
variant with capital injection at unit cost ``phi``, terminal payoff
``S + K y`` at ruin, and impulse control with a fixed cost ``delta`` per
payment.  Each solver takes a :class:`~levyscale.scale.ScaleBundle`;
:func:`classic_bounds` and :func:`bailout_bounds` take the truncation bounds
of a meromorphic model instead.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import Degenerate, EmptyInterval, NoSignChange, RunStrategySignal, ValidationError
from .expsum import ExpSum
from .models import CgmyTarget, SpectralModel, levy_density
from .scale import ScaleBundle, TruncationBounds, scale_functions

_EXP_LIMIT = 700.0


class PolicyKind(enum.Enum):
    CLASSIC = "ClassicBarrier"
    BAILOUT = "BailOut"
    TERMINAL = "TerminalValue"
    IMPULSE = "Impulse"


@dataclass(frozen=True)
class ValueFunction:
    """``body`` on ``[0, level]``, slope-one line above, ``a + b x`` below zero."""

    body: ExpSum
    level: float
    below: tuple = (0.0, 0.0)

    def __call__(self, x):
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        inner = self.body(np.clip(xa, 0.0, self.level))
        top = self.body(self.level) + (xa - self.level)
        out = np.where(xa > self.level, top, inner)
        out = np.where(xa < 0, self.below[0] + self.below[1] * xa, out)
        return float(out[0]) if np.ndim(x) == 0 else out

    def at_level(self) -> float:
        return float(self.body(self.level))


@dataclass(frozen=True)
class ValueBounds:
    """Pointwise sandwich ``lower <= u_{a*} <= upper`` from truncation bounds."""

    lower: Callable
    upper: Callable

    def mid(self, x):
        return 0.5 * (np.asarray(self.lower(x)) + np.asarray(self.upper(x)))


@dataclass(frozen=True)
class PolicyResult:
    kind: PolicyKind
    levels: tuple
    value_fn: object = None
    level_interval: Optional[tuple] = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "levels": [float(v) for v in self.levels],
             "level_interval": None if self.level_interval is None else [float(v) for v in self.level_interval],
             "diagnostics": _jsonable(self.diagnostics)}
        if isinstance(self.value_fn, ValueFunction):
            d["value_at_level"] = self.value_fn.at_level()
            d["value_body"] = self.value_fn.body.to_dict()
        return d


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        # strict JSON has no infinities: an unbounded side is written as null
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _horizon(zeta: float) -> float:
    return _EXP_LIMIT / max(zeta, 1e-12) * 0.9


def _upper_bracket(f: Callable[[float], float], start: float, limit: float) -> float:
    """Smallest ``start * 2**k`` with ``f > 0``."""
    x = max(start, 1e-3)
    while f(x) <= 0:
        x *= 2.0
        if x > limit:
            raise NoSignChange("no sign change before the search horizon")
    return x


def _first_crossing(g: Callable, step: float, horizon: float, tol: float, start: float = 0.0):
    """First ``a > start`` with ``g(a) <= 0``, scanned on a grid then refined.

    The grid is walked in windows of doubling length so that an early
    crossing never pays for a scan out to the horizon.
    """
    lo, width = start, 1000 * step
    prev = None
    while lo < horizon:
        hi = min(lo + width, horizon)
        grid = np.arange(lo, hi + 0.5 * step, step)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = np.asarray(g(grid), dtype=float)
        if prev is not None:
            grid, vals = np.concatenate([[prev[0]], grid]), np.concatenate([[prev[1]], vals])
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            grid, vals = grid[:bad[0]], vals[:bad[0]]
        hits = np.flatnonzero(vals[1:] <= 0)
        if hits.size:
            i = hits[0] + 1
            if vals[i] == 0.0 or vals[i - 1] <= 0:
                return float(grid[i])
            return optimize.brentq(lambda a: float(g(a)), grid[i - 1], grid[i], xtol=tol,
                                   rtol=4 * np.finfo(float).eps)
        if bad.size or grid.size == 0:
            break
        prev = (grid[-1], vals[-1])
        lo, width = grid[-1] + step, 2 * width
    raise NoSignChange("defining function stays positive up to the horizon")


def _convex_argmin(f: Callable, x_max: float, tol: float, n: int = 2001) -> float:
    grid = np.linspace(0.0, x_max, n)
    vals = np.asarray(f(grid), dtype=float)
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
    if i == 0 and vals[1] >= vals[0]:
        res = optimize.minimize_scalar(lambda x: float(f(x)), bounds=(lo, hi), method="bounded",
                                       options={"xatol": tol})
        return 0.0 if f(0.0) <= res.fun else float(res.x)
    res = optimize.minimize_scalar(lambda x: float(f(x)), bounds=(lo, hi), method="bounded",
                                   options={"xatol": tol})
    return float(res.x)


def _monotone_after(Wp: Callable, level: float, span: float, n: int = 400) -> bool:
    grid = np.linspace(level, level + span, n)
    d = np.diff(np.asarray(Wp(grid)))
    scale = np.max(np.abs(Wp(grid)))
    return bool(np.all(d >= -1e-10 * scale))


# ---------------------------------------------------------------------------
# classical barrier
# ---------------------------------------------------------------------------


def classic_barrier(bundle: ScaleBundle, tol: float = 1e-10) -> PolicyResult:
    """Barrier a* where W'' changes sign (0 when W'' >= 0 at the origin)."""
    Wpp0 = bundle.Wpp(0.0)
    if Wpp0 >= 0:
        a = 0.0
    else:
        hi = _upper_bracket(bundle.Wpp, 1.0, _horizon(bundle.zeta))
        a = optimize.brentq(bundle.Wpp, 0.0, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
    slope = bundle.Wp(a)
    vf = ValueFunction(bundle.W / slope, a)
    diag = {
        "Wpp_at_level": bundle.Wpp(a),
        "Wpp_at_zero": Wpp0,
        "Wp_at_level": slope,
        "Wp_monotone_after_level": _monotone_after(bundle.Wp, a, 10.0 / bundle.zeta),
    }
    return PolicyResult(PolicyKind.CLASSIC, (a,), vf, diagnostics=diag)


# ---------------------------------------------------------------------------
# bail-out
# ---------------------------------------------------------------------------


def bailout_G(bundle: ScaleBundle, phi: float) -> ExpSum:
    """G(a) = (phi Z(a) - 1) W'(a) - phi q W(a)^2 as an exact exponential sum."""
    return (phi * bundle.Z - 1.0) * bundle.Wp - phi * bundle.q * (bundle.W * bundle.W)


def bailout_barrier(bundle: ScaleBundle, phi: float, tol: float = 1e-10, step: float = 1e-3,
                    horizon: Optional[float] = None) -> PolicyResult:
    if phi <= 1:
        raise ValidationError("unit cost of injected capital must exceed 1")
    G = bailout_G(bundle, phi)
    # G carries e^{2 zeta a} products, hence half the usual horizon
    horizon = 0.5 * _horizon(bundle.zeta) if horizon is None else horizon
    d = _first_crossing(G, step, horizon, tol)
    q = bundle.q
    k = (1.0 - phi * bundle.Z(d)) / (q * bundle.W(d))
    body = phi * bundle.intZ + phi * bundle.psi_prime_0 / q + k * bundle.Z
    vf = ValueFunction(body, d, below=(float(body(0.0)), phi))
    diag = {"G_at_level": G(d), "G_at_zero": G(0.0), "phi": phi,
            "slope_at_level": float(body.derivative()(d))}
    return PolicyResult(PolicyKind.BAILOUT, (d,), vf, diagnostics=diag)


# ---------------------------------------------------------------------------
# terminal value at ruin
# ---------------------------------------------------------------------------


def terminal_A(bundle: ScaleBundle, S: float, K: float) -> ExpSum:
    return K * (bundle.Z - bundle.psi_prime_0 * bundle.W) + S * bundle.q * bundle.W


def terminal_barrier(bundle: ScaleBundle, S: float, K: float, tol: float = 1e-8,
                     grid_step: float = 0.01, horizon: Optional[float] = None) -> PolicyResult:
    """b* = largest maximiser of F(x) = (1 - A(x)) / W'(x) over x >= 0.

    A coarse grid locates the maximum, golden-section search refines it.
    A maximum at the origin is reported (``RunStrategySignal`` warning and
    ``diagnostics['run_strategy']``) but not adjudicated.
    """
    A = terminal_A(bundle, S, K)

    def F(x):
        return (1.0 - A(x)) / bundle.Wp(x)

    horizon = min(30.0 / bundle.zeta, _horizon(bundle.zeta)) if horizon is None else horizon
    grid = np.arange(0.0, horizon + grid_step, grid_step)
    vals = F(grid)
    i = int(np.flatnonzero(vals == np.max(vals))[-1])
    run = False
    if i == 0:
        b = 0.0
        run = True
        warnings.warn("F is maximised at 0: take-the-money-and-run candidate", RunStrategySignal)
    elif i == grid.size - 1:
        raise NoSignChange("F still increasing at the search horizon")
    else:
        res = optimize.minimize_scalar(lambda x: -float(F(x)), bracket=(grid[i - 1], grid[i], grid[i + 1]),
                                       method="golden", tol=tol)
        b = float(res.x)
    Fb = float(F(b))
    body = S + A.antiderivative() + Fb * bundle.W
    vf = ValueFunction(body, b, below=(S, K))
    dF = A.derivative()
    # F'(b) numerator: -A'(b) W'(b) - (1 - A(b)) W''(b)
    foc = -dF(b) * bundle.Wp(b) - (1.0 - A(b)) * bundle.Wpp(b)
    diag = {"F_at_level": Fb, "F_at_zero": float(F(0.0)), "run_strategy": run, "S": S, "K": K,
            "first_order_residual": foc / bundle.Wp(b) ** 2}
    return PolicyResult(PolicyKind.TERMINAL, (b,), vf, diagnostics=diag)


# ---------------------------------------------------------------------------
# transaction costs
# ---------------------------------------------------------------------------


def impulse_g(bundle: ScaleBundle, c1, c2, delta: float):
    return (bundle.W(c2) - bundle.W(c1)) / (np.asarray(c2) - np.asarray(c1) - delta)


def impulse_policy(bundle: ScaleBundle, delta: float, tol: float = 1e-10,
                   horizon: Optional[float] = None) -> PolicyResult:
    """(c1*, c2*)-policy minimising g(c1, c2) = (W(c2) - W(c1)) / (c2 - c1 - delta).

    Interior candidate: W'(c1) = W'(c2) = g, found by bisection on the common
    slope with the two level crossings of W' solved inside.  Boundary
    candidate: c1 = 0 with g(0, .) minimised directly.  The smaller g wins.
    """
    if delta <= 0:
        raise ValidationError("transaction cost must be positive")
    a = classic_barrier(bundle, tol).levels[0]
    Wp, W = bundle.Wp, bundle.W
    s_min = Wp(a)
    limit = _horizon(bundle.zeta)

    def c2_of(s):
        hi = _upper_bracket(lambda x: Wp(a + x) - s, 1.0, limit)
        return optimize.brentq(lambda x: Wp(x) - s, a, a + hi, xtol=tol, rtol=4 * np.finfo(float).eps)

    def c1_of(s):
        return optimize.brentq(lambda x: Wp(x) - s, 0.0, a, xtol=tol, rtol=4 * np.finfo(float).eps)

    candidates = []
    s_top = Wp(0.0)
    if a > 0 and np.isfinite(s_top) and s_top > s_min:
        def h(s):
            c1, c2 = c1_of(s), c2_of(s)
            return W(c2) - W(c1) - s * (c2 - c1 - delta)

        if h(s_top) < 0:
            s_star = optimize.brentq(h, s_min, s_top, xtol=tol * max(1.0, s_min), rtol=4 * np.finfo(float).eps)
            c1, c2 = c1_of(s_star), c2_of(s_star)
            candidates.append(("interior", c1, c2, float(impulse_g(bundle, c1, c2, delta))))

    # boundary c1 = 0
    x_max = min(delta + 30.0 / bundle.zeta, limit)
    grid = np.linspace(delta, x_max, 3001)[1:]
    gv = impulse_g(bundle, 0.0, grid, delta)
    j = int(np.argmin(gv))
    if 0 < j < grid.size - 1:
        res = optimize.minimize_scalar(lambda c: float(impulse_g(bundle, 0.0, c, delta)),
                                       bounds=(grid[j - 1], grid[j + 1]), method="bounded",
                                       options={"xatol": tol})
        candidates.append(("boundary", 0.0, float(res.x), float(res.fun)))

    if not candidates:
        raise Degenerate("no admissible (c1, c2) policy with c2 - c1 - delta >= 0")
    kind, c1, c2, g = min(candidates, key=lambda c: c[3])
    vf = ValueFunction(W / g, c2)
    diag = {
        "g": g,
        "solution_type": kind,
        "candidates": [{"type": k, "c1": x1, "c2": x2, "g": gg} for k, x1, x2, gg in candidates],
        "classic_level": a,
        "slack": c2 - c1 - delta,
        "Wp_c1": Wp(c1),
        "Wp_c2": Wp(c2),
        "Wp_monotone_after_c2": _monotone_after(Wp, c2, 10.0 / bundle.zeta),
        "delta": delta,
    }
    return PolicyResult(PolicyKind.IMPULSE, (c1, c2), vf, diagnostics=diag)


# ---------------------------------------------------------------------------
# meromorphic bounds
# ---------------------------------------------------------------------------


def _search_span(bounds: TruncationBounds) -> float:
    """A point beyond the minimiser of the convex lower derivative bound."""
    dw = bounds.w_lower_sum.derivative()
    return _upper_bracket(dw, 1.0, _horizon(bounds.zeta)) * 2.0


def classic_bounds(bounds: TruncationBounds, tol: float = 1e-10,
                   phi: Optional[float] = None) -> PolicyResult:
    """Certified interval for a* and a pointwise sandwich for u_{a*}.

    ``w_lo = min w_lower`` and ``w_hi = min min(w_upper, w_tilde)`` bracket
    W'(a*); a* lies in the sublevel set ``{w_lower <= w_hi}``.
    """
    span = _search_span(bounds)
    x_lo = _convex_argmin(bounds.w_lower, span, tol)
    w_lo = float(bounds.w_lower(x_lo))
    x_up = _convex_argmin(bounds.w_upper, span, tol)
    x_ti = _convex_argmin(bounds.w_tilde, span, tol)
    w_hi = float(min(bounds.w_upper(x_up), bounds.w_tilde(x_ti)))
    if w_hi < w_lo:
        raise EmptyInterval(f"min of upper derivative bound {w_hi} below min of lower bound {w_lo}")

    def excess(x):
        return float(bounds.w_lower(x)) - w_hi

    left = 0.0 if excess(0.0) <= 0 else optimize.brentq(excess, 0.0, x_lo, xtol=tol)
    r = x_lo + 1.0
    while excess(r) <= 0:
        r = x_lo + 2 * (r - x_lo)
    right = optimize.brentq(excess, x_lo, r, xtol=tol)

    vb = ValueBounds(lower=lambda x: bounds.W_lower(x) / w_hi, upper=lambda x: bounds.W_upper(x) / w_lo)
    diag = {"w_star_lower": w_lo, "w_star_upper": w_hi, "m": bounds.m, "delta_m": bounds.delta_m,
            "epsilon_m": bounds.epsilon_m}
    if phi is not None:
        bo = bailout_bounds(bounds, phi, tol)
        diag["bailout_interval"] = list(bo.level_interval)
    return PolicyResult(PolicyKind.CLASSIC, (x_lo,), vb, level_interval=(left, right), diagnostics=diag)


def bailout_bounds(bounds: TruncationBounds, phi: float, tol: float = 1e-10,
                   step: float = 1e-3) -> PolicyResult:
    """Interval [d_lo, d_hi] containing the bail-out barrier of the meromorphic model."""
    if phi <= 1:
        raise ValidationError("unit cost of injected capital must exceed 1")
    q = bounds.q

    def G_lower(a):
        return (phi * bounds.Z_lower(a) - 1.0) * bounds.w_lower(a) - phi * q * bounds.W_upper(a) ** 2

    def G_upper(a):
        return (phi * bounds.Z_upper(a) - 1.0) * bounds.w_upper_best(a) - phi * q * bounds.W_lower(a) ** 2

    horizon = 0.5 * _horizon(bounds.zeta)
    d_lo = _first_crossing(G_lower, step, horizon, tol)
    try:
        d_hi = _first_crossing(G_upper, step, horizon, tol, start=step)
    except NoSignChange:
        # the upper bound on G need not turn negative when m is small: no finite upper bound on d*
        d_hi = np.inf
    mid = 0.5 * (d_lo + d_hi) if np.isfinite(d_hi) else d_lo
    return PolicyResult(PolicyKind.BAILOUT, (mid,), None, level_interval=(d_lo, d_hi),
                        diagnostics={"phi": phi, "m": bounds.m, "upper_found": bool(np.isfinite(d_hi))})


# ---------------------------------------------------------------------------
# CGMY limit
# ---------------------------------------------------------------------------


def cgmy_sweep(target: CgmyTarget, sigma: float, drift: float, q: float,
               beta_seq: Sequence[float], m: int = 150, grid=None, tol: float = 1e-10) -> dict:
    """Approximate a CGMY model by beta-family models with shrinking beta.

    For every beta the u-midpoint ``(u_lower + u_upper) / 2`` is evaluated on
    ``grid``; the report lists sup-differences between consecutive betas.
    """
    beta_seq = [float(b) for b in beta_seq]
    if any(b <= 0 for b in beta_seq) or any(b2 >= b1 for b1, b2 in zip(beta_seq, beta_seq[1:])):
        raise ValidationError("beta sequence must be positive and strictly decreasing")
    grid = np.linspace(0.0, 3.0, 301) if grid is None else np.asarray(grid, dtype=float)
    runs = []
    limit_density = levy_density(SpectralModel(sigma, drift, target), -1.0)
    for beta in beta_seq:
        jm = target.beta_approximation(beta)
        model = SpectralModel(sigma, drift, jm)
        bd = scale_functions(model, q, m=m, tol=tol)
        cb = classic_bounds(bd, tol)
        runs.append({
            "beta": beta,
            "c": jm.c,
            "alpha": jm.alpha,
            "zeta": bd.zeta,
            "delta_m": bd.delta_m,
            "epsilon_m": bd.epsilon_m,
            "a_interval": cb.level_interval,
            "u_mid": cb.value_fn.mid(grid),
            "W_mid": bd.W_mid()(grid),
            "W_upper": bd.W_upper(grid),
            "W_lower": bd.W_lower(grid),
            "w_lower": bd.w_lower(grid),
            "w_upper": bd.w_upper_best(grid),
            "density_at_minus_one": levy_density(model, -1.0),
        })
    u_diffs = [float(np.max(np.abs(r2["u_mid"] - r1["u_mid"]))) for r1, r2 in zip(runs, runs[1:])]
    W_diffs = [float(np.max(np.abs(r2["W_mid"] - r1["W_mid"]))) for r1, r2 in zip(runs, runs[1:])]
    crossings = []
    for r1, r2 in zip(runs, runs[1:]):
        d = r2["W_mid"][1:] - r1["W_mid"][1:]
        sig = np.sign(d[np.abs(d) > 1e-12 * np.max(np.abs(r2["W_mid"]))])
        crossings.append(int(np.sum(sig[1:] != sig[:-1])))
    return {
        "grid": grid,
        "runs": runs,
        "u_sup_diffs": u_diffs,
        "W_sup_diffs": W_diffs,
        "u_diffs_decreasing": bool(all(b < a for a, b in zip(u_diffs, u_diffs[1:]))),
        "W_sign_changes": crossings,
        "limit_density_at_minus_one": limit_density,
    }
