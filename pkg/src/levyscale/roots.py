"""Roots of the Cramer-Lundberg equation ``psi(s) = q``.

The positive root ``zeta`` is bracketed by doubling.  The negative roots
``-xi_k`` interlace with the poles ``-eta_k`` of psi,

    0 < xi_1 < eta_1 < xi_2 < eta_2 < ...,

so every ``xi_k`` is isolated by bisection inside ``(eta_{k-1}, eta_k)``
(``eta_0 = 0``).  For a finite model with a Gaussian part one extra root
lives beyond the last pole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BracketFailure, ComplexPoles, MultiplicityDetected, ValidationError
from .models import (
    POLE_RTOL,
    BetaFamily,
    CaseTag,
    CgmyTarget,
    PhaseType,
    SpectralModel,
    laplace_exponent,
    poles,
)

DEFAULT_TOL = 1e-10
DEFAULT_MEROMORPHIC_M = 150
_BRACKET_LIMIT = 1e8
_MAX_ITER = 400


@dataclass(frozen=True)
class RootSystem:
    q: float
    zeta: float
    xis: np.ndarray
    etas: np.ndarray
    residuals: np.ndarray
    zeta_residual: float
    count_relation_ok: bool
    tol: float = DEFAULT_TOL
    meromorphic: bool = False
    extras: dict = field(default_factory=dict, compare=False)

    def interlaced(self) -> bool:
        return interlacing_ok(self.xis, self.etas)

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "zeta": self.zeta,
            "xis": self.xis.tolist(),
            "etas": self.etas.tolist(),
            "residuals": self.residuals.tolist(),
            "zeta_residual": self.zeta_residual,
            "count_relation_ok": self.count_relation_ok,
            "interlaced": self.interlaced(),
            "tol": self.tol,
        }


def interlacing_ok(xis, etas) -> bool:
    """True when the merged sequence alternates xi_1 < eta_1 < xi_2 < ... starting with a root."""
    xis, etas = np.asarray(xis), np.asarray(etas)
    if xis.size == 0 or xis[0] <= 0:
        return False
    if not (xis.size - 1 <= etas.size <= xis.size):
        return False
    for k, x in enumerate(xis):
        if k < etas.size and not x < etas[k]:
            return False
        if k > 0 and not etas[k - 1] < x:
            return False
    return True


def _bisect(f: Callable[[float], float], lo: float, hi: float, f_lo: float, f_hi: float,
            tol: float, ftol: float) -> float:
    """Bisection on ``[lo, hi]`` given opposite-signed end values."""
    for _ in range(_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_hi > 0):
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
        if hi - lo <= tol and min(abs(f_lo), abs(f_hi)) <= ftol:
            break
    return lo if abs(f_lo) <= abs(f_hi) else hi


def solve_positive_root(model: SpectralModel, q: float, tol: float = DEFAULT_TOL) -> float:
    """zeta_q = sup{s >= 0 : psi(s) = q}."""
    if q <= 0:
        raise ValidationError("q must be positive")

    def f(s):
        return float(np.real(laplace_exponent(model, s))) - q

    hi = 1.0
    f_hi = f(hi)
    while f_hi <= 0:
        hi *= 2.0
        if hi > _BRACKET_LIMIT:
            raise BracketFailure("psi stays below q; is the model a negative subordinator?")
        f_hi = f(hi)
    return _bisect(f, 0.0, hi, -q, f_hi, tol, tol * (1 + q))


def enumerate_poles(model: SpectralModel, m: Optional[int] = None) -> np.ndarray:
    """Pole magnitudes eta_1 < eta_2 < ... (the first ``m`` for the beta family)."""
    j = model.jumps
    if isinstance(j, CgmyTarget):
        raise ValidationError("CGMY target is not meromorphic; use its beta-family approximation")
    if isinstance(j, BetaFamily):
        if m is None or m < 1:
            raise ValidationError("beta family needs a truncation count m >= 1")
        return poles(model, m)
    if isinstance(j, PhaseType):
        ev = np.linalg.eigvals(j.matrix)
        if np.any(np.abs(ev.imag) > 1e-10 * (1 + np.abs(ev.real))):
            raise ComplexPoles("phase-type generator has complex eigenvalues")
        eta = np.sort(-ev.real)
        if np.any(np.diff(eta) <= 1e-10 * (1 + eta[1:])):
            raise MultiplicityDetected("phase-type generator has repeated eigenvalues")
        return eta if m is None else eta[:m]
    eta = poles(model)
    return eta if m is None else eta[:m]


def _inside(e: float, direction: int) -> float:
    return e + direction * 4 * POLE_RTOL * (1 + e)


def solve_negative_roots(model: SpectralModel, q: float, m: Optional[int] = None,
                         tol: float = DEFAULT_TOL) -> np.ndarray:
    """Magnitudes xi_1 < xi_2 < ... of the negative roots of psi(s) = q.

    For finite models all roots are returned (``m`` may cap the count).
    For the beta family ``m`` roots are returned.
    """
    if q <= 0:
        raise ValidationError("q must be positive")

    def f(s):
        return float(np.real(laplace_exponent(model, -s))) - q

    if model.is_meromorphic:
        if m is None:
            raise ValidationError("beta family needs a root count m")
        eta = enumerate_poles(model, m)
        n_roots, tail = m, False
    else:
        eta = enumerate_poles(model)
        tail = model.sigma > 0
        n_roots = eta.size + (1 if tail else 0)
        if m is not None:
            n_roots = min(n_roots, m)
            tail = tail and n_roots == eta.size + 1

    ftol = tol * (1 + q)
    xis = []
    for k in range(n_roots):
        left = 0.0 if k == 0 else eta[k - 1]
        lo = left if k == 0 else _inside(left, +1)
        f_lo = f(lo)
        if k < eta.size:
            hi = _inside(eta[k], -1)
            f_hi = f(hi)
            if (f_lo > 0) == (f_hi > 0):
                raise BracketFailure(
                    f"no sign change of psi(-s) - q on ({left:.6g}, {eta[k]:.6g}); "
                    "roots may be repeated or complex")
        else:
            width = 1.0
            hi = left + width
            f_hi = f(hi)
            while (f_lo > 0) == (f_hi > 0):
                width *= 2.0
                if width > _BRACKET_LIMIT:
                    raise BracketFailure("no root beyond the last pole")
                hi = left + width
                f_hi = f(hi)
        xis.append(_bisect(f, lo, hi, f_lo, f_hi, tol, ftol))
    xis = np.asarray(xis)
    if xis.size > 1:
        gaps = np.diff(xis) / xis[1:]
        if np.any(gaps < 1e-8):
            raise MultiplicityDetected("two negative roots coincide")
    return xis


def root_system(model: SpectralModel, q: float, m: Optional[int] = None,
                tol: float = DEFAULT_TOL) -> RootSystem:
    """Solve for zeta_q and the negative roots.

    For the beta family ``m`` is the truncation depth and ``m + 1`` roots and
    poles are computed (the extra root enters the truncation bounds).
    """
    zeta = solve_positive_root(model, q, tol)
    if model.is_meromorphic:
        m = DEFAULT_MEROMORPHIC_M if m is None else m
        xis = solve_negative_roots(model, q, m + 1, tol)
        etas = enumerate_poles(model, m + 1)
        count_ok = xis.size == etas.size
    else:
        xis = solve_negative_roots(model, q, None, tol)
        etas = enumerate_poles(model)
        expected = etas.size + (1 if model.case_tag is CaseTag.UNBOUNDED_VARIATION else 0)
        count_ok = xis.size == expected
    residuals = np.array([abs(float(np.real(laplace_exponent(model, -x))) - q) for x in xis])
    zres = abs(float(np.real(laplace_exponent(model, zeta))) - q)
    return RootSystem(q=q, zeta=zeta, xis=xis, etas=etas, residuals=residuals,
                      zeta_residual=zres, count_relation_ok=bool(count_ok), tol=tol,
                      meromorphic=model.is_meromorphic)


def residual_bound(model: SpectralModel, rs: RootSystem) -> np.ndarray:
    """Residual a root of bisection width ``tol`` can be expected to leave.

    ``max(tol * (1 + q), |psi'| * ulp)``; near a pole the slope makes
    float-level residuals unavoidable.
    """
    from .models import laplace_exponent_derivative

    out = []
    for x in rs.xis:
        slope = abs(float(np.real(laplace_exponent_derivative(model, -x))))
        out.append(max(rs.tol * (1 + rs.q), 8 * slope * math.ulp(x)))
    return np.asarray(out)
