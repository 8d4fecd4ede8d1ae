"""Scale functions as exponential sums, and truncation bounds for meromorphic models."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .coeffs import FactorCoefficients, factor_coefficients
from .errors import ValidationError
from .expsum import ExpSum
from .models import SpectralModel, laplace_exponent, laplace_exponent_derivative
from .roots import RootSystem, root_system


@dataclass(frozen=True)
class ScaleBundle:
    """W^{(q)}, its first two derivatives, Z^{(q)} and int_0^x Z, for one (model, q)."""

    W: ExpSum
    Wp: ExpSum
    Wpp: ExpSum
    Z: ExpSum
    intZ: ExpSum
    zeta: float
    psi_prime_zeta: float
    psi_prime_0: float
    q: float
    W0: float
    coefficients: Optional[FactorCoefficients] = None
    rootsys: Optional[RootSystem] = None

    @classmethod
    def from_W(cls, W: ExpSum, q: float, zeta: float, psi_prime_zeta: float,
               psi_prime_0: float, **kw) -> "ScaleBundle":
        Z = 1.0 + q * W.antiderivative()
        return cls(W=W, Wp=W.derivative(), Wpp=W.derivative(2), Z=Z, intZ=Z.antiderivative(),
                   zeta=zeta, psi_prime_zeta=psi_prime_zeta, psi_prime_0=psi_prime_0, q=q,
                   W0=W.at_zero(), **kw)

    @property
    def intW(self) -> ExpSum:
        return self.W.antiderivative()

    def scaled(self, c: float) -> "ScaleBundle":
        """Bundle for ``c * W`` (Z rebuilt accordingly); used for homogeneity checks."""
        return ScaleBundle.from_W(c * self.W, self.q, self.zeta, self.psi_prime_zeta / c,
                                  self.psi_prime_0)


@dataclass(frozen=True)
class TruncationBounds:
    """m-term upper/lower bounds for a meromorphic scale function.

    W_lower <= W <= W_upper and Z_lower <= Z <= Z_upper everywhere; the
    derivative is bracketed by ``w_lower`` and ``min(w_upper, w_tilde)``,
    the latter two evaluated pointwise because they involve maxima.
    """

    W_upper: ExpSum
    W_lower: ExpSum
    Z_upper: ExpSum
    Z_lower: ExpSum
    w_lower_sum: ExpSum
    xis: np.ndarray
    xi_next: float
    zeta: float
    psi_prime_zeta: float
    psi_prime_0: float
    q: float
    m: int
    delta_m: float
    epsilon_m: float
    coefficients: Optional[FactorCoefficients] = None

    def w_lower(self, x):
        return self.w_lower_sum(x)

    def _head_max(self, x):
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        vals = self.xis[None, :] * np.exp(-self.xis[None, :] * xa[:, None])
        return np.max(vals, axis=1)

    def _tail_max(self, x):
        # sup over lambda >= xi_{m+1} of lambda e^{-lambda x}; the unconstrained peak is 1/(e x)
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            peak = np.where(xa > 0, 1.0 / (np.e * xa), np.inf)
        edge = self.xi_next * np.exp(-self.xi_next * xa)
        return np.where(self.xi_next * xa <= 1.0, peak, edge)

    def w_upper(self, x):
        out = self.w_lower_sum(x) + (self._head_max(x) + self._tail_max(x)) * self.delta_m
        return _like(x, out)

    def w_tilde(self, x):
        if not np.isfinite(self.epsilon_m):
            return _like(x, np.full(np.shape(np.atleast_1d(x)), np.inf))
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        out = (self.w_lower_sum(xa) + self._head_max(xa) * self.delta_m
               + np.exp(-self.xi_next * xa) * self.epsilon_m)
        return _like(x, out)

    def w_upper_best(self, x):
        return _like(x, np.minimum(np.atleast_1d(self.w_upper(x)), np.atleast_1d(self.w_tilde(x))))

    @property
    def W_zeta_upper(self) -> ExpSum:
        return self.W_upper.shift(-self.zeta)

    @property
    def W_zeta_lower(self) -> ExpSum:
        return self.W_lower.shift(-self.zeta)

    def gap(self, x):
        """Exact W_upper - W_lower = delta_m (1 + e^{-xi_{m+1} x}) e^{zeta x}."""
        xa = np.asarray(x, dtype=float)
        return self.delta_m * (1.0 + np.exp(-self.xi_next * xa)) * np.exp(self.zeta * xa)

    def W_mid(self) -> ExpSum:
        return 0.5 * (self.W_upper + self.W_lower)

    def Z_gap(self, x):
        """Exact Z_upper - Z_lower, the integral of q * gap over [0, x]."""
        xa = np.asarray(x, dtype=float)
        r = self.zeta - self.xi_next
        second = xa if r == 0.0 else np.expm1(r * xa) / r
        return self.q * self.delta_m * (np.expm1(self.zeta * xa) / self.zeta + second)


def _like(x, arr):
    return float(arr[0]) if np.ndim(x) == 0 else arr


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def build_scale_finite(model: SpectralModel, rootsys: RootSystem, fc: FactorCoefficients,
                       q: Optional[float] = None) -> ScaleBundle:
    """W = W(0) e^{zeta x} + (theta/rho) sum_i A_i xi_i/(zeta+xi_i) [e^{zeta x} - e^{-xi_i x}]."""
    if rootsys.meromorphic:
        raise ValidationError("meromorphic models need build_scale_meromorphic")
    q = rootsys.q if q is None else q
    zeta, xi, A = rootsys.zeta, rootsys.xis, fc.A
    c = fc.theta / fc.varrho * A * xi / (zeta + xi)
    W = ExpSum(np.concatenate([[fc.W0 + c.sum()], -c]), np.concatenate([[zeta], -xi]))
    return ScaleBundle.from_W(W, q, zeta, fc.psi_prime_zeta,
                              float(laplace_exponent_derivative(model, 0.0)),
                              coefficients=fc, rootsys=rootsys)


def build_scale_meromorphic(model: SpectralModel, rootsys: RootSystem, fc: FactorCoefficients,
                            q: Optional[float] = None, m: Optional[int] = None) -> TruncationBounds:
    q = rootsys.q if q is None else q
    m = fc.m if m is None else m
    if rootsys.xis.size < m + 1:
        raise ValidationError("bounds need m + 1 negative roots")
    zeta = rootsys.zeta
    xi = rootsys.xis[:m]
    xi_next = float(rootsys.xis[m])
    inv = 1.0 / fc.psi_prime_zeta
    C = fc.C[:m]
    W_up = ExpSum(np.concatenate([[inv], -C]), np.concatenate([[zeta], -xi]))
    W_lo = W_up - ExpSum([fc.delta_m, fc.delta_m], [zeta, zeta - xi_next])
    Z_up = 1.0 + q * W_up.antiderivative()
    Z_lo = 1.0 + q * W_lo.antiderivative()
    return TruncationBounds(W_upper=W_up, W_lower=W_lo, Z_upper=Z_up, Z_lower=Z_lo,
                            w_lower_sum=W_up.derivative(), xis=xi, xi_next=xi_next, zeta=zeta,
                            psi_prime_zeta=fc.psi_prime_zeta,
                            psi_prime_0=float(laplace_exponent_derivative(model, 0.0)),
                            q=q, m=m, delta_m=fc.delta_m, epsilon_m=fc.epsilon_m,
                            coefficients=fc)


def scale_functions(model: SpectralModel, q: float, m: Optional[int] = None,
                    tol: float = 1e-10) -> Union[ScaleBundle, TruncationBounds]:
    """Roots, coefficients and scale functions in one call."""
    rs = root_system(model, q, m=m, tol=tol)
    if model.is_meromorphic:
        fc = factor_coefficients(model, rs, rs.xis.size - 1)
        return build_scale_meromorphic(model, rs, fc, q)
    fc = factor_coefficients(model, rs)
    return build_scale_finite(model, rs, fc, q)


# ---------------------------------------------------------------------------
# evaluation and checks
# ---------------------------------------------------------------------------

_W_FAMILY = {"W", "Wp", "Wpp", "W_upper", "W_lower", "w_lower", "w_upper", "w_tilde"}
_Z_FAMILY = {"Z", "Z_upper", "Z_lower"}


def evaluate(obj: Union[ScaleBundle, TruncationBounds], which: str, x):
    """Evaluate a named function of a bundle or bounds object.

    Below zero the W-family is 0 and the Z-family is 1 (``intZ`` is then x).
    """
    if which not in _W_FAMILY | _Z_FAMILY | {"intZ"}:
        raise ValidationError(f"unknown function {which!r}")
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    pos = np.maximum(xa, 0.0)
    f = getattr(obj, which, None)
    if f is None:
        raise ValidationError(f"{which!r} not available on {type(obj).__name__}")
    with np.errstate(invalid="ignore"):
        vals = np.atleast_1d(f(pos)).astype(float)
    if which in _W_FAMILY:
        vals = np.where(xa < 0, 0.0, vals)
    elif which in _Z_FAMILY:
        vals = np.where(xa < 0, 1.0, vals)
    else:
        vals = np.where(xa < 0, xa, vals)
    return _like(x, vals)


def laplace_check(bundle: ScaleBundle, model: SpectralModel, q: float,
                  s_grid: Sequence[float]) -> float:
    """Worst relative error between the exact transform of W and 1/(psi(s) - q)."""
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(s_grid <= bundle.zeta):
        raise ValidationError("Laplace check needs s > zeta_q")
    lhs = bundle.W.laplace(s_grid)
    rhs = np.array([1.0 / (float(np.real(laplace_exponent(model, s))) - q) for s in s_grid])
    return float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))


def laplace_bracket_check(bounds: TruncationBounds, model: SpectralModel, q: float,
                          s_grid: Sequence[float]) -> float:
    """Relative amount by which 1/(psi(s)-q) escapes [L W_lower, L W_upper]; 0 when bracketed."""
    s_grid = np.asarray(s_grid, dtype=float)
    lo = bounds.W_lower.laplace(s_grid)
    hi = bounds.W_upper.laplace(s_grid)
    rhs = np.array([1.0 / (float(np.real(laplace_exponent(model, s))) - q) for s in s_grid])
    escape = np.maximum(lo - rhs, 0.0) + np.maximum(rhs - hi, 0.0)
    return float(np.max(escape / np.abs(rhs)))


def w_zeta_version(bundle: ScaleBundle) -> ExpSum:
    """W_zeta(x) = e^{-zeta x} W(x); bounded, increasing to 1/psi'(zeta)."""
    return bundle.W.shift(-bundle.zeta)


def default_laplace_grid(zeta: float, n: int = 10) -> np.ndarray:
    return zeta + np.geomspace(0.1, 10.0, n)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def grid_table(obj: Union[ScaleBundle, TruncationBounds], grid) -> tuple[list[str], np.ndarray]:
    grid = np.asarray(grid, dtype=float)
    if isinstance(obj, ScaleBundle):
        cols = ["W", "Wp", "Wpp", "Z"]
    else:
        cols = ["W_lower", "W_upper", "w_lower", "w_upper", "w_tilde", "Z_lower", "Z_upper"]
    data = [grid] + [np.atleast_1d(evaluate(obj, c, grid)) for c in cols]
    return ["x"] + cols, np.column_stack(data)


def write_csv(path, header: Sequence[str], rows: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.12g}" for v in row])


def export_csv(obj: Union[ScaleBundle, TruncationBounds], path, grid) -> None:
    header, rows = grid_table(obj, grid)
    write_csv(path, header, rows)
