"""Wiener-Hopf residue weights and the scalars derived from them.

With distinct roots the law of the running minimum at an independent
exponential time is a mixture of exponentials with weights

    A_k = prod_j (1 - xi_k/eta_j) / prod_{i != k} (1 - xi_k/xi_i),

taken over all roots and poles for finite models, or over the first ``m``
of each for the truncated meromorphic approximation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DivisionNearZero
from .models import SpectralModel, boundary_constants, laplace_exponent_derivative
from .roots import RootSystem

LOG_SPACE_THRESHOLD = 50


@dataclass(frozen=True)
class FactorCoefficients:
    A: np.ndarray
    C: np.ndarray
    xis: np.ndarray
    varrho: float
    kappa: float
    delta_m: float
    epsilon_m: float
    theta: float
    zeta: float
    q: float
    W0: float
    psi_prime_zeta: float
    m: int
    exact: bool
    atom: float = 0.0

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "exact": self.exact,
            "zeta": self.zeta,
            "q": self.q,
            "theta": self.theta,
            "varrho": self.varrho,
            "kappa": self.kappa,
            "delta_m": self.delta_m,
            "epsilon_m": self.epsilon_m,
            "W0": self.W0,
            "atom": self.atom,
            "psi_prime_zeta": self.psi_prime_zeta,
            "A": self.A.tolist(),
            "C": self.C.tolist(),
        }


def compute_A(rootsys: RootSystem, m: Optional[int] = None) -> np.ndarray:
    """Residue weights ``A_k`` (exact for finite models, ``A^{(m)}_k`` for meromorphic).

    ``m`` defaults to all roots of a finite system and is required for a
    meromorphic one.
    """
    if rootsys.meromorphic:
        if m is None:
            m = rootsys.xis.size - 1
        if m > rootsys.xis.size or m > rootsys.etas.size:
            raise ValueError("root system too short for the requested truncation")
        xi, eta = rootsys.xis[:m], rootsys.etas[:m]
    else:
        xi, eta = rootsys.xis, rootsys.etas
        if m is not None and m != xi.size:
            raise ValueError("finite models use the full root set")
    return residue_weights(xi, eta)


def residue_weights(xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    num = 1.0 - xi[:, None] / eta[None, :]
    den = 1.0 - xi[:, None] / xi[None, :]
    np.fill_diagonal(den, 1.0)
    if np.any(np.abs(den) < 1e-14):
        raise DivisionNearZero("repeated negative roots in residue product")
    if xi.size <= LOG_SPACE_THRESHOLD:
        return np.prod(num, axis=1) / np.prod(den, axis=1)
    sign = np.prod(np.sign(num), axis=1) * np.prod(np.sign(den), axis=1)
    logs = np.sum(np.log(np.abs(num)), axis=1) - np.sum(np.log(np.abs(den)), axis=1)
    return sign * np.exp(logs)


def compute_scalars(model: SpectralModel, rootsys: RootSystem, A: np.ndarray,
                    q: Optional[float] = None) -> FactorCoefficients:
    """Populate rho_q, C_k, kappa_q, delta_m and epsilon_m.

    kappa_q comes from ``1/psi'(zeta) - W(0)``, never from summing C, so
    ``delta_m`` is a genuine remainder of the truncated sum.
    """
    q = rootsys.q if q is None else q
    zeta = rootsys.zeta
    m = A.size
    xi = rootsys.xis[:m]
    bc = boundary_constants(model, zeta, q)
    pp = float(np.real(laplace_exponent_derivative(model, zeta)))
    varrho = float(np.sum(A * xi))
    C = zeta / q * xi * A / (zeta + xi)
    kappa = 1.0 / pp - bc.W0
    delta = kappa - float(np.sum(C))
    if np.isfinite(bc.theta):
        eps = bc.theta - zeta / q * varrho
    else:
        eps = float("inf")
    exact = not rootsys.meromorphic
    # as many roots as poles: the running minimum sits at 0 with this probability
    atom = float(np.prod(xi / rootsys.etas)) if exact and xi.size == rootsys.etas.size else 0.0
    return FactorCoefficients(A=A, C=C, xis=xi, varrho=varrho, kappa=kappa, delta_m=delta,
                              epsilon_m=eps, theta=bc.theta, zeta=zeta, q=q, W0=bc.W0,
                              psi_prime_zeta=pp, m=m, exact=exact, atom=atom)


def factor_coefficients(model: SpectralModel, rootsys: RootSystem,
                        m: Optional[int] = None) -> FactorCoefficients:
    return compute_scalars(model, rootsys, compute_A(rootsys, m))


def check_identities(fc: FactorCoefficients, theta: Optional[float] = None,
                     zeta: Optional[float] = None, q: Optional[float] = None,
                     rootsys: Optional[RootSystem] = None) -> dict:
    """Residuals of ``zeta/q = theta / rho_q`` and related identities.

    Finite models: the relative residual should be at round-off level.
    Truncated meromorphic models: ``theta q / zeta - rho^{(m)}`` (reported as
    ``truncation_gap``) equals ``epsilon_m q / zeta`` and must be nonnegative.  With infinite
    theta the partial sums ``(zeta/q) sum xi A^{(m)}`` are reported instead
    and must increase (pass ``rootsys`` holding enough roots).
    """
    theta = fc.theta if theta is None else theta
    zeta = fc.zeta if zeta is None else zeta
    q = fc.q if q is None else q
    out: dict = {"mass": float(np.sum(fc.A))}
    if np.isfinite(theta):
        lhs = zeta / q
        rhs = theta / fc.varrho
        out["zeta_over_q"] = lhs
        out["theta_over_varrho"] = rhs
        out["relative_residual"] = abs(lhs - rhs) / lhs
        if not fc.exact:
            out["truncation_gap"] = theta * q / zeta - fc.varrho
            out["epsilon_gap"] = fc.epsilon_m * q / zeta
            out["certified"] = bool(fc.epsilon_m >= 0 and fc.delta_m >= 0)
        else:
            out["certified"] = True
        out["atom"] = fc.atom
        out["mass_residual"] = abs(out["mass"] + fc.atom - 1.0) if fc.exact else None
        return out
    sizes = []
    sums = []
    n = fc.m if rootsys is None else rootsys.xis.size - 1
    k = 1
    while k <= n:
        sizes.append(k)
        if rootsys is None:
            sums.append(float(zeta / q * np.sum(fc.xis[:k] * fc.A[:k])))
        else:
            A_k = compute_A(rootsys, k)
            sums.append(float(zeta / q * np.sum(rootsys.xis[:k] * A_k)))
        k *= 2
    out["partial_sums"] = dict(zip(sizes, sums))
    out["diverging"] = bool(len(sums) > 1 and np.all(np.diff(sums) > 0))
    out["certified"] = out["diverging"]
    return out
