"""Spectrally negative Levy models and their Laplace exponents.

A :class:`SpectralModel` couples a Gaussian coefficient and a drift with one
of the jump models below.  The exponent is

    psi(s) = drift * s + sigma**2 * s**2 / 2 + jump_part(s),

where ``jump_part`` is ``int (e^{sz} - 1) nu(dz)`` for the hyperexponential
and phase-type cases and the Beta-function expression for the beta family.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import NamedTuple, Optional, Union

import numpy as np
from scipy import special

from .errors import DomainError, NonFiniteSpecialFunction, PoleEvaluation, ValidationError

POLE_RTOL = 1e-9
GENERATOR_TOL = 1e-12
# printed fits carry rounding in the last digit; accept sums within this of 1
WEIGHT_SUM_TOL = 1e-6


class CaseTag(enum.Enum):
    UNBOUNDED_VARIATION = "UnboundedVariation"
    BOUNDED_VARIATION = "BoundedVariation"


# ---------------------------------------------------------------------------
# jump models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Hyperexponential:
    """Compound Poisson jumps with density ``sum_i a_i eta_i exp(-eta_i z)``.

    ``rates`` may be given in any order; they are stored ascending with the
    weights permuted alongside.
    """

    lam: float
    weights: tuple
    rates: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        r = np.asarray(self.rates, dtype=float)
        if w.shape != r.shape or w.ndim != 1 or w.size == 0:
            raise ValidationError("hyperexponential weights and rates must be equal-length, non-empty")
        if self.lam <= 0:
            raise ValidationError("Poisson rate must be positive")
        if np.any(w <= 0) or np.any(r <= 0):
            raise ValidationError("hyperexponential weights and rates must be positive")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(f"hyperexponential weights sum to {w.sum():.10g}, not 1")
        order = np.argsort(r)
        r, w = r[order], w[order]
        if np.any(np.diff(r) <= 0):
            raise ValidationError("hyperexponential rates must be distinct")
        object.__setattr__(self, "weights", tuple(w.tolist()))
        object.__setattr__(self, "rates", tuple(r.tolist()))

    @property
    def total_rate(self) -> float:
        return self.lam * float(np.sum(self.weights))

    def to_phase_type(self) -> "PhaseType":
        return PhaseType(self.lam, self.weights, tuple(map(tuple, -np.diag(self.rates))))


@dataclass(frozen=True)
class PhaseType:
    """Compound Poisson jumps with phase-type law ``(alpha, T)``; exit vector ``t = -T 1``."""

    lam: float
    alpha: tuple
    T: tuple

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        T = np.asarray(self.T, dtype=float)
        if self.lam <= 0:
            raise ValidationError("Poisson rate must be positive")
        if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] != a.size:
            raise ValidationError("T must be square and match alpha")
        if np.any(a < 0) or a.sum() > 1 + GENERATOR_TOL:
            raise ValidationError("alpha must be a sub-probability vector")
        if np.any(np.diag(T) >= 0):
            raise ValidationError("phase-type generator needs a strictly negative diagonal")
        off = T - np.diag(np.diag(T))
        if np.any(off < 0):
            raise ValidationError("phase-type generator needs nonnegative off-diagonal entries")
        if np.any(T.sum(axis=1) > GENERATOR_TOL):
            raise ValidationError("phase-type generator rows must sum to <= 0")
        if abs(np.linalg.det(T)) < 1e-300 or np.linalg.cond(T) > 1e14:
            raise ValidationError("phase-type generator must be invertible")
        object.__setattr__(self, "alpha", tuple(a.tolist()))
        object.__setattr__(self, "T", tuple(map(tuple, T.tolist())))

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.T, dtype=float)

    @property
    def exit_vector(self) -> np.ndarray:
        return -self.matrix.sum(axis=1)

    @property
    def total_rate(self) -> float:
        return self.lam * float(np.sum(self.alpha))


@dataclass(frozen=True)
class BetaFamily:
    """Meromorphic beta-family jumps, ``nu(dx) = c e^{alpha beta x} / (1 - e^{beta x})^shape``."""

    c: float
    alpha: float
    beta: float
    shape: float

    def __post_init__(self):
        if self.c <= 0 or self.alpha <= 0 or self.beta <= 0:
            raise ValidationError("beta family needs c, alpha, beta > 0")
        _check_shape(self.shape)

    def pole(self, k: int) -> float:
        """Magnitude of the k-th pole (k >= 1): Gamma(alpha + z/beta) blows up at z = -beta(alpha+k-1)."""
        return self.beta * (self.alpha + k - 1)

    @property
    def total_rate(self) -> float:
        if self.shape >= 1:
            return float("inf")
        return self.c / self.beta * beta_fn(self.alpha, 1.0 - self.shape)


@dataclass(frozen=True)
class CgmyTarget:
    """Spectrally negative CGMY density ``c~ e^{alpha~ x} / |x|^shape`` (the beta -> 0 limit)."""

    c_tilde: float
    alpha_tilde: float
    shape: float

    def __post_init__(self):
        if self.c_tilde <= 0 or self.alpha_tilde <= 0:
            raise ValidationError("CGMY target needs positive c_tilde and alpha_tilde")
        _check_shape(self.shape)

    def beta_approximation(self, beta: float) -> BetaFamily:
        return BetaFamily(c=self.c_tilde * beta ** self.shape,
                          alpha=self.alpha_tilde / beta, beta=beta, shape=self.shape)

    @property
    def total_rate(self) -> float:
        if self.shape >= 1:
            return float("inf")
        return self.c_tilde * special.gamma(1 - self.shape) * self.alpha_tilde ** (self.shape - 1)


JumpModel = Union[Hyperexponential, PhaseType, BetaFamily, CgmyTarget]


def _check_shape(shape: float) -> None:
    if not 0 < shape < 3:
        raise ValidationError("shape parameter must lie in (0, 3)")
    if shape in (1.0, 2.0):
        raise ValidationError("shape parameter 1 and 2 are excluded (Beta function degenerates)")


# ---------------------------------------------------------------------------
# the process
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralModel:
    """A spectrally negative Levy process.

    ``jumps=None`` gives Brownian motion with drift.
    """

    sigma: float
    drift: float
    jumps: Optional[JumpModel] = None
    case_tag: CaseTag = field(init=False)

    def __post_init__(self):
        if self.sigma < 0:
            raise ValidationError("sigma must be nonnegative")
        infinite_var = isinstance(self.jumps, (BetaFamily, CgmyTarget)) and self.jumps.shape >= 2
        if self.sigma > 0 or infinite_var:
            tag = CaseTag.UNBOUNDED_VARIATION
        else:
            if self.jumps is None:
                raise ValidationError("sigma = 0 without jumps is a deterministic drift")
            if self.drift <= 0:
                raise ValidationError("bounded-variation model needs a positive drift "
                                      "(otherwise it is a negative subordinator)")
            tag = CaseTag.BOUNDED_VARIATION
        object.__setattr__(self, "case_tag", tag)

    @property
    def is_meromorphic(self) -> bool:
        return isinstance(self.jumps, BetaFamily)

    @property
    def is_finite(self) -> bool:
        """True when the root system is finite (no jumps, hyperexponential or phase-type)."""
        return self.jumps is None or isinstance(self.jumps, (Hyperexponential, PhaseType))

    @property
    def total_jump_rate(self) -> float:
        return 0.0 if self.jumps is None else self.jumps.total_rate

    def with_sigma(self, sigma: float) -> "SpectralModel":
        return SpectralModel(sigma, self.drift, self.jumps)

    def to_dict(self) -> dict:
        return {"sigma": self.sigma, "drift": self.drift, "jumps": jumps_to_dict(self.jumps)}

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralModel":
        try:
            return cls(float(d["sigma"]), float(d["drift"]), jumps_from_dict(d.get("jumps")))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed model specification: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "SpectralModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def bounded_variation_drift(model: SpectralModel) -> float:
    """Drift ``mu`` of the ``int (e^{sz}-1) nu(dz)`` form of the exponent.

    All exponents here are stored in that uncompensated form already (the
    beta-family Beta-difference equals ``int (e^{sz}-1) nu(dz)`` whenever the
    integral converges), so this is the stored drift.
    """
    if model.case_tag is not CaseTag.BOUNDED_VARIATION:
        raise DomainError("drift conversion only applies to bounded-variation models")
    return model.drift


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------


def beta_fn(x, y):
    """Beta function via log-gamma with separately tracked signs (real or complex args)."""
    if np.iscomplexobj(x) or np.iscomplexobj(y):
        with np.errstate(all="ignore"):
            val = np.exp(special.loggamma(x) + special.loggamma(y) - special.loggamma(np.add(x, y)))
    else:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        sign = special.gammasgn(x) * special.gammasgn(y) * special.gammasgn(x + y)
        with np.errstate(all="ignore"):
            val = sign * np.exp(special.gammaln(x) + special.gammaln(y) - special.gammaln(x + y))
    if not np.all(np.isfinite(val)):
        raise NonFiniteSpecialFunction(f"Beta({x}, {y}) is not finite")
    return val if np.ndim(val) else val.item()


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def poles(model: SpectralModel, count: int | None = None) -> np.ndarray:
    """Pole magnitudes of psi (ascending).  ``count`` is required for the beta family."""
    j = model.jumps
    if j is None:
        return np.array([])
    if isinstance(j, Hyperexponential):
        return np.asarray(j.rates)
    if isinstance(j, PhaseType):
        return np.sort(-np.real(np.linalg.eigvals(j.matrix)))
    if isinstance(j, BetaFamily):
        if count is None:
            raise ValueError("beta family has infinitely many poles; pass count")
        return j.pole(np.arange(1, count + 1))
    return np.array([])


def _check_pole(model: SpectralModel, s) -> None:
    j = model.jumps
    if j is None:
        return
    if isinstance(j, BetaFamily):
        # -(alpha + s/beta) a nonnegative integer
        z = -(j.alpha + s / j.beta)
        k = np.round(np.real(z))
        if k >= 0 and abs(z - k) * j.beta < POLE_RTOL * (1 + abs(s)):
            raise PoleEvaluation(f"psi has a pole at s = {s}")
        return
    if isinstance(j, CgmyTarget):
        if np.real(s) <= -j.alpha_tilde and abs(np.imag(s)) == 0:
            raise PoleEvaluation(f"CGMY exponent has a branch point at s = {-j.alpha_tilde}")
        return
    eta = poles(model)
    if np.any(np.abs(s + eta) < POLE_RTOL * (1 + eta)):
        raise PoleEvaluation(f"psi has a pole at s = {s}")


def laplace_exponent(model: SpectralModel, s):
    """psi(s) for real or complex scalar ``s``."""
    _check_pole(model, s)
    j = model.jumps
    val = model.drift * s + 0.5 * model.sigma ** 2 * s * s
    if j is None:
        return val
    if isinstance(j, Hyperexponential):
        w, eta = np.asarray(j.weights), np.asarray(j.rates)
        return val - j.lam * np.sum(w * s / (eta + s))
    if isinstance(j, PhaseType):
        T = j.matrix
        a = np.asarray(j.alpha)
        sol = np.linalg.solve(s * np.eye(len(a)) - T, j.exit_vector.astype(np.result_type(s, float)))
        # lambda * alpha ((sI - T)^{-1} t - 1); a deficient alpha is an atom at zero
        return val + j.lam * (a @ sol - a.sum())
    if isinstance(j, BetaFamily):
        y = 1.0 - j.shape
        return val + j.c / j.beta * (beta_fn(j.alpha + s / j.beta, y) - beta_fn(j.alpha, y))
    if isinstance(j, CgmyTarget):
        e = j.shape - 1.0
        return val + j.c_tilde * special.gamma(1 - j.shape) * ((j.alpha_tilde + s) ** e - j.alpha_tilde ** e)
    raise TypeError(f"unknown jump model {type(j).__name__}")


def laplace_exponent_derivative(model: SpectralModel, s):
    """psi'(s), analytic."""
    _check_pole(model, s)
    j = model.jumps
    val = model.drift + model.sigma ** 2 * s
    if j is None:
        return val
    if isinstance(j, Hyperexponential):
        w, eta = np.asarray(j.weights), np.asarray(j.rates)
        return val - j.lam * np.sum(w * eta / (eta + s) ** 2)
    if isinstance(j, PhaseType):
        T = j.matrix
        a = np.asarray(j.alpha)
        M = s * np.eye(len(a)) - T
        sol = np.linalg.solve(M, np.linalg.solve(M, j.exit_vector.astype(np.result_type(s, float))))
        return val - j.lam * (a @ sol)
    if isinstance(j, BetaFamily):
        x, y = j.alpha + s / j.beta, 1.0 - j.shape
        return val + j.c / j.beta ** 2 * beta_fn(x, y) * (special.digamma(x) - special.digamma(x + y))
    if isinstance(j, CgmyTarget):
        e = j.shape - 1.0
        return val + j.c_tilde * special.gamma(1 - j.shape) * e * (j.alpha_tilde + s) ** (e - 1)
    raise TypeError(f"unknown jump model {type(j).__name__}")


class BoundaryConstants(NamedTuple):
    W0: float
    Wprime0: float
    theta: float


def boundary_constants(model: SpectralModel, zeta_q: float, q: float) -> BoundaryConstants:
    """W(0), W'(0+) and theta = -zeta W(0) + W'(0+)."""
    if model.sigma > 0:
        d = 2.0 / model.sigma ** 2
        return BoundaryConstants(0.0, d, d)
    if model.case_tag is CaseTag.UNBOUNDED_VARIATION:
        return BoundaryConstants(0.0, float("inf"), float("inf"))
    mu = bounded_variation_drift(model)
    lam = model.total_jump_rate
    if not np.isfinite(lam):
        return BoundaryConstants(1.0 / mu, float("inf"), float("inf"))
    wp0 = (q + lam) / mu ** 2
    return BoundaryConstants(1.0 / mu, wp0, -zeta_q / mu + wp0)


def levy_density(model: SpectralModel, z: float) -> float:
    if z >= 0:
        raise DomainError("Levy density is supported on z < 0")
    j = model.jumps
    if j is None:
        return 0.0
    if isinstance(j, Hyperexponential):
        w, eta = np.asarray(j.weights), np.asarray(j.rates)
        return float(j.lam * np.sum(w * eta * np.exp(eta * z)))
    if isinstance(j, PhaseType):
        from scipy.linalg import expm
        return float(j.lam * np.asarray(j.alpha) @ expm(-z * j.matrix) @ j.exit_vector)
    if isinstance(j, BetaFamily):
        return float(j.c * np.exp(j.alpha * j.beta * z) / (-np.expm1(j.beta * z)) ** j.shape)
    if isinstance(j, CgmyTarget):
        return float(j.c_tilde * np.exp(j.alpha_tilde * z) / abs(z) ** j.shape)
    raise TypeError(f"unknown jump model {type(j).__name__}")


# ---------------------------------------------------------------------------
# serialisation and fixtures
# ---------------------------------------------------------------------------


def jumps_to_dict(j: Optional[JumpModel]) -> Optional[dict]:
    if j is None:
        return None
    if isinstance(j, Hyperexponential):
        return {"type": "hyperexponential", "lambda": j.lam, "weights": list(j.weights), "rates": list(j.rates)}
    if isinstance(j, PhaseType):
        return {"type": "phase_type", "lambda": j.lam, "alpha": list(j.alpha), "T": [list(r) for r in j.T]}
    if isinstance(j, BetaFamily):
        return {"type": "beta_family", "c": j.c, "alpha": j.alpha, "beta": j.beta, "shape": j.shape}
    return {"type": "cgmy", "c_tilde": j.c_tilde, "alpha_tilde": j.alpha_tilde, "shape": j.shape}


def jumps_from_dict(d: Optional[dict]) -> Optional[JumpModel]:
    if d is None:
        return None
    kind = d.get("type")
    if kind == "hyperexponential":
        return Hyperexponential(float(d["lambda"]), tuple(d["weights"]), tuple(d["rates"]))
    if kind == "phase_type":
        return PhaseType(float(d["lambda"]), tuple(d["alpha"]), tuple(map(tuple, d["T"])))
    if kind == "beta_family":
        return BetaFamily(float(d["c"]), float(d["alpha"]), float(d["beta"]), float(d["shape"]))
    if kind == "cgmy":
        return CgmyTarget(float(d["c_tilde"]), float(d["alpha_tilde"]), float(d["shape"]))
    raise ValidationError(f"unknown jump model type {kind!r}")


def table1_jumps(lam: float = 1.0) -> Hyperexponential:
    """Hyperexponential fit to Weibull(0.6, 0.665), parameters as printed (bundled fixture)."""
    text = resources.files("levyscale").joinpath("data/table1_weibull.json").read_text()
    d = json.loads(text)
    return Hyperexponential(lam, tuple(d["weights"]), tuple(d["rates"]))


def table1_model(sigma: float, drift: float = 0.1, lam: float = 1.0) -> SpectralModel:
    return SpectralModel(sigma, drift, table1_jumps(lam))


def beta_family_example(sigma: float = 0.2, drift: float = 0.1, shape: float = 1.5,
                        alpha: float = 3.0, beta: float = 1.0, c: float = 0.1) -> SpectralModel:
    """The beta-family parameter set used for the truncation-bound experiments."""
    return SpectralModel(sigma, drift, BetaFamily(c=c, alpha=alpha, beta=beta, shape=shape))
