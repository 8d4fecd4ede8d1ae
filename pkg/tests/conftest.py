import math

import numpy as np
import pytest

from levyscale.models import Hyperexponential, SpectralModel, beta_family_example, table1_model
from levyscale.scale import scale_functions

GOLDEN = (1 + math.sqrt(5)) / 2
Q_TABLE1 = 0.03
SIGMAS = (0.0, 0.2, 0.4)


@pytest.fixture(scope="session")
def toy_model():
    """mu = 1, sigma = 0, one exponential jump class with lambda = eta = 1."""
    return SpectralModel(0.0, 1.0, Hyperexponential(1.0, (1.0,), (1.0,)))


@pytest.fixture(scope="session")
def brownian():
    return SpectralModel(1.0, 0.0, None)


@pytest.fixture(scope="session")
def table1_bundles():
    return {s: scale_functions(table1_model(s), Q_TABLE1) for s in SIGMAS}


@pytest.fixture(scope="session")
def beta_model():
    return beta_family_example()


@pytest.fixture(scope="session")
def beta_bounds(beta_model):
    return {m: scale_functions(beta_model, Q_TABLE1, m=m) for m in (15, 150)}


def hyperexp_polynomial_roots(model: SpectralModel, q: float) -> np.ndarray:
    """Real roots of psi(s) = q for a hyperexponential model via its numerator polynomial.

    Multiplying psi(s) - q by prod(eta_i + s) gives a polynomial; its roots
    are computed by numpy's companion-matrix eigenvalues, a route independent
    of the bisection solver.
    """
    j = model.jumps
    eta = np.asarray(j.rates)
    w = np.asarray(j.weights)
    P = np.polynomial.Polynomial
    den = P([1.0])
    for e in eta:
        den = den * P([e, 1.0])
    base = P([-q, model.drift, 0.5 * model.sigma ** 2]) * den
    jump = P([0.0])
    for i, e in enumerate(eta):
        rest = P([1.0])
        for k, e2 in enumerate(eta):
            if k != i:
                rest = rest * P([e2, 1.0])
        jump = jump + w[i] * P([0.0, 1.0]) * rest
    r = (base - j.lam * jump).roots()
    return np.sort(r[np.abs(r.imag) < 1e-8 * (1 + np.abs(r.real))].real)


def random_hyperexp_model(rng: np.random.Generator) -> tuple[SpectralModel, float]:
    """A valid hyperexponential model and discount rate drawn from ``rng``.

    Half the draws have no Gaussian part; those keep a strictly positive drift.
    """
    n = int(rng.integers(1, 5))
    rates = np.sort(rng.choice(np.geomspace(0.2, 60.0, 40), size=n, replace=False))
    weights = rng.dirichlet(np.ones(n))
    sigma = 0.0 if rng.random() < 0.5 else float(rng.uniform(0.05, 1.0))
    drift = float(rng.uniform(0.05, 2.0))
    lam = float(rng.uniform(0.1, 3.0))
    q = float(rng.uniform(0.01, 1.0))
    jumps = Hyperexponential(lam, tuple(weights / weights.sum()), tuple(rates))
    return SpectralModel(sigma, drift, jumps), q


_VERDICTS: list[str] = []


@pytest.fixture
def verdict(capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def report(number: int, passed: bool, detail: str) -> bool:
        line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'} | {detail}"
        _VERDICTS.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
