"""Risk-adjusted Weibull model for operative times.

Conditional on covariates ``x`` the outcome has density
``theta * eta * y**(eta - 1) * exp(-theta * y**eta)`` with rate
``theta = gamma * exp(beta @ x)``. No intercept is added: ``gamma`` is the
baseline rate and ``beta @ x`` is the plain dot product over the supplied
covariates, so larger ``beta @ x`` means a shorter expected time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError
from .specialmath import gamma_fn, ln_gamma


@dataclass(frozen=True)
class WeibullRegParams:
    """Parameter triple (gamma, eta, beta) of the Weibull regression."""

    gamma: float
    eta: float
    beta: tuple = field(default=())

    def __post_init__(self):
        beta = tuple(float(b) for b in np.atleast_1d(np.asarray(self.beta, dtype=float)))
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "eta", float(self.eta))
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if not (math.isfinite(self.eta) and self.eta > 0):
            raise DomainError(f"eta must be positive, got {self.eta}")
        if not all(math.isfinite(b) for b in beta):
            raise DomainError("beta entries must be finite")

    @property
    def d(self) -> int:
        return len(self.beta)

    def to_vector(self) -> np.ndarray:
        """Stack as ``(gamma, eta, beta_1, ..., beta_d)``."""
        return np.array([self.gamma, self.eta, *self.beta])

    @classmethod
    def from_vector(cls, vec) -> "WeibullRegParams":
        vec = np.asarray(vec, dtype=float)
        return cls(vec[0], vec[1], tuple(vec[2:]))


@dataclass(frozen=True)
class CaseRecord:
    """One surgery: case number, operative time in hours, and risk factors."""

    index: int
    y: float
    x: tuple = field(default=())

    def __post_init__(self):
        x = tuple(float(v) for v in np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", float(self.y))
        if not (math.isfinite(self.y) and self.y > 0):
            raise DomainError(f"case {self.index}: y must be positive, got {self.y}")
        if not all(math.isfinite(v) for v in x):
            raise DomainError(f"case {self.index}: covariates must be finite")


def cases_to_arrays(cases: Sequence[CaseRecord]):
    """Return ``(y, X)`` with ``X`` of shape ``(t, d)``."""
    if len(cases) == 0:
        return np.empty(0), np.empty((0, 0))
    d = len(cases[0].x)
    y = np.fromiter((c.y for c in cases), dtype=float, count=len(cases))
    X = np.array([c.x for c in cases], dtype=float).reshape(len(cases), d)
    return y, X


def _linpred(params: WeibullRegParams, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (params.d,):
        raise DomainError(f"covariate vector has length {x.size}, model expects {params.d}")
    if params.d == 0:
        return 0.0
    return float(np.dot(params.beta, x))


def rate(params: WeibullRegParams, x=()) -> float:
    """Weibull rate ``gamma * exp(beta @ x)``."""
    return params.gamma * math.exp(_linpred(params, x))


def pdf(params: WeibullRegParams, y: float, x=()) -> float:
    if not y > 0:
        raise DomainError(f"y must be positive, got {y}")
    theta = rate(params, x)
    eta = params.eta
    return theta * eta * y ** (eta - 1.0) * math.exp(-theta * y**eta)


def log_rmot(params: WeibullRegParams, x=()) -> float:
    eta = params.eta
    return ln_gamma(1.0 / eta + 1.0) - (math.log(params.gamma) + _linpred(params, x)) / eta


def rmot(params: WeibullRegParams, x=()) -> float:
    """Risk-adjusted mean operative time ``Gamma(1/eta + 1) * theta**(-1/eta)``."""
    return math.exp(log_rmot(params, x))


def sd(params: WeibullRegParams, x=()) -> float:
    """Conditional standard deviation of the outcome given ``x``.

    Computed as ``theta**(-1/eta) * sqrt(Gamma(2/eta + 1) - Gamma(1/eta + 1)**2)``,
    which is the textbook form with the scale factored out.
    """
    theta = rate(params, x)
    eta = params.eta
    g1 = gamma_fn(1.0 / eta + 1.0)
    g2 = gamma_fn(2.0 / eta + 1.0)
    return theta ** (-1.0 / eta) * math.sqrt(g2 - g1 * g1)


def sample(params: WeibullRegParams, x, u: float) -> float:
    """Inverse-CDF draw: ``(-ln(u) / theta)**(1/eta)`` for uniform ``u``."""
    if not (0.0 < u < 1.0):
        raise DomainError(f"u must lie in (0, 1), got {u}")
    return (-math.log(u) / rate(params, x)) ** (1.0 / params.eta)


def sample_array(gamma, eta, beta, X, u) -> np.ndarray:
    """Vectorised inverse-CDF draws; ``gamma`` may be a per-row array."""
    X = np.asarray(X, dtype=float)
    lin = X @ np.asarray(beta, dtype=float) if X.size else np.zeros(len(u))
    theta = np.asarray(gamma, dtype=float) * np.exp(lin)
    return (-np.log(u) / theta) ** (1.0 / eta)


def relative_risk(trainee: WeibullRegParams, standard: WeibullRegParams, x=()) -> float:
    """Ratio of trainee to standard RMOT at covariates ``x``."""
    if trainee.d != standard.d:
        raise DomainError("trainee and standard models have different covariate dimensions")
    return math.exp(log_rmot(trainee, x) - log_rmot(standard, x))
