"""Comparative probability metrics and delta-method intervals.

The relative risk estimator is treated as asymptotically normal with
variance from the delta method; the CPM is the normal probability that it
falls inside ``(delta_l, delta_u)``. Intervals for the CPM are built on the
``ln(-ln(p))`` scale and mapped back, which keeps them inside (0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import DomainError, NumericalError
from .model import WeibullRegParams, _linpred, relative_risk, rmot
from .specialmath import digamma, std_normal_cdf, std_normal_quantile
from .wee import FitResult

CLAMP = 1e-12


class MetricKind(str, Enum):
    PA = "PA"
    PN = "PN"
    CUSTOM = "custom"


@dataclass(frozen=True)
class CpmConfig:
    """Indifference region, margin, decision cutoff and interval level.

    Use :meth:`agreement` / :meth:`noninferiority` to get the bounds implied
    by a margin ``epsilon``.
    """

    delta_l: float
    delta_u: float
    epsilon: float = 0.2
    kind: MetricKind = MetricKind.CUSTOM
    cutoff: float = 0.95
    alpha: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "kind", MetricKind(self.kind))
        if not (0.0 <= self.delta_l < self.delta_u):
            raise DomainError(f"need 0 <= delta_l < delta_u, got ({self.delta_l}, {self.delta_u})")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if not (0.0 < self.cutoff < 1.0):
            raise DomainError("cutoff must lie in (0, 1)")
        if not (0.0 < self.alpha < 1.0):
            raise DomainError("alpha must lie in (0, 1)")
        if self.kind is MetricKind.PA:
            if not (math.isclose(self.delta_l, 1 / (1 + self.epsilon)) and math.isclose(self.delta_u, 1 + self.epsilon)):
                raise DomainError("PA bounds must be (1/(1+eps), 1+eps)")
        elif self.kind is MetricKind.PN:
            if not (self.delta_l == 0.0 and math.isclose(self.delta_u, 1 + self.epsilon)):
                raise DomainError("PN bounds must be (0, 1+eps)")

    @classmethod
    def agreement(cls, epsilon: float = 0.2, **kw) -> "CpmConfig":
        return cls(1.0 / (1.0 + epsilon), 1.0 + epsilon, epsilon, MetricKind.PA, **kw)

    @classmethod
    def noninferiority(cls, epsilon: float = 0.2, **kw) -> "CpmConfig":
        return cls(0.0, 1.0 + epsilon, epsilon, MetricKind.PN, **kw)

    @classmethod
    def from_kind(cls, kind, epsilon: float = 0.2, delta_l=None, delta_u=None, **kw) -> "CpmConfig":
        kind = MetricKind(kind)
        if kind is MetricKind.PA:
            return cls.agreement(epsilon, **kw)
        if kind is MetricKind.PN:
            return cls.noninferiority(epsilon, **kw)
        if delta_l is None or delta_u is None:
            raise DomainError("custom metric needs delta_l and delta_u")
        return cls(delta_l, delta_u, epsilon, kind, **kw)


@dataclass(frozen=True)
class IntervalEstimate:
    point: float
    lower: float
    upper: float
    level: float
    clamped: bool = False

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def cpm_point(r_hat: float, sigma_r: float, cfg: CpmConfig) -> float:
    """``Phi((delta_u - r)/s) - Phi((delta_l - r)/s)``; ``delta_u = inf`` is allowed."""
    if not sigma_r > 0:
        raise DomainError(f"sigma_r must be positive, got {sigma_r}")
    upper = 1.0 if math.isinf(cfg.delta_u) else std_normal_cdf((cfg.delta_u - r_hat) / sigma_r)
    lower = std_normal_cdf((cfg.delta_l - r_hat) / sigma_r)
    return min(1.0, max(0.0, upper - lower))


# -- gradients -----------------------------------------------------------


def grad_rmot(params: WeibullRegParams, x) -> np.ndarray:
    """Gradient of the RMOT with respect to (gamma, eta, beta)."""
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(params.d)
    mu = rmot(params, x)
    eta = params.eta
    ln_theta = math.log(params.gamma) + _linpred(params, x)
    g = np.empty(params.d + 2)
    g[0] = -mu / (eta * params.gamma)
    g[1] = mu * (ln_theta - digamma(1.0 + 1.0 / eta)) / eta**2
    g[2:] = -x * mu / eta
    return g


def grad_relative_risk(trainee: WeibullRegParams, standard: WeibullRegParams, x, joint: bool = False) -> np.ndarray:
    """Gradient of the relative risk.

    With ``joint=False`` only the trainee parameters vary; otherwise the
    standard's gradient is appended (signs mirrored) to give a ``2(d+2)``
    vector.
    """
    mu_s = rmot(standard, x)
    g_n = grad_rmot(trainee, x) / mu_s
    if not joint:
        return g_n
    g_s = -relative_risk(trainee, standard, x) * grad_rmot(standard, x) / mu_s
    return np.concatenate([g_n, g_s])


def _quad_sd(g, S) -> float:
    v = float(g @ S @ g)
    if v < -1e-10:
        raise NumericalError(f"delta-method variance is negative ({v:.3g})")
    return math.sqrt(max(v, 0.0))


def _params_sigma(fit):
    if isinstance(fit, FitResult):
        return fit.params, np.asarray(fit.sigma, dtype=float)
    params, sigma = fit
    return params, np.asarray(sigma, dtype=float)


def sigma_r(fit, standard: WeibullRegParams, x) -> float:
    """Delta-method SD of the relative risk with the standard treated as known."""
    params, S = _params_sigma(fit)
    return _quad_sd(grad_relative_risk(params, standard, x), S)


def sigma_mu(fit, x) -> float:
    """Delta-method SD of the trainee's RMOT."""
    params, S = _params_sigma(fit)
    return _quad_sd(grad_rmot(params, x), S)


def joint_sigma(sigma_n, sigma_s) -> np.ndarray:
    k = sigma_n.shape[0]
    J = np.zeros((2 * k, 2 * k))
    J[:k, :k] = sigma_n
    J[k:, k:] = sigma_s
    return J


def sigma_r_joint(fit_n, fit_s, x) -> float:
    """Delta-method SD of the relative risk when the standard is also estimated.

    The joint covariance is block diagonal: trainee and standard estimates
    are independent.
    """
    pn, Sn = _params_sigma(fit_n)
    ps, Ss = _params_sigma(fit_s)
    if pn.d != ps.d:
        raise DomainError("trainee and standard fits have different dimensions")
    g = grad_relative_risk(pn, ps, x, joint=True)
    return _quad_sd(g, joint_sigma(Sn, Ss))


def aci_linear(point: float, sigma: float, alpha: float = 0.05) -> IntervalEstimate:
    """Symmetric normal interval ``point +/- z_{1-alpha/2} * sigma``."""
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if sigma < 0:
        raise DomainError("sigma must be nonnegative")
    z = std_normal_quantile(1.0 - alpha / 2.0)
    return IntervalEstimate(point, point - z * sigma, point + z * sigma, 1.0 - alpha)


def _fd_step(v):
    return 1e-5 * max(1.0, abs(v))


def _loglog(p):
    return math.log(-math.log(p))


def cpm_aci(fit, standard, x, cfg: CpmConfig) -> IntervalEstimate:
    """CPM point estimate with a ``ln(-ln p)``-scale interval mapped back to (0, 1).

    ``standard`` is either known parameters or a fitted standard (then the
    derivative also runs over the standard's parameters and the joint
    block-diagonal covariance is used). The variance of the relative risk is
    held at its fitted value while differentiating; partials come from
    central differences of parameters -> R -> CPM -> ln(-ln CPM).
    A point estimate within 1e-12 of 0 or 1 is clamped to that distance
    and flagged, so the reported interval always lies in (0, 1).
    """
    pn, Sn = _params_sigma(fit)
    joint = isinstance(standard, FitResult) or (isinstance(standard, tuple) and len(standard) == 2)
    if joint:
        ps, Ss = _params_sigma(standard)
        S = joint_sigma(Sn, Ss)
        theta0 = np.concatenate([pn.to_vector(), ps.to_vector()])
    else:
        ps = standard
        S = Sn
        theta0 = pn.to_vector()
    k = pn.d + 2
    g_r = grad_relative_risk(pn, ps, x, joint=joint)
    s_r = _quad_sd(g_r, S)
    r_hat = relative_risk(pn, ps, x)
    level = 1.0 - cfg.alpha
    if s_r == 0.0:
        inside = float(cfg.delta_l < r_hat < cfg.delta_u)
        return IntervalEstimate(inside, inside, inside, level)

    def cpm_of(theta):
        n = WeibullRegParams.from_vector(theta[:k])
        s = WeibullRegParams.from_vector(theta[k:]) if joint else ps
        return cpm_point(relative_risk(n, s, x), s_r, cfg)

    c_hat = cpm_of(theta0)
    clamped = not (CLAMP <= c_hat <= 1.0 - CLAMP)

    def psi_of(theta):
        c = min(max(cpm_of(theta), CLAMP), 1.0 - CLAMP)
        return _loglog(c)

    grad = np.empty_like(theta0)
    positive = np.zeros(theta0.size, dtype=bool)
    positive[[0, 1]] = True
    if joint:
        positive[[k, k + 1]] = True
    for j in range(theta0.size):
        h = _fd_step(theta0[j])
        if positive[j]:
            h = min(h, 0.5 * theta0[j])
        up, dn = theta0.copy(), theta0.copy()
        up[j] += h
        dn[j] -= h
        grad[j] = (psi_of(up) - psi_of(dn)) / (2 * h)
    s_psi = _quad_sd(grad, S)
    c_used = min(max(c_hat, CLAMP), 1.0 - CLAMP)
    psi = _loglog(c_used)
    z = std_normal_quantile(1.0 - cfg.alpha / 2.0)
    lo = math.exp(-math.exp(psi + z * s_psi))
    hi = math.exp(-math.exp(psi - z * s_psi))
    # limits can round to 0 or 1 in double precision; keep them strictly inside
    lo = min(max(lo, CLAMP), c_used)
    hi = max(min(hi, 1.0 - CLAMP), c_used)
    return IntervalEstimate(c_used, lo, hi, level, clamped)


def relative_risk_interval(fit, standard, x, alpha: float = 0.05) -> IntervalEstimate:
    pn, _ = _params_sigma(fit)
    if isinstance(standard, FitResult):
        s = sigma_r_joint(fit, standard, x)
        ps = standard.params
    else:
        s = sigma_r(fit, standard, x)
        ps = standard
    return aci_linear(relative_risk(pn, ps, x), s, alpha)


def rmot_interval(fit, x, alpha: float = 0.05) -> IntervalEstimate:
    pn, _ = _params_sigma(fit)
    return aci_linear(rmot(pn, x), sigma_mu(fit, x), alpha)


def cpm_for_fit(fit, standard, x, cfg: CpmConfig) -> Optional[float]:
    """CPM point value only; ``None`` when the delta-method SD is zero."""
    pn, _ = _params_sigma(fit)
    if isinstance(standard, FitResult):
        s = sigma_r_joint(fit, standard, x)
        ps = standard.params
    else:
        s = sigma_r(fit, standard, x)
        ps = standard
    if s == 0.0:
        return None
    return cpm_point(relative_risk(pn, ps, x), s, cfg)
