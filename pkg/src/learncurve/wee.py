"""Weighted estimating equations for the Weibull regression.

Cases are weighted geometrically so that recent surgeries dominate the
estimate of current performance. The estimator solves the weighted score
equations with a safeguarded Newton iteration and reports the sandwich
covariance ``inv(G) @ Omega @ inv(G)`` where ``G`` is the expected Hessian
of the weighted score (first-power weights) and ``Omega`` the expected
outer product of the score (squared weights).

Parameter vectors are always ordered ``(gamma, eta, beta_1, ..., beta_d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, InsufficientDataError, NumericalError
from .model import WeibullRegParams, cases_to_arrays
from .specialmath import EULER_GAMMA

PI2_6 = math.pi**2 / 6.0
TRIGAMMA_2 = PI2_6 - 1.0


@dataclass(frozen=True)
class WeightVector:
    w: np.ndarray
    lam: float

    def __len__(self):
        return len(self.w)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 200
    max_halvings: int = 50
    cond_limit: float = 1e12


@dataclass(frozen=True)
class FitResult:
    """Point estimates, sandwich covariance and solver diagnostics."""

    params: WeibullRegParams
    sigma: np.ndarray
    score_norm: float
    converged: bool
    iterations: int
    n_cases: int
    lam: float
    loglik: float = float("nan")
    message: str = ""

    @property
    def ase(self) -> np.ndarray:
        """Asymptotic standard errors, ``sqrt(diag(sigma))``."""
        return np.sqrt(np.clip(np.diag(self.sigma), 0.0, None))


def weights(t: int, lam: float) -> WeightVector:
    """Exponential case weights ``t*lam*(1-lam)**(t-i) / (1 - (1-lam)**t)``.

    The weights sum to ``t``; ``lam -> 0`` recovers equal weights and
    ``lam = 1`` puts the whole mass ``t`` on the latest case.
    """
    if int(t) != t or t < 1:
        raise DomainError(f"t must be a positive integer, got {t}")
    if not (0.0 < lam <= 1.0):
        raise DomainError(f"lambda must satisfy 0 < lambda <= 1, got {lam}")
    t = int(t)
    if lam == 1.0:
        w = np.zeros(t)
        w[-1] = float(t)
        return WeightVector(w, 1.0)
    log1m = math.log1p(-lam)
    age = np.arange(t - 1, -1, -1, dtype=float)
    denom = -math.expm1(t * log1m)
    w = t * lam * np.exp(age * log1m) / denom
    return WeightVector(w, float(lam))


def _as_arrays(data, w):
    if isinstance(data, tuple) and len(data) == 2 and isinstance(data[0], np.ndarray):
        y, X = data
    else:
        y, X = cases_to_arrays(data)
    w = w.w if isinstance(w, WeightVector) else np.asarray(w, dtype=float)
    if len(w) != len(y):
        raise DomainError(f"{len(w)} weights for {len(y)} cases")
    return y, np.asarray(X, dtype=float).reshape(len(y), -1), w


def _vec(params) -> np.ndarray:
    if isinstance(params, WeibullRegParams):
        return params.to_vector()
    return np.asarray(params, dtype=float)


def _parts(p, y, X):
    gam, eta, beta = p[0], p[1], p[2:]
    lin = X @ beta if beta.size else np.zeros(len(y))
    e = np.exp(lin)
    lny = np.log(y)
    yeta = np.exp(eta * lny)
    a = gam * yeta * e
    return gam, eta, lin, e, lny, yeta, a


def _loglik(p, y, X, w):
    if not (p[0] > 0 and p[1] > 0 and np.all(np.isfinite(p))):
        return -math.inf
    with np.errstate(over="ignore", invalid="ignore"):
        gam, eta, lin, e, lny, yeta, a = _parts(p, y, X)
        val = float(w @ (math.log(gam) + math.log(eta) + (eta - 1.0) * lny + lin - a))
    return val if math.isfinite(val) else -math.inf


def _score(p, y, X, w):
    gam, eta, lin, e, lny, yeta, a = _parts(p, y, X)
    one_m_a = 1.0 - a
    q = np.empty(2 + X.shape[1])
    q[0] = w @ (1.0 / gam - yeta * e)
    q[1] = w @ (1.0 / eta + lny * one_m_a)
    q[2:] = X.T @ (w * one_m_a)
    return q


def _hessian(p, y, X, w):
    gam, eta, lin, e, lny, yeta, a = _parts(p, y, X)
    k = 2 + X.shape[1]
    H = np.empty((k, k))
    sw = w.sum()
    wa = w * a
    H[0, 0] = -sw / gam**2
    H[0, 1] = -(w * yeta * e) @ lny
    H[0, 2:] = -X.T @ (w * yeta * e)
    H[1, 1] = -sw / eta**2 - wa @ lny**2
    H[1, 2:] = -X.T @ (wa * lny)
    H[2:, 2:] = -(X.T * wa) @ X
    il = np.tril_indices(k, -1)
    H[il] = H.T[il]
    return H


def weighted_loglik(params, data, w) -> float:
    """Weighted Weibull log-likelihood ``sum_i w_i * log f(y_i | x_i)``."""
    y, X, w = _as_arrays(data, w)
    val = _loglik(_vec(params), y, X, w)
    if not math.isfinite(val):
        raise NumericalError("weighted log-likelihood is not finite")
    return val


def score(params, data, w) -> np.ndarray:
    """Weighted score vector in the order (gamma, eta, beta...)."""
    y, X, w = _as_arrays(data, w)
    q = _score(_vec(params), y, X, w)
    if not np.all(np.isfinite(q)):
        raise NumericalError("score has non-finite entries")
    return q


def observed_hessian(params, data, w) -> np.ndarray:
    """Analytic Jacobian of :func:`score` with respect to (gamma, eta, beta)."""
    y, X, w = _as_arrays(data, w)
    H = _hessian(_vec(params), y, X, w)
    if not np.all(np.isfinite(H)):
        raise NumericalError("observed Hessian has non-finite entries")
    return H


# -- expectations --------------------------------------------------------


@dataclass(frozen=True)
class MomentSet:
    """Conditional expectations under the model at a single covariate vector.

    The first three entries are raw moments of ``Y**eta`` times powers of
    ``log Y``; the ``q_*`` entries are second moments of the per-case score
    components (unit weight).
    """

    E_Yeta: float
    E_Yeta_lnY: float
    E_Yeta_ln2Y: float
    E_qgamma2: float
    E_qeta2: float
    E_qgamma_qeta: float
    E_qgamma_qbeta: np.ndarray = field(default_factory=lambda: np.empty(0))
    E_qeta_qbeta: np.ndarray = field(default_factory=lambda: np.empty(0))
    E_qbeta_qbeta: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))


def expected_moments(params: WeibullRegParams, x=()) -> MomentSet:
    """Closed-form moments via ``Y**eta ~ Exponential(theta)``.

    With ``k = 1 - c - ln(theta)`` (``c`` Euler's constant):
    ``E[Y^eta] = 1/theta``, ``E[Y^eta ln Y] = k/(eta*theta)`` and
    ``E[Y^eta ln^2 Y] = (psi'(2) + k^2)/(eta^2*theta)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (params.d,):
        raise DomainError(f"covariate vector has length {x.size}, model expects {params.d}")
    gam, eta = params.gamma, params.eta
    lin = float(np.dot(params.beta, x)) if params.d else 0.0
    ln_theta = math.log(gam) + lin
    theta = math.exp(ln_theta)
    k = 1.0 - EULER_GAMMA - ln_theta
    return MomentSet(
        E_Yeta=1.0 / theta,
        E_Yeta_lnY=k / (eta * theta),
        E_Yeta_ln2Y=(TRIGAMMA_2 + k * k) / (eta**2 * theta),
        E_qgamma2=1.0 / gam**2,
        E_qeta2=(PI2_6 + k * k) / eta**2,
        E_qgamma_qeta=k / (gam * eta),
        E_qgamma_qbeta=x / gam,
        E_qeta_qbeta=x * k / eta,
        E_qbeta_qbeta=np.outer(x, x),
    )


def _case_moments(p, X):
    gam, eta, beta = p[0], p[1], p[2:]
    lin = X @ beta if beta.size else np.zeros(X.shape[0])
    ln_theta = math.log(gam) + lin
    k = 1.0 - EULER_GAMMA - ln_theta
    return gam, eta, lin, ln_theta, k


def expected_hessian(params, data, w) -> np.ndarray:
    """Expected Jacobian of the weighted score at ``params``.

    Assembled entry by entry from ``E[Y^eta]``, ``E[Y^eta ln Y]`` and
    ``E[Y^eta ln^2 Y]`` of each case, scaled by ``w_i * exp(beta'x_i)``.
    """
    y, X, w = _as_arrays(data, w)
    p = _vec(params)
    gam, eta, lin, ln_theta, k = _case_moments(p, X)
    theta = np.exp(ln_theta)
    e = np.exp(lin)
    m0 = 1.0 / theta
    m1 = k / (eta * theta)
    m2 = (TRIGAMMA_2 + k * k) / (eta**2 * theta)
    we = w * e
    d = X.shape[1]
    G = np.empty((d + 2, d + 2))
    G[0, 0] = -np.sum(we * np.exp(-lin)) / gam**2
    G[0, 1] = -we @ m1
    G[0, 2:] = -X.T @ (we * m0)
    G[1, 1] = -np.sum(we * (np.exp(-lin) / eta**2 + gam * m2))
    G[1, 2:] = -X.T @ (we * gam * m1)
    G[2:, 2:] = -(X.T * (we * gam * m0)) @ X
    il = np.tril_indices(d + 2, -1)
    G[il] = G.T[il]
    if not np.all(np.isfinite(G)):
        raise NumericalError("expected Hessian has non-finite entries")
    return G


def information_matrix(params, data, w) -> np.ndarray:
    """Expected outer product of the weighted score, ``sum_i w_i^2 E[q_i q_i']``."""
    y, X, w = _as_arrays(data, w)
    p = _vec(params)
    gam, eta, lin, ln_theta, k = _case_moments(p, X)
    w2 = w * w
    d = X.shape[1]
    O = np.empty((d + 2, d + 2))
    O[0, 0] = w2.sum() / gam**2
    O[0, 1] = (w2 @ k) / (gam * eta)
    O[0, 2:] = (X.T @ w2) / gam
    O[1, 1] = (w2 @ (PI2_6 + k * k)) / eta**2
    O[1, 2:] = (X.T @ (w2 * k)) / eta
    O[2:, 2:] = (X.T * w2) @ X
    il = np.tril_indices(d + 2, -1)
    O[il] = O.T[il]
    if not np.all(np.isfinite(O)):
        raise NumericalError("information matrix has non-finite entries")
    return O


def sandwich_cov(gamma_mat, omega_mat, cond_limit: float = 1e12) -> np.ndarray:
    """``inv(G) @ Omega @ inv(G)``, symmetrised."""
    gamma_mat = np.asarray(gamma_mat, dtype=float)
    omega_mat = np.asarray(omega_mat, dtype=float)
    cond = np.linalg.cond(gamma_mat)
    if not np.isfinite(cond) or cond > cond_limit:
        raise NumericalError(f"expected Hessian is ill-conditioned (cond={cond:.3g})", condition=cond)
    A = np.linalg.solve(gamma_mat, omega_mat)
    S = np.linalg.solve(gamma_mat, A.T).T
    return 0.5 * (S + S.T)


# -- solver --------------------------------------------------------------


def initial_params(y, X, w) -> np.ndarray:
    """Exponential-model start: eta=1, beta=0, gamma = 1/weighted mean(y)."""
    p = np.zeros(2 + X.shape[1])
    p[0] = w.sum() / (w @ y)
    p[1] = 1.0
    return p


def _newton_direction(Hphi, gphi, cond_limit):
    # ascent direction from (-H + mu*I) d = g, growing mu until -H + mu*I is PD
    A = -Hphi
    scale = max(np.max(np.abs(np.diag(A))), 1e-12)
    mu = 0.0
    for _ in range(60):
        M = A + mu * np.eye(len(gphi))
        try:
            L = np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            mu = scale * 1e-8 if mu == 0.0 else mu * 10.0
            continue
        dl = np.diag(L)
        if (dl.max() / dl.min()) ** 2 > cond_limit:
            mu = scale * 1e-8 if mu == 0.0 else mu * 10.0
            continue
        z = np.linalg.solve(L, gphi)
        return np.linalg.solve(L.T, z)
    raise NumericalError("Newton system stayed singular after regularisation")


def solve_wee(y, X, w, init=None, opts: SolverOptions = SolverOptions(), callback=None):
    """Safeguarded Newton on ``(ln gamma, ln eta, beta)``.

    Returns ``(p, score_norm, converged, iterations, loglik)`` on the natural
    scale. Steps are halved until the weighted log-likelihood does not drop
    (beyond rounding). ``callback(iteration, p, loglik)`` sees every
    accepted iterate, starting with iteration 0.
    """
    p = initial_params(y, X, w) if init is None else np.array(init, dtype=float)
    phi = p.copy()
    phi[:2] = np.log(p[:2])

    def natural(ph):
        q = ph.copy()
        # trial steps may overflow; _loglik rejects the resulting inf
        with np.errstate(over="ignore"):
            q[:2] = np.exp(ph[:2])
        return q

    p = natural(phi)
    ll = _loglik(p, y, X, w)
    if not math.isfinite(ll):
        p = initial_params(y, X, w)
        phi = p.copy()
        phi[:2] = np.log(p[:2])
        ll = _loglik(p, y, X, w)
    q = _score(p, y, X, w)
    qn = float(np.max(np.abs(q)))
    it = 0
    if callback is not None:
        callback(0, p, ll)
    stalled = 0
    while qn > opts.tol and it < opts.max_iter:
        it += 1
        J = np.ones_like(p)
        J[:2] = p[:2]
        g = J * q
        H = _hessian(p, y, X, w) * np.outer(J, J)
        H[0, 0] += J[0] * q[0]
        H[1, 1] += J[1] * q[1]
        step = _newton_direction(H, g, opts.cond_limit)
        s = 1.0
        slack = 1e-12 * max(1.0, abs(ll))
        for _ in range(opts.max_halvings + 1):
            phi_new = phi + s * step
            p_new = natural(phi_new)
            ll_new = _loglik(p_new, y, X, w)
            if math.isfinite(ll_new) and ll_new >= ll - slack:
                break
            s *= 0.5
        else:
            break
        q_new = _score(p_new, y, X, w)
        qn_new = float(np.max(np.abs(q_new)))
        # near the root the likelihood is flat to rounding; stop when nothing moves
        if qn_new >= qn and ll_new <= ll + slack:
            stalled += 1
        else:
            stalled = 0
        phi, p, ll, q, qn = phi_new, p_new, ll_new, q_new, qn_new
        if callback is not None:
            callback(it, p, ll)
        if stalled >= 3:
            break
    return p, qn, qn <= opts.tol, it, ll


def fit_wee(
    data,
    lam: float,
    init: Optional[WeibullRegParams] = None,
    opts: SolverOptions = SolverOptions(),
    w: Optional[WeightVector] = None,
) -> FitResult:
    """Fit the Weibull regression by weighted estimating equations.

    Parameters
    ----------
    data : sequence of CaseRecord, or ``(y, X)`` arrays
        Cases in chronological order.
    lam : float
        Smoothing constant in (0, 1]; tiny values give the ordinary MLE.
    init : WeibullRegParams, optional
        Starting values (warm start); defaults to the exponential-model start.
    opts : SolverOptions
        Tolerance on the sup-norm of the score and iteration limits.
    w : WeightVector, optional
        Override the exponential weights (length must match the data).

    Returns
    -------
    FitResult
        Non-convergence is reported through ``converged`` rather than raised.
    """
    if isinstance(data, tuple) and len(data) == 2 and isinstance(data[0], np.ndarray):
        y, X = data
        X = np.asarray(X, dtype=float).reshape(len(y), -1)
    else:
        y, X = cases_to_arrays(data)
    t, d = len(y), X.shape[1]
    if t < d + 3:
        raise InsufficientDataError(f"need at least {d + 3} cases for {d} covariates, got {t}")
    if w is None:
        w = weights(t, lam)
    wv = w.w if isinstance(w, WeightVector) else np.asarray(w, dtype=float)
    init_vec = None if init is None else _vec(init)
    if init_vec is not None and init_vec.size != d + 2:
        raise DomainError("initial parameter vector has the wrong dimension")
    p, qn, conv, it, ll = solve_wee(y, X, wv, init_vec, opts)
    if not conv and init_vec is not None:
        # a poor warm start can strand the iteration; retry from the default start
        p2, qn2, conv2, it2, ll2 = solve_wee(y, X, wv, None, opts)
        if conv2 or qn2 < qn:
            p, qn, conv, it, ll = p2, qn2, conv2, it + it2, ll2
    params = WeibullRegParams.from_vector(p)
    G = expected_hessian(p, (y, X), wv)
    O = information_matrix(p, (y, X), wv)
    sigma = sandwich_cov(G, O, opts.cond_limit)
    return FitResult(
        params=params,
        sigma=sigma,
        score_norm=qn,
        converged=bool(conv),
        iterations=it,
        n_cases=t,
        lam=float(lam),
        loglik=ll,
        message="" if conv else "score tolerance not reached",
    )
