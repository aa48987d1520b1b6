"""Monte-Carlo operating characteristics of the SLCA and LC-CUSUM detectors.

Two trainee scenarios are simulated: persistently inadequate performance
(``gamma_N = 0.05``, twice the standard's mean time when shapes and
coefficients are shared) and a learning trajectory where ``gamma_N`` rises
linearly from 0.05 to the standard's 0.2 at case 51.

Each replication draws its own generator from ``(seed, rep, mode)``, so
results do not depend on execution order or on how many workers run.
Detector statistics are stored as per-case paths; operating characteristics
for any cutoff ``h`` are then read off the paths without resimulating.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .cpm import CpmConfig, cpm_point, grad_relative_risk
from .errors import DomainError, NumericalError
from .lccusum import cusum_path, reference_level
from .model import CaseRecord, WeibullRegParams, relative_risk, sample_array
from .wee import SolverOptions, expected_hessian, information_matrix, sandwich_cov, solve_wee, weights

log = logging.getLogger(__name__)

MODES = ("inadequate", "learning")
_MODE_ID = {"inadequate": 0, "learning": 1}


class Detector(str, Enum):
    SLCA = "SLCA"
    LCCUSUM = "LCCUSUM"


# -- trajectories and covariates -----------------------------------------


def gamma_learning(i) -> float:
    """Learning trajectory: ``0.05 + 0.003*(i-1)`` up to case 51, then 0.2."""
    if i < 1:
        raise DomainError("case index starts at 1")
    return 0.05 + 0.003 * (i - 1) if i <= 51 else 0.2


def gamma_inadequate(i) -> float:
    return 0.05


class UniformIntegerSampler:
    """Integers drawn uniformly from ``{low, ..., high}``."""

    def __init__(self, low: int = 13, high: int = 56):
        self.low, self.high = int(low), int(high)

    def draw(self, rng, n):
        return rng.integers(self.low, self.high + 1, size=(n, 1)).astype(float)

    def describe(self):
        return {"kind": "uniform", "low": self.low, "high": self.high}


class QuantileSampler:
    """Inverse-CDF sampling from a piecewise-linear quantile function.

    The default knots pin the support ``[13, 56]`` and the BMI quartiles
    quoted for the colorectal cohort (25th 23, median 27, 90th 37.5);
    draws are rounded to whole BMI units.
    """

    def __init__(self, probs=(0.0, 0.25, 0.5, 0.9, 1.0), values=(13.0, 23.0, 27.0, 37.5, 56.0), round_to_int=True):
        probs = np.asarray(probs, dtype=float)
        values = np.asarray(values, dtype=float)
        if probs[0] != 0.0 or probs[-1] != 1.0 or np.any(np.diff(probs) <= 0) or np.any(np.diff(values) < 0):
            raise DomainError("quantile knots must be increasing and span [0, 1]")
        self.probs, self.values, self.round_to_int = probs, values, bool(round_to_int)

    def draw(self, rng, n):
        x = np.interp(rng.random(n), self.probs, self.values)
        if self.round_to_int:
            x = np.round(x)
        return x.reshape(n, 1)

    def describe(self):
        return {"kind": "quantile", "probs": self.probs.tolist(), "values": self.values.tolist(), "round": self.round_to_int}


class EmpiricalSampler:
    """Resample rows of an observed covariate matrix with replacement."""

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        self.values = values.reshape(len(values), -1)
        if len(self.values) == 0:
            raise DomainError("empirical covariate sample is empty")

    def draw(self, rng, n):
        return self.values[rng.integers(0, len(self.values), size=n)]

    def describe(self):
        return {"kind": "empirical", "n": int(len(self.values))}


def make_sampler(kind: str = "quantile", values=None):
    if kind == "uniform":
        return UniformIntegerSampler()
    if kind == "quantile":
        return QuantileSampler()
    if kind == "empirical":
        if values is None:
            raise DomainError("empirical sampler needs covariate values")
        return EmpiricalSampler(values)
    raise DomainError(f"unknown covariate sampler {kind!r}")


# -- scenario ------------------------------------------------------------


SIM_STANDARD = WeibullRegParams(0.2, 2.0, (-0.05,))


@dataclass(frozen=True)
class ScenarioSpec:
    """Simulation design; defaults reproduce the comparison study setup."""

    t: int = 100
    standard: WeibullRegParams = SIM_STANDARD
    eta_n: float = 2.0
    beta_n: tuple = (-0.05,)
    gamma_trajectory: Callable[[int], float] = gamma_learning
    gamma_inadequate: float = 0.05
    covariate_sampler: object = field(default_factory=QuantileSampler)
    x_eval: tuple = (27.0,)
    lam: float = 0.05
    epsilon: float = 0.2
    change_index: int = 30
    n0: int = 5

    def __post_init__(self):
        if self.t < 1:
            raise DomainError("horizon t must be positive")
        for i in range(1, self.t + 1):
            if not self.gamma_trajectory(i) > 0:
                raise DomainError(f"gamma trajectory is not positive at case {i}")
        object.__setattr__(self, "x_eval", tuple(np.atleast_1d(np.asarray(self.x_eval, dtype=float)).tolist()))
        object.__setattr__(self, "beta_n", tuple(np.atleast_1d(np.asarray(self.beta_n, dtype=float)).tolist()))

    def gammas(self, mode: str) -> np.ndarray:
        if mode == "inadequate":
            return np.full(self.t, float(self.gamma_inadequate))
        if mode == "learning":
            return np.array([self.gamma_trajectory(i) for i in range(1, self.t + 1)])
        raise DomainError(f"unknown mode {mode!r}")

    def true_relative_risk(self, mode: str) -> np.ndarray:
        x = self.x_eval
        return np.array(
            [relative_risk(WeibullRegParams(g, self.eta_n, self.beta_n), self.standard, x) for g in self.gammas(mode)]
        )


def replication_rng(seed: int, rep: int, mode: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(rep), _MODE_ID[mode]])


def simulate_arrays(spec: ScenarioSpec, mode: str, seed: int, rep: int = 0):
    """Return ``(y, X)`` for one replication; deterministic in ``(seed, rep, mode)``."""
    rng = replication_rng(seed, rep, mode)
    X = spec.covariate_sampler.draw(rng, spec.t)
    u = rng.random(spec.t)
    # u == 0 has probability 2**-53 per draw; map it inside (0, 1)
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    y = sample_array(spec.gammas(mode), spec.eta_n, spec.beta_n, X, u)
    return y, X


def simulate_stream(spec: ScenarioSpec, mode: str, seed: int, rep: int = 0):
    y, X = simulate_arrays(spec, mode, seed, rep)
    return [CaseRecord(i + 1, float(y[i]), tuple(X[i])) for i in range(len(y))]


# -- detector paths ------------------------------------------------------


def slca_cpm_path(y, X, spec: ScenarioSpec, lam: Optional[float] = None, cfg: Optional[CpmConfig] = None) -> np.ndarray:
    """CPM point estimates at ``x_eval`` for cases 1..t (NaN when not evaluable).

    Uses the same warm-started WEE fits as :func:`learncurve.slca.run_slca`
    but skips the interval computations that the detector does not need.
    """
    lam = spec.lam if lam is None else lam
    cfg = CpmConfig.noninferiority(spec.epsilon) if cfg is None else cfg
    t, d = X.shape
    n0 = max(spec.n0, d + 3)
    out = np.full(t, np.nan)
    warm = None
    opts = SolverOptions()
    for i in range(n0, t + 1):
        w = weights(i, lam).w
        yi, Xi = y[:i], X[:i]
        try:
            p, qn, conv, _, _ = solve_wee(yi, Xi, w, warm, opts)
            if not conv and warm is not None:
                p, qn, conv, _, _ = solve_wee(yi, Xi, w, None, opts)
            if not conv:
                continue
            S = sandwich_cov(expected_hessian(p, (yi, Xi), w), information_matrix(p, (yi, Xi), w))
        except NumericalError:
            continue
        warm = p
        params = WeibullRegParams.from_vector(p)
        g = grad_relative_risk(params, spec.standard, spec.x_eval)
        var = float(g @ S @ g)
        if not var > 0:
            continue
        r = relative_risk(params, spec.standard, spec.x_eval)
        out[i - 1] = cpm_point(r, math.sqrt(var), cfg)
    return out


def cusum_stat_path(y, spec: ScenarioSpec) -> np.ndarray:
    """``|s_i|`` for cases 1..t."""
    ref, scale = reference_level(spec.standard, spec.x_eval, spec.epsilon)
    return np.abs(cusum_path((np.asarray(y) - ref) / scale)[1:])


def first_crossing(paths: np.ndarray, h: float, detector: Detector) -> np.ndarray:
    """1-based first signal index per row, ``0`` when the detector never signals."""
    paths = np.atleast_2d(paths)
    with np.errstate(invalid="ignore"):
        hit = paths >= h if Detector(detector) is Detector.SLCA else paths > h
    hit = np.where(np.isnan(paths), False, hit)
    any_hit = hit.any(axis=1)
    return np.where(any_hit, hit.argmax(axis=1) + 1, 0)


def _paths_chunk(args):
    detector, spec, mode, seed, reps, lams = args
    rows = {lam: [] for lam in lams}
    for r in reps:
        y, X = simulate_arrays(spec, mode, seed, r)
        for lam in lams:
            if detector is Detector.SLCA:
                rows[lam].append(slca_cpm_path(y, X, spec, lam))
            else:
                rows[lam].append(cusum_stat_path(y, spec))
    return rows


def detector_paths(detector, spec: ScenarioSpec, mode: str, reps: int, seed: int, workers: int = 1, lams=None):
    """Statistic paths, shape ``(reps, t)``, for one mode.

    With ``lams`` given (SLCA only) the same streams are reused for every
    smoothing constant and a dict ``lam -> paths`` is returned.
    """
    detector = Detector(detector)
    if reps < 1:
        raise DomainError("reps must be at least 1")
    single = lams is None
    lams = (spec.lam,) if single else tuple(lams)
    if detector is Detector.LCCUSUM:
        lams = lams[:1]
    rep_ids = np.arange(reps)
    if workers > 1:
        chunks = np.array_split(rep_ids, workers * 4)
        jobs = [(detector, spec, mode, seed, c.tolist(), lams) for c in chunks if len(c)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_paths_chunk, jobs))
    else:
        parts = [_paths_chunk((detector, spec, mode, seed, rep_ids.tolist(), lams))]
    out = {lam: np.vstack([np.asarray(p[lam]).reshape(-1, spec.t) for p in parts]) for lam in lams}
    return out[lams[0]] if single else out


# -- operating characteristics -------------------------------------------


@dataclass(frozen=True)
class Estimate:
    p: float
    se: float
    n: int

    def to_dict(self):
        return {"p": self.p, "se": self.se, "n": self.n}


def _estimate(k, n) -> Estimate:
    if n == 0:
        return Estimate(float("nan"), float("nan"), 0)
    p = k / n
    return Estimate(p, math.sqrt(p * (1 - p) / n), int(n))


@dataclass(frozen=True)
class OcResult:
    detector: Detector
    h: float
    reps: int
    pfa: Estimate
    psd: Dict[int, Estimate]
    excluded: int = 0
    conditional: bool = True

    def to_dict(self):
        return {
            "detector": Detector(self.detector).value,
            "h": self.h,
            "reps": self.reps,
            "pfa": self.pfa.to_dict(),
            "psd": {str(k): v.to_dict() for k, v in self.psd.items()},
            "excluded_early_signals": self.excluded,
            "psd_conditional": self.conditional,
        }


def pfa_from_paths(paths, h, detector, t=None) -> Estimate:
    sig = first_crossing(paths, h, detector)
    horizon = paths.shape[1] if t is None else t
    return _estimate(int(np.sum((sig > 0) & (sig <= horizon))), len(sig))


def psd_from_paths(paths, h, detector, change_index, windows=(20, 50, 70), conditional=True):
    """Probability of signalling in ``(change_index, change_index + w]``.

    ``conditional=True`` drops replications that signalled at or before
    ``change_index`` from the denominator. ``conditional=False`` keeps them
    as failures (unconditional scaling).
    Returns ``(estimates, n_excluded)``.
    """
    sig = first_crossing(paths, h, detector)
    early = (sig > 0) & (sig <= change_index)
    t = paths.shape[1]
    out = {}
    for wdw in windows:
        if change_index + wdw > t:
            raise DomainError(f"window {wdw} runs past the horizon {t}")
        hit = (sig > change_index) & (sig <= change_index + wdw)
        if conditional:
            n = int(np.sum(~early))
            if n == 0:
                raise DomainError(f"no qualifying replications: all {len(sig)} signalled early")
            out[int(wdw)] = _estimate(int(np.sum(hit)), n)
        else:
            out[int(wdw)] = _estimate(int(np.sum(hit)), len(sig))
    return out, int(np.sum(early))


def estimate_pfa(detector, spec: ScenarioSpec, h: float, reps: int, seed: int, workers: int = 1) -> Estimate:
    """Fraction of inadequate-performance runs that signal by the horizon."""
    paths = detector_paths(detector, spec, "inadequate", reps, seed, workers)
    return pfa_from_paths(paths, h, detector)


def estimate_psd(
    detector,
    spec: ScenarioSpec,
    h: float,
    reps: int,
    windows=(20, 50, 70),
    seed: int = 0,
    conditional: bool = True,
    workers: int = 1,
):
    paths = detector_paths(detector, spec, "learning", reps, seed, workers)
    est, _ = psd_from_paths(paths, h, detector, spec.change_index, windows, conditional)
    return est


def oc_from_paths(detector, h, inadequate, learning, change_index, windows=(20, 50, 70), conditional=True) -> OcResult:
    pfa = pfa_from_paths(inadequate, h, detector)
    psd, excluded = psd_from_paths(learning, h, detector, change_index, windows, conditional)
    return OcResult(Detector(detector), float(h), int(inadequate.shape[0]), pfa, psd, excluded, conditional)


def operating_characteristics(
    detector,
    spec: ScenarioSpec,
    h: float,
    reps: int,
    seed: int = 0,
    windows=(20, 50, 70),
    conditional: bool = True,
    workers: int = 1,
) -> OcResult:
    inad = detector_paths(detector, spec, "inadequate", reps, seed, workers)
    learn = detector_paths(detector, spec, "learning", reps, seed, workers)
    return oc_from_paths(detector, h, inad, learn, spec.change_index, windows, conditional)


@dataclass(frozen=True)
class Calibration:
    h: float
    pfa: Estimate
    trace: Tuple[Tuple[float, float], ...]

    def to_dict(self):
        return {"h": self.h, "pfa": self.pfa.to_dict(), "trace": [list(s) for s in self.trace]}


def calibrate_from_paths(detector, paths, target=(0.03, 0.07), bounds=None, max_iter=60) -> Calibration:
    """Bisect ``h`` until the PFA lands in ``target``.

    PFA is nonincreasing in ``h`` for both detectors, so bisection on the
    midpoint of the target range is safe. Raises with the bracketing values
    when the range cannot be hit.
    """
    detector = Detector(detector)
    lo_t, hi_t = target
    if not (0.0 < lo_t <= hi_t < 1.0):
        raise DomainError("target PFA range must be a nonempty subset of (0, 1)")
    if bounds is None:
        bounds = (1e-6, 1.0 - 1e-9) if detector is Detector.SLCA else (1e-6, 100.0)
    a, b = bounds
    pa, pb = pfa_from_paths(paths, a, detector).p, pfa_from_paths(paths, b, detector).p
    trace = [(a, pa), (b, pb)]
    if pa < lo_t or pb > hi_t:
        raise DomainError(f"target {target} not bracketed: PFA({a})={pa}, PFA({b})={pb}")
    mid_t = 0.5 * (lo_t + hi_t)
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        est = pfa_from_paths(paths, m, detector)
        trace.append((m, est.p))
        if lo_t <= est.p <= hi_t and abs(est.p - mid_t) <= 0.5 * (hi_t - lo_t) * 0.5:
            return Calibration(m, est, tuple(trace))
        if est.p > mid_t:
            a = m
        else:
            b = m
    for h, p in reversed(trace):
        if lo_t <= p <= hi_t:
            return Calibration(h, pfa_from_paths(paths, h, detector), tuple(trace))
    raise DomainError(f"bisection failed to reach PFA in {target}; last bracket ({a}, {b})")


def calibrate_h(detector, spec: ScenarioSpec, target=(0.03, 0.07), reps: int = 2000, seed: int = 0, bounds=None, workers: int = 1) -> Calibration:
    paths = detector_paths(detector, spec, "inadequate", reps, seed, workers)
    return calibrate_from_paths(detector, paths, target, bounds)
