"""Sequential learning-curve assessment.

At every case ``i`` past a warm-up the trainee model is refitted by WEE on
cases ``1..i`` (warm-started from the previous fit), and the RMOT, the
relative risk to the standard and the CPM are reported with intervals.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .cpm import CpmConfig, IntervalEstimate, cpm_aci, relative_risk_interval, rmot_interval
from .errors import DomainError, NumericalError
from .model import CaseRecord, WeibullRegParams, cases_to_arrays
from .wee import FitResult, SolverOptions, fit_wee

log = logging.getLogger(__name__)

DEFAULT_N0 = 10


@dataclass(frozen=True)
class SlcaPoint:
    index: int
    fit_ok: bool
    mu: Optional[IntervalEstimate] = None
    r: Optional[IntervalEstimate] = None
    cpm: Optional[IntervalEstimate] = None
    clamped: bool = False
    fit: Optional[FitResult] = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class SlcaSeries:
    x_eval: tuple
    lam: float
    cfg: CpmConfig
    points: tuple
    expertise_time: Optional[int] = None
    warning: Optional[str] = None

    def cpm_points(self) -> np.ndarray:
        return np.array([p.cpm.point if p.fit_ok else np.nan for p in self.points])

    @property
    def indices(self) -> np.ndarray:
        return np.array([p.index for p in self.points])


def expertise_time(points: Sequence, cutoff: float, persistence: int = 1) -> Optional[int]:
    """First index whose CPM stays at or above ``cutoff`` for ``persistence`` evaluated points.

    ``points`` may be :class:`SlcaPoint` objects or ``(index, cpm)`` pairs;
    not-evaluable points break a run.
    """
    if persistence < 1:
        raise DomainError("persistence must be at least 1")
    pairs = []
    for p in points:
        if isinstance(p, SlcaPoint):
            pairs.append((p.index, p.cpm.point if p.fit_ok else None))
        else:
            pairs.append((p[0], p[1]))
    run = 0
    for pos, (idx, val) in enumerate(pairs):
        if val is not None and val >= cutoff:
            run += 1
            if run == persistence:
                return pairs[pos - persistence + 1][0]
        else:
            run = 0
    return None


def run_slca(
    cases: Sequence[CaseRecord],
    standard: Union[WeibullRegParams, FitResult],
    lam: float,
    cfg: CpmConfig,
    x_eval=(),
    n0: int = DEFAULT_N0,
    persistence: int = 1,
    opts: SolverOptions = SolverOptions(),
) -> SlcaSeries:
    """Run the sequential assessment over ``cases``.

    A known standard contributes only its point values; a fitted standard
    (``FitResult``) also contributes its covariance to the relative-risk and
    CPM uncertainty.
    """
    idx = [c.index for c in cases]
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise DomainError("cases must be ordered by strictly increasing index")
    y, X = cases_to_arrays(cases)
    d = X.shape[1] if len(cases) else 0
    std_params = standard.params if isinstance(standard, FitResult) else standard
    if std_params.d != d and len(cases):
        raise DomainError(f"standard model has {std_params.d} covariates, data has {d}")
    x_eval = tuple(np.atleast_1d(np.asarray(x_eval, dtype=float)).tolist())
    if len(x_eval) != std_params.d:
        raise DomainError("x_eval dimension does not match the model")
    n0 = max(int(n0), d + 3)

    points = []
    warm = None
    last_ok = True
    for i in range(1, len(cases) + 1):
        if i < n0:
            points.append(SlcaPoint(idx[i - 1], False))
            continue
        try:
            fit = fit_wee((y[:i], X[:i]), lam, init=warm, opts=opts)
        except NumericalError as exc:
            log.debug("fit at case %s failed: %s", idx[i - 1], exc)
            points.append(SlcaPoint(idx[i - 1], False))
            last_ok = False
            continue
        if not fit.converged:
            points.append(SlcaPoint(idx[i - 1], False, fit=fit))
            last_ok = False
            continue
        warm = fit.params
        try:
            mu = rmot_interval(fit, x_eval, cfg.alpha)
            r = relative_risk_interval(fit, standard, x_eval, cfg.alpha)
            c = cpm_aci(fit, standard, x_eval, cfg)
        except NumericalError as exc:
            log.debug("interval at case %s failed: %s", idx[i - 1], exc)
            points.append(SlcaPoint(idx[i - 1], False, fit=fit))
            last_ok = False
            continue
        points.append(SlcaPoint(idx[i - 1], True, mu, r, c, c.clamped, fit))
        last_ok = True

    message = None
    if points and not last_ok:
        message = "final fit did not converge"
        warnings.warn(message, RuntimeWarning, stacklevel=2)
    return SlcaSeries(
        x_eval=x_eval,
        lam=float(lam),
        cfg=cfg,
        points=tuple(points),
        expertise_time=expertise_time(points, cfg.cutoff, persistence),
        warning=message,
    )
