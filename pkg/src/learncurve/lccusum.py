"""Risk-adjusted LC-CUSUM for Weibull operative times.

Each outcome is standardised against the standard's expected time at the
monitored covariate value, shifted to the midpoint ``mu_S(x)*(1 + eps/2)``
between adequate and acceptably-worse performance. The statistic is the
lower one-sided CUSUM ``s_i = min(0, s_{i-1} + v_i)`` and signals once
``|s_i| > h``, meaning the trainee looks adequate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError
from .model import CaseRecord, WeibullRegParams, rmot, sd


@dataclass(frozen=True)
class CusumTrace:
    s: np.ndarray  # s[0] = 0
    v: np.ndarray
    signal_index: Optional[int]
    h: float
    epsilon: float
    x_eval: tuple


def reference_level(standard: WeibullRegParams, x, epsilon: float):
    """Return ``(mu_S(x) * (1 + eps/2), SD(Y_S | x))``."""
    return rmot(standard, x) * (1.0 + epsilon / 2.0), sd(standard, x)


def residual(y: float, standard: WeibullRegParams, x, epsilon: float) -> float:
    if not y > 0:
        raise DomainError(f"y must be positive, got {y}")
    ref, scale = reference_level(standard, x, epsilon)
    return (y - ref) / scale


def cusum_path(v) -> np.ndarray:
    """``s_0 = 0, s_i = min(0, s_{i-1} + v_i)``; returns ``len(v) + 1`` values."""
    s = np.zeros(len(v) + 1)
    acc = 0.0
    for i, vi in enumerate(v, start=1):
        acc = min(0.0, acc + vi)
        s[i] = acc
    return s


def first_signal(s, h: float) -> Optional[int]:
    """1-based position of the first ``|s_i| > h`` (``s[0]`` is skipped)."""
    hits = np.flatnonzero(np.abs(s[1:]) > h)
    return int(hits[0]) + 1 if hits.size else None


def run_lc_cusum(
    cases: Sequence[CaseRecord],
    standard: WeibullRegParams,
    epsilon: float,
    h: float,
    x_eval=(),
) -> CusumTrace:
    """Run the detector over ``cases``; the trace continues past the first signal.

    ``signal_index`` is the case index of the first signal, ``None`` if the
    statistic never crosses ``h``.
    """
    if not h > 0:
        raise DomainError("h must be positive")
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    ref, scale = reference_level(standard, x_eval, epsilon)
    y = np.array([c.y for c in cases], dtype=float)
    v = (y - ref) / scale
    s = cusum_path(v)
    pos = first_signal(s, h)
    return CusumTrace(
        s=s,
        v=v,
        signal_index=None if pos is None else cases[pos - 1].index,
        h=float(h),
        epsilon=float(epsilon),
        x_eval=tuple(np.atleast_1d(np.asarray(x_eval, dtype=float)).tolist()),
    )
