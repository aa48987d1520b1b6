"""Risk-adjusted surgical learning-curve assessment.

Weibull regression of operative times, exponentially weighted estimating
equations with sandwich covariance, comparative probability metrics,
a risk-adjusted LC-CUSUM, and a Monte-Carlo operating-characteristic engine.
"""

from .model import CaseRecord, WeibullRegParams, pdf, rate, relative_risk, rmot, sample, sd
from .wee import FitResult, WeightVector, fit_wee, sandwich_cov, weights
from .cpm import CpmConfig, IntervalEstimate, cpm_aci, cpm_point, sigma_mu, sigma_r, sigma_r_joint
from .slca import SlcaPoint, SlcaSeries, expertise_time, run_slca
from .lccusum import CusumTrace, residual, run_lc_cusum

__version__ = "0.1.0"

__all__ = [
    "CaseRecord",
    "WeibullRegParams",
    "pdf",
    "rate",
    "relative_risk",
    "rmot",
    "sample",
    "sd",
    "FitResult",
    "WeightVector",
    "fit_wee",
    "sandwich_cov",
    "weights",
    "CpmConfig",
    "IntervalEstimate",
    "cpm_aci",
    "cpm_point",
    "sigma_mu",
    "sigma_r",
    "sigma_r_joint",
    "SlcaPoint",
    "SlcaSeries",
    "expertise_time",
    "run_slca",
    "CusumTrace",
    "residual",
    "run_lc_cusum",
]
