"""Static SVG figures for SLCA and LC-CUSUM runs.

Reference lines carry stable ``gid`` values (``cutoff-line``,
``delta-lower``, ``delta-upper``, ``standard-rmot``, ``h-line``) so the
emitted SVG can be inspected programmatically.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .lccusum import CusumTrace  # noqa: E402
from .slca import SlcaSeries  # noqa: E402

_SVG_META = {"Date": None, "Creator": None}


def _save(fig, path) -> None:
    with plt.rc_context({"svg.hashsalt": "learncurve", "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def _band(ax, i, est, color, label):
    ok = ~np.isnan(est[0])
    ax.plot(i[ok], est[0][ok], color=color, lw=1.2, label=label)
    ax.fill_between(i[ok], est[1][ok], est[2][ok], color=color, alpha=0.2, lw=0)


def _hline(ax, y, gid, label, **kw):
    (line,) = ax.plot([0, 1], [y, y], transform=ax.get_yaxis_transform(), label=label, **kw)
    line.set_gid(gid)
    return line


def series_arrays(series: SlcaSeries):
    """``(i, mu, r, cpm)``; each metric is a 3-row array (point, lower, upper), NaN when not evaluable."""
    i = series.indices
    out = []
    for attr in ("mu", "r", "cpm"):
        a = np.full((3, len(i)), np.nan)
        for k, p in enumerate(series.points):
            if p.fit_ok:
                iv = getattr(p, attr)
                a[:, k] = (iv.point, iv.lower, iv.upper)
        out.append(a)
    return (i, *out)


def plot_track(series: SlcaSeries, standard_rmot: float, path) -> None:
    """Three stacked panels: RMOT, relative risk and CPM against case number."""
    cfg = series.cfg
    i, mu, r, cpm = series_arrays(series)
    fig, axes = plt.subplots(3, 1, figsize=(7, 8), sharex=True)

    ax = axes[0]
    _band(ax, i, mu, "tab:blue", "trainee")
    _hline(ax, standard_rmot, "standard-rmot", "standard", color="k", ls="--", lw=1)
    ax.set_ylabel("mean operative time (h)")
    ax.legend(loc="upper right", fontsize=8)

    ax = axes[1]
    _band(ax, i, r, "tab:orange", "relative risk")
    if cfg.delta_l > 0:
        _hline(ax, cfg.delta_l, "delta-lower", f"lower bound {cfg.delta_l:.3g}", color="grey", ls=":", lw=1)
    if math.isfinite(cfg.delta_u):
        _hline(ax, cfg.delta_u, "delta-upper", f"upper bound {cfg.delta_u:.3g}", color="grey", ls=":", lw=1)
    ax.set_ylabel("relative risk")
    ax.legend(loc="upper right", fontsize=8)

    ax = axes[2]
    _band(ax, i, cpm, "tab:green", cfg.kind.value)
    _hline(ax, cfg.cutoff, "cutoff-line", f"cutoff {cfg.cutoff:g}", color="tab:red", ls="--", lw=1)
    if series.expertise_time is not None:
        ax.axvline(series.expertise_time, color="tab:red", lw=0.8, alpha=0.6)
    ax.set_ylim(0, 1.02)
    ax.set_ylabel("probability")
    ax.set_xlabel("case")
    ax.legend(loc="lower right", fontsize=8)

    x_txt = ", ".join(f"{v:g}" for v in series.x_eval)
    fig.suptitle(f"x = ({x_txt}), lambda = {series.lam:g}", fontsize=10)
    fig.tight_layout()
    _save(fig, path)


def plot_cusum(trace: CusumTrace, index, path) -> None:
    """CUSUM statistic against case number with the signal threshold ``-h``."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    index = np.asarray(index)
    ax.step(index, trace.s[1:], where="post", color="tab:blue", lw=1.2, label="s")
    _hline(ax, -trace.h, "h-line", f"-h = {-trace.h:g}", color="tab:red", ls="--", lw=1)
    if trace.signal_index is not None:
        ax.axvline(trace.signal_index, color="tab:red", lw=0.8, alpha=0.6)
    ax.set_xlabel("case")
    ax.set_ylabel("LC-CUSUM")
    ax.legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    _save(fig, path)
