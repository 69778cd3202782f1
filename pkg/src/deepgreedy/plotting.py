"""Figure rendering for the CLI report path. Every figure is written to a file."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 120,
}


def _save(fig, path):
    path = Path(path)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def _band(ax, t, mean, err, label=None, **kw):
    (line,) = ax.plot(t, mean, label=label, lw=1.2, **kw)
    if err is not None and np.any(err > 0):
        ax.fill_between(t, mean - err, mean + err, color=line.get_color(), alpha=0.2, lw=0)
    return line


def plot_summary(summary, path, title=None):
    """Normalized reward and regret (mean +- stderr) of one replicated run."""
    t = np.arange(1, summary.mean_regret.size + 1)
    with plt.rc_context(STYLE):
        fig, (ax_r, ax_g) = plt.subplots(1, 2, figsize=(8, 3))
        _band(ax_r, t, summary.mean_normalized_reward, summary.stderr_normalized_reward)
        ax_r.set_xlabel("time step")
        ax_r.set_ylabel("normalized reward")
        positive = summary.mean_regret > 0
        if positive.any():
            ax_g.loglog(t[positive], summary.mean_regret[positive], lw=1.2)
        ax_g.set_xlabel("time step")
        ax_g.set_ylabel("normalized regret")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        return _save(fig, path)


def plot_comparison(summaries: dict, path, title=None, reference=None):
    """One normalized-reward curve per policy, optionally with a horizontal anchor."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 3.5))
        for name, s in summaries.items():
            t = np.arange(1, s.mean_normalized_reward.size + 1)
            _band(ax, t, s.mean_normalized_reward, s.stderr_normalized_reward, label=name)
        if reference is not None:
            ax.axhline(reference, color="0.5", ls=":", lw=1)
        ax.set_xlabel("time step")
        ax.set_ylabel("mean normalized reward")
        ax.legend(frameon=False, loc="lower right")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)


def plot_theory(t, lower, upper, path, title=None):
    """Regret lower and upper bounds against t on log-log axes (NaNs skipped)."""
    t, lower, upper = map(np.asarray, (t, lower, upper))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.loglog(t, lower, label="lower bound", lw=1.2)
        ok = np.isfinite(upper) & (upper > 0)
        if ok.any():
            ax.loglog(t[ok], upper[ok], label="upper bound", lw=1.2)
        ax.set_xlabel("t")
        ax.set_ylabel("expected instantaneous regret")
        ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)
