"""Figures for evaluation reports. Everything renders to files through the Agg backend."""

from __future__ import annotations

import contextlib
import math
from pathlib import Path
from typing import Dict, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (math.sqrt(5) - 1.0) / 2.0
COLUMN_WIDTH = 3.4  # inches

STYLE = {
    "font.size": 8,
    "font.family": "serif",
    "axes.labelsize": 8,
    "axes.titlesize": 8,
    "legend.fontsize": 7,
    "legend.frameon": False,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.0,
    "savefig.dpi": 200,
    "savefig.bbox": "tight",
    "image.cmap": "RdBu_r",
}


@contextlib.contextmanager
def publication_style(**overrides):
    with plt.rc_context({**STYLE, **overrides}):
        yield


def figure(ncols: int = 1, nrows: int = 1, width: float = COLUMN_WIDTH, height: Optional[float] = None):
    height = height if height is not None else width * GOLDEN * nrows / max(1, ncols) * 1.3
    return plt.subplots(nrows, ncols, figsize=(width, height), squeeze=False)


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_profiles(x, truth, pred, times, path, n_snapshots: int = 4, sensors=None) -> Path:
    """Truth vs prediction at a few times for one 1D trajectory.

    ``truth``/``pred`` are ``[T, Q]``; ``x`` is ``[Q]``.
    """
    x = np.asarray(x).reshape(-1)
    order = np.argsort(x)
    picks = np.linspace(0, len(times) - 1, n_snapshots).round().astype(int)
    with publication_style():
        fig, axes = figure(ncols=n_snapshots, width=2 * COLUMN_WIDTH, height=1.6)
        for ax, i in zip(axes[0], picks):
            ax.plot(x[order], truth[i][order], color="k", label="reference")
            ax.plot(x[order], pred[i][order], color="C3", ls="--", label="prediction")
            if sensors is not None:
                ax.plot(np.asarray(sensors).reshape(-1), np.full(len(sensors), ax.get_ylim()[0]), "|",
                        color="0.5", ms=4)
            ax.set_title(f"t = {times[i]:.2f}")
            ax.set_xlabel("x")
        axes[0, 0].legend(loc="best")
        fig.tight_layout()
        return _save(fig, path)


def plot_spacetime(x, times, truth, pred, path) -> Path:
    """Reference, prediction and absolute error as space-time images (1D)."""
    x = np.asarray(x).reshape(-1)
    order = np.argsort(x)
    truth, pred = np.asarray(truth)[:, order], np.asarray(pred)[:, order]
    extent = [x[order][0], x[order][-1], times[0], times[-1]]
    vmax = float(np.abs(truth).max())
    with publication_style():
        fig, axes = figure(ncols=3, width=2 * COLUMN_WIDTH, height=2.2)
        panels = [("reference", truth, dict(vmin=-vmax, vmax=vmax)),
                  ("prediction", pred, dict(vmin=-vmax, vmax=vmax)),
                  ("|error|", np.abs(pred - truth), dict(cmap="magma", vmin=0))]
        for ax, (title, data, kw) in zip(axes[0], panels):
            im = ax.imshow(data, origin="lower", aspect="auto", extent=extent, **kw)
            ax.set_title(title)
            ax.set_xlabel("x")
            fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        axes[0, 0].set_ylabel("t")
        fig.tight_layout()
        return _save(fig, path)


def plot_block_errors(per_block: Dict[str, Sequence[float]], path) -> Path:
    """Relative L2 per rollout block, one line per labelled run."""
    with publication_style():
        fig, axes = figure()
        ax = axes[0, 0]
        for label, errs in per_block.items():
            ax.plot(np.arange(1, len(errs) + 1), errs, marker="o", ms=3, label=label)
        ax.set_xlabel("rollout block")
        ax.set_ylabel("relative L2")
        ax.set_ylim(bottom=0)
        ax.legend()
        return _save(fig, path)


def plot_extrapolation(times, errors: Dict[str, Sequence[float]], t_train_end: float, path) -> Path:
    """Per-frame relative L2 against time with the training horizon marked."""
    with publication_style():
        fig, axes = figure()
        ax = axes[0, 0]
        ax.axvspan(t_train_end, max(times), color="0.92", lw=0)
        for label, errs in errors.items():
            ax.plot(times, errs, label=label)
        ax.axvline(t_train_end, color="0.4", lw=0.6, ls=":")
        ax.set_xlabel("t")
        ax.set_ylabel("relative L2")
        ax.set_ylim(bottom=0)
        ax.legend()
        return _save(fig, path)


def plot_transport_demo(report: dict, path) -> Path:
    """The two transported profiles, the confined grid and both predictors."""
    data = report["_figure_data"]
    q = np.asarray(data["queries"])
    grid = np.asarray(data["grid"])
    with publication_style():
        fig, axes = figure(ncols=2, width=2 * COLUMN_WIDTH, height=1.9)
        for ax, truth, pred, name in zip(axes[0], data["truth"], data["gdon_prediction"], ("f1 = 0", "f2 = bump")):
            if q.shape[1] == 1:
                ax.plot(q[:, 0], truth, color="k", label="target")
                ax.plot(q[:, 0], pred, color="C3", ls="--", label="graph operator (untrained)")
                ax.plot(grid[:, 0], np.asarray(data["fixed_grid_prediction"]), "s", ms=3, color="C0",
                        label="best fixed-grid output")
                ax.set_xlabel("x")
            else:
                n = int(round(math.sqrt(len(q))))
                ax.imshow(np.asarray(truth).reshape(n, n).T, origin="lower", extent=[0, 1, 0, 1], vmin=0, vmax=1)
                ax.plot(grid[:, 0], grid[:, 1], "s", ms=2, color="C0")
                ax.set_xlabel("x1")
                ax.set_ylabel("x2")
            ax.set_title(name)
        if q.shape[1] == 1:
            axes[0, 0].legend(loc="center right")
        fig.suptitle(f"fixed-grid MSE summed over cases: {report['best_mse_summed_over_cases']:.3f}")
        fig.tight_layout()
        return _save(fig, path)


def plot_training_curves(history: Sequence[dict], path) -> Path:
    """Training loss and validation relative L2 against epoch."""
    epochs = [h["epoch"] for h in history]
    with publication_style():
        fig, axes = figure(ncols=2, width=2 * COLUMN_WIDTH, height=1.9)
        axes[0, 0].semilogy(epochs, [h["train_loss"] for h in history])
        axes[0, 0].set_ylabel("training loss")
        val = [h.get("val_rel_l2") for h in history]
        if any(v is not None for v in val):
            axes[0, 1].plot(epochs, [np.nan if v is None else v for v in val])
        axes[0, 1].set_ylabel("validation relative L2")
        for ax in axes[0]:
            ax.set_xlabel("epoch")
        fig.tight_layout()
        return _save(fig, path)


def plot_sensors(sensors, queries, path) -> Path:
    """Sensor layout next to the query points (1D or 2D)."""
    s = np.asarray(sensors)
    q = np.asarray(queries)
    with publication_style():
        fig, axes = figure()
        ax = axes[0, 0]
        if s.shape[1] == 1:
            ax.plot(q[:, 0], np.zeros(len(q)), "|", color="0.6", ms=8, label="queries")
            ax.plot(s[:, 0], np.zeros(len(s)), "o", ms=3, color="C3", label="sensors")
            ax.set_yticks([])
        else:
            ax.plot(q[:, 0], q[:, 1], ".", ms=1, color="0.6", label="queries")
            ax.plot(s[:, 0], s[:, 1], "o", ms=2, color="C3", label="sensors")
            ax.set_aspect("equal")
        ax.legend()
        return _save(fig, path)
