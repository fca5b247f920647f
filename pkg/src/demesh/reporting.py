"""Delimited outputs and their companion figures.

Every report the CLI emits as CSV also gets a rendered matplotlib figure
next to it (ROC curves, completion sample grids, latent montages), so a
run directory is inspectable without extra tooling.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import RocCurve, VerifyResult  # noqa: E402

RESULTS_HEADER = ["method", "psnr", "ssim", "tpr@1%", "tpr@0.1%", "tpr@0.01%"]
ROC_HEADER = ["threshold", "fpr", "tpr"]


def write_results_csv(path: str | Path, rows: dict[str, VerifyResult]) -> None:
    """`method,psnr,ssim,tpr@1%,tpr@0.1%,tpr@0.01%` with one row per method."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULTS_HEADER)
        for method, res in rows.items():
            w.writerow([
                method,
                f"{res.mean_psnr:.4f}" if res.mean_psnr is not None else "",
                f"{res.mean_ssim:.4f}" if res.mean_ssim is not None else "",
                f"{res.tpr_at[0.01]:.4f}",
                f"{res.tpr_at[0.001]:.4f}",
                f"{res.tpr_at[0.0001]:.4f}",
            ])


def write_roc_csv(path: str | Path, curve: RocCurve) -> None:
    """`threshold,fpr,tpr`, one operating point per line."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ROC_HEADER)
        for t, f, r in zip(curve.thresholds, curve.fpr, curve.tpr):
            w.writerow([f"{t:.6f}" if np.isfinite(t) else "inf", f"{f:.6f}", f"{r:.6f}"])


def save_roc_figure(path: str | Path, curves: dict[str, RocCurve]) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    for name, c in curves.items():
        ax.plot(c.fpr, c.tpr, label=name)
    ax.set_xscale("log")
    ax.set_xlim(1e-4, 1.0)
    ax.set_ylim(0.0, 1.02)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _show(ax, img: np.ndarray) -> None:
    if img.shape[2] == 1:
        ax.imshow(img[:, :, 0], cmap="gray", vmin=0.0, vmax=1.0)
    else:
        ax.imshow(np.clip(img, 0.0, 1.0))
    ax.set_xticks([])
    ax.set_yticks([])


def save_image_grid(path: str | Path, rows: dict[str, list[np.ndarray]]) -> None:
    """Grid with one labeled row per image list (e.g. corrupted / recovered /
    clean); all rows must share a length."""
    n = max(len(v) for v in rows.values())
    fig, axes = plt.subplots(len(rows), n, figsize=(1.3 * n, 1.4 * len(rows)), squeeze=False)
    for r, (label, images) in enumerate(rows.items()):
        for c in range(n):
            ax = axes[r][c]
            if c < len(images):
                _show(ax, images[c])
            else:
                ax.axis("off")
            if c == 0:
                ax.set_ylabel(label, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_montage(path: str | Path, panels: list[tuple[str, np.ndarray]]) -> None:
    """One row of titled panels (latent arithmetic demos)."""
    fig, axes = plt.subplots(1, len(panels), figsize=(1.6 * len(panels), 2.0), squeeze=False)
    for ax, (title, img) in zip(axes[0], panels):
        _show(ax, img)
        ax.set_title(title, fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
