"""Matplotlib figures written next to the CSV outputs (Agg backend, files only)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
    return path


def plot_field(record, path) -> Path:
    roi = record.roi
    est, truth = np.abs(record.estimate), np.abs(record.truth)
    if roi.mode == "angular":
        ang = np.degrees([d.doa for d in roi.directions])
        order = np.argsort(ang)
        fig, ax = plt.subplots(figsize=(6, 3.2))
        ax.plot(ang[order], truth[order], "k--", lw=1, label="truth")
        ax.plot(ang[order], est[order], lw=1.5, label="recovered")
        ax.set_xlabel("angle (deg)")
        ax.set_ylabel("|E|")
        ax.legend()
    else:
        (mx, my), (dx, dy) = roi.counts, roi.pixel_size
        extent = [roi.origin[0], roi.origin[0] + mx * dx, roi.origin[1], roi.origin[1] + my * dy]
        fig, axes = plt.subplots(1, 2, figsize=(8, 3.6))
        for ax, img, title in zip(axes, (truth, est), ("truth", "recovered")):
            im = ax.imshow(img.reshape(roi.shape), origin="lower", extent=extent, cmap="viridis")
            ax.set_title(title)
            ax.set_xlabel("x (m)")
            ax.set_ylabel("y (m)")
            fig.colorbar(im, ax=ax, shrink=0.8)
    m = record.metrics
    fig.suptitle(f"rel. error {m['relative_error']:.3g}, SSIM {m['ssim']:.3f}", fontsize=9)
    fig.tight_layout()
    return _save(fig, path)


def plot_spectrum(report, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    sv = np.asarray(report.singular_values)
    ax.semilogy(np.arange(1, len(sv) + 1), np.maximum(sv, np.finfo(float).tiny), ".-")
    ax.set_xlabel("index")
    ax.set_ylabel("singular value")
    ax.set_title(f"rank {report.rank}, cond {report.condition_number:.3g}", fontsize=9)
    fig.tight_layout()
    return _save(fig, path)


def plot_sweep(rows, kind, path) -> Path:
    labels = [str(r["value"]) for r in rows]
    x = np.arange(len(rows))
    fig, ax1 = plt.subplots(figsize=(5.5, 3.4))
    ax1.semilogy(x, [max(r["relative_error"], 1e-16) for r in rows], "o-", label="relative error")
    ax1.set_ylabel("relative error")
    ax2 = ax1.twinx()
    ax2.plot(x, [r["ssim"] for r in rows], "s--", color="tab:orange", label="SSIM")
    ax2.set_ylim(-0.05, 1.05)
    ax2.set_ylabel("SSIM")
    ax1.set_xticks(x, labels)
    ax1.set_xlabel(kind)
    fig.tight_layout()
    return _save(fig, path)


def plot_bound_check(rows, path) -> Path:
    d = np.degrees([r["delta_rad"] for r in rows])
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.loglog(d, [r["bound"] for r in rows], "k--", label="bound")
    ax.loglog(d, [r["mean_error"] for r in rows], "o-", label="mean LS error")
    ax.set_xlabel("separation (deg)")
    ax.set_ylabel("relative error")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)
