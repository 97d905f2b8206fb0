"""PNG, GIF and CSV exports of interpretation results."""

import csv
from collections.abc import Sequence
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.animation import FuncAnimation, PillowWriter  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

from ..models.phantom import SegSequence  # noqa: E402
from .decoding import TraversalPoint  # noqa: E402
from .latents import LatentMatrix, PcaProjection  # noqa: E402
from .mmode import MModeImage  # noqa: E402

# background, LV blood pool, LV myocardium, RV blood pool
PALETTE = ListedColormap(["#000000", "#d62728", "#2ca02c", "#1f77b4"])
DPI = 120


def _prepare(path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _show_labels(ax: plt.Axes, labels: np.ndarray, title: Optional[str] = None) -> None:
    ax.imshow(labels, cmap=PALETTE, vmin=0, vmax=3, interpolation="nearest")
    ax.set_xticks([])
    ax.set_yticks([])
    if title:
        ax.set_title(title, fontsize=8)


def save_label_map(labels: np.ndarray, path: Path) -> Path:
    """One (H, W) label map as a palette PNG at pixel resolution."""
    path = _prepare(path)
    plt.imsave(path, labels, cmap=PALETTE, vmin=0, vmax=3)
    return path


def save_mmode(image: MModeImage, path: Path, seq: Optional[SegSequence] = None) -> Path:
    """M-mode PNG; with seq, the ED frame and the sampled line are drawn alongside."""
    path = _prepare(path)
    panels = 2 if seq is not None else 1
    fig, axes = plt.subplots(1, panels, figsize=(4 * panels, 4), squeeze=False)
    if seq is not None:
        ax = axes[0, 0]
        _show_labels(ax, seq.labels[0, image.slice_index], f"ED, slice {image.slice_index}")
        ax.plot([image.p0[0], image.p1[0]], [image.p0[1], image.p1[1]], color="yellow", lw=1)
    ax = axes[0, panels - 1]
    ax.imshow(image.image, cmap=PALETTE, vmin=0, vmax=3, interpolation="nearest", aspect="auto")
    ax.set_xlabel("frame")
    ax.set_ylabel("position along line (px)")
    ax.set_title("M-mode", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def save_frame_strip(
    seq: SegSequence, path: Path, slice_index: int = 0, max_frames: int = 25
) -> Path:
    """Every frame (up to max_frames, evenly subsampled) of one slice side by side."""
    path = _prepare(path)
    t = len(seq)
    shown = np.unique(np.linspace(0, t - 1, min(t, max_frames)).round().astype(int))
    fig, axes = plt.subplots(1, len(shown), figsize=(1.2 * len(shown), 1.6), squeeze=False)
    for ax, frame in zip(axes[0], shown):
        _show_labels(ax, seq.labels[frame, slice_index], f"{seq.frame_phase[frame]:.2f}")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def save_sequence_gif(seq: SegSequence, path: Path, slice_index: int = 0, fps: int = 10) -> Path:
    """Animated GIF of one slice over the cardiac cycle."""
    path = _prepare(path)
    fig, ax = plt.subplots(figsize=(3, 3))
    image = ax.imshow(
        seq.labels[0, slice_index], cmap=PALETTE, vmin=0, vmax=3, interpolation="nearest"
    )
    ax.set_xticks([])
    ax.set_yticks([])

    def update(frame: int) -> list:
        image.set_data(seq.labels[frame, slice_index])
        return [image]

    animation = FuncAnimation(fig, update, frames=len(seq), blit=True)
    animation.save(str(path), writer=PillowWriter(fps=fps))
    plt.close(fig)
    return path


def save_pca_scatter(
    projection: PcaProjection, labels: np.ndarray, path: Path, title: str = "Latent PCA"
) -> Path:
    """Scatter of the first two components coloured by a binary label (-1: unlabeled)."""
    path = _prepare(path)
    fig, ax = plt.subplots(figsize=(5, 4))
    styles = {1: ("#d62728", "positive"), 0: ("#1f77b4", "negative"), -1: ("#7f7f7f", "unlabeled")}
    for value, (color, name) in styles.items():
        mask = labels == value
        if np.any(mask):
            ax.scatter(
                projection.coords[mask, 0], projection.coords[mask, 1], s=18, c=color, label=name
            )
    ev = projection.explained_variance
    ax.set_xlabel(f"PC1 ({100 * ev[0]:.1f}%)")
    ax.set_ylabel(f"PC2 ({100 * ev[1]:.1f}%)")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def write_pca_csv(
    projection: PcaProjection,
    latents: LatentMatrix,
    path: Path,
    subject_ids: Optional[Sequence[int]] = None,
    concept_names: Sequence[str] = (),
) -> Path:
    """subject id, the two PCA coordinates, y and every y_k per row."""
    path = _prepare(path)
    ids = list(subject_ids) if subject_ids is not None else list(range(len(latents)))
    names = list(concept_names) or [f"y_{k}" for k in range(latents.y_k.shape[1])]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["subject", "pc1", "pc2", "y", *names])
        for i, subject in enumerate(ids):
            writer.writerow(
                [
                    subject,
                    f"{projection.coords[i, 0]:.6f}",
                    f"{projection.coords[i, 1]:.6f}",
                    int(latents.y[i]),
                    *(int(v) for v in latents.y_k[i]),
                ]
            )
    return path


def save_traversal(
    points: Sequence[TraversalPoint],
    path: Path,
    slice_index: int = 0,
    phases: Sequence[float] = (0.0, 0.1, 0.35, 0.6),
) -> Path:
    """Grid of decoded frames: one row per traversal step, one column per phase."""
    path = _prepare(path)
    rows, cols = len(points), len(phases)
    fig, axes = plt.subplots(rows, cols, figsize=(1.4 * cols, 1.4 * rows), squeeze=False)
    for r, point in enumerate(points):
        seq = point.sequence
        for c, phase in enumerate(phases):
            frame = int(np.argmin(np.abs(seq.frame_phase - phase)))
            title = f"phase {seq.frame_phase[frame]:.2f}" if r == 0 else None
            _show_labels(axes[r, c], seq.labels[frame, slice_index], title)
        axes[r, 0].set_ylabel(f"{point.lam:+.2f}\n{point.y_hat:.2f}", fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path
