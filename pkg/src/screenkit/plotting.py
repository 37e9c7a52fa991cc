"""PNG figures for curation summaries and enrichment curves (Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .curation import DatasetSummary  # noqa: E402

# no software/version stamp, so identical data gives identical bytes
_PNG_METADATA = {"Software": None}


def plot_histogram(summary: DatasetSummary, path) -> None:
    """Bar chart of the pIC50 histogram with the activity threshold marked."""
    fig, ax = plt.subplots(figsize=(6, 4), dpi=100)
    lows = [lo for lo, _, _ in summary.histogram]
    counts = [c for _, _, c in summary.histogram]
    widths = [hi - lo for lo, hi, _ in summary.histogram]
    ax.bar(lows, counts, width=widths, align="edge", color="#4C72B0", edgecolor="white")
    ax.axvline(summary.threshold, color="#C44E52", linestyle="--", label=f"active >= {summary.threshold:g}")
    ax.set_xlabel("pIC50")
    ax.set_ylabel("compounds")
    ax.set_title(f"n={summary.n}, prevalence {100 * summary.prevalence:.2f}%")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_PNG_METADATA)
    plt.close(fig)


def plot_ef_curve(curves: dict[str, list[tuple[float, float | None]]], path) -> None:
    """Enrichment factor against top fraction, one line per named predictor.

    Undefined points (``None``) are skipped.
    """
    fig, ax = plt.subplots(figsize=(6, 4), dpi=100)
    for name, points in curves.items():
        xs = [100 * x for x, ef in points if ef is not None]
        ys = [ef for _, ef in points if ef is not None]
        ax.plot(xs, ys, marker="o", markersize=3, label=name)
    ax.axhline(1.0, color="grey", linestyle=":", label="random (EF = 1)")
    ax.set_xlabel("top fraction screened (%)")
    ax.set_ylabel("enrichment factor")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_PNG_METADATA)
    plt.close(fig)
