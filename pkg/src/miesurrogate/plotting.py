"""Static vector-graphic output (SVG) with CSV sidecars.

Every plot function writes the figure and a sidecar CSV holding exactly
the numbers that were drawn, so results can be re-plotted or diffed
without re-running the pipeline.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .errors import ParseError  # noqa: E402


def _write_sidecar(path, header, columns) -> None:
    cols = [np.asarray(c, dtype=np.float64) for c in columns]
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in zip(*cols):
            f.write(",".join("%.17g" % v for v in row) + "\n")


def plot_series(wavenumbers, series: dict, svg_path, csv_path,
                title: str = "", xlim=None) -> None:
    """Overlay line plot of named absorbance series on one grid."""
    wavenumbers = np.asarray(wavenumbers, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for label, values in series.items():
        ax.plot(wavenumbers, np.asarray(values), label=label, linewidth=1.0)
    ax.set_xlabel("wavenumber (cm$^{-1}$)")
    ax.set_ylabel("absorbance (AU)")
    if title:
        ax.set_title(title)
    if xlim is not None:
        ax.set_xlim(*xlim)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)
    _write_sidecar(csv_path, ["wavenumber"] + list(series),
                   [wavenumbers] + list(series.values()))


def plot_ci_band(wavenumbers, mean, ci_low, ci_high, svg_path, csv_path,
                 title: str = "", xlim=None) -> None:
    """Mean line with a shaded confidence band.

    With zero variance the band degenerates to the mean line.
    """
    wavenumbers = np.asarray(wavenumbers, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.fill_between(wavenumbers, ci_low, ci_high, alpha=0.35,
                    color="tab:orange", label="confidence band")
    ax.plot(wavenumbers, mean, color="tab:blue", linewidth=1.0, label="mean")
    ax.set_xlabel("wavenumber (cm$^{-1}$)")
    ax.set_ylabel("absorbance (AU)")
    if title:
        ax.set_title(title)
    if xlim is not None:
        ax.set_xlim(*xlim)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)
    _write_sidecar(csv_path, ["wavenumber", "mean", "ci_low", "ci_high"],
                   [wavenumbers, mean, ci_low, ci_high])


def read_uncertainty_csv(path):
    """Parse the CSV written by the uncertainty module."""
    with open(path, "r", newline="") as f:
        header = f.readline().strip().split(",")
        if header != ["wavenumber", "mean", "std", "ci_low", "ci_high"]:
            raise ParseError(f"{path}: not an uncertainty CSV")
        rows = []
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise ParseError(f"{path}:{lineno}: expected 5 columns")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no data rows")
    cols = np.asarray(rows).T
    return {"wavenumber": cols[0], "mean": cols[1], "std": cols[2],
            "ci_low": cols[3], "ci_high": cols[4]}
