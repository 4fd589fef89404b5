"""Validation measures: dataset RMSE, downstream-classifier agreement,
and band-shift analysis around the amide I region."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import (SpectralCube, Spectrum, second_derivative,
                   vector_normalize)
from .errors import (ConfigError, DegenerateInput, DimensionError,
                     PeakOnBoundary)

AMIDE_I_WINDOW = (1600.0, 1700.0)
FEATURE_RECIPE = "second-derivative+vector-normalize"


@dataclass(frozen=True, eq=False)
class RmseReport:
    per_spectrum_rmse: np.ndarray
    mean: float
    median: float
    p95: float
    paper_style_sum: float   # plain sum of per-spectrum Euclidean norms

    def to_dict(self) -> dict:
        return {
            "n": int(self.per_spectrum_rmse.size),
            "mean": self.mean,
            "median": self.median,
            "p95": self.p95,
            "paper_style_sum": self.paper_style_sum,
        }


@dataclass(frozen=True, eq=False)
class CentroidClassifier:
    """Nearest-centroid classifier on normalized second-derivative features."""

    class_ids: np.ndarray
    centroids: np.ndarray          # (K, bands), unit rows
    feature_recipe: str = FEATURE_RECIPE

    def __post_init__(self):
        ids = np.asarray(self.class_ids, dtype=np.int64)
        cents = np.asarray(self.centroids, dtype=np.float64)
        if ids.ndim != 1 or ids.size < 2:
            raise ConfigError("need at least 2 classes")
        if cents.shape[0] != ids.size:
            raise DimensionError("one centroid per class required")
        norms = np.linalg.norm(cents, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("centroids must have unit norm")
        object.__setattr__(self, "class_ids", ids)
        object.__setattr__(self, "centroids", cents)


@dataclass(frozen=True, eq=False)
class AgreementReport:
    """Pixel-weighted agreement between two classified correction routes.

    Rows of the confusion matrix index the class of the reference route,
    columns the class of the approximate route.
    """

    accuracy: float
    confusion: np.ndarray
    class_ids: np.ndarray
    n: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "n": self.n,
            "class_ids": [int(c) for c in self.class_ids],
            "confusion": [[int(v) for v in row] for row in self.confusion],
        }


def rmse_dataset(surrogate_outputs, oracle_outputs) -> RmseReport:
    """Per-spectrum root-mean-square deviation between two output lists.

    Also emits the un-normalized sum of per-spectrum Euclidean norms,
    which grows with the dataset and is reported for comparability only.
    """
    a = list(surrogate_outputs)
    b = list(oracle_outputs)
    if len(a) != len(b) or not a:
        raise DimensionError("need equal-length non-empty lists")
    grid = a[0].grid
    for s in a + b:
        if s.grid != grid:
            raise DimensionError("all spectra must share one grid")
    diffs = np.stack([x.absorbance - y.absorbance for x, y in zip(a, b)])
    per = np.sqrt((diffs * diffs).mean(axis=1))
    norms = np.linalg.norm(diffs, axis=1)
    return RmseReport(
        per_spectrum_rmse=per,
        mean=float(per.mean()),
        median=float(np.median(per)),
        p95=float(np.percentile(per, 95.0)),
        paper_style_sum=float(norms.sum()),
    )


def spectral_features(s: Spectrum) -> np.ndarray:
    """Normalized second-derivative feature vector."""
    return vector_normalize(second_derivative(s)).absorbance


def train_downstream(corrected, labels) -> CentroidClassifier:
    """Per-class normalized mean of feature vectors."""
    corrected = list(corrected)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (len(corrected),):
        raise DimensionError("labels must parallel the spectra")
    class_ids = np.unique(labels)
    if class_ids.size < 2:
        raise ConfigError("need at least 2 classes")
    feats = np.stack([spectral_features(s) for s in corrected])
    centroids = np.empty((class_ids.size, feats.shape[1]))
    for i, cid in enumerate(class_ids):
        mean = feats[labels == cid].mean(axis=0)
        norm = np.linalg.norm(mean)
        if norm == 0.0:
            raise DegenerateInput(f"class {cid} has a zero mean feature vector")
        centroids[i] = mean / norm
    return CentroidClassifier(class_ids, centroids)


def classify(classifier: CentroidClassifier, s: Spectrum) -> int:
    """Cosine-similarity argmax; ties break to the lowest class id.

    Scale-invariant by construction. A spectrum with an all-zero feature
    vector scores 0 against every centroid and falls through the tie rule.
    """
    feats = second_derivative(s).absorbance
    norm = np.linalg.norm(feats)
    if norm > 0.0:
        feats = feats / norm
    sims = classifier.centroids @ feats
    # class_ids is sorted, so the first argmax is the lowest id
    return int(classifier.class_ids[int(np.argmax(sims))])


def downstream_agreement(classifier: CentroidClassifier, oracle_corrected,
                         surrogate_corrected) -> AgreementReport:
    """Fraction of spectra both correction routes classify identically."""
    a = list(oracle_corrected)
    b = list(surrogate_corrected)
    if len(a) != len(b) or not a:
        raise DimensionError("need equal-length non-empty lists")
    ids = classifier.class_ids
    pos = {int(c): i for i, c in enumerate(ids)}
    confusion = np.zeros((ids.size, ids.size), dtype=np.int64)
    agree = 0
    for x, y in zip(a, b):
        cx = classify(classifier, x)
        cy = classify(classifier, y)
        confusion[pos[cx], pos[cy]] += 1
        agree += cx == cy
    return AgreementReport(
        accuracy=agree / len(a),
        confusion=confusion,
        class_ids=ids,
        n=len(a),
    )


def band_shift(a: Spectrum, b: Spectrum,
               window: tuple = AMIDE_I_WINDOW) -> float:
    """Peak-position difference pos(b) - pos(a) inside a window, in cm^-1.

    Peaks are located by a quadratic through the argmax and its two
    neighbors, giving sub-grid-step resolution. Raises
    :class:`PeakOnBoundary` when an argmax touches the window edge.
    """
    if a.grid != b.grid:
        raise DimensionError("spectra must share one grid")
    lo, hi = window
    grid = a.grid.values
    if lo < grid[0] or hi > grid[-1] or lo >= hi:
        raise DimensionError("window must lie inside the grid")
    sel = np.flatnonzero((grid >= lo) & (grid <= hi))
    return _peak_position(b, sel) - _peak_position(a, sel)


def _peak_position(s: Spectrum, sel: np.ndarray) -> float:
    y = s.absorbance[sel]
    k = int(np.argmax(y))
    if k == 0 or k == y.size - 1:
        raise PeakOnBoundary(
            f"band maximum at {s.grid.values[sel[k]]} cm^-1 touches the window edge")
    y0, y1, y2 = y[k - 1], y[k], y[k + 1]
    denom = y0 - 2.0 * y1 + y2
    offset = 0.0 if denom == 0.0 else 0.5 * (y0 - y2) / denom
    return float(s.grid.values[sel[k]] + offset * s.grid.step)


def save_agreement_json(report: AgreementReport, path) -> None:
    with open(path, "w") as f:
        json.dump(report.to_dict(), f, indent=2)


def save_confusion_csv(report: AgreementReport, path) -> None:
    ids = [str(int(c)) for c in report.class_ids]
    with open(path, "w", newline="") as f:
        f.write("reference\\approx," + ",".join(ids) + "\n")
        for cid, row in zip(ids, report.confusion):
            f.write(cid + "," + ",".join(str(int(v)) for v in row) + "\n")


# distinguishable colors for up to 12 classes, then a gray fallback
_PALETTE = [
    (230, 25, 75), (60, 180, 75), (0, 130, 200), (255, 225, 25),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
    (0, 128, 128), (210, 245, 60), (170, 110, 40), (128, 0, 0),
]


def class_map_ppm(cube: SpectralCube, classifier: CentroidClassifier,
                  ppm_path, legend_csv_path) -> np.ndarray:
    """Classify every pixel, render a P6 PPM image plus a color legend."""
    ids = [int(c) for c in classifier.class_ids]
    colors = {cid: _PALETTE[i % len(_PALETTE)] for i, cid in enumerate(ids)}
    assigned = np.empty(cube.n_pixels, dtype=np.int64)
    for i in range(cube.n_pixels):
        assigned[i] = classify(classifier, cube.spectrum(i))
    img = bytearray()
    for cid in assigned:
        img.extend(colors[int(cid)])
    with open(ppm_path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (cube.width, cube.height))
        f.write(bytes(img))
    with open(legend_csv_path, "w", newline="") as f:
        f.write("class_id,red,green,blue\n")
        for cid in ids:
            r, g, b = colors[cid]
            f.write(f"{cid},{r},{g},{b}\n")
    return assigned
