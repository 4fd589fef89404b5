"""Core spectral data types and the small operations everything else shares.

All types are immutable after construction and all operations are pure
functions, so they can be used from data-parallel code without locking.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateInput, DimensionError, GridError, RangeError

DEFAULT_GRID_START = 950.0   # cm^-1
DEFAULT_GRID_STOP = 1800.0   # cm^-1
DEFAULT_GRID_STEP = 2.0      # cm^-1

_UNIFORMITY_RTOL = 1e-9
_MIN_GRID_POINTS = 8


def _frozen_f64(values) -> np.ndarray:
    a = np.array(values, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WavenumberGrid:
    """Strictly ascending, uniformly spaced wavenumber axis in cm^-1.

    Uniformity is enforced at construction (the finite-difference and
    Hilbert-transform operations depend on it), with relative tolerance
    1e-9 on the first spacing.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < _MIN_GRID_POINTS:
            raise GridError(
                f"grid needs >= {_MIN_GRID_POINTS} points, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("grid values must be finite")
        if v[0] <= 0.0:
            raise GridError("wavenumbers must be positive")
        d = np.diff(v)
        if np.any(d <= 0.0):
            raise GridError("grid must be strictly ascending")
        if np.max(np.abs(d - d[0])) > _UNIFORMITY_RTOL * d[0]:
            raise GridError("grid spacing must be uniform to 1e-9 relative")
        object.__setattr__(self, "values", _frozen_f64(v))

    @classmethod
    def from_range(cls, start: float, stop: float, step: float) -> "WavenumberGrid":
        n = int(round((stop - start) / step)) + 1
        return cls(start + step * np.arange(n))

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, WavenumberGrid):
            return NotImplemented
        return self is other or np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash(self.values.tobytes())

    @property
    def step(self) -> float:
        return float(self.values[1] - self.values[0])

    @property
    def start(self) -> float:
        return float(self.values[0])

    @property
    def stop(self) -> float:
        return float(self.values[-1])


@lru_cache(maxsize=1)
def default_grid() -> WavenumberGrid:
    """950-1800 cm^-1 at 2 cm^-1 spacing (426 points), covering amide I."""
    return WavenumberGrid.from_range(
        DEFAULT_GRID_START, DEFAULT_GRID_STOP, DEFAULT_GRID_STEP)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Absorbance values (AU) on a wavenumber grid."""

    grid: WavenumberGrid
    absorbance: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.absorbance, dtype=np.float64)
        if a.ndim != 1 or a.size != len(self.grid):
            raise DimensionError(
                f"absorbance length {a.shape} does not match grid "
                f"length {len(self.grid)}")
        if not np.all(np.isfinite(a)):
            raise ValueError("absorbance must be finite")
        object.__setattr__(self, "absorbance", _frozen_f64(a))

    def __len__(self) -> int:
        return self.absorbance.size

    def with_values(self, values) -> "Spectrum":
        return Spectrum(self.grid, values)


@dataclass(frozen=True, eq=False)
class SpectralCube:
    """width x height raster of pixel spectra sharing one grid.

    ``data`` is (width*height, bands), pixel-major with band-minor layout;
    pixel (x, y) of the raster lives at flat index ``y*width + x``.
    """

    width: int
    height: int
    grid: WavenumberGrid
    data: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise DimensionError("cube needs width >= 1 and height >= 1")
        d = np.asarray(self.data, dtype=np.float64)
        expect = (self.width * self.height, len(self.grid))
        if d.shape != expect:
            raise DimensionError(f"cube data shape {d.shape} != {expect}")
        if not np.all(np.isfinite(d)):
            raise ValueError("cube data must be finite")
        d = np.ascontiguousarray(d)
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @classmethod
    def from_spectra(cls, spectra, width: int, height: int) -> "SpectralCube":
        spectra = list(spectra)
        if len(spectra) != width * height:
            raise DimensionError(
                f"{len(spectra)} spectra cannot fill a {width}x{height} cube")
        grid = spectra[0].grid
        for s in spectra[1:]:
            if s.grid != grid:
                raise DimensionError("all cube spectra must share one grid")
        return cls(width, height, grid,
                   np.stack([s.absorbance for s in spectra]))

    @property
    def n_pixels(self) -> int:
        return self.width * self.height

    def pixel(self, index: int) -> np.ndarray:
        return self.data[index]

    def spectrum(self, index: int) -> Spectrum:
        return Spectrum(self.grid, self.data[index])


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Parallel lists of raw spectra, optional paired spectra, optional labels.

    The paired list holds ground-truth pure spectra for generated data and
    oracle-corrected spectra for training data; both uses share the type.
    """

    raw: tuple
    corrected: tuple | None = None
    class_labels: np.ndarray | None = None

    def __post_init__(self):
        raw = tuple(self.raw)
        if not raw:
            raise DimensionError("dataset needs at least one spectrum")
        grid = raw[0].grid
        for s in raw[1:]:
            if s.grid != grid:
                raise DimensionError("all raw spectra must share one grid")
        object.__setattr__(self, "raw", raw)
        if self.corrected is not None:
            corr = tuple(self.corrected)
            if len(corr) != len(raw):
                raise DimensionError("corrected list must parallel raw list")
            for s in corr:
                if s.grid != grid:
                    raise DimensionError("corrected spectra must share the raw grid")
            object.__setattr__(self, "corrected", corr)
        if self.class_labels is not None:
            labels = np.asarray(self.class_labels, dtype=np.int64)
            if labels.shape != (len(raw),):
                raise DimensionError("class labels must parallel raw list")
            labels.setflags(write=False)
            object.__setattr__(self, "class_labels", labels)

    def __len__(self) -> int:
        return len(self.raw)

    @property
    def grid(self) -> WavenumberGrid:
        return self.raw[0].grid

    def raw_matrix(self) -> np.ndarray:
        return np.stack([s.absorbance for s in self.raw])

    def corrected_matrix(self) -> np.ndarray:
        if self.corrected is None:
            raise DimensionError("dataset has no paired spectra")
        return np.stack([s.absorbance for s in self.corrected])


def resample(s: Spectrum, target: WavenumberGrid) -> Spectrum:
    """Linearly interpolate a spectrum onto ``target``.

    The target range must lie inside the source range; extrapolation is
    refused with :class:`RangeError`.
    """
    src = s.grid.values
    tgt = target.values
    if tgt[0] < src[0] or tgt[-1] > src[-1]:
        raise RangeError(
            f"target range [{tgt[0]}, {tgt[-1]}] exceeds source "
            f"range [{src[0]}, {src[-1]}]")
    return Spectrum(target, np.interp(tgt, src, s.absorbance))


def vector_normalize(s: Spectrum) -> Spectrum:
    """Scale to unit Euclidean norm; direction is preserved."""
    n = float(np.linalg.norm(s.absorbance))
    if n == 0.0:
        raise DegenerateInput("cannot normalize a zero spectrum")
    return Spectrum(s.grid, s.absorbance / n)


def second_derivative(s: Spectrum) -> Spectrum:
    """Central finite-difference second derivative.

    Endpoint values are replicated from the nearest interior point. The
    grid type guarantees the uniform spacing this stencil needs.
    """
    y = s.absorbance
    h2 = s.grid.step ** 2
    d2 = np.empty_like(y)
    d2[1:-1] = (y[:-2] - 2.0 * y[1:-1] + y[2:]) / h2
    d2[0] = d2[1]
    d2[-1] = d2[-2]
    return Spectrum(s.grid, d2)
