"""File formats: spectrum CSV, cube binary, labels CSV, dataset directories.

Spectrum CSV carries full float64 precision (%.17g); cube files store the
absorbance block as little-endian float32 for whole-slide scale economy,
with the grid kept in float64. Both round-trip bit-exactly on the stored
numeric types.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .core import LabeledDataset, SpectralCube, Spectrum, WavenumberGrid
from .errors import FormatError, ParseError

SPECTRUM_CSV_HEADER = "wavenumber,absorbance"
CUBE_MAGIC = b"FTIRCUBE"
CUBE_VERSION = 1
LABELS_CSV_HEADER = "index,class_id"

RAW_CUBE = "raw.cube"
PURE_CUBE = "pure.cube"
CORRECTED_CUBE = "corrected.cube"
SURROGATE_CUBE = "surrogate.cube"
LABELS_CSV = "labels.csv"


def save_spectrum_csv(s: Spectrum, path) -> None:
    with open(path, "w", newline="") as f:
        f.write(SPECTRUM_CSV_HEADER + "\n")
        for w, a in zip(s.grid.values, s.absorbance):
            f.write("%.17g,%.17g\n" % (w, a))


def load_spectrum_csv(path) -> Spectrum:
    with open(path, "r", newline="") as f:
        header = f.readline().strip()
        if header != SPECTRUM_CSV_HEADER:
            raise ParseError(
                f"{path}: expected header '{SPECTRUM_CSV_HEADER}', got {header!r}")
        wavenumbers = []
        values = []
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 columns")
            try:
                wavenumbers.append(float(parts[0]))
                values.append(float(parts[1]))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if not wavenumbers:
        raise ParseError(f"{path}: no data rows")
    return Spectrum(WavenumberGrid(np.array(wavenumbers)), np.array(values))


def save_cube(cube: SpectralCube, path) -> None:
    bands = len(cube.grid)
    with open(path, "wb") as f:
        f.write(CUBE_MAGIC)
        f.write(struct.pack("<IIII", CUBE_VERSION, cube.width, cube.height, bands))
        f.write(cube.grid.values.astype("<f8").tobytes())
        f.write(cube.data.astype("<f4").tobytes())


def load_cube(path) -> SpectralCube:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < len(CUBE_MAGIC) + 16:
        raise FormatError(f"{path}: file too short for a cube header")
    if blob[: len(CUBE_MAGIC)] != CUBE_MAGIC:
        raise FormatError(f"{path}: bad magic bytes")
    off = len(CUBE_MAGIC)
    version, width, height, bands = struct.unpack_from("<IIII", blob, off)
    off += 16
    if version != CUBE_VERSION:
        raise FormatError(f"{path}: unsupported cube version {version}")
    grid_bytes = bands * 8
    data_bytes = width * height * bands * 4
    if len(blob) != off + grid_bytes + data_bytes:
        raise FormatError(
            f"{path}: expected {off + grid_bytes + data_bytes} bytes, "
            f"found {len(blob)}")
    grid = np.frombuffer(blob, dtype="<f8", count=bands, offset=off)
    off += grid_bytes
    data = np.frombuffer(blob, dtype="<f4", count=width * height * bands,
                         offset=off)
    data = data.astype(np.float64).reshape(width * height, bands)
    return SpectralCube(width, height, WavenumberGrid(grid), data)


def save_labels_csv(labels, path) -> None:
    with open(path, "w", newline="") as f:
        f.write(LABELS_CSV_HEADER + "\n")
        for i, c in enumerate(labels):
            f.write("%d,%d\n" % (i, int(c)))


def load_labels_csv(path) -> np.ndarray:
    with open(path, "r", newline="") as f:
        header = f.readline().strip()
        if header != LABELS_CSV_HEADER:
            raise ParseError(
                f"{path}: expected header '{LABELS_CSV_HEADER}', got {header!r}")
        labels = {}
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 columns")
            try:
                labels[int(parts[0])] = int(parts[1])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if sorted(labels) != list(range(len(labels))):
        raise ParseError(f"{path}: indices must cover 0..n-1 exactly")
    return np.array([labels[i] for i in range(len(labels))], dtype=np.int64)


def _cube_from_spectra(spectra) -> SpectralCube:
    return SpectralCube.from_spectra(spectra, width=len(spectra), height=1)


def _spectra_from_cube(cube: SpectralCube):
    return tuple(cube.spectrum(i) for i in range(cube.n_pixels))


def save_dataset_dir(dataset: LabeledDataset, path,
                     corrected_name: str = PURE_CUBE) -> None:
    """Write a dataset as raw.cube (+ paired cube, + labels.csv)."""
    os.makedirs(path, exist_ok=True)
    save_cube(_cube_from_spectra(dataset.raw), os.path.join(path, RAW_CUBE))
    if dataset.corrected is not None:
        save_cube(_cube_from_spectra(dataset.corrected),
                  os.path.join(path, corrected_name))
    if dataset.class_labels is not None:
        save_labels_csv(dataset.class_labels, os.path.join(path, LABELS_CSV))


def load_dataset_dir(path, corrected_name: str | None = PURE_CUBE) -> LabeledDataset:
    """Load a dataset directory; the paired cube and labels are optional."""
    raw = _spectra_from_cube(load_cube(os.path.join(path, RAW_CUBE)))
    corrected = None
    if corrected_name is not None:
        cpath = os.path.join(path, corrected_name)
        if os.path.exists(cpath):
            corrected = _spectra_from_cube(load_cube(cpath))
    labels = None
    lpath = os.path.join(path, LABELS_CSV)
    if os.path.exists(lpath):
        labels = load_labels_csv(lpath)
    return LabeledDataset(raw, corrected, labels)
