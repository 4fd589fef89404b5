"""The reference scattering corrector.

Builds Mie extinction curves for optically soft spheres (anomalous
diffraction closed form), couples the sphere's refractive index to the
reference absorbance through a discrete Kramers-Kronig transform in
resonant mode, compresses the curve database by PCA, fits the extended
multiplicative signal correction model per spectrum by least squares and
iterates with the corrected spectrum feeding back into the reference.

All BLAS/LAPACK work here runs under ``threadpool_limits(1)``: the
matrices are small enough that threading slows them down on typical
hosts, and pinning makes serial and process-parallel cube runs
bit-identical.
"""

from __future__ import annotations

import functools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack
from threadpoolctl import threadpool_limits

from . import _kernels
from .core import SpectralCube, Spectrum, WavenumberGrid
from .errors import (ConfigError, DegenerateInput, DimensionError,
                     DomainError, RankError, SingularDesign)

RADIUS_UM_MIN = 1.0
RADIUS_UM_MAX = 20.0
INDEX_MIN = 1.0   # exclusive
INDEX_MAX = 2.0   # exclusive

DEFAULT_H_FLOOR = 1e-3
_LSTSQ_RCOND = 1e-12  # columns dependent beyond condition 1e12


@dataclass(frozen=True)
class MieCurveConfig:
    """Parameter box and compression settings for the curve database."""

    radius_grid: tuple = tuple(np.linspace(2.0, 8.0, 10))   # sphere radius, um
    index_grid: tuple = tuple(np.linspace(1.1, 1.5, 10))    # mean refractive index
    resonant: bool = True
    kk_scale: float = 0.1      # weight of the Kramers-Kronig fluctuation
    n_components: int = 7      # PCA components kept

    def __post_init__(self):
        radii = tuple(float(a) for a in self.radius_grid)
        indices = tuple(float(n) for n in self.index_grid)
        if not radii or not indices:
            raise ConfigError("radius and index grids must be non-empty")
        for a in radii:
            _check_radius(a)
        for n in indices:
            _check_index(n)
        if self.kk_scale < 0.0:
            raise ConfigError("kk_scale must be >= 0")
        if self.n_components < 1:
            raise ConfigError("n_components must be >= 1")
        if self.n_components > len(radii) * len(indices):
            raise ConfigError("n_components exceeds the number of curves")
        object.__setattr__(self, "radius_grid", radii)
        object.__setattr__(self, "index_grid", indices)

    @property
    def n_curves(self) -> int:
        return len(self.radius_grid) * len(self.index_grid)


@dataclass(frozen=True)
class RmiesConfig:
    iterations: int = 10
    curve_config: MieCurveConfig = field(default_factory=MieCurveConfig)
    h_floor: float = DEFAULT_H_FLOOR
    reference_blend: float = 1.0   # 1 = full replacement by the corrected spectrum

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.h_floor <= 0.0:
            raise ConfigError("h_floor must be > 0")
        if not 0.0 <= self.reference_blend <= 1.0:
            raise ConfigError("reference_blend must lie in [0, 1]")


@dataclass(frozen=True)
class EmscBasis:
    """Design components of the correction model on one grid."""

    reference: Spectrum
    mie_components: np.ndarray   # (k, bands), orthonormal rows
    mean_curve: np.ndarray       # (bands,) database column means

    def __post_init__(self):
        comps = np.asarray(self.mie_components, dtype=np.float64)
        mean = np.asarray(self.mean_curve, dtype=np.float64)
        if comps.ndim != 2 or comps.shape[1] != len(self.reference.grid):
            raise DimensionError("components must be (k, bands) on the reference grid")
        if mean.shape != (comps.shape[1],):
            raise DimensionError("mean curve must match the grid length")
        if not (np.all(np.isfinite(comps)) and np.all(np.isfinite(mean))):
            raise ValueError("basis arrays must be finite")
        gram = comps @ comps.T
        if np.max(np.abs(gram - np.eye(comps.shape[0]))) > 1e-8:
            raise ValueError("mie components must be orthonormal")
        object.__setattr__(self, "mie_components", comps)
        object.__setattr__(self, "mean_curve", mean)

    @property
    def n_components(self) -> int:
        return self.mie_components.shape[0]


@dataclass(frozen=True)
class EmscCoefficients:
    """Fitted model coefficients for one spectrum.

    ``reference_scale`` is always the fitted value; when ``h_clamped`` is
    set the correction step divided by the sign-preserving floor instead.
    """

    baseline_offset: float          # constant term, AU
    baseline_slope: float           # linear term, AU per cm^-1
    reference_scale: float          # reference multiplier, dimensionless
    scatter_weights: np.ndarray     # component weights, AU
    residual_norm: float
    h_clamped: bool = False

    def to_dict(self) -> dict:
        return {
            "baseline_offset": self.baseline_offset,
            "baseline_slope": self.baseline_slope,
            "reference_scale": self.reference_scale,
            "scatter_weights": [float(g) for g in self.scatter_weights],
            "residual_norm": self.residual_norm,
            "h_clamped": self.h_clamped,
        }


@dataclass(frozen=True)
class CorrectionResult:
    corrected: Spectrum
    residual_norms: np.ndarray            # one entry per iteration
    coefficients: tuple                   # EmscCoefficients per iteration

    def to_dict(self) -> dict:
        return {
            "iterations": int(self.residual_norms.size),
            "residual_norms": [float(r) for r in self.residual_norms],
            "coefficients": [c.to_dict() for c in self.coefficients],
        }


@dataclass(frozen=True)
class CubeCorrectionResult:
    cube: SpectralCube
    final_residuals: np.ndarray           # per pixel, NaN where failed
    failures: tuple                       # (pixel_index, message) pairs

    def to_dict(self) -> dict:
        return {
            "n_pixels": int(self.cube.n_pixels),
            "n_failures": len(self.failures),
            "failures": [{"pixel": int(i), "error": m} for i, m in self.failures],
            "residual_norm_mean": float(np.nanmean(self.final_residuals)),
            "residual_norm_max": float(np.nanmax(self.final_residuals)),
        }


def _check_radius(a_um: float) -> None:
    if not RADIUS_UM_MIN <= a_um <= RADIUS_UM_MAX:
        raise DomainError(
            f"sphere radius {a_um} um outside [{RADIUS_UM_MIN}, {RADIUS_UM_MAX}]")


def _check_index(n: float) -> None:
    if not INDEX_MIN < n < INDEX_MAX:
        raise DomainError(
            f"refractive index {n} outside ({INDEX_MIN}, {INDEX_MAX})")


def vdh_extinction(grid: WavenumberGrid, radius_um: float,
                   refractive_index: float) -> np.ndarray:
    """Anomalous-diffraction extinction efficiency Q per wavenumber.

    rho = 4*pi*a*(n-1)*nu with the radius in cm and nu in cm^-1;
    Q(rho) = 2 - (4/rho) sin(rho) + (4/rho^2)(1 - cos(rho)), extended
    continuously with Q(0) = 0.
    """
    _check_radius(radius_um)
    _check_index(refractive_index)
    radius_cm = radius_um * 1e-4
    rho = (4.0 * np.pi * radius_cm * (refractive_index - 1.0)) * grid.values
    return _kernels.q_nonresonant(rho)


def kramers_kronig(grid: WavenumberGrid, n_im: np.ndarray) -> np.ndarray:
    """Real refractive-index fluctuation from the absorption index.

    Discrete Hilbert transform on the uniform grid, computed in the
    frequency domain on a mirror-padded extension of 4x the grid length to
    suppress edge wrap-around. Sign follows the physical dispersion
    convention: the output rises below an absorption band, crosses zero
    near its center and dips above it.
    """
    n_im = np.asarray(n_im, dtype=np.float64)
    if n_im.shape != (len(grid),):
        raise DimensionError("n_im must match the grid length")
    if not np.all(np.isfinite(n_im)):
        raise ValueError("n_im must be finite")
    return _hilbert_mirror(n_im)


def _hilbert_mirror(x: np.ndarray) -> np.ndarray:
    n = x.size
    ext = np.concatenate([x[::-1], x, x[::-1], x])
    spec = np.fft.fft(ext)
    spec[1:2 * n] *= 2.0
    spec[2 * n + 1:] = 0.0
    analytic = np.fft.ifft(spec)
    return -analytic.imag[n:2 * n]


class _CurveEngine:
    """Static tables and the basis builder for one (grid, config) pair."""

    def __init__(self, grid: WavenumberGrid, cfg: MieCurveConfig):
        self.grid = grid
        self.cfg = cfg
        if cfg.n_components > min(cfg.n_curves, len(grid)):
            raise RankError(
                f"n_components={cfg.n_components} exceeds "
                f"min(curves={cfg.n_curves}, bands={len(grid)})")
        nu = grid.values
        a_cm = np.asarray(cfg.radius_grid) * 1e-4
        n_avg = np.asarray(cfg.index_grid)
        # curve row order: radius-major, index-minor
        pair_a, pair_n = np.meshgrid(a_cm, n_avg, indexing="ij")
        self.pair_a = np.ascontiguousarray(pair_a.ravel())
        alpha = 4.0 * np.pi * self.pair_a * (pair_n.ravel() - 1.0)
        self.rho0 = np.ascontiguousarray(alpha[:, None] * nu[None, :])
        self.sin0 = np.sin(self.rho0)
        self.cos0 = np.cos(self.rho0)
        self.a_index = np.repeat(np.arange(len(a_cm)), len(n_avg))
        self.unique_a = a_cm
        self._static_pca = None   # lazy, non-resonant only

    def database(self, ref_values: np.ndarray | None) -> np.ndarray:
        """One extinction curve per (radius, index) pair."""
        cfg = self.cfg
        if not cfg.resonant:
            return np.vstack([
                vdh_extinction(self.grid, a, n)
                for a in cfg.radius_grid for n in cfg.index_grid])
        if ref_values is None:
            raise ConfigError("resonant mode needs a reference spectrum")
        peak = ref_values.max()
        if peak <= 0.0:
            raise DegenerateInput(
                "resonant mode needs a reference with a positive maximum")
        n_im = ref_values / peak
        n_im = n_im - n_im.mean()
        n_re = _hilbert_mirror(n_im)
        w = (4.0 * np.pi * cfg.kk_scale) * (n_re * self.grid.values)
        u = self.unique_a[:, None] * w[None, :]
        sin_u = np.sin(u)
        cos_u = np.cos(u)
        out = np.empty_like(self.rho0)
        _kernels.q_resonant_rows(self.sin0, self.cos0, self.rho0, self.pair_a,
                                 self.a_index, sin_u, cos_u, w, out)
        return out

    def basis_values(self, ref_values: np.ndarray):
        """(mean_curve, components) for the current reference."""
        if not self.cfg.resonant:
            if self._static_pca is None:
                matrix = self.database(None)
                self._static_pca = _pca_values(matrix, self.cfg.n_components)[:2]
            return self._static_pca
        matrix = self.database(ref_values)
        mean_curve, components, _ = _pca_values(matrix, self.cfg.n_components)
        return mean_curve, components


_ENGINES: dict = {}


def _engine(grid: WavenumberGrid, cfg: MieCurveConfig) -> _CurveEngine:
    key = (grid, cfg)
    eng = _ENGINES.get(key)
    if eng is None:
        if len(_ENGINES) > 8:
            _ENGINES.clear()
        eng = _CurveEngine(grid, cfg)
        _ENGINES[key] = eng
    return eng


def _singlethread(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        with threadpool_limits(limits=1):
            return fn(*args, **kwargs)
    return wrapper


@_singlethread
def build_extinction_database(grid: WavenumberGrid, cfg: MieCurveConfig,
                              reference: Spectrum | None = None) -> np.ndarray:
    """Curve matrix with one row per (radius, index) pair, radius-major."""
    eng = _engine(grid, cfg)
    if not cfg.resonant:
        return eng.database(None)
    if reference is None:
        raise ConfigError("resonant mode needs a reference spectrum")
    if reference.grid != grid:
        raise DimensionError("reference grid does not match the target grid")
    return eng.database(reference.absorbance)


def _pca_values(matrix: np.ndarray, k: int):
    rows, cols = matrix.shape
    if not 1 <= k <= min(rows, cols):
        raise RankError(f"k={k} outside [1, min{rows, cols}]")
    mean_curve = matrix.mean(axis=0)
    centered = matrix - mean_curve
    gram = centered @ centered.T
    total = float(np.trace(gram))
    evals, evecs, m_found, _isuppz, info = lapack.dsyevr(
        gram, compute_v=1, range="I", il=rows - k + 1, iu=rows)
    if info != 0:
        raise RankError(f"eigendecomposition failed (info={info})")
    evals = evals[:k][::-1].copy()       # descending
    evecs = evecs[:, ::-1]
    tol = 4.0 * np.finfo(np.float64).eps * max(evals[0], 0.0)
    if evals[0] <= 0.0 or evals[-1] <= tol:
        raise RankError(
            f"matrix has fewer than {k} nonzero singular values")
    cols_mat = (centered.T @ evecs) / np.sqrt(evals)[None, :]
    # Near-degenerate trailing directions come out of the Gram route with
    # orthonormality errors up to ~sqrt(eps)/gap; a QR pass restores
    # orthonormality without leaving the spanned subspace.
    q, r = np.linalg.qr(cols_mat)
    diag_sign = np.sign(np.diag(r))
    diag_sign[diag_sign == 0.0] = 1.0
    components = (q * diag_sign[None, :]).T      # (k, cols)
    # deterministic sign: largest-magnitude element of each component positive
    flip = components[np.arange(k),
                      np.argmax(np.abs(components), axis=1)] < 0.0
    components[flip] *= -1.0
    explained = evals / total
    return mean_curve, components, explained


@_singlethread
def pca_components(matrix: np.ndarray, k: int):
    """Column-mean-centered principal directions of a curve matrix.

    Returns ``(mean_curve, components, explained_variance)`` where the
    components are the top-k right singular vectors of the centered matrix
    (computed through the curve Gram matrix) and ``explained_variance``
    holds the corresponding variance fractions in non-increasing order.
    Raises :class:`RankError` when the matrix has fewer than k nonzero
    singular values.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise DimensionError("matrix must be 2-D")
    return _pca_values(matrix, k)


@_singlethread
def build_basis(grid: WavenumberGrid, cfg: MieCurveConfig,
                reference: Spectrum) -> EmscBasis:
    """Database + PCA in one step, packaged for the fit."""
    if reference.grid != grid:
        raise DimensionError("reference grid does not match the target grid")
    eng = _engine(grid, cfg)
    mean_curve, components = eng.basis_values(reference.absorbance)
    return EmscBasis(reference, components, mean_curve)


def _design_matrix(nu: np.ndarray, ref_values: np.ndarray,
                   components: np.ndarray) -> np.ndarray:
    d = np.empty((nu.size, 3 + components.shape[0]))
    d[:, 0] = 1.0
    d[:, 1] = nu
    d[:, 2] = ref_values
    d[:, 3:] = components.T
    return d


def _fit_values(raw_values: np.ndarray, design: np.ndarray):
    sol, _res, rank, _sv = sla.lstsq(design, raw_values,
                                     cond=_LSTSQ_RCOND,
                                     lapack_driver="gelsy",
                                     check_finite=False)
    if rank < design.shape[1]:
        raise SingularDesign(
            f"design rank {rank} < {design.shape[1]} at condition 1e12")
    residual = raw_values - design @ sol
    return sol, float(np.linalg.norm(residual))


def _coefficients(sol: np.ndarray, residual_norm: float,
                  h_clamped: bool = False) -> EmscCoefficients:
    return EmscCoefficients(
        baseline_offset=float(sol[0]),
        baseline_slope=float(sol[1]),
        reference_scale=float(sol[2]),
        scatter_weights=sol[3:].copy(),
        residual_norm=residual_norm,
        h_clamped=h_clamped,
    )


def _clamp_h(h: float, h_floor: float):
    if abs(h) < h_floor:
        return (h_floor if h >= 0.0 else -h_floor), True
    return h, False


def _correct_once_values(raw_values: np.ndarray, design: np.ndarray,
                         h_floor: float):
    sol, residual_norm = _fit_values(raw_values, design)
    h_used, clamped = _clamp_h(float(sol[2]), h_floor)
    sol_no_ref = sol.copy()
    sol_no_ref[2] = 0.0
    corrected = (raw_values - design @ sol_no_ref) / h_used
    return corrected, _coefficients(sol, residual_norm, clamped)


@_singlethread
def emsc_fit(raw: Spectrum, basis: EmscBasis) -> EmscCoefficients:
    """Least-squares decomposition of a raw spectrum in the model basis."""
    if raw.grid != basis.reference.grid:
        raise DimensionError("raw spectrum and basis live on different grids")
    design = _design_matrix(raw.grid.values, basis.reference.absorbance,
                            basis.mie_components)
    sol, residual_norm = _fit_values(raw.absorbance, design)
    return _coefficients(sol, residual_norm)


@_singlethread
def emsc_correct_once(raw: Spectrum, basis: EmscBasis,
                      h_floor: float = DEFAULT_H_FLOOR):
    """Single correction step: strip baseline and scatter, divide by h.

    When |h| falls below ``h_floor`` the division uses the sign-preserving
    floor and ``h_clamped`` is set on the returned coefficients, so batch
    runs survive pathological pixels instead of blowing up.
    """
    if raw.grid != basis.reference.grid:
        raise DimensionError("raw spectrum and basis live on different grids")
    design = _design_matrix(raw.grid.values, basis.reference.absorbance,
                            basis.mie_components)
    corrected, coeffs = _correct_once_values(raw.absorbance, design, h_floor)
    return Spectrum(raw.grid, corrected), coeffs


def _rmies_values(raw_values: np.ndarray, ref_values: np.ndarray,
                  eng: _CurveEngine, cfg: RmiesConfig,
                  first_basis=None):
    nu = eng.grid.values
    blend = cfg.reference_blend
    residual_norms = np.empty(cfg.iterations)
    coefficients = []
    reference = ref_values
    corrected = raw_values
    for it in range(cfg.iterations):
        if it == 0 and first_basis is not None:
            mean_curve, components = first_basis
        else:
            mean_curve, components = eng.basis_values(reference)
        design = _design_matrix(nu, reference, components)
        corrected, coeffs = _correct_once_values(raw_values, design,
                                                 cfg.h_floor)
        residual_norms[it] = coeffs.residual_norm
        coefficients.append(coeffs)
        if blend == 1.0:
            reference = corrected
        else:
            reference = blend * corrected + (1.0 - blend) * reference
    return corrected, residual_norms, tuple(coefficients)


@_singlethread
def rmies_correct(raw: Spectrum, initial_reference: Spectrum,
                  cfg: RmiesConfig | None = None) -> CorrectionResult:
    """Iterative correction of one spectrum.

    Each iteration rebuilds the curve basis from the current reference
    (in resonant mode the database depends on it), performs one correction
    step, then blends the corrected spectrum into the reference.
    """
    cfg = cfg or RmiesConfig()
    if raw.grid != initial_reference.grid:
        raise DimensionError("raw and reference live on different grids")
    if float(np.linalg.norm(initial_reference.absorbance)) == 0.0:
        raise DegenerateInput("initial reference has zero norm")
    eng = _engine(raw.grid, cfg.curve_config)
    corrected, residual_norms, coefficients = _rmies_values(
        raw.absorbance, initial_reference.absorbance, eng, cfg)
    return CorrectionResult(Spectrum(raw.grid, corrected), residual_norms,
                            coefficients)


def _correct_block(raw_block: np.ndarray, ref_values: np.ndarray,
                   grid: WavenumberGrid, cfg: RmiesConfig, first_basis):
    eng = _engine(grid, cfg.curve_config)
    corrected = np.empty_like(raw_block)
    residuals = np.full(raw_block.shape[0], np.nan)
    failures = []
    for i in range(raw_block.shape[0]):
        try:
            out, norms, _ = _rmies_values(raw_block[i], ref_values, eng, cfg,
                                          first_basis=first_basis)
            corrected[i] = out
            residuals[i] = norms[-1]
        except Exception as exc:  # collected, batch must not abort
            corrected[i] = raw_block[i]
            failures.append((i, f"{type(exc).__name__}: {exc}"))
    return corrected, residuals, failures


def _cube_worker(args):
    start, raw_block, ref_values, grid, cfg, first_basis = args
    with threadpool_limits(limits=1):
        corrected, residuals, failures = _correct_block(
            raw_block, ref_values, grid, cfg, first_basis)
    return start, corrected, residuals, failures


@_singlethread
def correct_cube(cube: SpectralCube, initial_reference: Spectrum,
                 cfg: RmiesConfig | None = None,
                 workers: int = 1) -> CubeCorrectionResult:
    """Pixel-wise iterative correction of a whole cube.

    Output pixel order equals input order regardless of ``workers``; the
    parallel path partitions pixels into contiguous chunks and reassembles
    them, and every worker performs the identical per-pixel arithmetic, so
    serial and parallel runs produce bit-identical cubes. Per-pixel errors
    are collected into the result instead of aborting the batch; failed
    pixels carry their raw spectrum through unchanged.
    """
    cfg = cfg or RmiesConfig()
    if cube.grid != initial_reference.grid:
        raise DimensionError("cube and reference live on different grids")
    ref_values = initial_reference.absorbance
    if float(np.linalg.norm(ref_values)) == 0.0:
        raise DegenerateInput("initial reference has zero norm")
    eng = _engine(cube.grid, cfg.curve_config)
    # iteration 1 shares the initial reference across all pixels
    first_basis = eng.basis_values(ref_values)
    n = cube.n_pixels
    if workers <= 1:
        corrected, residuals, failures = _correct_block(
            cube.data, ref_values, cube.grid, cfg, first_basis)
    else:
        chunk = max(1, -(-n // (workers * 4)))
        tasks = [(s, cube.data[s:s + chunk], ref_values, cube.grid, cfg,
                  first_basis) for s in range(0, n, chunk)]
        corrected = np.empty_like(cube.data)
        residuals = np.full(n, np.nan)
        failures = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for start, block, res, fails in pool.map(_cube_worker, tasks):
                corrected[start:start + block.shape[0]] = block
                residuals[start:start + block.shape[0]] = res
                failures.extend((start + i, msg) for i, msg in fails)
        failures.sort(key=lambda t: t[0])
    out = SpectralCube(cube.width, cube.height, cube.grid, corrected)
    return CubeCorrectionResult(out, residuals, tuple(failures))
