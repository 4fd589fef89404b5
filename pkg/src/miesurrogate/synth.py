"""Synthetic spectra with known ground truth.

Pure absorbance spectra are sums of Gaussian/Lorentzian bands drawn from
per-class templates; the forward distortion model stacks a constant
baseline, a linear baseline, a reference multiple, one extinction curve
from the sphere-scattering model and white noise on top:

    raw = c + m*nu + h*pure + g*Q(nu; a, n_avg) + noise

which is exactly the decomposition the corrector fits, so generated pairs
carry usable ground truth for every downstream measurement.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import rng as rngmod
from .core import LabeledDataset, Spectrum, WavenumberGrid
from .errors import ConfigError, ParseError
from .oracle import vdh_extinction

GAUSSIAN = "gaussian"
LORENTZIAN = "lorentzian"

_FWHM_TO_SIGMA = 1.0 / np.sqrt(8.0 * np.log(2.0))


@dataclass(frozen=True)
class BandSpec:
    center: float        # cm^-1
    fwhm: float          # cm^-1
    amplitude: float     # AU
    shape: str = GAUSSIAN

    def __post_init__(self):
        if self.fwhm <= 0.0:
            raise ConfigError("band fwhm must be > 0")
        if self.amplitude < 0.0:
            raise ConfigError("band amplitude must be >= 0")
        if self.shape not in (GAUSSIAN, LORENTZIAN):
            raise ConfigError(f"unknown band shape {self.shape!r}")


@dataclass(frozen=True)
class ClassTemplate:
    class_id: int
    bands: tuple
    amplitude_jitter: float = 0.0   # relative sigma
    center_jitter: float = 0.0      # cm^-1 sigma

    def __post_init__(self):
        bands = tuple(self.bands)
        if not bands:
            raise ConfigError("template needs at least one band")
        if self.amplitude_jitter < 0.0 or self.center_jitter < 0.0:
            raise ConfigError("jitter sigmas must be >= 0")
        object.__setattr__(self, "bands", bands)


@dataclass(frozen=True)
class DistortionParams:
    radius_um: float          # sphere radius a
    n_avg: float              # mean refractive index
    scatter_weight: float     # g, AU
    baseline_offset: float    # c, AU
    baseline_slope: float     # m, AU per cm^-1
    multiplicative: float     # h, dimensionless
    noise_sigma: float = 0.0  # AU

    def __post_init__(self):
        if not 1.0 <= self.radius_um <= 20.0:
            raise ConfigError("radius_um must lie in [1, 20]")
        if not 1.0 < self.n_avg < 2.0:
            raise ConfigError("n_avg must lie in (1, 2)")
        if not 0.5 <= self.multiplicative <= 2.0:
            raise ConfigError("multiplicative factor must lie in [0.5, 2]")
        if self.noise_sigma < 0.0:
            raise ConfigError("noise_sigma must be >= 0")


@dataclass(frozen=True)
class DistortionSampler:
    """Uniform parameter box the per-spectrum distortions are drawn from.

    Draw order per spectrum is fixed (radius, index, scatter, offset,
    slope, multiplicative), which is part of the reproducibility contract.
    """

    radius_um: tuple = (2.0, 8.0)
    n_avg: tuple = (1.1, 1.5)
    scatter_weight: tuple = (0.0, 1.0)
    baseline_offset: tuple = (-0.1, 0.1)
    baseline_slope: tuple = (-0.1 / 850.0, 0.1 / 850.0)
    multiplicative: tuple = (0.8, 1.2)
    noise_sigma: float = 0.002

    def sample(self, rng: np.random.Generator) -> DistortionParams:
        return DistortionParams(
            radius_um=rng.uniform(*self.radius_um),
            n_avg=rng.uniform(*self.n_avg),
            scatter_weight=rng.uniform(*self.scatter_weight),
            baseline_offset=rng.uniform(*self.baseline_offset),
            baseline_slope=rng.uniform(*self.baseline_slope),
            multiplicative=rng.uniform(*self.multiplicative),
            noise_sigma=self.noise_sigma,
        )


def identity_sampler() -> DistortionSampler:
    """Sampler whose draws leave spectra untouched (testing aid)."""
    return DistortionSampler(radius_um=(2.0, 2.0), n_avg=(1.1, 1.1),
                             scatter_weight=(0.0, 0.0),
                             baseline_offset=(0.0, 0.0),
                             baseline_slope=(0.0, 0.0),
                             multiplicative=(1.0, 1.0),
                             noise_sigma=0.0)


def band_profile(grid: WavenumberGrid, band: BandSpec) -> np.ndarray:
    nu = grid.values
    if band.shape == GAUSSIAN:
        sigma = band.fwhm * _FWHM_TO_SIGMA
        return band.amplitude * np.exp(-0.5 * ((nu - band.center) / sigma) ** 2)
    half = 0.5 * band.fwhm
    return band.amplitude * half ** 2 / ((nu - band.center) ** 2 + half ** 2)


def generate_pure(template: ClassTemplate, grid: WavenumberGrid,
                  seed: int) -> Spectrum:
    """Sum of jittered band profiles; deterministic given the seed.

    Jittered amplitudes are clipped at zero so the result stays
    non-negative. One Gaussian draw pair (amplitude, center) is consumed
    per band, in band order.
    """
    rng = rngmod.stream(seed, rngmod.DOMAIN_PURE, template.class_id)
    total = np.zeros(len(grid))
    for band in template.bands:
        amp_eps, center_eps = rng.standard_normal(2)
        jittered = replace(
            band,
            amplitude=max(0.0, band.amplitude * (1.0 + template.amplitude_jitter * amp_eps)),
            center=band.center + template.center_jitter * center_eps,
        )
        total += band_profile(grid, jittered)
    return Spectrum(grid, total)


def distort(pure: Spectrum, params: DistortionParams, seed: int) -> Spectrum:
    """Apply the forward model; with noise_sigma 0 the result is exact."""
    grid = pure.grid
    raw = (params.baseline_offset
           + params.baseline_slope * grid.values
           + params.multiplicative * pure.absorbance)
    if params.scatter_weight != 0.0:
        raw = raw + params.scatter_weight * vdh_extinction(
            grid, params.radius_um, params.n_avg)
    if params.noise_sigma > 0.0:
        rng = rngmod.stream(seed, rngmod.DOMAIN_NOISE)
        raw = raw + params.noise_sigma * rng.standard_normal(len(grid))
    return Spectrum(grid, raw)


def generate_dataset(templates, grid: WavenumberGrid, n_per_class: int,
                     sampler: DistortionSampler | None = None,
                     seed: int = 0) -> LabeledDataset:
    """(raw, pure, label) triples, ``n_per_class`` per template.

    Spectrum ``i`` uses only streams derived from ``(seed, domain, i)``
    plus its template's jitter stream, so the dataset is identical however
    generation is ordered or parallelized.
    """
    templates = list(templates)
    if not templates:
        raise ConfigError("template set is empty")
    ids = [t.class_id for t in templates]
    if len(set(ids)) != len(ids):
        raise ConfigError("class ids must be unique")
    if n_per_class < 1:
        raise ConfigError("n_per_class must be >= 1")
    sampler = sampler or DistortionSampler()
    raw, pure, labels = [], [], []
    index = 0
    for template in templates:
        for _ in range(n_per_class):
            p = generate_pure(template, grid, _item_seed(seed, index))
            draw = sampler.sample(
                rngmod.stream(seed, rngmod.DOMAIN_DISTORTION, index))
            r = distort(p, draw, _item_seed(seed, index))
            pure.append(p)
            raw.append(r)
            labels.append(template.class_id)
            index += 1
    return LabeledDataset(tuple(raw), tuple(pure), np.array(labels))


def _item_seed(seed: int, index: int) -> int:
    # distinct per-item root so generate_pure/distort stay seedable alone
    return (int(seed) << 20) + index


def default_templates(grid: WavenumberGrid | None = None):
    """Five tissue-like classes, each with a band near 1650 cm^-1.

    The shared band stands in for the protein amide I feature, so peak
    shift analysis around 1650 cm^-1 is exercised by every class; the
    remaining bands separate the classes.
    """
    g = GAUSSIAN
    lz = LORENTZIAN
    defs = [
        (0, [(1652, 36, 1.00, g), (1546, 30, 0.62, g), (1456, 22, 0.30, g),
             (1240, 28, 0.26, g), (1080, 34, 0.22, g)]),
        (1, [(1648, 42, 0.88, g), (1558, 26, 0.45, g), (1400, 30, 0.38, g),
             (1160, 26, 0.30, lz), (1028, 22, 0.34, g)]),
        (2, [(1656, 30, 0.75, g), (1740, 24, 0.52, g), (1466, 24, 0.44, g),
             (1380, 20, 0.25, g), (1220, 30, 0.18, lz), (1120, 28, 0.24, g)]),
        (3, [(1644, 38, 1.10, g), (1516, 22, 0.35, g), (1340, 26, 0.28, g),
             (1276, 20, 0.22, g), (1172, 24, 0.20, g), (996, 20, 0.18, g)]),
        (4, [(1660, 34, 0.68, g), (1600, 22, 0.40, lz), (1448, 26, 0.35, g),
             (1310, 24, 0.20, g), (1056, 30, 0.40, g), (976, 18, 0.15, g)]),
    ]
    templates = []
    for class_id, bands in defs:
        templates.append(ClassTemplate(
            class_id=class_id,
            bands=tuple(BandSpec(c, w, a, s) for c, w, a, s in bands),
            amplitude_jitter=0.08,
            center_jitter=1.5,
        ))
    return templates


def save_templates(templates, path) -> None:
    """Write templates in the plain-text template schema (see load)."""
    with open(path, "w") as f:
        f.write("# band = center_cm1 fwhm_cm1 amplitude_au shape\n")
        for t in templates:
            f.write(f"\n[class {t.class_id}]\n")
            f.write(f"amplitude_jitter = {t.amplitude_jitter!r}\n")
            f.write(f"center_jitter = {t.center_jitter!r}\n")
            for b in t.bands:
                f.write(f"band = {b.center!r} {b.fwhm!r} {b.amplitude!r} {b.shape}\n")


def load_templates(path):
    """Parse the template config: ``[class N]`` sections with ``key = value``
    lines; ``band`` lines repeat, one per band."""
    templates = []
    current_id = None
    current = None

    def flush():
        if current_id is None:
            return
        if not current["bands"]:
            raise ParseError(f"{path}: class {current_id} has no bands")
        templates.append(ClassTemplate(
            class_id=current_id,
            bands=tuple(current["bands"]),
            amplitude_jitter=current["amplitude_jitter"],
            center_jitter=current["center_jitter"],
        ))

    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                flush()
                parts = line[1:-1].split()
                if len(parts) != 2 or parts[0] != "class":
                    raise ParseError(f"{path}:{lineno}: expected [class N]")
                try:
                    current_id = int(parts[1])
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: bad class id") from exc
                current = {"bands": [], "amplitude_jitter": 0.0,
                           "center_jitter": 0.0}
                continue
            if current is None:
                raise ParseError(f"{path}:{lineno}: data before first [class] section")
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            try:
                if key == "band":
                    parts = value.split()
                    if len(parts) != 4:
                        raise ParseError(
                            f"{path}:{lineno}: band needs 4 fields")
                    current["bands"].append(BandSpec(
                        float(parts[0]), float(parts[1]), float(parts[2]),
                        parts[3]))
                elif key in ("amplitude_jitter", "center_jitter"):
                    current[key] = float(value)
                else:
                    raise ParseError(f"{path}:{lineno}: unknown key {key!r}")
            except (ValueError, ConfigError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    flush()
    if not templates:
        raise ParseError(f"{path}: no class sections found")
    return templates
