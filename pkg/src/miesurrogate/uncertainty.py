"""Monte-Carlo-dropout predictive uncertainty for the surrogate.

Dropout stays switched off during training; activating it at test time
and repeating the forward pass samples a distribution over thinned
networks, whose per-wavenumber mean and variance quantify predictive
confidence. Inverted-dropout scaling (1/(1-p) at test time) makes p = 0
degenerate exactly to the plain forward pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr

from . import rng as rngmod
from .core import Spectrum
from .errors import ConfigError, DegenerateInput, DimensionError
from .network import ModelParameters, forward, forward_matrix


@dataclass(frozen=True, eq=False)
class UncertaintyResult:
    mean: Spectrum
    variance: np.ndarray      # per wavenumber, AU^2
    ci_low: Spectrum
    ci_high: Spectrum
    passes: int
    dropout_p: float

    def __post_init__(self):
        v = np.asarray(self.variance, dtype=np.float64)
        if v.shape != (len(self.mean),):
            raise DimensionError("variance length must match the grid")
        if np.any(v < 0.0):
            raise ValueError("variance must be non-negative")
        object.__setattr__(self, "variance", v)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)


def mc_dropout_predict(model: ModelParameters, x: Spectrum, passes: int = 100,
                       dropout_p: float = 0.5, z: float = 1.96,
                       seed: int = 0) -> UncertaintyResult:
    """Repeated stochastic forward passes with test-time dropout.

    Pass ``t`` draws its hidden-layer masks from the stream
    ``(seed, dropout-domain, t)``, so passes are independent and the
    result does not depend on evaluation order. With ``dropout_p`` 0
    the passes would all equal the plain forward output, so it is
    returned directly with zero variance.
    """
    if passes < 2:
        raise ConfigError("need at least 2 passes for a variance")
    if not 0.0 <= dropout_p < 1.0:
        raise ConfigError("dropout_p must lie in [0, 1)")
    if dropout_p == 0.0:
        out = forward(model, x)
        zero = np.zeros(len(x))
        return UncertaintyResult(out, zero, out, out, passes, dropout_p)

    X = x.absorbance[None, :]
    samples = np.empty((passes, len(x)))
    for t in range(passes):
        rng = rngmod.stream(seed, rngmod.DOMAIN_DROPOUT, t)
        samples[t] = forward_matrix(model, X, dropout_p=dropout_p, rng=rng)[0]
    mean = samples.mean(axis=0)
    variance = samples.var(axis=0, ddof=1)
    spread = z * np.sqrt(variance)
    return UncertaintyResult(
        Spectrum(x.grid, mean), variance,
        Spectrum(x.grid, mean - spread), Spectrum(x.grid, mean + spread),
        passes, dropout_p)


def uncertainty_error_alignment(results, oracle_outputs) -> float:
    """Spearman rank correlation of predictive spread against true error.

    Pools the dataset into two per-wavenumber series: mean |surrogate mean
    - corrector output| and mean predictive std, then rank-correlates
    them. Positive correlation means wide confidence bands mark the
    wavenumbers the surrogate actually gets wrong.
    """
    results = list(results)
    oracle_outputs = list(oracle_outputs)
    if len(results) != len(oracle_outputs) or not results:
        raise DimensionError("need equal-length non-empty lists")
    grid = results[0].mean.grid
    for r, o in zip(results, oracle_outputs):
        if r.mean.grid != grid or o.grid != grid:
            raise DimensionError("all inputs must share one grid")
    abs_err = np.mean(
        [np.abs(r.mean.absorbance - o.absorbance)
         for r, o in zip(results, oracle_outputs)], axis=0)
    mean_std = np.mean([r.std for r in results], axis=0)
    if np.all(abs_err == abs_err[0]) or np.all(mean_std == mean_std[0]):
        raise DegenerateInput("rank correlation of a constant series is undefined")
    rho = spearmanr(abs_err, mean_std).statistic
    return float(rho)


def save_uncertainty_csv(result: UncertaintyResult, path) -> None:
    """Per-wavenumber mean/std/CI table (the data behind band plots)."""
    with open(path, "w", newline="") as f:
        f.write("wavenumber,mean,std,ci_low,ci_high\n")
        std = result.std
        for i, w in enumerate(result.mean.grid.values):
            f.write("%.17g,%.17g,%.17g,%.17g,%.17g\n" % (
                w, result.mean.absorbance[i], std[i],
                result.ci_low.absorbance[i], result.ci_high.absorbance[i]))
