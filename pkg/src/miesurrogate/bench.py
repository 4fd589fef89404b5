"""Wall-clock benchmark harness for whole-cube correction.

Protocol: one untimed warm-up run, then ``runs`` timed runs of the
corrector over the full cube; per-run wall time is measured at whole-run
granularity so timer overhead cannot dominate a fast corrector. Outputs
of every timed run are checksummed; deterministic correctors must yield
identical checksums, which also guards against dead-code elimination of
an unused result.

The headline comparison runs every corrector single-threaded
(apples-to-apples per-spectrum times); parallel runs are labeled as such.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .core import SpectralCube
from .errors import BenchError, ConfigError

_CONSISTENCY_RTOL = 0.01


@dataclass(frozen=True, eq=False)
class BenchReport:
    corrector_id: str
    n_spectra: int
    runs: int
    total_seconds_mean: float
    total_seconds_std: float
    per_spectrum_us_mean: float
    per_spectrum_us_std: float
    output_checksum: str
    config_fingerprint: str

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        lhs = self.per_spectrum_us_mean * self.n_spectra
        rhs = self.total_seconds_mean * 1e6
        if abs(lhs - rhs) > _CONSISTENCY_RTOL * max(rhs, 1e-9):
            raise ValueError("per-spectrum and total times disagree by > 1%")

    def to_dict(self) -> dict:
        return {
            "corrector_id": self.corrector_id,
            "n_spectra": self.n_spectra,
            "runs": self.runs,
            "total_seconds_mean": self.total_seconds_mean,
            "total_seconds_std": self.total_seconds_std,
            "per_spectrum_us_mean": self.per_spectrum_us_mean,
            "per_spectrum_us_std": self.per_spectrum_us_std,
            "output_checksum": self.output_checksum,
            "config_fingerprint": self.config_fingerprint,
        }


def cube_fingerprint(cube: SpectralCube) -> str:
    h = hashlib.sha256()
    h.update(np.asarray([cube.width, cube.height], dtype="<i8").tobytes())
    h.update(cube.grid.values.astype("<f8").tobytes())
    h.update(cube.data.astype("<f8").tobytes())
    return h.hexdigest()[:16]


def _checksum(result: SpectralCube) -> str:
    return hashlib.sha256(result.data.astype("<f8").tobytes()).hexdigest()[:16]


def run_bench(corrector, corrector_id: str, cube: SpectralCube,
              runs: int = 10, single_thread: bool = True) -> BenchReport:
    """Time ``corrector(cube) -> SpectralCube`` over repeated runs."""
    if runs < 1:
        raise ConfigError("runs must be >= 1")
    fingerprint = cube_fingerprint(cube)
    totals = np.empty(runs)
    checksum = None

    def one_run():
        t0 = time.perf_counter()
        out = corrector(cube)
        elapsed = time.perf_counter() - t0
        if not isinstance(out, SpectralCube):
            raise BenchError(f"{corrector_id}: corrector must return a cube")
        return elapsed, _checksum(out)

    try:
        if single_thread:
            with threadpool_limits(limits=1):
                one_run()   # warm-up, untimed
                for r in range(runs):
                    totals[r], digest = one_run()
                    if checksum is None:
                        checksum = digest
                    elif digest != checksum:
                        raise BenchError(
                            f"{corrector_id}: output checksum changed between "
                            f"timed runs ({checksum} -> {digest})")
        else:
            one_run()
            for r in range(runs):
                totals[r], digest = one_run()
                if checksum is None:
                    checksum = digest
                elif digest != checksum:
                    raise BenchError(
                        f"{corrector_id}: output checksum changed between "
                        f"timed runs ({checksum} -> {digest})")
    except BenchError:
        raise
    except Exception as exc:
        raise BenchError(f"{corrector_id}: corrector failed: {exc}") from exc

    per_us = totals * 1e6 / cube.n_pixels
    return BenchReport(
        corrector_id=corrector_id,
        n_spectra=cube.n_pixels,
        runs=runs,
        total_seconds_mean=float(totals.mean()),
        total_seconds_std=float(totals.std(ddof=0)),
        per_spectrum_us_mean=float(per_us.mean()),
        per_spectrum_us_std=float(per_us.std(ddof=0)),
        output_checksum=checksum,
        config_fingerprint=fingerprint,
    )


def compare(reports) -> list:
    """Pairwise per-spectrum speedups with first-order error propagation.

    ``ratio`` of entry (a, b) is time(a)/time(b): how many times faster
    corrector b is than corrector a.
    """
    reports = list(reports)
    if len(reports) < 2:
        raise ConfigError("need at least 2 reports to compare")
    fp = reports[0].config_fingerprint
    for r in reports[1:]:
        if r.config_fingerprint != fp:
            raise ConfigError(
                "reports benchmark different cubes; refusing to compare")
    rows = []
    for i, a in enumerate(reports):
        for b in reports[i + 1:]:
            ratio = a.per_spectrum_us_mean / b.per_spectrum_us_mean
            rel_a = a.per_spectrum_us_std / a.per_spectrum_us_mean
            rel_b = b.per_spectrum_us_std / b.per_spectrum_us_mean
            rows.append({
                "slow": a.corrector_id,
                "fast": b.corrector_id,
                "speedup": ratio,
                "speedup_std": ratio * float(np.hypot(rel_a, rel_b)),
            })
    return rows


def format_table(reports) -> str:
    """Aligned two-row timing table (validation-set total, per spectrum)."""
    reports = list(reports)
    ids = [r.corrector_id for r in reports]
    rows = [
        ("Time for val.-set",
         ["%.2f s ± %.2f" % (r.total_seconds_mean, r.total_seconds_std)
          for r in reports]),
        ("Time per spectrum",
         ["%.2f us ± %.2f" % (r.per_spectrum_us_mean, r.per_spectrum_us_std)
          for r in reports]),
    ]
    col0 = max(len("Model"), *(len(r[0]) for r in rows))
    widths = [max(len(ids[i]), *(len(r[1][i]) for r in rows))
              for i in range(len(ids))]
    lines = ["%-*s  %s" % (col0, "Model",
                           "  ".join("%-*s" % (w, c) for w, c in zip(widths, ids)))]
    for name, cells in rows:
        lines.append("%-*s  %s" % (col0, name,
                                   "  ".join("%-*s" % (w, c)
                                             for w, c in zip(widths, cells))))
    return "\n".join(lines) + "\n"


def save_reports_json(reports, comparisons, path) -> None:
    doc = {
        "reports": [r.to_dict() for r in reports],
        "comparisons": comparisons,
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
