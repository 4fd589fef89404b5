import numpy as np
import pytest
from hypothesis import given, strategies as st

import miesurrogate as ms
from miesurrogate.errors import (DegenerateInput, DimensionError, GridError,
                                 RangeError)


def uniform_grid(start=1000.0, step=2.0, n=64):
    return ms.WavenumberGrid(start + step * np.arange(n))


class TestWavenumberGrid:
    def test_default_grid(self):
        g = ms.default_grid()
        assert len(g) == 426
        assert g.start == 950.0 and g.stop == 1800.0 and g.step == 2.0

    def test_too_short(self):
        with pytest.raises(GridError):
            ms.WavenumberGrid(np.linspace(1000, 1010, 7))

    def test_descending(self):
        with pytest.raises(GridError):
            ms.WavenumberGrid(np.linspace(1800, 950, 50))

    def test_non_uniform(self):
        v = 1000 + 2.0 * np.arange(32)
        v[10] += 0.5
        with pytest.raises(GridError):
            ms.WavenumberGrid(v)

    def test_uniformity_tolerance(self):
        v = 1000 + 2.0 * np.arange(32)
        v[10] += 1e-9 * 2.0 * 0.5   # within 1e-9 relative
        ms.WavenumberGrid(v)

    def test_non_positive(self):
        with pytest.raises(GridError):
            ms.WavenumberGrid(-10 + 2.0 * np.arange(32))

    def test_non_finite(self):
        v = 1000 + 2.0 * np.arange(32)
        v[3] = np.nan
        with pytest.raises(GridError):
            ms.WavenumberGrid(v)

    def test_equality_and_hash(self):
        a = uniform_grid()
        b = uniform_grid()
        assert a == b and hash(a) == hash(b)
        assert a != uniform_grid(start=1002.0)

    def test_values_frozen(self):
        g = uniform_grid()
        with pytest.raises(ValueError):
            g.values[0] = 0.0


class TestSpectrum:
    def test_length_mismatch(self):
        g = uniform_grid()
        with pytest.raises(DimensionError):
            ms.Spectrum(g, np.zeros(len(g) + 1))

    def test_non_finite(self):
        g = uniform_grid()
        v = np.zeros(len(g))
        v[0] = np.inf
        with pytest.raises(ValueError):
            ms.Spectrum(g, v)

    def test_immutable(self):
        s = ms.Spectrum(uniform_grid(), np.ones(64))
        with pytest.raises(ValueError):
            s.absorbance[0] = 2.0


class TestSpectralCube:
    def test_shape_checks(self):
        g = uniform_grid()
        with pytest.raises(DimensionError):
            ms.SpectralCube(2, 2, g, np.zeros((3, len(g))))

    def test_from_spectra_and_accessors(self):
        g = uniform_grid()
        spectra = [ms.Spectrum(g, np.full(len(g), float(i))) for i in range(6)]
        cube = ms.SpectralCube.from_spectra(spectra, width=3, height=2)
        assert cube.n_pixels == 6
        assert cube.pixel(4)[0] == 4.0
        assert np.array_equal(cube.spectrum(5).absorbance, spectra[5].absorbance)

    def test_grid_mismatch(self):
        a = ms.Spectrum(uniform_grid(), np.zeros(64))
        b = ms.Spectrum(uniform_grid(start=1002.0), np.zeros(64))
        with pytest.raises(DimensionError):
            ms.SpectralCube.from_spectra([a, b], 2, 1)


class TestLabeledDataset:
    def test_parallel_checks(self):
        g = uniform_grid()
        raw = [ms.Spectrum(g, np.ones(64))] * 3
        with pytest.raises(DimensionError):
            ms.LabeledDataset(raw, corrected=raw[:2])
        with pytest.raises(DimensionError):
            ms.LabeledDataset(raw, class_labels=[0, 1])

    def test_matrices(self):
        g = uniform_grid()
        raw = [ms.Spectrum(g, np.full(64, i + 1.0)) for i in range(3)]
        ds = ms.LabeledDataset(raw, corrected=raw, class_labels=[0, 1, 0])
        assert ds.raw_matrix().shape == (3, 64)
        assert ds.corrected_matrix()[2, 0] == 3.0


class TestResample:
    def test_identity_grid(self):
        g = uniform_grid()
        s = ms.Spectrum(g, np.sin(g.values / 50.0))
        out = ms.resample(s, g)
        assert np.array_equal(out.absorbance, s.absorbance)

    def test_exact_on_lines(self):
        g = uniform_grid(n=101)
        a, b = 3e-3, -1.5
        s = ms.Spectrum(g, a * g.values + b)
        target = uniform_grid(start=1011.0, step=3.1, n=32)
        out = ms.resample(s, target)
        np.testing.assert_allclose(out.absorbance, a * target.values + b,
                                   rtol=0, atol=1e-12)

    def test_gaussian_on_denser_grid(self):
        # linear interpolation error bound: step^2 * max|f''| / 8
        g = uniform_grid(start=1000.0, step=2.0, n=201)
        center, sigma = 1200.0, 20.0
        f = lambda x: np.exp(-0.5 * ((x - center) / sigma) ** 2)
        s = ms.Spectrum(g, f(g.values))
        dense = uniform_grid(start=1000.0, step=1.0, n=401)
        out = ms.resample(s, dense)
        max_f2 = 1.0 / sigma ** 2  # |f''| <= 1/sigma^2 for a unit Gaussian
        bound = g.step ** 2 * max_f2 / 8.0
        err = np.abs(out.absorbance - f(dense.values)).max()
        assert err <= bound

    def test_range_error(self):
        g = uniform_grid()
        s = ms.Spectrum(g, np.zeros(64))
        with pytest.raises(RangeError):
            ms.resample(s, uniform_grid(start=990.0))


class TestVectorNormalize:
    def test_all_ones(self):
        grid8 = ms.WavenumberGrid(1000 + 2.0 * np.arange(8))
        s = ms.Spectrum(grid8, np.ones(8))
        out = ms.vector_normalize(s)
        np.testing.assert_allclose(out.absorbance, np.full(8, 1 / np.sqrt(8)),
                                   atol=1e-15)

    def test_unit_unchanged(self):
        g = uniform_grid()
        v = np.zeros(64)
        v[5] = 1.0
        out = ms.vector_normalize(ms.Spectrum(g, v))
        assert np.array_equal(out.absorbance, v)

    def test_scale_invariance(self):
        g = uniform_grid()
        v = np.sin(g.values / 30.0) + 2.0
        a = ms.vector_normalize(ms.Spectrum(g, v)).absorbance
        b = ms.vector_normalize(ms.Spectrum(g, 3.0 * v)).absorbance
        np.testing.assert_allclose(a, b, atol=1e-15)

    def test_zero_norm(self):
        with pytest.raises(DegenerateInput):
            ms.vector_normalize(ms.Spectrum(uniform_grid(), np.zeros(64)))

    @given(st.lists(st.floats(-10, 10), min_size=8, max_size=8).filter(
        lambda v: any(x != 0 for x in v)))
    def test_unit_norm_property(self, values):
        g = ms.WavenumberGrid(1000 + 2.0 * np.arange(8))
        out = ms.vector_normalize(ms.Spectrum(g, values))
        assert abs(np.linalg.norm(out.absorbance) - 1.0) <= 1e-12


class TestSecondDerivative:
    def test_constant(self):
        g = uniform_grid()
        out = ms.second_derivative(ms.Spectrum(g, np.full(64, 1.7)))
        assert np.array_equal(out.absorbance, np.zeros(64))

    def test_quadratic(self):
        g = uniform_grid()
        a = 4.2e-4
        out = ms.second_derivative(ms.Spectrum(g, a * g.values ** 2))
        np.testing.assert_allclose(out.absorbance[1:-1], 2 * a,
                                   rtol=1e-7)

    def test_gaussian_vs_analytic(self):
        g = ms.WavenumberGrid(1100 + 1.0 * np.arange(201))  # step 1
        center, sigma = 1200.0, 15.0
        x = g.values
        s = ms.Spectrum(g, np.exp(-0.5 * ((x - center) / sigma) ** 2))
        out = ms.second_derivative(s)
        analytic = (((x - center) ** 2 / sigma ** 4) - 1.0 / sigma ** 2) * \
            np.exp(-0.5 * ((x - center) / sigma) ** 2)
        err = np.abs(out.absorbance[1:-1] - analytic[1:-1]).max()
        assert err <= 1e-3 * np.abs(analytic).max()

    def test_endpoints_replicated(self):
        g = uniform_grid()
        out = ms.second_derivative(ms.Spectrum(g, np.sin(g.values / 11.0)))
        assert out.absorbance[0] == out.absorbance[1]
        assert out.absorbance[-1] == out.absorbance[-2]

    @given(st.integers(0, 2 ** 31 - 1))
    def test_linearity(self, seed):
        g = ms.WavenumberGrid(1000 + 2.0 * np.arange(32))
        rng = np.random.default_rng(seed)
        f = rng.normal(size=32)
        h = rng.normal(size=32)
        lhs = ms.second_derivative(ms.Spectrum(g, f + h)).absorbance
        rhs = (ms.second_derivative(ms.Spectrum(g, f)).absorbance
               + ms.second_derivative(ms.Spectrum(g, h)).absorbance)
        assert np.abs(lhs - rhs).max() <= 1e-12
