import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from myriad.cauchy import CauchyParams, cdf, make_rng, pdf, quantile, sample, uniforms


class FixedUniforms:
    """Generator stand-in that replays a list of values."""

    def __init__(self, values):
        self.values = list(values)

    def random(self, size):
        out, self.values = self.values[:size], self.values[size:]
        return np.array(out)


class TestParams:
    def test_rejects_nonpositive_scale(self):
        with pytest.raises(ValueError):
            CauchyParams(0.0, 0.0)
        with pytest.raises(ValueError):
            CauchyParams(0.0, -1.0)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            CauchyParams(math.nan, 1.0)
        with pytest.raises(ValueError):
            CauchyParams(0.0, math.inf)

    def test_frozen(self):
        p = CauchyParams(1.0, 2.0)
        with pytest.raises(AttributeError):
            p.a = 3.0


class TestDensity:
    def test_peak(self):
        assert pdf(CauchyParams(0, 1), 0.0) == pytest.approx(1 / math.pi)
        assert pdf(CauchyParams(2, 3), 2.0) == pytest.approx(1 / (3 * math.pi))

    def test_half_width(self):
        p = CauchyParams(1.0, 2.0)
        assert pdf(p, 3.0) == pytest.approx(0.5 * pdf(p, 1.0))

    def test_cdf_quartiles(self):
        p = CauchyParams(1.0, 2.0)
        assert cdf(p, 1.0) == pytest.approx(0.5)
        assert cdf(p, 3.0) == pytest.approx(0.75)
        assert cdf(p, -1.0) == pytest.approx(0.25)

    def test_density_integrates_to_cdf(self):
        p = CauchyParams(-0.5, 0.7)
        x = np.linspace(-3, 4, 200001)
        mass = np.trapezoid(pdf(p, x), x)
        assert mass == pytest.approx(cdf(p, 4) - cdf(p, -3), abs=1e-8)

    @given(st.floats(-1e3, 1e3), st.floats(1e-3, 1e3), st.floats(1e-6, 1 - 1e-6))
    def test_quantile_inverts_cdf(self, a, g, u):
        p = CauchyParams(a, g)
        assert cdf(p, quantile(p, u)) == pytest.approx(u, abs=1e-9)


class TestSampling:
    def test_same_seed_same_stream(self):
        p = CauchyParams(3.0, 2.0)
        assert np.array_equal(sample(p, make_rng(7), 1000), sample(p, make_rng(7), 1000))

    def test_different_seed_differs(self):
        p = CauchyParams(0.0, 1.0)
        assert not np.array_equal(sample(p, make_rng(1), 10), sample(p, make_rng(2), 10))

    def test_half_maps_to_location(self):
        x = sample(CauchyParams(4.0, 9.0), FixedUniforms([0.5] * 3), 3)
        assert np.array_equal(x, [4.0, 4.0, 4.0])

    def test_zero_uniform_is_redrawn(self):
        u = uniforms(FixedUniforms([0.0, 0.25, 0.0, 0.75]), 2)
        assert np.array_equal(u, [0.75, 0.25])

    def test_empirical_quartiles(self):
        x = sample(CauchyParams(1.0, 2.0), make_rng(0), 200_000)
        q1, q2, q3 = np.quantile(x, [0.25, 0.5, 0.75])
        assert q2 == pytest.approx(1.0, abs=0.03)
        assert (q3 - q1) / 2 == pytest.approx(2.0, rel=0.02)

    def test_count_must_be_positive(self):
        with pytest.raises(ValueError):
            sample(CauchyParams(0, 1), make_rng(0), 0)
