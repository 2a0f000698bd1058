import numpy as np
import pytest

from toda_gge.measures import (
    GriddedMeasure,
    GridCoverageError,
    bl_distance,
    dilate,
    entropy,
    grid_for_potential,
    log_potential,
    log_potential_grid,
    mollify,
    truncate_mean_preserving,
)


def uniform(lo, hi, n=512):
    h = (hi - lo) / n
    return GriddedMeasure(lo, h, np.full(n, 1.0 / (hi - lo)))


def gaussian(n=2048, R=8.0, var=0.5):
    h = 2 * R / n
    g = GriddedMeasure(-R, h, np.ones(n))
    dens = np.exp(-g.centers**2 / (2 * var))
    return GriddedMeasure(-R, h, dens).normalized()


class TestGriddedMeasure:
    def test_mass_and_normalise(self):
        m = GriddedMeasure(0.0, 0.1, np.ones(10))
        assert m.mass == pytest.approx(1.0)
        m2 = GriddedMeasure(0.0, 0.1, 3 * np.ones(10)).normalized()
        assert m2.mass == pytest.approx(1.0, abs=1e-10)

    def test_from_samples_mass(self):
        rng = np.random.default_rng(0)
        m = GriddedMeasure.from_samples(rng.normal(size=5000), -6.0, 12.0 / 256, 256)
        assert m.mass == pytest.approx(1.0, abs=1e-12)

    def test_from_samples_out_of_grid(self):
        with pytest.raises(GridCoverageError) as ei:
            GriddedMeasure.from_samples([0.0, 10.0], -1.0, 0.1, 20)
        lo, hi = ei.value.suggested
        assert lo < 0.0 and hi > 10.0

    def test_roundtrip_files(self, tmp_path):
        m = gaussian(n=64, R=4.0)
        m.to_files(tmp_path / "m.csv", tmp_path / "m.json")
        back = GriddedMeasure.from_files(tmp_path / "m.csv", tmp_path / "m.json")
        assert back.x0 == m.x0 and back.h == m.h
        assert np.array_equal(back.density, m.density)


class TestLogPotential:
    def test_uniform_at_zero(self):
        m = uniform(-0.5, 0.5, n=400)
        assert log_potential(m, 0.0) == pytest.approx(np.log(0.5) - 1.0, abs=1e-12)

    def test_far_field(self):
        m = uniform(-0.5, 0.5, n=400)
        # oracle: ln|x| plus the quadratic correction of the log expansion
        val = log_potential(m, 10.0)
        assert abs(val - np.log(10.0)) < 1.0 / (2 * 10.0**2)

    def test_even_symmetry(self):
        m = gaussian(n=512, R=6.0)
        xs = np.array([0.3, 1.2, 2.5])
        assert np.allclose(log_potential(m, xs), log_potential(m, -xs), atol=1e-12)

    def test_grid_version_matches_pointwise(self):
        m = gaussian(n=256, R=6.0)
        assert np.allclose(log_potential_grid(m), log_potential(m, m.centers), atol=1e-10)

    def test_dilation_identity(self):
        # U[dilated](factor*x) = U[mu](x) + ln(factor)
        m = gaussian(n=1024, R=6.0)
        factor = 1.7
        md = dilate(m, factor)
        xs = np.array([-1.3, 0.0, 0.4, 2.0])
        lhs = log_potential(md, factor * xs)
        rhs = log_potential(m, xs) + np.log(factor)
        assert np.max(np.abs(lhs - rhs)) < 1e-8


class TestEntropy:
    def test_uniform_cases(self):
        assert entropy(uniform(0, 1)) == pytest.approx(0.0, abs=1e-12)
        assert entropy(uniform(0, 2)) == pytest.approx(np.log(2.0), abs=1e-12)

    def test_gaussian(self):
        # differential entropy of N(0, 1/2): (1/2) ln(2 pi e var)
        m = gaussian(n=4096, R=10.0, var=0.5)
        expected = 0.5 * np.log(2 * np.pi * np.e * 0.5)
        assert entropy(m) == pytest.approx(expected, abs=1e-4)

    def test_mollify_increases_entropy(self):
        rng = np.random.default_rng(1)
        dens = rng.uniform(0.1, 1.0, size=256)
        m = GriddedMeasure(-2.0, 4.0 / 256, dens).normalized()
        assert entropy(mollify(m, 0.1)) >= entropy(m) - 1e-12


class TestBLDistance:
    def test_identity(self):
        m = gaussian(n=256, R=6.0)
        assert bl_distance(m, m) == pytest.approx(0.0, abs=1e-9)

    def test_point_masses(self):
        # single-cell spikes at 0 and t: closed form 2t/(2+t)
        h = 1e-4
        for t in (1.0, 0.25, 3.0):
            a = GriddedMeasure(-h / 2, h, np.array([1.0 / h]))
            b = GriddedMeasure(t - h / 2, h, np.array([1.0 / h]))
            assert bl_distance(a, b) == pytest.approx(2 * t / (2 + t), abs=1e-6)

    def test_symmetry_and_triangle(self):
        m1 = gaussian(n=128, R=6.0, var=0.5)
        m2 = gaussian(n=128, R=6.0, var=1.0)
        m3 = uniform(-2.0, 2.0, n=128)
        d12 = bl_distance(m1, m2)
        d21 = bl_distance(m2, m1)
        assert d12 == pytest.approx(d21, abs=1e-9)
        d13 = bl_distance(m1, m3)
        d23 = bl_distance(m2, m3)
        assert d13 <= d12 + d23 + 1e-9

    def test_bounded_by_two(self):
        a = uniform(-10.0, -9.0, n=64)
        b = uniform(9.0, 10.0, n=64)
        d = bl_distance(a, b)
        assert d <= 2.0 + 1e-9
        # supports ~18-20 apart: 2t/(2+t) puts the value just below 2
        assert 1.75 < d < 2.0

    def test_mollify_transport_bound(self):
        m = gaussian(n=512, R=6.0)
        tau = 0.2
        assert bl_distance(m, mollify(m, tau)) <= tau + 1e-6

    def test_different_grids(self):
        a = uniform(-1.0, 1.0, n=100)
        b = uniform(-1.0, 1.0, n=173)
        assert bl_distance(a, b) < 0.02


class TestDilate:
    def test_uniform_scaling(self):
        m = uniform(-1.0, 1.0, n=128)
        d = dilate(m, 2.0)
        assert d.edges[0] == pytest.approx(-2.0)
        assert d.edges[-1] == pytest.approx(2.0)
        assert d.mass == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(d.density, 0.25)


class TestTruncate:
    def test_symmetric_window(self):
        m = gaussian(n=1024, R=8.0)
        out, K1, K2 = truncate_mean_preserving(m, 0.01)
        assert K1 == pytest.approx(K2, rel=1e-10)
        assert out.mass == pytest.approx(1.0, abs=1e-12)

    def test_windowed_mean_zero(self):
        # asymmetric but centred input: window must balance the first moment
        n = 2048
        h = 16.0 / n
        g = GriddedMeasure(-8.0, h, np.ones(n))
        x = g.centers
        dens = np.exp(-((x - 1.0) ** 2)) + 0.5 * np.exp(-((x + 2.0) ** 2) / 4.0)
        m = GriddedMeasure(-8.0, h, dens).normalized()
        shift = m.mean()
        m = GriddedMeasure(-8.0 - shift, h, m.density)  # recentre exactly-ish
        assert abs(m.mean()) < 1e-6
        out, K1, K2 = truncate_mean_preserving(m, 0.02)
        # windowed first moment of the *original* measure vanishes
        edges = m.edges
        frac = np.clip((np.minimum(edges[1:], K2) - np.maximum(edges[:-1], -K1)) / m.h, 0, 1)
        # exact windowed moment including partial cells
        lo = np.maximum(edges[:-1], -K1)
        hi = np.minimum(edges[1:], K2)
        ok = hi > lo
        moment = np.sum(m.density[ok] * (hi[ok] ** 2 - lo[ok] ** 2) / 2.0)
        assert abs(moment) < 1e-10 + 1e-8 * abs(m.mean() + 1)

    def test_tail_mass_bound(self):
        m = gaussian(n=1024, R=8.0)
        eta = 0.05
        out, K1, K2 = truncate_mean_preserving(m, eta)
        inside = (m.centers > -K1) & (m.centers < K2)
        tail = 1.0 - np.sum(m.density[inside]) * m.h
        assert tail <= eta + m.h  # one-cell slack at the window edges

    def test_eta_too_large(self):
        m = gaussian(n=256, R=6.0)
        with pytest.raises(ValueError):
            truncate_mean_preserving(m, 100.0)


class TestMollify:
    def test_delta_to_uniform(self):
        h = 0.01
        spike = GriddedMeasure(-h / 2, h, np.array([1.0 / h]))
        tau = 0.25
        out = mollify(spike, tau)
        # away from a one-cell edge layer the density is the uniform value
        inner = np.abs(out.centers) < tau - 1.5 * h
        assert np.allclose(out.density[inner], 1.0 / (2 * tau), rtol=1e-10)
        outer = np.abs(out.centers) > tau + 1.5 * h
        assert np.allclose(out.density[outer], 0.0, atol=1e-14)

    def test_mass_and_mean_preserved(self):
        rng = np.random.default_rng(2)
        dens = rng.uniform(0.0, 1.0, size=300)
        m = GriddedMeasure(-1.5, 0.01, dens).normalized()
        mean0 = m.mean()
        out = mollify(m, 0.07)
        assert out.mass == pytest.approx(1.0, abs=1e-10)
        assert out.mean() == pytest.approx(mean0, abs=1e-10)


class TestGridForPotential:
    def test_quadratic_tail(self):
        x0, h, n = grid_for_potential(lambda x: x**2, n_cells=512)
        R = -x0
        assert R >= 5.0  # exp(-25) ~ 1.4e-11 at the edge
        assert n == 512 and h == pytest.approx(2 * R / 512)
