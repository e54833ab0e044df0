from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlar_lse.errors import CertificationFailure, InvalidArgument, ResourceError
from nlar_lse.excitation import (
    Domain, box_count, certify_delta_star, choose_delta_star, jordan_boundary_check, measure_excitation,
    shear_preimage_bounds, shear_volume_test, sphere_infimum,
)
from nlar_lse.models import make_exar, make_general, make_linear_ar, make_separable, make_tar
from nlar_lse.rng import make_generator

IDENT1 = make_separable([["identity"]])
IDENT2 = make_separable([["identity"], ["identity"]])
DUP = make_separable([["identity", "identity"]])
SQ = make_separable([["identity", "square"]])
E1 = Domain.box([(-1, 1)])
# dense-grid oracle (10^4 directions x 20001 points) for phi(y) = (y, y^2) on (-1, 1), frozen
SQUARE_INFIMUM = {0.05: 1.3355, 0.1: 1.0124, 0.2: 0.7501}


def square_map_oracle(delta, directions=10_000, grid=20_001):
    """Dense-grid infimum over unit x of the length of {y in (-1,1) : |x1 y + x2 y^2| > delta}."""
    y = np.linspace(-1, 1, grid)
    a = np.linspace(0, np.pi, directions, endpoint=False)  # x and -x give the same set
    best = math.inf
    for chunk in np.array_split(a, max(1, directions // 500)):
        hit = np.abs(np.outer(np.cos(chunk), y) + np.outer(np.sin(chunk), y * y)) > delta
        best = min(best, 2.0 * hit.mean(axis=1).min())
    return best


class TestDomain:
    def test_box(self):
        d = Domain.box([(0, 2), (-1, 1)])
        assert d.dim == 2 and d.volume == 4.0

    def test_bad_box(self):
        with pytest.raises(InvalidArgument):
            Domain.box([(1, 1)])

    def test_json_round_trip(self):
        d = Domain.box([(0, 2), (-1, 1)])
        assert Domain.from_json(d.to_json()).boxes == d.boxes

    def test_samples_inside(self):
        d = Domain.box([(0, 2), (-1, 1)])
        assert np.all(d.contains_closed(d.sample(make_generator(0), 1000)))


class TestMeasure:
    def test_identity_half(self):
        est = measure_excitation(IDENT1, E1, [1.0], 0.5, samples=100_000, seed=1)
        assert abs(est.measure - 1.0) <= 3 * est.half_width / 1.96 + 1e-12
        assert 0 <= est.measure <= E1.volume

    def test_above_sup(self):
        assert measure_excitation(IDENT1, E1, [1.0], 1.5, samples=5000).measure == 0.0

    def test_zero_delta(self):
        assert measure_excitation(IDENT1, E1, [1.0], 0.0, samples=5000).measure == pytest.approx(2.0)

    def test_direction_must_be_unit(self):
        with pytest.raises(InvalidArgument):
            measure_excitation(IDENT1, E1, [1.1], 0.5)

    def test_sample_floor(self):
        with pytest.raises(InvalidArgument):
            measure_excitation(IDENT1, E1, [1.0], 0.5, samples=999)

    @given(st.floats(0, 2 * np.pi), st.floats(0, 0.5), st.floats(0, 0.5), st.integers(0, 1000))
    def test_monotone_in_delta(self, a, d1, dd, seed):
        x = [math.cos(a), math.sin(a)]
        m1 = measure_excitation(SQ, E1, x, d1, samples=2000, seed=seed).measure
        m2 = measure_excitation(SQ, E1, x, d1 + dd, samples=2000, seed=seed).measure
        assert m2 <= m1

    @given(st.floats(0, 2 * np.pi), st.floats(0, 0.8), st.integers(0, 1000))
    def test_direction_symmetry(self, a, d, seed):
        x = np.array([math.cos(a), math.sin(a)])
        assert (measure_excitation(SQ, E1, x, d, samples=2000, seed=seed).measure
                == measure_excitation(SQ, E1, -x, d, samples=2000, seed=seed).measure)


class TestSphereInfimum:
    def test_duplicated_basis(self):
        x, v = sphere_infimum(DUP, E1, 0.05, seed=2)
        assert v <= 1e-3 * E1.volume
        assert abs(abs(x[0] + x[1])) < 0.05

    def test_square_map_against_grid_oracle(self):
        for delta, ref in SQUARE_INFIMUM.items():
            _, v = sphere_infimum(SQ, E1, delta, seed=4, samples=40_000)
            assert abs(v - ref) < 0.03, (delta, v, ref)

    def test_frozen_oracle_values(self):
        for delta, ref in SQUARE_INFIMUM.items():
            assert abs(square_map_oracle(delta, directions=2000, grid=4001) - ref) < 2e-3

    def test_identity_symmetry(self):
        x, v = sphere_infimum(IDENT1, E1, 0.5, seed=0)
        m = measure_excitation(IDENT1, E1, [1.0], 0.5, samples=20_000, seed=0)
        assert abs(v - m.measure) < 0.05
        assert abs(abs(x[0]) - 1.0) < 1e-12

    def test_coarse_floor(self):
        with pytest.raises(InvalidArgument):
            sphere_infimum(SQ, E1, 0.1, coarse_samples=99)


class TestDeltaStar:
    def test_identity(self):
        assert choose_delta_star(IDENT1, E1, [0.1, 0.25, 0.5], 0.4) == 0.5

    def test_duplicated_fails(self):
        with pytest.raises(CertificationFailure):
            choose_delta_star(DUP, E1, [0.01, 0.05, 0.1], 0.05)

    def test_impossible_measure(self):
        with pytest.raises(CertificationFailure):
            choose_delta_star(IDENT1, E1, [0.1], 3.0)

    def test_grid_sorted(self):
        with pytest.raises(InvalidArgument):
            choose_delta_star(IDENT1, E1, [0.5, 0.1], 0.4)

    def test_square_certifies(self):
        ds = certify_delta_star(SQ, E1, [0.01, 0.05, 0.1, 0.2], 0.05)
        assert ds.delta_star > 0 and ds.infimum_value >= 0.05
        assert abs(np.linalg.norm(ds.infimum_direction) - 1) < 1e-12

    def test_failure_carries_best(self):
        with pytest.raises(CertificationFailure) as ei:
            certify_delta_star(DUP, E1, [0.01, 0.05], 0.05)
        assert ei.value.best.delta_star == 0.01


class TestBoxCount:
    def test_identity_level_point(self):
        res = box_count(IDENT1, [1.0], 0.5, [(0, 1)], 10)
        assert res.count == 2 and res.ratio == 2.0

    def test_no_crossing(self):
        assert box_count(IDENT1, [1.0], 1.5, [(0, 1)], 10).count == 0

    @pytest.mark.parametrize("r", [8, 16, 32, 64])
    def test_line_in_plane(self, r):
        res = box_count(IDENT2, [1.0, 0.0], 0.0, [(-1, 1), (-1, 1)], r)
        assert res.count in (r, 2 * r) and res.ratio <= 2

    def test_count_bounds(self):
        res = box_count(make_exar([0.1, 0.2], [0.3, 0.4], 1.0), [0.5, 0.5, 0.5, 0.5], 0.1, [(-2, 2), (-2, 2)], 16)
        assert 0 <= res.count <= 16**2

    def test_small_r(self):
        with pytest.raises(InvalidArgument):
            box_count(IDENT1, [1.0], 0.5, [(0, 1)], 1)

    def test_resource_cap(self):
        with pytest.raises(ResourceError):
            box_count(IDENT2, [1.0, 0.0], 0.0, [(-1, 1), (-1, 1)], 4096, max_points=10_000)

    @pytest.mark.parametrize("n", [1, 2])
    def test_ratio_bounded(self, n):
        rmap = IDENT1 if n == 1 else IDENT2
        g = make_generator(31 + n)
        box = [(-1.0, 1.0)] * n
        for _ in range(20):
            x = g.standard_normal(n)
            x /= np.linalg.norm(x)
            delta = g.uniform(-0.8, 0.8)
            ratios = [box_count(rmap, x, delta, box, r).ratio for r in (8, 16, 32, 64, 128, 256)]
            assert max(ratios) <= 4 * min(ratios)


class TestJordan:
    def test_identity_series(self):
        E = Domain.box([(0, 1)])
        s = jordan_boundary_check(IDENT1, E, [1.0], 0.5, [8, 16, 32])
        np.testing.assert_allclose(s, [0.25, 0.125, 0.0625], rtol=1e-15)

    def test_constant_map(self):
        const = make_general(lambda W: np.ones((W.shape[0], 1)) * 0.3, 1, 1)
        s = jordan_boundary_check(const, E1, [1.0], 0.5, [8, 16, 32])
        assert np.all(s == 0.0)

    def test_exar_shrinks(self):
        rmap = make_exar([0.4, 0.1], [0.2, -0.3], 1.0).regressor
        g = make_generator(8)
        E = Domain.box([(-2, 2), (-2, 2)])
        for _ in range(5):
            x = g.standard_normal(4)
            x /= np.linalg.norm(x)
            s = jordan_boundary_check(rmap, E, x, 0.1, [8, 16, 32, 64, 128])
            assert np.all(np.diff(s) <= 0.1 * s[:-1] + 1e-12)
            assert s[-1] < s[0] / 4 or s[0] == 0

    def test_increasing_required(self):
        with pytest.raises(InvalidArgument):
            jordan_boundary_check(IDENT1, E1, [1.0], 0.5, [16, 8])


class TestShear:
    def test_translation(self):
        res = shear_volume_test(make_linear_ar([0.7]), [0.7], [1.3], [(0.0, 0.5)], samples=200_000, seed=1)
        assert res.exact == 0.5 and abs(res.z_score) <= 3

    def test_zero_direction(self):
        B = shear_preimage_bounds(make_exar([0.1], [0.2], 1.0), [0.0, 0.0], [0.4], [(-1.0, 2.0)])
        assert B == ((-1.0, 2.0),)
        res = shear_volume_test(make_exar([0.1], [0.2], 1.0), [0.0, 0.0], [0.4], [(-1.0, 2.0)], samples=100_000)
        assert res.estimate == 3.0

    def test_exar_n2(self):
        g = make_generator(12)
        rmap = make_exar([0.4, 0.1], [0.2, -0.3], 1.0)
        res = shear_volume_test(rmap, g.standard_normal(4), g.standard_normal(2), [(-0.5, 0.5), (0.0, 0.6)],
                                samples=1_000_000, seed=3)
        assert abs(res.estimate - res.exact) <= 0.05 * res.exact

    def test_tar(self):
        res = shear_volume_test(make_tar("identity", [0.5, -0.7], [(-2, 0), (0, 2)]), [0.5, -0.7], [1.0],
                                [(-1.0, 1.0)], samples=200_000, seed=4)
        assert res.within_3sd

    def test_bad_bounding_box(self):
        with pytest.raises(InvalidArgument, match="bounding box"):
            shear_volume_test(make_linear_ar([0.7]), [0.7], [1.3], [(0.0, 0.5)], B=[(0.0, 0.5)], samples=100_000)

    def test_sample_floor(self):
        with pytest.raises(InvalidArgument):
            shear_volume_test(make_linear_ar([0.7]), [0.7], [1.3], [(0.0, 0.5)], samples=1000)


def test_shear_exact_enclosure_zero_variance():
    # n=1 enclosure is the exact preimage: every sample hits, sd is 0
    res = shear_volume_test(make_linear_ar([0.4]), [-0.3], [0.7], [(0.45, 1.95)], samples=100_000)
    assert res.hits == res.samples and res.std == 0.0
    assert res.z_score == 0.0 and res.within_3sd
