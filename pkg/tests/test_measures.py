import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from weighted_minkowski.geometry import DirectionSet, SupportVector, random_body, wulff_shape
from weighted_minkowski.measures import (
    body_mass, cone_measure, lp_mixed_measure, lp_surface_measure, mass_first_variation, mass_hessian,
    mixed_measure, weighted_facet_area, weighted_facet_areas, weighted_perimeter,
)
from weighted_minkowski.weights import WeightProfile, radial_mass

AXES2 = np.array([[1.0, 0], [0, 1.0], [-1.0, 0], [0, -1.0]])
AXES3 = np.vstack([np.eye(3), -np.eye(3)])

# tensor-product normal CDF oracle, (2 Phi(1) - 1)^n
GAUSS_SQUARE = 0.4660649426743922
GAUSS_CUBE = 0.31817763901728086
# scipy quad of (2 pi)^-1 exp(-(1 + t^2)/2) over t in [-1, 1]
GAUSS_UNIT_EDGE = 0.1651908710340167
# same integrand on the edge of the square of half-width 2
GAUSS_EDGE_2 = 0.051534363288818545

seeds = st.integers(0, 2**32 - 1)


def square(s=1.0):
    return wulff_shape(AXES2, np.full(4, s))


def all_active_body(rng, n, symmetric=False):
    # first variations exist only where no facet is about to appear
    while True:
        K = random_body(rng, n, symmetric=symmetric)
        if K.active.all():
            return K


def weight_for(kind, n):
    return {"gaussian": WeightProfile.gaussian(n), "cauchy": WeightProfile.cauchy(n, n + 2, 1.0),
            "lebesgue": WeightProfile.lebesgue(n)}[kind]


class TestBodyMass:
    def test_lebesgue_square(self):
        assert body_mass(square(), WeightProfile.lebesgue(2)) == pytest.approx(4.0, rel=1e-12)

    @pytest.mark.parametrize("method", ["cone", "radial"])
    def test_gaussian_square(self, method):
        assert body_mass(square(), WeightProfile.gaussian(2), method, tol=1e-12) == pytest.approx(GAUSS_SQUARE, rel=1e-10)

    def test_gaussian_cube(self):
        cube = wulff_shape(AXES3, np.ones(6))
        assert body_mass(cube, WeightProfile.gaussian(3), tol=1e-12) == pytest.approx(GAUSS_CUBE, rel=1e-10)

    def test_oracles_agree(self):
        assert oracles.gaussian_box_mass(1.0, 2) == pytest.approx(GAUSS_SQUARE, rel=1e-14)
        assert oracles.gaussian_box_mass(1.0, 3) == pytest.approx(GAUSS_CUBE, rel=1e-14)

    @pytest.mark.parametrize("N", [64, 256])
    def test_disc_approximant_brackets(self, N):
        w = WeightProfile.gaussian(2)
        P = wulff_shape(DirectionSet.uniform_circle(N), np.ones(N))
        m = body_mass(P, w, tol=1e-12)
        assert radial_mass(w, 1.0) < m < radial_mass(w, 1 / math.cos(math.pi / N))

    def test_polar_oracle(self):
        rng = np.random.default_rng(11)
        w = WeightProfile.cauchy(2, 3, 1.5)
        for _ in range(3):
            K = random_body(rng, 2, symmetric=False)
            ref = oracles.polar_mass_2d(K.vertex_cycle(), w.psi)
            assert body_mass(K, w, tol=1e-12) == pytest.approx(ref, rel=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            body_mass(square(), WeightProfile.gaussian(3))

    @settings(max_examples=25, deadline=None)
    @given(seeds, st.sampled_from(["gaussian", "cauchy", "lebesgue"]))
    def test_planar_routes_agree(self, seed, kind):
        K = random_body(np.random.default_rng(seed), 2, symmetric=False)
        cone, radial = body_mass(K, weight_for(kind, 2), "check", tol=1e-11)
        assert cone == pytest.approx(radial, rel=1e-9)

    def test_spatial_routes_agree_to_sampling_error(self):
        rng = np.random.default_rng(0)
        for _ in range(3):
            cone, radial = body_mass(random_body(rng, 3), WeightProfile.gaussian(3), "check")
            assert cone == pytest.approx(radial, rel=1e-3)


class TestFacetAreas:
    def test_lebesgue_lengths(self):
        assert weighted_facet_areas(square(), WeightProfile.lebesgue(2)) == pytest.approx([2, 2, 2, 2], rel=1e-12)

    def test_gaussian_edge(self):
        assert weighted_facet_area(square(), WeightProfile.gaussian(2), 1, tol=1e-12) == pytest.approx(GAUSS_UNIT_EDGE, rel=1e-10)

    def test_edge_oracles(self):
        psi = WeightProfile.gaussian(2).psi
        assert oracles.edge_mass(psi, [1, 1], [-1, 1]) == pytest.approx(GAUSS_UNIT_EDGE, rel=1e-12)
        assert oracles.edge_mass(psi, [2, 2], [-2, 2]) == pytest.approx(GAUSS_EDGE_2, rel=1e-12)

    def test_random_polygon_edges(self):
        rng = np.random.default_rng(5)
        w = WeightProfile.cauchy(2, 4, 1.0)
        K = random_body(rng, 2, symmetric=False)
        S = weighted_facet_areas(K, w, tol=1e-12)
        for i in np.flatnonzero(K.active):
            a, b = K.vertices[list(K.facets[i])]
            assert S[i] == pytest.approx(oracles.edge_mass(w.psi, a, b), rel=1e-10)

    def test_cube_face_is_tensor_product(self):
        # on the face x = 1: psi(1) * (int_{-1}^1 exp(-t^2/2) dt)^2 up to normalisation
        cube = wulff_shape(AXES3, np.ones(6))
        expect = math.exp(-0.5) / math.sqrt(2 * math.pi) * (2 * oracles.normal_cdf(1.0) - 1) ** 2
        S = weighted_facet_areas(cube, WeightProfile.gaussian(3), tol=1e-12)
        assert S == pytest.approx(np.full(6, expect), rel=1e-10)

    def test_inactive_facet_refused(self):
        u = np.vstack([AXES2, [[1 / math.sqrt(2), 1 / math.sqrt(2)]]])
        K = wulff_shape(u, np.array([1, 1, 1, 1, 10.0]))
        with pytest.raises(ValueError):
            weighted_facet_area(K, WeightProfile.gaussian(2), 4)
        assert weighted_facet_areas(K, WeightProfile.gaussian(2))[4] == 0.0

    def test_scaled_weight(self):
        w = WeightProfile.gaussian(2)
        a = weighted_facet_areas(square(), w, tol=1e-12)
        b = weighted_facet_areas(square(), w.scaled(2.5), tol=1e-12)
        assert b == pytest.approx(2.5 * a, rel=1e-12)

    def test_perimeter(self):
        assert weighted_perimeter(square(), WeightProfile.gaussian(2), tol=1e-12) == pytest.approx(4 * GAUSS_UNIT_EDGE, rel=1e-10)


class TestLpSurface:
    def test_p_one_is_facet_areas(self):
        w = WeightProfile.gaussian(2)
        K = random_body(np.random.default_rng(2), 2)
        assert np.array_equal(lp_surface_measure(K, w, 1.0).values, weighted_facet_areas(K, w))

    def test_lebesgue_cone_measure(self):
        m = cone_measure(square(), WeightProfile.lebesgue(2))
        assert m.values == pytest.approx([2, 2, 2, 2], rel=1e-12)
        assert m.total == pytest.approx(8.0)

    def test_p3_scaling(self):
        m = lp_surface_measure(square(2.0), WeightProfile.gaussian(2), 3.0, tol=1e-12)
        assert m.values == pytest.approx(np.full(4, GAUSS_EDGE_2 / 4), rel=1e-10)

    def test_origin_on_boundary(self):
        K = wulff_shape(AXES2, np.array([1, 1, 1, 1.0]))
        shifted = K.__class__(K.normals, K.support, np.array([1, 1, 1, 0.0]), K.active, K.facet_area,
                              K.vertices, K.facets)
        with pytest.raises(ValueError):
            lp_surface_measure(shifted, WeightProfile.gaussian(2), 2.0)

    @settings(max_examples=20, deadline=None)
    @given(seeds, st.sampled_from([2, 3]))
    def test_inactive_zero(self, seed, n):
        K = random_body(np.random.default_rng(seed), n, symmetric=False)
        m = lp_surface_measure(K, WeightProfile.gaussian(n), 2.5)
        assert np.all(m.values[~K.active] == 0)
        assert np.all(m.values[K.active] > 0)


class TestMixed:
    @settings(max_examples=20, deadline=None)
    @given(seeds, st.sampled_from([2, 3]), st.floats(1.0, 6.0))
    def test_lp_self_mixed(self, seed, n, p):
        K = random_body(np.random.default_rng(seed), n)
        w = WeightProfile.gaussian(n)
        S = weighted_facet_areas(K, w)
        assert lp_mixed_measure(K, K, w, p, areas=S) == pytest.approx(mixed_measure(K, K, w, areas=S) / p, rel=1e-12)

    def test_lebesgue_perimeter(self):
        K = random_body(np.random.default_rng(8), 2, symmetric=False)
        perim = np.sum(np.linalg.norm(np.diff(np.vstack([K.vertex_cycle(), K.vertex_cycle()[:1]]), axis=0), axis=1))
        assert mixed_measure(K, 1.0, WeightProfile.lebesgue(2)) == pytest.approx(perim, rel=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(seeds, st.sampled_from([2, 3]))
    def test_lebesgue_equality(self, seed, n):
        K = random_body(np.random.default_rng(seed), n, symmetric=False)
        w = WeightProfile.lebesgue(n)
        assert mixed_measure(K, K, w) == pytest.approx(n * K.volume, rel=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(seeds, st.sampled_from([2, 3]), st.sampled_from(["gaussian", "cauchy"]))
    def test_mass_dominates_self_mixed(self, seed, n, kind):
        K = random_body(np.random.default_rng(seed), n, symmetric=False)
        w = weight_for(kind, n)
        assert n * body_mass(K, w) >= mixed_measure(K, K, w) * (1 - 1e-8)

    def test_support_vector_input(self):
        K = square()
        sv = SupportVector(DirectionSet(AXES2), np.array([1.0, 2, 3, 4]))
        assert mixed_measure(K, sv, WeightProfile.lebesgue(2)) == pytest.approx(20.0)
        with pytest.raises(ValueError):
            lp_mixed_measure(K, sv, WeightProfile.lebesgue(2), 0.5)


class TestVariations:
    """First variations against Richardson finite differences of body_mass."""

    @staticmethod
    def fd(K, w, f, variation, p):
        h, u = K.offsets, K.normals

        def path(t):
            if variation == "linear":
                v = h + t * f
            elif variation == "lp":
                v = (h**p + t * f) ** (1 / p)
            else:
                v = h * np.exp(t * f)
            return body_mass(wulff_shape(u, v), w, tol=1e-10)

        return oracles.richardson_derivative(path, 1e-3)

    @pytest.mark.parametrize("n", [2, 3])
    @pytest.mark.parametrize("kind", ["gaussian", "cauchy", "lebesgue"])
    @pytest.mark.parametrize("variation,p", [("linear", 1.0), ("lp", -1.0), ("lp", 0.5), ("lp", 3.0), ("log", 0.0)])
    def test_against_finite_difference(self, n, kind, variation, p):
        rng = np.random.default_rng([n, len(kind), int(10 * p) + 20, len(variation)])
        K = all_active_body(rng, n)
        w = weight_for(kind, n)
        f = rng.standard_normal(len(K.normals))
        exact = mass_first_variation(K, w, f, variation, p)
        assert exact == pytest.approx(self.fd(K, w, f, variation, p), rel=1e-5)

    def test_p_zero_needs_log(self):
        with pytest.raises(ValueError):
            mass_first_variation(square(), WeightProfile.gaussian(2), np.ones(4), "lp", 0.0)

    @pytest.mark.parametrize("n", [2, 3])
    def test_hessian_against_facet_differences(self, n):
        rng = np.random.default_rng(40 + n)
        K = all_active_body(rng, n)
        w = WeightProfile.gaussian(n)
        H = mass_hessian(K, w)
        step = 1e-4
        for j in range(0, len(K.normals), max(1, len(K.normals) // 4)):
            e = np.zeros(len(K.normals))
            e[j] = 1.0

            def col(t):
                return weighted_facet_areas(wulff_shape(K.normals, K.offsets + t * e), w, tol=1e-12)

            fd = (col(step) - col(-step)) / (2 * step)
            assert H[:, j] == pytest.approx(fd, rel=1e-5, abs=1e-7)

    def test_hessian_symmetric(self):
        K = all_active_body(np.random.default_rng(9), 3)
        H = mass_hessian(K, WeightProfile.cauchy(3, 5, 1.0))
        assert np.allclose(H, H.T, atol=1e-12)
