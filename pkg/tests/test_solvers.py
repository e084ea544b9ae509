import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from weighted_minkowski.errors import PreconditionError
from weighted_minkowski.geometry import (
    DirectionSet, SphericalMeasure, SupportVector, hausdorff_distance, hausdorff_to_ball, random_body, wulff_shape,
)
from weighted_minkowski.measures import body_mass, lp_surface_measure, weighted_facet_areas
from weighted_minkowski.solvers import (
    ProblemSpec, SolverConfig, enforce, kkt_report, objective_eval, precheck, solve, solve_entropy, solve_free,
    solve_isotropic, solve_pinned, solve_small_mass_dual,
)
from weighted_minkowski.weights import WeightProfile

AXES = DirectionSet(np.array([[1.0, 0], [0, 1.0], [-1.0, 0], [0, -1.0]]))
seeds = st.integers(0, 2**32 - 1)


def circle_data(N=64, scale=1.0, modulation=0.0, harmonic=2):
    d = DirectionSet.uniform_circle(N)
    th = np.arctan2(d.units[:, 1], d.units[:, 0])
    return SphericalMeasure(d, scale * d.quadrature_weights * (1 + modulation * np.cos(harmonic * th)))


def square_spec(a=4.0, mode="pinned", p=1.0, **kw):
    return ProblemSpec(WeightProfile.lebesgue(2), SphericalMeasure(AXES, [2.0, 2, 2, 2]), p, mode, a=a, **kw)


class TestObjective:
    def test_omega_unit(self):
        spec = ProblemSpec(WeightProfile.gaussian(2), SphericalMeasure(AXES, np.ones(4)), 1.0, "pinned", a=0.3)
        assert objective_eval(spec, np.ones(4)) == -4.0

    def test_entropy_at_one(self):
        spec = ProblemSpec(WeightProfile.gaussian(2), SphericalMeasure(AXES, np.ones(4)), 0.0, "entropy", a=0.3)
        assert objective_eval(spec, np.ones(4)) == 0.0

    @pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
    def test_free_on_a_circumscribed_polygon(self, r):
        nu = circle_data(256, 0.02)
        spec = ProblemSpec(WeightProfile.gaussian(2), nu, 3.0, "free")
        K = wulff_shape(nu.directions.units, np.full(256, r))
        expect = body_mass(K, WeightProfile.gaussian(2), tol=1e-12) - r**3 / 3 * nu.total
        assert objective_eval(spec, np.full(256, r)) == pytest.approx(expect, rel=1e-12)
        # disc closed form within the polygon's area excess
        disc = oracles.gaussian_disc_mass(r) - r**3 / 3 * nu.total
        assert objective_eval(spec, np.full(256, r)) == pytest.approx(disc, abs=2e-4)

    @settings(max_examples=30, deadline=None)
    @given(seeds, st.sampled_from([("pinned", 1.0), ("pinned", -1.0), ("pinned", 2.5), ("entropy", 0.0),
                                   ("free", 3.0)]))
    def test_projection_never_decreases(self, seed, mode_p):
        mode, p = mode_p
        rng = np.random.default_rng(seed)
        nu = circle_data(24, 0.05, 0.3)
        h = np.exp(0.3 * rng.standard_normal(24))
        spec = ProblemSpec(WeightProfile.gaussian(2), nu, p, mode, a=0.3)
        assert objective_eval(spec, h, project=True) >= objective_eval(spec, h, project=False) - 1e-14

    @settings(max_examples=20, deadline=None)
    @given(seeds, st.sampled_from([("pinned", 1.0), ("pinned", -1.0), ("pinned", 2.5), ("entropy", 0.0)]))
    def test_data_gradient(self, seed, mode_p):
        mode, p = mode_p
        rng = np.random.default_rng(seed)
        nu = circle_data(16, 1.0, 0.2)
        spec = ProblemSpec(WeightProfile.gaussian(2), nu, p, mode, a=0.3)
        h = np.exp(0.2 * rng.standard_normal(16))
        f = rng.standard_normal(16)
        fd = oracles.richardson_derivative(lambda t: objective_eval(spec, h + t * f, project=False), 1e-4)
        if mode == "entropy":
            exact = -np.sum(nu.values * f / h) / nu.total
        else:
            exact = -np.sum(nu.values * h ** (p - 1) * f)
        assert exact == pytest.approx(fd, rel=1e-5)


class TestPinned:
    def test_unit_square(self):
        r = solve_pinned(square_spec(4.0))
        assert r.converged
        assert r.h.values == pytest.approx(np.ones(4), abs=1e-9)
        assert r.lam == pytest.approx(1.0, rel=1e-10)

    def test_doubled_square(self):
        r = solve_pinned(square_spec(16.0))
        assert r.converged
        assert r.h.values == pytest.approx(np.full(4, 2.0), abs=1e-9)
        assert r.lam == pytest.approx(0.5, rel=1e-10)
        assert r.lambda_agreement <= 1e-10

    @pytest.mark.parametrize("p", [1.0, -1.0, 0.5, 3.0])
    def test_perturbed_gaussian(self, p):
        spec = ProblemSpec(WeightProfile.gaussian(2), circle_data(64, 1.0, 0.3), p, "pinned", a=0.6)
        r = solve(spec)
        assert r.converged
        assert r.residual_inf <= 1e-6 * spec.nu.total
        assert r.mass_error <= 1e-8
        assert np.all(np.diff(r.objective_trace) >= 0)

    def test_ball_radius(self):
        spec = ProblemSpec(WeightProfile.gaussian(2), circle_data(128), 1.0, "pinned", a=0.5)
        r = solve_pinned(spec)
        R = math.sqrt(2 * math.log(2))
        assert hausdorff_to_ball(r.body, R) <= 2 * (1 - math.cos(math.pi / 128))

    def test_rotation_equivariance(self):
        # a rotation by a multiple of the grid angle permutes the directions
        N, shift = 48, 5
        d = DirectionSet.uniform_circle(N)
        th = np.arctan2(d.units[:, 1], d.units[:, 0])
        vals = d.quadrature_weights * (1 + 0.3 * np.cos(2 * th) + 0.1 * np.sin(3 * th))
        w = WeightProfile.gaussian(2)
        r0 = solve_pinned(ProblemSpec(w, SphericalMeasure(d, vals), 1.0, "pinned", a=0.6))
        alpha = 2 * math.pi * shift / N
        R = np.array([[math.cos(alpha), -math.sin(alpha)], [math.sin(alpha), math.cos(alpha)]])
        rot = DirectionSet(d.units @ R.T)
        r1 = solve_pinned(ProblemSpec(w, SphericalMeasure(rot, vals), 1.0, "pinned", a=0.6))
        back = wulff_shape(r1.body.normals @ R, r1.h.values)
        assert hausdorff_distance(r0.body, back) <= 1e-8

    def test_3d_cube_data(self):
        d = DirectionSet(np.vstack([np.eye(3), -np.eye(3)]))
        spec = ProblemSpec(WeightProfile.gaussian(3), SphericalMeasure(d, np.ones(6)), 1.0, "pinned", a=0.2)
        r = solve_pinned(spec)
        assert r.converged
        assert np.ptp(r.h.values) <= 1e-9


class TestEntropy:
    def test_square_needs_force(self):
        # the axis cone measure meets subspace concentration with equality
        with pytest.raises(PreconditionError):
            solve_entropy(square_spec(4.0, "entropy", 0.0))

    def test_square_forced(self):
        r = solve_entropy(square_spec(4.0, "entropy", 0.0, config=SolverConfig(force=True)))
        assert r.converged
        assert r.h.values == pytest.approx(np.ones(4), abs=1e-8)
        assert any("forced" in note for note in r.notes)

    def test_cone_measure_datum(self):
        cone = lp_surface_measure(wulff_shape(AXES.units, np.ones(4)), WeightProfile.lebesgue(2), 0.0).values
        assert cone == pytest.approx([2, 2, 2, 2])

    def test_axis_concentration_refused(self):
        spec = ProblemSpec(WeightProfile.lebesgue(2), SphericalMeasure(AXES, [1.5, 0.5, 1.5, 0.5]), 0.0, "entropy", a=4.0)
        with pytest.raises(PreconditionError) as err:
            solve_entropy(spec)
        assert "subspace" in str(err.value)

    def test_perturbed_gaussian(self):
        r = solve(ProblemSpec(WeightProfile.gaussian(2), circle_data(64, 1.0, 0.3), 0.0, "entropy", a=0.6))
        assert r.converged and np.all(np.diff(r.objective_trace) >= 0)


class TestFree:
    def test_unit_disc(self):
        c = math.exp(-0.5) / (2 * math.pi)
        r = solve_free(ProblemSpec(WeightProfile.gaussian(2), SphericalMeasure.isotropic(2, 128, c), 3.0, "free"))
        assert r.converged
        assert hausdorff_to_ball(r.body, 1.0) <= 2 * (1 - math.cos(math.pi / 128))

    def test_doubling_data_shrinks(self):
        w = WeightProfile.gaussian(2)
        r1 = solve_free(ProblemSpec(w, circle_data(64, 0.05), 3.0, "free"))
        r2 = solve_free(ProblemSpec(w, circle_data(64, 0.10), 3.0, "free"))
        assert np.all(r2.h.values < r1.h.values)

    def test_lebesgue_square_round_trip(self):
        K = wulff_shape(AXES.units, np.ones(4))
        nu = lp_surface_measure(K, WeightProfile.lebesgue(2), 3.0).values
        spec = ProblemSpec(WeightProfile.lebesgue(2), SphericalMeasure(AXES, nu), 3.0, "free")
        assert precheck(spec).failures == []
        r = solve_free(spec)
        assert r.converged
        assert r.h.values == pytest.approx(np.ones(4), abs=1e-9)

    def test_non_even_refused(self):
        d = DirectionSet.uniform_circle(16)
        vals = d.quadrature_weights * (1 + 0.2 * d.units[:, 0])
        with pytest.raises(PreconditionError):
            solve_free(ProblemSpec(WeightProfile.gaussian(2), SphericalMeasure(d, vals), 3.0, "free"))

    def test_p_not_above_n_refused(self):
        with pytest.raises(PreconditionError):
            solve_free(ProblemSpec(WeightProfile.gaussian(2), circle_data(16, 0.05), 2.0, "free"))


class TestSmallMass:
    def test_ball_branches(self):
        r = solve_small_mass_dual(ProblemSpec(WeightProfile.gaussian(2), circle_data(128, 0.05), 1.0, "small_mass_dual"))
        assert r.status == "converged"
        lo, hi = oracles.gaussian_roots(2, 1, 0.05)
        assert hausdorff_to_ball(r.large.body, hi) <= 2 * (1 - math.cos(math.pi / 128))
        assert hausdorff_to_ball(r.small.body, lo) <= 2 * (1 - math.cos(math.pi / 128))
        assert r.masses_straddle_pivot

    def test_above_threshold(self):
        c = 1.5 * oracles.gaussian_threshold_closed(2, 1)
        spec = ProblemSpec(WeightProfile.gaussian(2), circle_data(64, c), 1.0, "small_mass_dual")
        with pytest.raises(PreconditionError, match="small total mass"):
            solve_small_mass_dual(spec)
        forced = ProblemSpec(spec.weight, spec.nu, 1.0, "small_mass_dual", config=SolverConfig(force=True))
        r = solve_small_mass_dual(forced)
        assert r.status == "no_solution"
        assert not r.large.converged and not r.small.converged

    def test_isotropic_mode(self):
        spec = ProblemSpec(WeightProfile.gaussian(2), circle_data(64), 1.0, "isotropic", c=0.05)
        reps = solve_isotropic(spec)
        assert [rep.extra["radius"] for rep in reps] == pytest.approx(oracles.gaussian_roots(2, 1, 0.05), rel=1e-10)
        assert all(rep.residual_inf <= 1e-12 for rep in reps)


class TestPreconditions:
    def hemisphere(self):
        d = DirectionSet(np.array([[1.0, 0], [0, 1.0], [math.sqrt(0.5), math.sqrt(0.5)], [0, -1.0]]))
        return SphericalMeasure(d, [1.0, 1, 1, 1])

    @pytest.mark.parametrize("mode,p,kw", [("pinned", 1.0, {"a": 0.3}), ("entropy", 0.0, {"a": 0.3}),
                                           ("free", 3.0, {}), ("small_mass_dual", 1.0, {})])
    def test_hemisphere_refused_even_with_force(self, mode, p, kw):
        spec = ProblemSpec(WeightProfile.gaussian(2), self.hemisphere(), p, mode, config=SolverConfig(force=True), **kw)
        with pytest.raises(PreconditionError) as err:
            solve(spec)
        assert err.value.hypothesis == "not concentrated on a closed hemisphere"

    def test_mass_out_of_range(self):
        spec = ProblemSpec(WeightProfile.gaussian(2), circle_data(16), 1.0, "pinned", a=1.5)
        with pytest.raises(PreconditionError):
            enforce(spec)

    def test_non_even_small_mass_for_finite_measure(self):
        d = DirectionSet.uniform_circle(16)
        vals = d.quadrature_weights * (1 + 0.2 * d.units[:, 0])
        nu = SphericalMeasure(d, vals)
        assert precheck(ProblemSpec(WeightProfile.gaussian(2), nu, 1.0, "pinned", a=0.3)).failures
        assert not precheck(ProblemSpec(WeightProfile.gaussian(2), nu, 1.0, "pinned", a=0.6)).failures
        # negative p needs a strictly above half the total
        assert precheck(ProblemSpec(WeightProfile.gaussian(2), nu, -1.0, "pinned", a=0.5)).failures

    def test_negative_p_needs_property_D(self):
        spec = ProblemSpec(WeightProfile.lebesgue(2), circle_data(16), -1.0, "pinned", a=3.0)
        names = [i["hypothesis"] for i in precheck(spec).failures]
        assert "finite measure" in names

    def test_mode_validation(self):
        with pytest.raises(ValueError):
            ProblemSpec(WeightProfile.gaussian(2), circle_data(16), 1.0, "entropy", a=0.3)
        with pytest.raises(ValueError):
            ProblemSpec(WeightProfile.gaussian(2), circle_data(16), 0.0, "pinned", a=0.3)


class TestKKT:
    def test_perturbation_increases_residual(self):
        spec = ProblemSpec(WeightProfile.gaussian(2), circle_data(64, 1.0, 0.3), 1.0, "pinned", a=0.6)
        r = solve_pinned(spec)
        rng = np.random.default_rng(0)
        bumped = kkt_report(spec, r.h.values * (1 + 0.01 * rng.uniform(-1, 1, 64)))
        assert bumped.residual_inf > r.residual_inf

    def test_square_lambda_agreement(self):
        rep = kkt_report(square_spec(4.0), np.ones(4))
        assert rep.lam == pytest.approx(1.0, rel=1e-12)
        assert rep.lambda_agreement <= 1e-10
        assert rep.residual_inf <= 1e-12
        assert rep.realized_hemisphere == pytest.approx(0.5)

    def test_exact_ball(self):
        w = WeightProfile.gaussian(2)
        nu = circle_data(64, 0.05)
        spec = ProblemSpec(w, nu, 1.0, "isotropic", c=0.05)
        T = oracles.gaussian_roots(2, 1, 0.05)[1]
        K = wulff_shape(nu.directions.units, np.full(64, T))
        S = weighted_facet_areas(K, w, tol=1e-12)
        rep = kkt_report(spec, np.full(64, T))
        # the polygon's facet masses differ from the disc's by the mesh error only
        assert rep.residual_inf <= 2 * float(np.max(np.abs(S - float(w.g(T, 1)) * nu.directions.quadrature_weights))) + 1e-14

    def test_report_fields_on_support_vector(self):
        rep = kkt_report(square_spec(4.0), SupportVector(AXES, np.ones(4)))
        assert rep.mass == pytest.approx(4.0) and rep.mass_error == pytest.approx(0.0, abs=1e-12)
