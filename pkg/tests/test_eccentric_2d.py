import io
import math

import numpy as np
import pytest

from fracspec.annulus_spectrum import radial_spectrum
from fracspec.eccentric_2d import (
    INTERIOR,
    OBSTACLE,
    OUTER,
    EccentricGeometry,
    _boundary_geometry,
    assemble_2d,
    finite_difference_anti,
    mesh_eccentric,
    polygon_killing,
    read_mesh,
    shape_derivative,
    solve_2d,
    sweep_a,
    triangle_rule,
    write_mesh,
)
from fracspec.errors import DomainError, ParameterError, ResolutionError, ResourceError
from fracspec.radial_kernel import RadialGeometry, killing_potential
from fracspec.special_fn import FractionalParams

H = 0.15
TAU = 0.6


def geo(a=0.0, tau=TAU, s=0.5):
    return EccentricGeometry(tau, a, s)


class TestGeometry:
    def test_guards(self):
        with pytest.raises(DomainError):
            EccentricGeometry(0.5, 0.5, 0.5)
        with pytest.raises(DomainError):
            EccentricGeometry(1.2, 0.0, 0.5)
        assert EccentricGeometry(0.3, -0.2, 0.5).min_gap == pytest.approx(0.5)


class TestTriangleRule:
    @pytest.mark.parametrize("degree", [2, 4, 6])
    def test_exact_on_monomials(self, degree):
        nodes, weights = triangle_rule(degree)
        assert weights.sum() == pytest.approx(1.0)
        assert np.all(weights > 0)
        # reference triangle (0,0), (1,0), (0,1): int x^i y^j = i! j! / (i+j+2)!, area 1/2
        x, y = nodes[:, 1], nodes[:, 2]
        for i in range(degree + 1):
            for j in range(degree + 1 - i):
                exact = math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)
                assert 0.5 * np.sum(weights * x**i * y**j) == pytest.approx(exact, rel=1e-12)


class TestMesh:
    def test_annulus_topology(self):
        m = mesh_eccentric(geo(0.0, 0.3), 0.1)
        assert m.euler_characteristic() == 0
        assert m.min_angle() >= 20.0
        assert m.max_edge() <= 1.5 * 0.1 * 2.0

    @pytest.mark.parametrize("a", [0.0, 0.15])
    def test_mirror_closure(self, a):
        m = mesh_eccentric(geo(a), H)
        refl = m.vertices * np.array([1.0, -1.0])
        assert np.allclose(refl, m.vertices[m.mirror], atol=1e-14)
        assert np.array_equal(m.mirror[m.mirror], np.arange(m.n_vertices))

    def test_boundary_tags(self):
        g = geo(0.1)
        m = mesh_eccentric(g, H)
        r_out = np.linalg.norm(m.vertices[m.tags == OUTER], axis=1)
        r_in = np.linalg.norm(m.vertices[m.tags == OBSTACLE] - np.array([g.a, 0.0]), axis=1)
        assert np.allclose(r_out, 1.0) and np.allclose(r_in, g.tau)
        assert np.all(m.areas() > 0)
        inner = m.vertices[m.tags == INTERIOR]
        assert np.all(np.linalg.norm(inner, axis=1) < 1.0)

    def test_resolution_guard(self):
        with pytest.raises(ResolutionError):
            mesh_eccentric(EccentricGeometry(0.3, 0.65, 0.5), 0.1)
        with pytest.raises(ResolutionError):
            mesh_eccentric(geo(), 0.3)
        with pytest.raises(ParameterError):
            mesh_eccentric(geo(), -0.1)

    def test_round_trip(self, tmp_path):
        m = mesh_eccentric(geo(0.1), H)
        path = tmp_path / "mesh.txt"
        write_mesh(m, path)
        back = read_mesh(path)
        assert np.array_equal(back.vertices, m.vertices)
        assert np.array_equal(back.triangles, m.triangles)
        assert np.array_equal(back.mirror, m.mirror)
        assert np.array_equal(back.ring_sizes, m.ring_sizes)
        buf = io.StringIO()
        write_mesh(m, buf)
        buf.seek(0)
        assert read_mesh(buf).tau == m.tau


class TestKilling:
    @pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
    def test_disc_centre(self, s):
        # int over |y| > 1 of |y|^{-2-2s} = pi / s
        n = 4000
        phi = 2.0 * math.pi * np.arange(n + 1) / n
        pts = np.column_stack([np.cos(phi), np.sin(phi)])
        edges = np.stack([pts[:-1], pts[1:]], axis=1)
        mid = 0.5 * (edges[:, 0] + edges[:, 1])
        normals = mid / np.linalg.norm(mid, axis=1)[:, None]
        k = polygon_killing(s, edges, normals, np.array([[0.0, 0.0], [0.3, 0.1]]))
        assert k[0] == pytest.approx(math.pi / s, rel=1e-5)
        assert k[1] > k[0]

    def test_concentric_against_radial(self):
        s = 0.5
        m = mesh_eccentric(geo(0.0, s=s), 0.05)
        edges, normals = _boundary_geometry(m)
        pts = np.column_stack([np.linspace(0.63, 0.97, 12), np.zeros(12)])
        k2d = polygon_killing(s, edges, normals, pts)
        k1d = killing_potential(RadialGeometry.annulus(2, TAU, 1.0), FractionalParams(2, s), pts[:, 0])
        # the radial potential integrates over angles, 2D kappa is per point
        assert np.max(np.abs(k2d / (k1d / pts[:, 0]) - 1.0)) <= 0.01


class TestSolver:
    def test_symmetry_and_parity(self):
        sol = solve_2d(geo(0.1), H, full_check=True)
        assert sol.commutation_residual <= 1e-8
        assert sol.full_check <= 1e-10
        assert sol.lambda2 <= sol.lambda_anti
        assert sol.even_values[0] < sol.lambda_anti
        assert sol.upper_positive_fraction == 1.0

    def test_even_in_a(self):
        plus = solve_2d(geo(0.1), H).lambda_anti
        minus = solve_2d(geo(-0.1), H).lambda_anti
        assert minus == pytest.approx(plus, rel=1e-8)

    def test_forms(self):
        g = geo(0.0)
        form = assemble_2d(mesh_eccentric(g, H), g)
        assert np.allclose(form.stiffness, form.stiffness.T, rtol=0, atol=1e-12 * np.abs(form.stiffness).max())
        np.linalg.cholesky(form.mass)
        Z = form.odd_basis
        assert np.allclose(Z.T @ Z, np.eye(Z.shape[1]), atol=1e-12)

    def test_budget(self):
        g = geo(0.0)
        with pytest.raises(ResourceError):
            assemble_2d(mesh_eccentric(g, H), g, budget=1e3)

    def test_unknown_option(self):
        with pytest.raises(ParameterError):
            solve_2d(geo(), H, colour="red")

    def test_dimension_trick_coarse(self):
        lam = solve_2d(geo(0.0), H).lambda_anti
        ref = radial_spectrum(4, FractionalParams(4, 0.5), RadialGeometry.annulus(4, TAU, 1.0), 1, 128)[0]
        assert lam == pytest.approx(ref, rel=0.03)


class TestShapeDerivative:
    def test_negative_for_positive_shift(self):
        sd = shape_derivative(EccentricGeometry(0.3, 0.2, 0.5), H)
        assert sd.value < 0.0
        assert not sd.low_confidence

    def test_zero_at_origin(self):
        sd = shape_derivative(geo(0.0), H)
        assert abs(sd.value) <= max(sd.rounding_floor, 1e-8)

    def test_matches_finite_difference_coarse(self):
        g = geo(0.1)
        sd = shape_derivative(g, H).value
        fd = finite_difference_anti(g, H)
        assert sd == pytest.approx(fd, rel=0.25)


class TestSweepA:
    def test_small_sweep(self):
        rep = sweep_a(TAU, 0.5, [-0.1, 0.0, 0.1], h=H)
        assert rep.verdicts["upper_bound"]
        assert rep.verdicts["even_in_a"]
        assert rep.verdicts["derivative_negative"]
        assert rep.verdicts["lambda2_below_origin"]
        assert [r["status"] for r in rep.records] == ["ok"] * 3
        header = rep.to_csv().splitlines()[0].split(",")
        assert header[:4] == ["parameter", "value", "lambda2", "lambda_anti"]

    def test_bad_grid(self):
        with pytest.raises(ParameterError):
            sweep_a(TAU, 0.5, [0.0, 0.1], h=H)
        with pytest.raises((DomainError, ResolutionError)):
            sweep_a(TAU, 0.5, [0.0, 0.1, 0.39], h=H)
