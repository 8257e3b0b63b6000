import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fracspec.annulus_spectrum import interval_pairs
from fracspec.errors import ParameterError
from fracspec.radial_kernel import RadialGeometry, core_kernel, killing_potential
from fracspec.special_fn import FractionalParams
from fracspec.spectral_1d import (
    assemble_direct,
    assemble_interval,
    assemble_rescaled,
    build_mesh,
    eigen_data_json,
    fit_ds_quotient,
    rayleigh_quotient,
    solve_smallest,
)


class TestMesh:
    def test_uniform(self):
        m = build_mesh(0.0, 1.0, 8, 1.0)
        assert np.allclose(m.nodes, np.arange(9) / 8)

    def test_graded(self):
        m = build_mesh(0.0, 1.0, 8, 2.0)
        assert m.nodes[1] == pytest.approx(0.5 * (2.0 / 8) ** 2)
        assert np.allclose(m.nodes, 1.0 - m.nodes[::-1], atol=1e-15)

    def test_annulus_section(self):
        m = build_mesh(10.0, 11.0, 16, 2.0)
        assert m.nodes[0] == 10.0 and m.nodes[-1] == pytest.approx(11.0)
        assert np.all(np.diff(m.nodes) > 0)

    @pytest.mark.parametrize("n, gamma", [(4, 2.0), (8.5, 2.0), (16, 0.5), (16, 5.0)])
    def test_invalid(self, n, gamma):
        with pytest.raises(ParameterError):
            build_mesh(0.0, 1.0, n, gamma)

    @given(st.integers(8, 200), st.floats(1.0, 4.0))
    @settings(max_examples=30, deadline=None)
    def test_grading_law(self, n, gamma):
        m = build_mesh(0.0, 1.0, n, gamma)
        k = np.arange(1, n // 2 + 1)
        assert np.allclose(m.nodes[k], 0.5 * (2.0 * k / n) ** gamma, rtol=1e-10, atol=1e-15)


class TestOperators:
    def test_symmetric_and_definite(self):
        op = assemble_direct(RadialGeometry.shell(2, 10.0), FractionalParams(2, 0.5), build_mesh(10.0, 11.0, 32))
        assert np.array_equal(op.stiffness, op.stiffness.T)
        assert np.array_equal(op.mass, op.mass.T)
        np.linalg.cholesky(op.mass)
        np.linalg.cholesky(op.stiffness)

    def test_mismatched_mesh(self):
        with pytest.raises(ParameterError):
            assemble_direct(RadialGeometry.shell(2, 10.0), FractionalParams(2, 0.5), build_mesh(0.0, 1.0, 32))
        with pytest.raises(ParameterError):
            assemble_rescaled(1.5, FractionalParams(2, 0.5), build_mesh(0.0, 1.0, 32))

    def test_single_hat_rayleigh_quotient(self):
        # adaptive quadrature of the reduced form of one hat on A_10, N = 2, s = 1/2
        p = FractionalParams(2, 0.5)
        geo = RadialGeometry.shell(2, 10.0)
        mesh = build_mesh(10.0, 11.0, 8, 1.0)
        op = assemble_direct(geo, p, mesh)
        nodes = mesh.nodes
        k = 4
        lo, mid, hi = nodes[k - 1], nodes[k], nodes[k + 1]

        def hat(x):
            return max(0.0, 1.0 - abs(x - mid) / (mid - lo))

        def pair(y, x):
            if x == y:
                return 0.0
            return (hat(x) - hat(y)) ** 2 * core_kernel(p, x, y).value

        cuts = [10.0, lo, mid, hi, 11.0]
        opts = dict(epsabs=1e-11, epsrel=1e-9)
        double = 0.0
        for a, b in zip(cuts, cuts[1:]):
            for c, d in zip(cuts, cuts[1:]):
                if max(b, d) <= lo or min(a, c) >= hi:
                    continue
                double += integrate.dblquad(pair, a, b, c, d, **opts)[0]
        kill = sum(integrate.quad(lambda x: hat(x) ** 2 * killing_potential(geo, p, x), a, b, **opts)[0]
                   for a, b in ((lo, mid), (mid, hi)))
        energy = 0.5 * p.b * p.omega * (double + 2.0 * kill)
        mass = p.omega * sum(integrate.quad(lambda x: hat(x) ** 2 * x, a, b)[0] for a, b in ((lo, mid), (mid, hi)))
        vec = np.zeros(9)
        vec[k] = 1.0
        assert rayleigh_quotient(op, vec) == pytest.approx(energy / mass, rel=1e-6)

    def test_rescaled_mass_weight(self):
        op = assemble_rescaled(4.0, FractionalParams(3, 0.5), build_mesh(0.0, 1.0, 16))
        assert op.meta["R"] == 4.0
        # weight (1 + r/R)^{N-1} tends to 1 at r = 0 and (1 + 1/R)^{N-1} at r = 1
        first = op.mass[0, 0]
        last = op.mass[-1, -1]
        assert last / first == pytest.approx((1.0 + 1.0 / 4.0) ** 2, rel=0.05)


class TestInterval:
    def test_first_eigenpair(self):
        pairs = interval_pairs(0.5, 2, 256)
        assert pairs[0].lam == pytest.approx(2.3155, rel=1e-3)
        c = pairs[0].coeffs[1:-1]
        assert np.all(c > 0.0)
        assert pairs[0].q_inner == pytest.approx(pairs[0].q_outer, rel=1e-4)

    def test_second_antisymmetric(self):
        pairs = interval_pairs(0.5, 2, 256)
        c = pairs[1].coeffs
        assert np.allclose(c, -c[::-1], atol=1e-6)
        interior = c[1:-1]
        nonzero = interior[np.abs(interior) > 1e-10]
        assert np.count_nonzero(np.diff(np.sign(nonzero))) == 1
        assert pairs[1].q_inner * pairs[1].q_outer < 0.0

    def test_self_convergence(self):
        lam = [interval_pairs(0.5, 1, n)[0].lam for n in (64, 128, 256, 512)]
        diffs = np.abs(np.diff(lam))
        assert np.all(diffs[1:] < diffs[:-1])
        # Richardson reference from the two finest meshes
        ratio = diffs[-2] / diffs[-1]
        ref = lam[-1] + (lam[-1] - lam[-2]) / (ratio - 1.0)
        assert lam[0] == pytest.approx(ref, rel=0.01)

    def test_normal_derivative_identity(self):
        s = 0.5
        pair = interval_pairs(s, 1, 512)[0]
        nodes = build_mesh(0.0, 1.0, 512).nodes
        u = pair.coeffs
        k = 6
        slope = (u[k + 1] - u[k]) / (nodes[k + 1] - nodes[k])
        d = 0.5 * (nodes[k] + nodes[k + 1])
        assert d ** (1.0 - s) * slope == pytest.approx(s * pair.q_inner, rel=0.05)


class TestSolver:
    @pytest.mark.parametrize("N, R", [(2, 2.0), (3, 10.0)])
    def test_pairs(self, N, R):
        op = assemble_rescaled(R, FractionalParams(N, 0.3), build_mesh(0.0, 1.0, 64))
        pairs = solve_smallest(op, 3)
        assert pairs[0].lam < pairs[1].lam < pairs[2].lam
        V = np.array([p.coeffs[1:-1] for p in pairs])
        G = V @ op.mass @ V.T
        assert np.allclose(G, np.eye(3), atol=1e-9)
        for p in pairs:
            assert rayleigh_quotient(op, p.coeffs) == pytest.approx(p.lam, rel=1e-10)
            assert p.q_outer >= 0.0

    def test_monotone_convergence(self):
        p = FractionalParams(2, 0.5)
        lams = [[q.lam for q in solve_smallest(assemble_rescaled(5.0, p, build_mesh(0.0, 1.0, n)), 2)]
                for n in (32, 64, 128, 256)]
        d = np.abs(np.diff(np.array(lams), axis=0))
        assert np.all(d[1:] < d[:-1])

    def test_k_out_of_range(self):
        op = assemble_interval(0.5, build_mesh(0.0, 1.0, 16))
        with pytest.raises(ParameterError):
            solve_smallest(op, 0)


class TestQuotientFit:
    @given(st.floats(0.05, 0.95), st.floats(-5.0, 5.0).filter(lambda q: abs(q) > 1e-3), st.floats(-2.0, 2.0))
    @settings(max_examples=40, deadline=None)
    def test_exact_model(self, s, q, c):
        d = np.array([1e-4, 4e-4, 1e-3, 3e-3])
        got, res = fit_ds_quotient(d, q * d**s * (1.0 + c * d), s)
        assert got == pytest.approx(q, rel=1e-8)
        assert res < 1e-6


def test_eigen_data_json():
    op = assemble_interval(0.5, build_mesh(0.0, 1.0, 32))
    pairs = solve_smallest(op, 2)
    data = json.loads(eigen_data_json(op, pairs, {"note": "x"}))
    assert data["meta"]["note"] == "x"
    assert len(data["nodes"]) == 33
    assert data["lambda"] == [p.lam for p in pairs]
    assert math.isclose(data["q_outer"][1], pairs[1].q_outer)
