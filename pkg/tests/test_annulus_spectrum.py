import csv
import io
import json

import numpy as np
import pytest

from fracspec.annulus_spectrum import (
    alpha_R,
    full_spectrum,
    harmonic_multiplicity,
    interval_pairs,
    nonradiality_test,
    projection_bound,
    radial_pairs,
    radial_spectrum,
    scaling_check,
    sign_product,
    sweep,
    transplant_bound,
)
from fracspec.errors import ParameterError
from fracspec.radial_kernel import RadialGeometry
from fracspec.special_fn import FractionalParams
from fracspec.spectral_1d import assemble_direct, build_mesh, solve_smallest

P = FractionalParams(2, 0.5)
UNIT = RadialGeometry.annulus(2, 0.9, 1.0)


class TestMultiplicity:
    @pytest.mark.parametrize("l", range(6))
    def test_dimensions(self, l):
        assert harmonic_multiplicity(2, l) == (1 if l == 0 else 2)
        assert harmonic_multiplicity(3, l) == 2 * l + 1

    def test_first_family(self):
        assert harmonic_multiplicity(5, 1) == 5


class TestRadial:
    def test_matches_solver(self):
        geo = RadialGeometry.annulus(2, 0.5, 1.0)
        op = assemble_direct(geo, P, build_mesh(0.5, 1.0, 64))
        direct = [p.lam for p in solve_smallest(op, 2)]
        assert np.allclose(radial_spectrum(2, P, geo, 2, 64), direct, rtol=1e-14)

    def test_monotone_in_dimension_and_index(self):
        geo = RadialGeometry.annulus(2, 0.5, 1.0)
        table = np.array([radial_spectrum(2 + 2 * l, P, geo, 3, 64) for l in range(4)])
        assert np.all(np.diff(table, axis=0) > 0.0)
        assert np.all(np.diff(table, axis=1) > 0.0)

    def test_requires_annulus(self):
        with pytest.raises(ParameterError):
            radial_pairs(2, P, RadialGeometry.ball(2), 1)


class TestFullSpectrum:
    def test_second_value(self):
        spec = full_spectrum(P, UNIT, l_max=3, j_max=3, n=64)
        lam1_next = radial_spectrum(4, P, UNIT, 1, 64)[0]
        lam2_rad = radial_spectrum(2, P, UNIT, 2, 64)[1]
        assert spec.second == pytest.approx(min(lam1_next, lam2_rad))
        vals = spec.eigenvalues()
        assert vals == sorted(vals)
        assert [e.multiplicity for e in spec.entries if e.l == 1] == [2, 2, 2]

    def test_thin_annulus_nonradial(self):
        res = nonradiality_test(P, UNIT, n=64)
        assert res.state == "nonradial"
        assert res.lambda1_next < res.lambda2_radial

    def test_l_max_guard(self):
        with pytest.raises(ParameterError):
            full_spectrum(P, UNIT, l_max=0)


class TestPredicates:
    def test_large_R(self):
        geo = RadialGeometry.shell(2, 50.0)
        assert nonradiality_test(P, geo, n=64).nonradial
        sgn = sign_product(P, 50.0)
        assert sgn.passes and sgn.product < 0.0 and not sgn.low_confidence

    def test_sign_quotients_track_interval(self):
        phi2 = interval_pairs(0.5, 2, 256)[1]
        errs = []
        for R in (10.0, 100.0):
            sgn = sign_product(P, R)
            errs.append(abs(sgn.q_in * sgn.q_out - phi2.q_inner * phi2.q_outer))
        assert errs[1] < errs[0]

    def test_alpha_small_for_large_R(self):
        assert alpha_R(P, 100.0) < alpha_R(P, 10.0)

    def test_bounds(self):
        upper1, lam1 = transplant_bound(P, 10.0, n=128)
        upper2, lam2 = projection_bound(P, 10.0, n=128)
        assert upper1 >= lam1
        assert upper2 >= lam2

    def test_scaling(self):
        rep = scaling_check(P, 0.6, n=64)
        assert max(rep["relative_difference"]) < 1e-6

    def test_guards(self):
        with pytest.raises(ParameterError):
            sign_product(P, 1.0)
        with pytest.raises(ParameterError):
            scaling_check(P, 1.2)


@pytest.fixture(scope="module")
def report():
    return sweep(P, "R", [5.0, 20.0, 50.0], n=64, workers=1)


class TestSweep:
    def test_records(self, report):
        assert [r["value"] for r in report.records] == [5.0, 20.0, 50.0]
        for r in report.records:
            assert r["lambda1"] <= r["lambda2_full"] <= r["lambda2_radial"]
            assert r["lambda2_full"] == min(r["lambda1_next_dim"], r["lambda2_radial"])
        assert report.violations == []
        assert report.threshold["value"] == 5.0

    def test_csv(self, report):
        rows = list(csv.reader(io.StringIO(report.to_csv())))
        assert tuple(rows[0]) == report.columns
        assert len(rows) == 4
        assert float(rows[2][1]) == 20.0

    def test_json(self, report):
        data = json.loads(report.to_json())
        assert data["parameter"] == "R"
        assert data["provenance"]["n_mesh"] == 64
        assert len(data["records"]) == 3

    def test_tau_sweep(self):
        rep = sweep(FractionalParams(2, 0.5), "tau", [0.3, 0.6, 0.9], n=32)
        assert rep.records[-1]["nonradial"] == "nonradial"

    def test_deterministic_across_workers(self):
        one = sweep(P, "R", [5.0, 10.0, 20.0], n=32, workers=1)
        two = sweep(P, "R", [5.0, 10.0, 20.0], n=32, workers=2)
        assert one.to_csv() == two.to_csv()

    @pytest.mark.parametrize("grid", [[5.0, 10.0], [10.0, 5.0, 20.0], [-1.0, 2.0, 3.0]])
    def test_bad_grid(self, grid):
        with pytest.raises(ParameterError):
            sweep(P, "R", grid, n=32)

    def test_unknown_parameter(self):
        with pytest.raises(ParameterError):
            sweep(P, "a", [0.1, 0.2, 0.3])

    def test_strict_raises_only_on_violation(self):
        rep = sweep(P, "R", [5.0, 10.0, 20.0], n=32, strict=True)
        assert rep.violations == []
