"""Tests for the warped-product metric and its curvature fields.

The analytic oracles (hand-differentiated closed forms, see
analytic_profiles.py) are independent of the package's differentiation
machinery.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from analytic_profiles import MODES, analytic_curvature
from rmcflow.errors import PoleSingularity, StepRejected
from rmcflow.warped import (
    AmbientMetric, AmbientSampler, build_perturbed, build_round, curvature,
    curvature_gradients, load_profile, pinching_check, pinching_norm,
    save_profile, sphere_area, volume_and_diameter,
)

PI = np.pi


class TestRoundSphere:
    def test_unit_round_curvature_is_one(self):
        g = build_round(2, 400)
        c = curvature(g)
        # floor is longdouble data noise amplified by 1/dx^2 near the poles
        assert np.max(np.abs(c.k_rad - 1.0)) < 1e-12
        assert np.max(np.abs(c.k_orb - 1.0)) < 1e-12

    def test_unit_round_invariants(self):
        g = build_round(2, 200)
        c = curvature(g)
        assert abs(float(c.scal[50]) - 6.0) < 1e-12
        assert abs(float(c.rbar) - 6.0) < 1e-12
        assert np.max(np.abs(c.rm2() - 12.0)) < 1e-11
        assert np.max(np.abs(c.ric2() - 12.0)) < 1e-11
        assert float(np.max(c.traceless_rm2())) < 1e-25
        assert float(np.max(c.e2(1.0))) < 1e-25

    def test_radius_two_round(self):
        g = build_round(3, 200, radius=2.0)
        c = curvature(g)
        assert np.max(np.abs(c.k_rad - 0.25)) < 1e-12
        assert abs(float(c.rbar) - 3.0 * 4.0 / 4.0) < 1e-12  # n(n+1)/A^2

    def test_volume_and_diameter_unit_round(self):
        g = build_round(2, 400)
        vol, diam = volume_and_diameter(g)
        assert abs(vol - 2 * PI ** 2) < 1e-10
        assert abs(diam - PI) < 1e-12

    def test_volume_scales_with_radius(self):
        g = build_round(2, 200, radius=2.0)
        vol, diam = volume_and_diameter(g)
        assert abs(vol - 2 * PI ** 2 * 8) < 1e-8
        assert abs(diam - 2 * PI) < 1e-12

    def test_round_gradients_vanish(self):
        g = build_round(2, 200)
        krad_s, korb_s, grad2 = curvature_gradients(g, curvature(g))
        assert float(np.max(np.abs(krad_s))) < 1e-10
        assert float(np.max(np.abs(korb_s))) < 1e-10
        assert float(np.max(grad2)) < 1e-20

    def test_sphere_area_values(self):
        assert abs(sphere_area(2) - 4 * PI) < 1e-14
        assert abs(sphere_area(3) - 2 * PI ** 2) < 1e-14


class TestPerturbedCurvature:
    def test_k_rad_matches_analytic(self):
        m = 200
        g = build_perturbed(2, m, 1e-2, modes=MODES, normalize_volume=False)
        c = curvature(g)
        x = np.asarray(g.x, dtype=float)[1:-1]
        k_exact, _ = analytic_curvature(x, 1e-2, MODES)
        err = np.max(np.abs(np.asarray(c.k_rad, dtype=float)[1:-1] - k_exact))
        assert err < 1e-11

    def test_k_orb_matches_analytic_midrange(self):
        m = 200
        g = build_perturbed(2, m, 1e-2, modes=MODES, normalize_volume=False)
        c = curvature(g)
        x = np.asarray(g.x, dtype=float)
        sel = (x > 0.15) & (x < 0.85)
        _, k_exact = analytic_curvature(x[sel], 1e-2, MODES)
        err = np.max(np.abs(np.asarray(c.k_orb, dtype=float)[sel] - k_exact))
        assert err < 5e-5  # second-order quadrature at dx = 1/200

    def test_k_orb_second_order_convergence(self):
        errs = []
        for m in (100, 200, 400):
            g = build_perturbed(2, m, 1e-2, modes=MODES, normalize_volume=False)
            c = curvature(g)
            x = np.asarray(g.x, dtype=float)[1:-1]
            _, k_exact = analytic_curvature(x, 1e-2, MODES)
            errs.append(np.max(np.abs(np.asarray(c.k_orb, float)[1:-1] - k_exact)))
        r1 = errs[0] / errs[1]
        r2 = errs[1] / errs[2]
        assert 2.5 < r1 < 6.5
        assert 2.5 < r2 < 6.5

    def test_pole_values_consistent(self):
        g = build_perturbed(2, 200, 1e-2, modes=MODES, normalize_volume=False)
        c = curvature(g)  # must not raise PoleSingularity
        # orbital and radial curvature agree at the poles by construction
        assert float(c.k_orb[0]) == float(c.k_rad[0])
        # and the near-pole orbital values approach the pole radial value
        assert abs(float(c.k_orb[1] - c.k_rad[0])) < 5e-3

    def test_gradient_matches_analytic_midrange(self):
        m = 400
        g = build_perturbed(2, m, 1e-2, modes=MODES, normalize_volume=False)
        c = curvature(g)
        krad_s, _, _ = curvature_gradients(g, c)
        x = np.asarray(g.x, dtype=float)
        sel = (x > 0.2) & (x < 0.8)
        h = 1e-5
        kp, _ = analytic_curvature(x[sel] + h, 1e-2, MODES)
        km, _ = analytic_curvature(x[sel] - h, 1e-2, MODES)
        dk_ds_exact = (kp - km) / (2 * h) / PI  # d/ds = (1/b) d/dx, b = pi
        err = np.max(np.abs(np.asarray(krad_s, float)[sel] - dk_ds_exact))
        assert err < 1e-8

    def test_volume_normalization(self):
        g = build_perturbed(2, 200, 5e-3, modes=MODES, normalize_volume=True)
        vol, _ = volume_and_diameter(g)
        assert abs(vol - 2 * PI ** 2) < 1e-10

    def test_pinching_norm_scales_with_amplitude(self):
        small = build_perturbed(2, 200, 1e-4, modes=MODES)
        large = build_perturbed(2, 200, 1e-3, modes=MODES)
        _, p_small = pinching_norm(curvature(small))
        _, p_large = pinching_norm(curvature(large))
        assert p_small < p_large < 10.5 * p_small * 1.5
        assert 5.0 < p_large / p_small < 15.0

    def test_pinching_check_round_and_rough(self):
        round_g = build_round(2, 200)
        rep = pinching_check(round_g, eps0=1.0 / 12.0)
        assert rep.holds
        assert rep.lhs_curv < 1e-10 and rep.lhs_grad < 1e-9
        rough = build_perturbed(2, 200, 5e-3, modes=MODES)
        rep2 = pinching_check(rough, eps0=1.0 / 12.0)
        assert not rep2.holds
        assert rep2.lhs_grad > 1.0 / 12.0


class TestDefenses:
    def test_cone_point_raises(self):
        m1 = 201
        x = np.linspace(0, 1, m1)
        phi = 1.25 * np.sin(PI * x)
        phi[0] = phi[-1] = 0.0
        g = AmbientMetric(n=2, b=np.full(m1, PI), phi=phi)
        with pytest.raises(PoleSingularity):
            curvature(g)

    def test_nonvanishing_pole_raises(self):
        m1 = 101
        x = np.linspace(0, 1, m1)
        g = AmbientMetric(n=2, b=np.full(m1, PI), phi=np.sin(PI * x) + 0.1)
        with pytest.raises(PoleSingularity):
            curvature(g)

    def test_negative_interior_raises(self):
        m1 = 101
        x = np.linspace(0, 1, m1)
        phi = np.sin(PI * x)
        phi[0] = phi[-1] = 0.0
        phi[50] = -0.2
        g = AmbientMetric(n=2, b=np.full(m1, PI), phi=phi)
        with pytest.raises(StepRejected):
            curvature(g)

    def test_nan_raises(self):
        m1 = 101
        x = np.linspace(0, 1, m1)
        phi = np.sin(PI * x)
        phi[0] = phi[-1] = 0.0
        phi[30] = np.nan
        g = AmbientMetric(n=2, b=np.full(m1, PI), phi=phi)
        with pytest.raises(StepRejected):
            curvature(g)


class TestProfileIO:
    def test_roundtrip_is_bitwise(self, tmp_path):
        g = build_perturbed(2, 100, 1e-3, modes=MODES)
        path = tmp_path / "profile.txt"
        save_profile(path, g)
        g2 = load_profile(path)
        assert g2.n == 2
        assert np.array_equal(g.b, g2.b)
        assert np.array_equal(g.phi, g2.phi)

    def test_header_line_shape(self, tmp_path):
        g = build_round(2, 32)
        path = tmp_path / "profile.txt"
        save_profile(path, g)
        lines = path.read_text().splitlines()
        assert lines[0] == "2 32 1"
        assert len(lines) == 34
        assert len(lines[5].split()) == 3

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "bogus.txt"
        path.write_text("hello\nworld\n")
        with pytest.raises(ValueError):
            load_profile(path)

    def test_rejects_version_mismatch(self, tmp_path):
        g = build_round(2, 32)
        path = tmp_path / "profile.txt"
        save_profile(path, g)
        lines = path.read_text().splitlines()
        lines[0] = "2 32 7"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValueError):
            load_profile(path)


class TestAmbientSampler:
    def test_matches_grid_nodes(self):
        g = build_perturbed(2, 128, 1e-3, modes=MODES, normalize_volume=False)
        samp = AmbientSampler(g)
        x = np.asarray(g.x, dtype=float)
        b, b_x, phi, phi_x, phi_xx = samp.metric_fields(x[1:-1])
        assert np.max(np.abs(phi - np.asarray(g.phi, float)[1:-1])) < 1e-17
        assert np.max(np.abs(b - PI)) < 1e-15

    def test_curvature_fields_midrange(self):
        g = build_perturbed(2, 256, 1e-2, modes=MODES, normalize_volume=False)
        samp = AmbientSampler(g)
        xq = np.linspace(0.3, 0.7, 41)
        krad, korb, krad_s, korb_s = samp.curvature_fields(xq)
        k_exact, ko_exact = analytic_curvature(xq, 1e-2, MODES)
        assert np.max(np.abs(krad - k_exact)) < 1e-9
        assert np.max(np.abs(korb - ko_exact)) < 3e-5

    def test_equator_node_symmetry_is_exact(self):
        # mirror-symmetric metric: sampled phi_x at the equator node is 0.0
        g = build_perturbed(2, 128, 1e-3, modes=[(2, 1.0)], symmetric=True,
                            normalize_volume=False)
        samp = AmbientSampler(g)
        _, _, _, phi_x, _ = samp.metric_fields(np.array([0.5]))
        assert phi_x[0] == 0.0


@given(st.floats(min_value=0.0, max_value=3e-3),
       st.integers(min_value=0, max_value=2 ** 31 - 1))
@settings(max_examples=25, deadline=None)
def test_curvature_identities_property(amplitude, seed):
    """Algebraic identities hold on any admissible perturbed metric."""
    g = build_perturbed(2, 64, amplitude, seed=seed)
    c = curvature(g)
    n = 2
    rm2 = np.asarray(c.rm2(), dtype=float)
    scal = np.asarray(c.scal, dtype=float)
    ric2 = np.asarray(c.ric2(), dtype=float)
    tf = np.asarray(c.traceless_rm2(), dtype=float)
    # traceless decomposition of |Rm|^2
    assert np.max(np.abs(rm2 - 2 * scal ** 2 / (n * (n + 1)) - tf)) < 1e-10
    # traceless decomposition of |Ric|^2
    krad = np.asarray(c.k_rad, dtype=float)
    korb = np.asarray(c.k_orb, dtype=float)
    expect = n * (n - 1) / (n + 1) * (krad - korb) ** 2
    assert np.max(np.abs(ric2 - scal ** 2 / (n + 1) - expect)) < 1e-10
    # nonnegativity of the squares
    assert np.min(tf) >= 0.0
