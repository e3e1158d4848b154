import math

import numpy as np
import pytest

from roughflow.conformal import (
    ConformalError,
    FitError,
    LaurentMap,
    VortexEnsemble,
    alpha_exterior,
    biot_savart_exterior,
    biot_savart_interpolation,
    caratheodory_gap,
    circle_map,
    ellipse_map,
    far_field_bound,
    fit_exterior_map,
    harmonic_velocity,
    identity_map,
    joukowski_map,
    loop_circulation,
    support_growth_constant,
)


def ring(radius, n=256, center=0.0):
    return center + radius * np.exp(2j * np.pi * np.arange(n) / n)


class TestJoukowski:
    def test_reference_value(self):
        J = joukowski_map()
        assert J.map(2.0) == pytest.approx(2 + math.sqrt(3), abs=1e-14)

    def test_boundary_maps_to_circle(self):
        J = joukowski_map()
        xs = np.linspace(-0.99, 0.99, 41)
        for side in (1e-12j, -1e-12j):
            assert np.abs(np.abs(J.map(xs + side)) - 1).max() < 1e-5

    def test_inverse_identity(self):
        J = joukowski_map()
        w = J.map(2.0)
        assert J.inv(w) == pytest.approx(2.0, abs=1e-14)
        assert J.inv(J.map(-1.3 + 0.4j)) == pytest.approx(-1.3 + 0.4j, abs=1e-13)

    def test_slit_evaluation_rejected(self):
        with pytest.raises(ConformalError, match="slit"):
            joukowski_map().map(np.array([0.5 + 0.0j]))

    def test_newton_on_series_matches_closed_form(self):
        J = joukowski_map()
        series_only = LaurentMap(
            beta=J.beta, btilde=J.btilde, coeffs=J.coeffs, inv_c0=J.inv_c0,
            inv_coeffs=J.inv_coeffs,
        )
        zs = np.array([2.0 + 0.5j, -1.5 + 0.2j, 0.1 + 1.1j, 3.0 - 2.0j])
        assert np.abs(series_only.map(zs) - J.map(zs)).max() < 1e-12

    def test_composition_on_annulus(self):
        J = joukowski_map()
        z = ring(1.8) + 0.1
        assert np.abs(J.inv(J.map(z)) - z).max() < 1e-12


class TestFitting:
    def test_circle_single_term(self):
        m = fit_exterior_map(ring(0.7, 256), n_terms=8)
        assert m.beta == pytest.approx(1 / 0.7, rel=1e-9)
        assert m.defect < 1e-9
        assert np.abs(m.inv_coeffs).max() < 1e-9

    def test_ellipse_matches_scaled_joukowski(self):
        rho = 1.4
        E = ellipse_map(rho)
        boundary = E.inv(ring(1.0, 400))
        m = fit_exterior_map(boundary, n_terms=32)
        assert m.defect <= 1e-6
        probe = ring(2.5, 64)
        assert np.abs(m.map(probe) - E.map(probe)).max() < 1e-6
        assert m.beta == pytest.approx(E.beta, rel=1e-8)

    def test_asymmetric_blob(self):
        t = 2 * np.pi * np.arange(512) / 512
        r = 1.0 + 0.15 * np.cos(2 * t) + 0.08 * np.sin(3 * t)
        m = fit_exterior_map(r * np.exp(1j * t), n_terms=64, defect_tol=1e-4)
        assert m.beta > 0
        assert m.defect < 1e-4
        z = ring(2.0, 64)
        assert np.abs(m.inv(m.map(z)) - z).max() < 1e-6

    def test_defect_threshold_error(self):
        t = 2 * np.pi * np.arange(512) / 512
        r = 1.0 + 0.15 * np.cos(2 * t) + 0.08 * np.sin(3 * t)
        with pytest.raises(FitError, match="defect") as exc:
            fit_exterior_map(r * np.exp(1j * t), n_terms=6, defect_tol=1e-10)
        assert exc.value.defect is not None

    def test_too_few_samples(self):
        with pytest.raises(FitError, match="samples"):
            fit_exterior_map(ring(1.0, 32), n_terms=32)

    def test_serialization_round_trip(self):
        E = ellipse_map(1.3)
        m = fit_exterior_map(E.inv(ring(1.0, 300)), n_terms=16)
        again = LaurentMap.from_json(m.to_json())
        z = ring(2.0, 32)
        assert np.abs(again.map(z) - m.map(z)).max() < 1e-10
        assert again.beta == m.beta


class TestKernel:
    def test_point_vortex_tangency_on_disk(self):
        T = identity_map()
        ens = VortexEnsemble(np.array([1.8 + 0.3j]), np.array([1.0]))
        th = 2 * np.pi * (np.arange(1000) + 0.3) / 1000
        zb = (1 + 1e-13) * np.exp(1j * th)
        u = biot_savart_exterior(T, ens, zb)
        radial = u[:, 0] * np.cos(th) + u[:, 1] * np.sin(th)
        assert np.abs(radial).max() <= 1e-10

    def test_tangency_for_fitted_map(self):
        E = ellipse_map(1.5)
        m = fit_exterior_map(E.inv(ring(1.0, 400)), n_terms=32)
        ens = VortexEnsemble(np.array([2.5 + 0.4j]), np.array([0.8]))
        # boundary tangency checked in the mapped plane: radial component of
        # the mapped velocity D T u at |w| slightly above 1
        th = 2 * np.pi * np.arange(500) / 500
        zb = m.inv((1 + 1e-9) * np.exp(1j * th))
        u = biot_savart_exterior(m, ens, zb)
        w = m.map(zb)
        dT = m.dmap(zb)
        mapped = dT * (u[:, 0] + 1j * u[:, 1])  # conformal push-forward of the flow direction
        radial = (mapped * np.conj(w / np.abs(w))).real
        assert np.abs(radial).max() < 1e-8

    def test_removing_image_breaks_tangency(self):
        # regression guard: the free-space kernel alone is O(1) non-tangent
        ens_pos, strength = 1.8 + 0.3j, 1.0
        th = 2 * np.pi * np.arange(512) / 512
        zb = np.exp(1j * th)
        dd = zb - ens_pos
        u = strength * 1j * (dd / np.abs(dd) ** 2) / (2 * np.pi)
        radial = u.real * np.cos(th) + u.imag * np.sin(th)
        assert np.abs(radial).max() > 0.05

    def test_zero_strength_zero_velocity(self):
        T = identity_map()
        ens = VortexEnsemble(np.array([1.8 + 0.3j]), np.array([0.0]))
        u = biot_savart_exterior(T, ens, ring(2.0, 16))
        assert not u.any()

    def test_kernel_far_field_dipole_and_full_field_decay(self):
        # the image term cancels the monopole: the kernel alone decays like
        # 1/|x|^2, while kernel + total-strength harmonic part carries the
        # 1/|x| tail with coefficient strength / (2 pi)
        T = identity_map()
        ens = VortexEnsemble(np.array([1.5 + 0.2j, -1.7 + 0.4j]), np.array([0.8, 0.5]))
        for R in (50.0, 100.0):
            pts = ring(R, 32)
            uk = biot_savart_exterior(T, ens, pts)
            assert np.hypot(uk[:, 0], uk[:, 1]).max() < 5.0 / R**2
            uf = uk + ens.total_strength() * harmonic_velocity(T, pts)
            speed = np.hypot(uf[:, 0], uf[:, 1])
            assert np.abs(speed * 2 * math.pi * R / ens.total_strength() - 1).max() < 0.1

    def test_inside_obstacle_rejected(self):
        T = identity_map()
        ens = VortexEnsemble(np.array([2.0 + 0j]), np.array([1.0]))
        with pytest.raises(ConformalError, match="inside"):
            biot_savart_exterior(T, ens, np.array([0.5 + 0.0j]))

    def test_ensemble_must_be_exterior(self):
        ens = VortexEnsemble(np.array([0.5 + 0j]), np.array([1.0]))
        with pytest.raises(ConformalError, match="outside"):
            ens.validate_exterior(identity_map())


class TestHarmonicVelocity:
    def test_unit_disk_closed_form(self):
        T = identity_map()
        z = np.array([2.5 + 0.0j, 0.0 + 3.0j, -1.2 + 1.2j])
        u = harmonic_velocity(T, z)
        expect = 1j * z / np.abs(z) ** 2 / (2 * math.pi)
        assert np.allclose(u[:, 0] + 1j * u[:, 1], expect, atol=1e-14)

    def test_unit_circulation(self):
        J = joukowski_map()
        circ = loop_circulation(lambda z: harmonic_velocity(J, z), ring(3.0, 1000))
        assert circ == pytest.approx(1.0, abs=1e-6)

    def test_far_field_scaling(self):
        for m in (joukowski_map(), ellipse_map(1.6), circle_map(0.5)):
            for R in (30.0, 90.0):
                u = harmonic_velocity(m, ring(R, 32))
                speed = np.hypot(u[:, 0], u[:, 1])
                assert np.abs(speed * 2 * math.pi * R - 1).max() < 0.1


class TestAlpha:
    def test_pure_circulation(self):
        T = identity_map()
        a = alpha_exterior(lambda z: harmonic_velocity(T, z), None, ring(2.0, 2000))
        assert a == pytest.approx(1.0, abs=1e-6)

    def test_loop_independence(self):
        T = identity_map()
        ens = VortexEnsemble(np.array([1.8 + 0.3j, -2.2 + 0.1j]), np.array([0.7, -0.4]))

        def u0(z):
            return biot_savart_exterior(T, ens, z) + 1.3 * harmonic_velocity(T, z)

        vals = [alpha_exterior(u0, ens, ring(r, 3000)) for r in (2.5, 4.0, 8.0)]
        assert np.ptp(vals) < 1e-6

    def test_two_loop_bookkeeping_across_a_vortex(self):
        # shrinking the loop past a vortex moves strength s from the
        # circulation term to the mass term; the sum alpha is unchanged
        T = identity_map()
        s = 0.7
        ens = VortexEnsemble(np.array([3.0 + 0.0j]), np.array([s]))

        def u0(z):
            return biot_savart_exterior(T, ens, z)

        big, small = ring(4.0, 4000), ring(2.0, 4000)
        circ_big = loop_circulation(u0, big)
        circ_small = loop_circulation(u0, small)
        assert circ_big - circ_small == pytest.approx(s, abs=1e-6)
        assert alpha_exterior(u0, ens, big) == pytest.approx(
            alpha_exterior(u0, ens, small), abs=1e-6
        )


class TestFarFieldBound:
    def test_interpolation_constants(self):
        a, c3 = biot_savart_interpolation(math.inf)
        assert a == 0.5
        assert c3 == pytest.approx(2 * math.sqrt(2 * math.pi), rel=1e-12)
        a3, _ = biot_savart_interpolation(3.0)
        assert a3 == pytest.approx((3 - 2) / (2 * (3 - 1)))

    def test_p_at_most_two_rejected(self):
        with pytest.raises(ConformalError, match="p"):
            far_field_bound(identity_map(), 1.0, 1.0, 2.0, 3.0, 2.0)
        with pytest.raises(ConformalError, match="p"):
            biot_savart_interpolation(1.5)

    def test_zero_vorticity_zero_bound(self):
        assert far_field_bound(identity_map(), 0.0, 0.0, 2.0, 3.0, math.inf) == 0.0

    def test_doubling_l1_formula_arithmetic(self):
        T = ellipse_map(1.5)
        a, b = 0.8, 2.5
        t1 = far_field_bound(T, a, 0.0, 2.0, 3.0, math.inf)  # isolates the 2 l1/delta term
        t2 = far_field_bound(T, a, b, 2.0, 3.0, math.inf) - t1
        doubled = far_field_bound(T, 2 * a, b, 2.0, 3.0, math.inf)
        assert doubled == pytest.approx(2 * t1 + math.sqrt(2) * t2, rel=1e-12)

    def test_domination_on_randomized_configurations(self):
        T = identity_map()
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(1, 6))
            pos = (1.3 + 1.0 * rng.random(n)) * np.exp(1j * 2 * np.pi * rng.random(n))
            g = rng.uniform(-1, 1, n)
            ens = VortexEnsemble(pos, g)
            l1 = float(np.abs(g).sum())
            c0 = far_field_bound(T, l1, 10 * l1, 2.4, 3.0, math.inf)
            pts = (3.0 + 5 * rng.random(60)) * np.exp(1j * 2 * np.pi * rng.random(60))
            sp = biot_savart_exterior(T, ens, pts)
            assert np.hypot(sp[:, 0], sp[:, 1]).max() <= c0

    def test_support_growth_constant_structure(self):
        c = support_growth_constant(identity_map(), 1.0, 2.0, 2.0, 3.0, math.inf, alpha_total=1.5)
        c0 = max(
            far_field_bound(identity_map(), 1.0, 2.0, 2.0, 3.0, math.inf),
            1.0 / (2 * math.pi),
        )
        assert c == pytest.approx((2 * c0 + 1) * (2 + 1.5), rel=0.05)


class TestCaratheodory:
    def test_constant_family(self):
        J = joukowski_map()
        gm, gd, gt = caratheodory_gap(J, J, ring(2.5, 64), trapped_probe=None)
        assert gm == 0.0 and gd == 0.0 and gt is None

    def test_ellipse_to_slit_geometric_decay(self):
        J = joukowski_map()
        probe = np.concatenate([ring(r, 64) for r in (2.0, 2.5, 3.0, 4.0)])
        gaps = []
        for n in range(1, 9):
            gm, gd, _ = caratheodory_gap(ellipse_map(1 + 2.0**-n), J, probe)
            gaps.append(gm)
            assert gd >= 0
        ratios = np.array(gaps[1:]) / np.array(gaps[:-1])
        assert np.all(ratios <= 0.7)

    def test_closing_arc_trapped_modulus_trend(self):
        # fitted maps of smoothed horseshoe tubes: inside the pocket |T_n|
        # drifts toward 1 as the gap closes (trapped-component behavior).
        # Crowding makes Newton forward evaluation hopeless in the pocket,
        # so |T| is read off by direct search over the mapped w-grid.
        from roughflow.geometry import make_sequence
        from shapely.geometry import LineString

        def modulus_by_search(m, probes):
            radii = 1.0 + np.geomspace(1e-8, 1.0, 50)
            angles = np.exp(1j * 2 * np.pi * np.arange(4096) / 4096)
            w = (radii[:, None] * angles[None, :]).ravel()
            img = m.inv(w)
            out = []
            for z in probes:
                out.append(np.abs(w[np.argmin(np.abs(img - z))]))
            return np.array(out)

        seq = make_sequence("closing_arc", 6, indices=[2, 4, 6], verify=False)
        probe = ring(0.12, 16)
        vals = []
        for member in seq.members:
            arc = member.obstacles[0].pieces[0].coords
            tube = LineString(arc).buffer(0.06, quad_segs=16)
            bd = np.asarray(tube.exterior.coords)[:-1]
            zb = bd[:, 0] + 1j * bd[:, 1]
            # resample uniformly by arc length, then smooth high frequencies
            seg = np.abs(np.diff(np.append(zb, zb[0])))
            s = np.concatenate([[0], np.cumsum(seg)])
            su = np.linspace(0, s[-1], 512, endpoint=False)
            zu = np.interp(su, s[:-1], zb.real) + 1j * np.interp(su, s[:-1], zb.imag)
            zh = np.fft.fft(zu)
            k = np.fft.fftfreq(len(zu), d=1.0 / len(zu))
            zs = np.fft.ifft(zh * np.exp(-((k / 28.0) ** 2)))  # analytic smoothing
            m = fit_exterior_map(zs, n_terms=48, defect_tol=0.2)
            vals.append(float(np.abs(modulus_by_search(m, probe) - 1).max()))
        assert vals[-1] < vals[0]
        assert vals[-1] < 0.5
