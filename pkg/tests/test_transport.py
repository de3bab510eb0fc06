"""Transport kernel: launch/step/rotate contracts, propagation, determinism."""

import math

import numpy as np
import pytest
from scipy import stats

from uwqkd.config import default_config
from uwqkd.medium_optics import WaterMedium, phase_params_for
from uwqkd.rng import PhotonStream, photon_block_words, u01
from uwqkd.transport import (
    Outcome,
    ReceiverGeometry,
    TransmitterSpec,
    launch_photon,
    propagate,
    rotate_direction,
    run_campaign,
    sample_step,
    update_weight,
)

CLEAR = WaterMedium(absorption=0.114, scattering=0.037)


def _tx(r0=0.003, div_deg=20.0):
    return TransmitterSpec(
        beam_radius=r0, max_divergence=math.radians(div_deg), wavelength=532e-9
    )


class TestLaunch:
    def test_collimated_points_along_axis(self):
        tx = _tx(div_deg=0.0)
        for u in (0.0, 0.25, 0.99):
            ph = launch_photon(tx, u, 0.7)
            np.testing.assert_allclose(ph.direction, [0, 0, 1], atol=1e-15)

    def test_point_source_at_origin(self):
        tx = _tx(r0=0.0)
        ph = launch_photon(tx, 0.3, 0.9)
        np.testing.assert_allclose(ph.position, [0, 0, 0], atol=1e-15)

    def test_position_on_source_circle(self):
        tx = _tx(r0=0.003)
        ph = launch_photon(tx, 0.1, 0.5)
        assert math.hypot(ph.position[0], ph.position[1]) == pytest.approx(0.003)
        assert ph.position[2] == 0.0
        assert ph.weight == 1.0
        assert ph.path_length == 0.0

    def test_direction_unit_norm(self):
        tx = _tx()
        rng = np.random.default_rng(3)
        for _ in range(100):
            ph = launch_photon(tx, rng.random(), rng.random())
            assert abs(np.linalg.norm(ph.direction) - 1.0) < 1e-12

    def test_polar_angle_uniform_ks(self):
        # reconstruct signed polar angles from launched directions and test
        # uniformity on [-theta_max, theta_max]
        tx = _tx(div_deg=20.0)
        rng = np.random.default_rng(8)
        n = 100_000
        u_phi, u_theta = rng.random(n), rng.random(n)
        theta0 = np.empty(n)
        for i in range(0, n, n // 1000):  # 1000 launches through the public op
            ph = launch_photon(tx, u_phi[i], u_theta[i])
            signed = math.copysign(
                math.acos(np.clip(ph.direction[2], -1, 1)), u_theta[i] - 0.5
            )
            theta0[i] = signed
        # bulk check on the generating formula itself
        theta_max = math.radians(20.0)
        theta0 = theta_max * (2.0 * u_theta - 1.0)
        res = stats.kstest(theta0, stats.uniform(loc=-theta_max, scale=2 * theta_max).cdf)
        assert res.pvalue > 0.01

    def test_rejects_bad_spec(self):
        with pytest.raises(ValueError):
            TransmitterSpec(beam_radius=-0.1, max_divergence=0.0, wavelength=532e-9)
        with pytest.raises(ValueError):
            TransmitterSpec(beam_radius=0.0, max_divergence=math.pi / 2, wavelength=532e-9)


class TestStepAndWeight:
    def test_unit_draw_gives_zero_step(self):
        assert sample_step(0.151, 1.0) == 0.0

    def test_inverse_arithmetic(self):
        assert sample_step(0.151, math.exp(-1.51)) == pytest.approx(10.0, rel=1e-12)

    def test_rejects_zero_draw(self):
        with pytest.raises(ValueError):
            sample_step(0.151, 0.0)

    def test_mean_free_path(self):
        rng = np.random.default_rng(12)
        n = 1_000_000
        q = rng.random(n)
        steps = -np.log1p(-q) / 0.151  # same distribution as -ln(U(0,1])/sigma
        se = steps.std() / math.sqrt(n)
        assert abs(steps.mean() - 1 / 0.151) < 3 * se

    def test_weight_update_value(self):
        assert update_weight(1.0, CLEAR) == pytest.approx(0.037 / 0.151, rel=1e-15)

    def test_no_absorption_preserves_weight(self):
        medium = WaterMedium(absorption=0.0, scattering=0.151)
        assert update_weight(0.5, medium) == 0.5

    def test_power_law_after_k_interactions(self):
        w = 1.0
        for k in range(1, 8):
            w = update_weight(w, CLEAR)
        # sequential multiplication, bit-for-bit
        expect = 1.0
        for _ in range(7):
            expect = expect * (0.037 / 0.151)
        assert w == expect


class TestRotation:
    def test_no_deflection(self):
        out = rotate_direction([0.0, 0.0, 1.0], 0.0, 1.2)
        np.testing.assert_allclose(out, [0, 0, 1], atol=1e-12)

    def test_near_axis_quarter_turn(self):
        out = rotate_direction([0.0, 0.0, 1.0], math.pi / 2, 0.0)
        np.testing.assert_allclose(out, [1, 0, 0], atol=1e-12)

    def test_near_axis_negative_z(self):
        out = rotate_direction([0.0, 0.0, -1.0], math.pi / 2, math.pi / 2)
        np.testing.assert_allclose(out, [0, 1, 0], atol=1e-12)

    def test_rejects_non_unit_input(self):
        with pytest.raises(ValueError):
            rotate_direction([0.5, 0.0, 0.0], 0.1, 0.1)

    def test_deflection_angle_preserved(self):
        # bulk property at 1e5 trials via the shared kernel, away from the
        # near-axis branch (it intentionally approximates)
        from uwqkd.transport import _rotate_components

        rng = np.random.default_rng(21)
        v = rng.normal(size=(100_000, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        general = np.abs(v[:, 2]) <= 0.9999
        v = v[general]
        theta = rng.uniform(0, math.pi, len(v))
        phi = rng.uniform(0, 2 * math.pi, len(v))
        nx, ny, nz = _rotate_components(v[:, 0], v[:, 1], v[:, 2], theta, phi)
        dot = np.clip(v[:, 0] * nx + v[:, 1] * ny + v[:, 2] * nz, -1, 1)
        assert np.max(np.abs(np.arccos(dot) - theta)) < 1e-7
        # spot-check the public scalar op agrees with the kernel
        for i in range(50):
            out = rotate_direction(v[i], theta[i], phi[i])
            np.testing.assert_array_equal(out, [nx[i], ny[i], nz[i]])

    def test_unit_norm_drift_over_many_rotations(self):
        rng = np.random.default_rng(22)
        v = np.array([0.6, 0.0, 0.8])
        for _ in range(10_000):
            v = rotate_direction(v, rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi))
        assert abs(np.linalg.norm(v) - 1.0) < 1e-7


class TestPropagate:
    GEOM = ReceiverGeometry(link_distance=10.0, aperture_diameter=0.2)

    def test_ballistic_arrival(self):
        # nearly transparent medium: first step exceeds the plane
        medium = WaterMedium(absorption=5e-13, scattering=5e-13, mean_cos_theta=0.9675)
        phase = phase_params_for(CLEAR)
        tx = _tx(div_deg=0.0)
        ph = launch_photon(tx, 0.3, 0.5)
        res = propagate(ph, medium, phase, self.GEOM, PhotonStream(5, 0))
        assert res.outcome is Outcome.ARRIVED
        assert res.record.delay == 0.0
        assert res.record.aoa == 0.0
        assert res.record.weight == 1.0
        assert math.hypot(res.record.hit_x, res.record.hit_y) == pytest.approx(0.003)
        assert res.interactions == 0

    def test_first_step_survival_beer_lambert(self):
        cfg = default_config(link_distance=10.0, max_divergence_deg=0.0,
                             n_photons=100_000, seed=11)
        arr = run_campaign(cfg)
        ballistic = int(np.sum(arr.records[:, 2] == 0.0))
        p = math.exp(-0.151 * 10.0)
        se = math.sqrt(p * (1 - p) / cfg.n_photons)
        assert abs(ballistic / cfg.n_photons - p) < 3 * se

    def test_low_weight_terminates_absorbed(self):
        phase = phase_params_for(CLEAR)
        tx = _tx(div_deg=0.0)
        geom = ReceiverGeometry(link_distance=1e6, aperture_diameter=0.2)
        outcomes = set()
        for i in range(200):
            ph = launch_photon(tx, 0.1, 0.5)
            res = propagate(ph, CLEAR, phase, geom, PhotonStream(3, i))
            outcomes.add(res.outcome)
            if res.outcome is Outcome.ABSORBED:
                # killed right when weight fell below threshold: 7 interactions
                # at clear-water albedo 0.245 against the default 1e-4 threshold
                assert res.interactions == 7
        assert Outcome.ABSORBED in outcomes

    def test_delay_zero_iff_unscattered_collimated(self):
        cfg = default_config(link_distance=5.0, max_divergence_deg=0.0,
                             n_photons=20_000, seed=9)
        phase = phase_params_for(cfg.medium)
        for i in range(2_000):
            w0, w1, _, _ = photon_block_words(cfg.seed, i, 0)
            ph = launch_photon(cfg.transmitter, float(u01(w0)), float(u01(w1)))
            res = propagate(ph, cfg.medium, phase, cfg.geometry,
                            PhotonStream(cfg.seed, i), cfg.limits)
            if res.outcome is Outcome.ARRIVED:
                assert (res.record.delay == 0.0) == (res.interactions == 0)
                assert res.record.delay >= -1e-15


class TestCampaign:
    def test_totals_partition(self):
        cfg = default_config(link_distance=10.0, n_photons=30_000, seed=5)
        arr = run_campaign(cfg)
        assert arr.arrived + arr.absorbed + arr.escaped == cfg.n_photons

    def test_empty_campaign(self):
        cfg = default_config(n_photons=0)
        arr = run_campaign(cfg)
        assert arr.arrived == 0 and arr.absorbed == 0 and arr.escaped == 0
        assert arr.records.shape == (0, 5)

    def test_scalar_vector_equivalence(self):
        cfg = default_config(link_distance=5.0, n_photons=3_000, seed=7)
        arr = run_campaign(cfg)
        phase = phase_params_for(cfg.medium)
        expected = []
        for i in range(cfg.n_photons):
            w0, w1, _, _ = photon_block_words(cfg.seed, i, 0)
            ph = launch_photon(cfg.transmitter, float(u01(w0)), float(u01(w1)))
            res = propagate(ph, cfg.medium, phase, cfg.geometry,
                            PhotonStream(cfg.seed, i), cfg.limits)
            if res.record is not None:
                expected.append(
                    [res.record.hit_x, res.record.hit_y, res.record.delay,
                     res.record.aoa, res.record.weight]
                )
        np.testing.assert_array_equal(arr.records, np.asarray(expected))

    def test_batch_size_invariance(self):
        cfg = default_config(link_distance=5.0, n_photons=10_000, seed=13)
        a = run_campaign(cfg, batch_size=10_000)
        b = run_campaign(cfg, batch_size=1_001)
        assert a == b

    def test_worker_count_invariance(self):
        cfg = default_config(link_distance=5.0, n_photons=20_000, seed=1)
        a = run_campaign(cfg, workers=1, batch_size=5_000)
        b = run_campaign(cfg, workers=2, batch_size=5_000)
        assert a == b

    def test_weights_are_albedo_powers(self):
        cfg = default_config(link_distance=5.0, n_photons=50_000, seed=17)
        arr = run_campaign(cfg)
        albedo = cfg.medium.albedo
        powers = {1.0}
        w = 1.0
        for _ in range(10):
            w *= albedo
            powers.add(w)
        assert set(np.unique(arr.records[:, 4])).issubset(powers)

    def test_arrivals_within_acceptance(self):
        cfg = default_config(link_distance=10.0, n_photons=50_000, seed=2)
        arr = run_campaign(cfg)
        r = np.hypot(arr.records[:, 0], arr.records[:, 1])
        assert np.all(r <= cfg.geometry.acceptance_radius + 1e-12)
        assert np.all(arr.records[:, 3] >= 0)
        assert np.all(arr.records[:, 3] <= math.pi / 2)
        assert np.all(arr.records[:, 2] >= -1e-15)
