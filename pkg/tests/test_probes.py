import numpy as np
import pytest

from luxprobe.envmap import (
    EnvironmentMap,
    grid_directions,
    pixel_to_direction,
    rotate_env,
    sample_equirect,
    solid_angle,
)
from luxprobe.probes import (
    GRAY_DIFFUSE,
    MATTE_SILVER,
    MIRROR_BALL,
    Material,
    prefilter_diffuse,
    prefilter_glossy,
    render_probe,
    render_probe_sequence,
)


class TestMaterial:
    def test_presets(self):
        assert MIRROR_BALL.kind == "mirror"
        assert MATTE_SILVER.exponent == 64.0
        assert GRAY_DIFFUSE.albedo == (0.5, 0.5, 0.5)

    def test_validation(self):
        with pytest.raises(ValueError, match="kind"):
            Material("chrome")
        with pytest.raises(ValueError, match="albedo"):
            Material("mirror", albedo=(1.5, 0, 0))
        with pytest.raises(ValueError, match="exponent"):
            Material("matte", exponent=0.0)


class TestPrefilterDiffuse:
    def test_constant_env_gives_pi_l(self):
        env = EnvironmentMap.constant(2.0, height=64)
        irr = prefilter_diffuse(env, out_height=64)
        np.testing.assert_allclose(irr.data, 2.0 * np.pi, rtol=5e-3)

    def test_single_hot_texel(self):
        height, width = 32, 64
        data = np.zeros((height, width, 3))
        row, col = 12, 40
        radiance = 50.0
        data[row, col] = radiance
        env = EnvironmentMap(data)
        irr = prefilter_diffuse(env, out_height=height)
        d = pixel_to_direction(col, row, width, height)
        omega = solid_angle(row, width, height)
        # at the texel direction: E = L * dOmega * 1
        at_d = sample_equirect(irr.data, np.asarray(d))
        np.testing.assert_allclose(at_d, radiance * omega, rtol=5e-3)
        # orthogonal direction: cosine term vanishes
        perp = np.array([-d[2], 0.0, d[0]])
        perp /= np.linalg.norm(perp)
        at_perp = sample_equirect(irr.data, perp)
        assert np.abs(at_perp).max() <= radiance * omega * 0.05

    def test_rotation_equivariance(self):
        height = 32
        rows = np.arange(height)[:, None, None]
        cols = np.arange(2 * height)[None, :, None]
        data = 1.0 + 0.8 * np.cos(2 * np.pi * cols / (2 * height)) * np.sin(
            np.pi * (rows + 0.5) / height
        ) * np.ones((1, 1, 3))
        env = EnvironmentMap(data)
        a = prefilter_diffuse(rotate_env(env, 45.0), out_height=height)
        b = rotate_env(prefilter_diffuse(env, out_height=height), 45.0)
        interior = slice(4, height - 4)
        rel = np.abs(a.data[interior] - b.data[interior]) / b.data[interior]
        assert rel.max() < 0.01

    def test_linearity(self, rng):
        e1 = EnvironmentMap(rng.random((16, 32, 3)))
        e2 = EnvironmentMap(rng.random((16, 32, 3)))
        combo = EnvironmentMap(2.0 * e1.data + 3.0 * e2.data)
        lhs = prefilter_diffuse(combo, 16).data
        rhs = 2.0 * prefilter_diffuse(e1, 16).data + 3.0 * prefilter_diffuse(e2, 16).data
        np.testing.assert_allclose(lhs, rhs, rtol=1e-5)


class TestPrefilterGlossy:
    def test_constant_env_passthrough(self):
        env = EnvironmentMap.constant((1.5, 2.5, 0.5), height=32)
        out = prefilter_glossy(env, exponent=64, out_height=32)
        np.testing.assert_allclose(
            out.data, np.broadcast_to([1.5, 2.5, 0.5], out.data.shape), rtol=1e-12
        )

    def test_high_exponent_approaches_mirror_lookup(self):
        height, width = 32, 64
        data = np.full((height, width, 3), 0.1)
        row, col = 16, 40
        data[row, col] = 30.0
        env = EnvironmentMap(data)
        out = prefilter_glossy(env, exponent=4096, out_height=height)
        d = np.asarray(pixel_to_direction(col, row, width, height))
        sharp = sample_equirect(out.data, d)
        direct = sample_equirect(env.data, d)
        np.testing.assert_allclose(sharp, direct, rtol=0.25)

    def test_bounded_by_input_range(self, rng):
        env = EnvironmentMap(rng.random((16, 32, 3)) * 9 + 1)
        out = prefilter_glossy(env, exponent=8, out_height=16)
        assert out.data.min() >= env.data.min() - 1e-9
        assert out.data.max() <= env.data.max() + 1e-9

    def test_linearity_given_fixed_weights(self, rng):
        e1 = EnvironmentMap(rng.random((16, 32, 3)))
        e2 = EnvironmentMap(rng.random((16, 32, 3)))
        combo = EnvironmentMap(0.5 * e1.data + 2.0 * e2.data)
        lhs = prefilter_glossy(combo, 32, 16).data
        rhs = 0.5 * prefilter_glossy(e1, 32, 16).data + 2.0 * prefilter_glossy(e2, 32, 16).data
        np.testing.assert_allclose(lhs, rhs, rtol=1e-5)

    def test_exponent_validated(self):
        with pytest.raises(ValueError):
            prefilter_glossy(EnvironmentMap.constant(1.0, 8), exponent=-1, out_height=8)


class TestRenderProbe:
    def test_constant_env_mirror_exact(self):
        env = EnvironmentMap.constant((0.25, 0.5, 0.75), height=16)
        probe = render_probe(env, MIRROR_BALL, size=32)
        assert (probe.pixels[probe.mask] == [0.25, 0.5, 0.75]).all()
        assert (probe.pixels[~probe.mask] == 0.0).all()

    def test_constant_env_diffuse_energy(self):
        env = EnvironmentMap.constant(2.0, height=64)
        probe = render_probe(env, GRAY_DIFFUSE, size=32)
        np.testing.assert_allclose(probe.pixels[probe.mask], 0.5 * 2.0, rtol=5e-3)

    def test_constant_env_glossy_exact(self):
        env = EnvironmentMap.constant(3.0, height=32)
        probe = render_probe(env, MATTE_SILVER, size=32)
        np.testing.assert_allclose(probe.pixels[probe.mask], 0.9 * 3.0, rtol=1e-12)

    def test_center_pixel_reflects_backward(self):
        # paint the hemisphere around +z (behind the camera) a distinctive color
        height, width = 64, 128
        dirs = grid_directions(width, height)
        data = np.where(dirs[..., 2:3] > 0.5, 7.0, 1.0) * np.ones(3)
        env = EnvironmentMap(data)
        probe = render_probe(env, MIRROR_BALL, size=64)
        center = probe.pixels[31:33, 31:33]
        np.testing.assert_allclose(center, 7.0, rtol=1e-6)

    def test_mirror_equivariant_under_rotation(self):
        # rendering a rotated env equals looking the original up along
        # azimuth-rotated reflection vectors
        height = 64
        rows = np.arange(height)[:, None, None]
        cols = np.arange(2 * height)[None, :, None]
        chans = np.arange(3)[None, None, :]
        env = EnvironmentMap(
            1.0 + 0.5 * np.sin(2 * np.pi * cols / (2 * height) + chans)
            * np.sin(np.pi * (rows + 0.5) / height)
        )
        delta = 37.0
        probe = render_probe(rotate_env(env, delta), MIRROR_BALL, size=48)
        coords = (2.0 * (np.arange(48) + 0.5) / 48.0) - 1.0
        u, v = np.meshgrid(coords, -coords)
        n = np.stack([u, v, np.sqrt(np.clip(1 - u * u - v * v, 0, 1))], axis=-1)
        refl = 2.0 * n[..., 2:3] * n - np.array([0.0, 0.0, 1.0])
        rad = np.deg2rad(delta)
        yaw = np.array([
            [np.cos(rad), 0.0, -np.sin(rad)],
            [0.0, 1.0, 0.0],
            [np.sin(rad), 0.0, np.cos(rad)],
        ])
        remapped = sample_equirect(env.data, refl @ yaw.T)
        mask = probe.mask
        rel = np.abs(probe.pixels[mask] - remapped[mask]) / remapped[mask]
        assert np.median(rel) < 0.01

    def test_mask_is_inscribed_disc(self):
        probe = render_probe(EnvironmentMap.constant(1.0, 8), MIRROR_BALL, size=64)
        coords = (2.0 * (np.arange(64) + 0.5) / 64.0) - 1.0
        u, v = np.meshgrid(coords, -coords)
        assert (probe.mask == (u * u + v * v <= 1.0)).all()

    def test_size_validated(self):
        with pytest.raises(ValueError, match="at least 16"):
            render_probe(EnvironmentMap.constant(1.0, 8), MIRROR_BALL, size=8)


class TestRenderSequence:
    def test_constant_sequence_identical_frames(self):
        env = EnvironmentMap.constant(1.0, height=16)
        out = render_probe_sequence([env, env, env], MIRROR_BALL, size=32)
        assert len(out) == 3
        assert (out[0].pixels == out[1].pixels).all()
        assert (out[1].pixels == out[2].pixels).all()

    def test_rotated_sequence_matches_per_frame(self, rng):
        base = EnvironmentMap(rng.random((16, 32, 3)) + 0.2)
        envs = [rotate_env(base, 360.0 * k / 32) for k in range(3)]
        seq = render_probe_sequence(envs, MIRROR_BALL, size=32)
        for env, probe in zip(envs, seq):
            single = render_probe(env, MIRROR_BALL, size=32)
            assert (probe.pixels == single.pixels).all()

    def test_dimension_mismatch_rejected(self):
        a = EnvironmentMap.constant(1.0, height=16)
        b = EnvironmentMap.constant(1.0, height=8)
        with pytest.raises(ValueError, match="share dimensions"):
            render_probe_sequence([a, b], MIRROR_BALL, size=32)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            render_probe_sequence([], MIRROR_BALL, size=32)
