import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtsar.core import Image, Region, ValidationError, validate_stack
from mtsar.speckle import (
    ChangeEvent,
    ConstantScene,
    EdgeScene,
    LinesScene,
    PointTargetsScene,
    SceneScript,
    corrupt,
    derive_date_seed,
    generate_scene,
    generate_stack,
    sample_speckle,
    truth_sequence,
)


class TestSampleSpeckle:
    def test_deterministic(self):
        a = sample_speckle(4.0, 64, 32, seed=123)
        b = sample_speckle(4.0, 64, 32, seed=123)
        assert np.array_equal(a.pixels, b.pixels)
        c = sample_speckle(4.0, 64, 32, seed=124)
        assert not np.array_equal(a.pixels, c.pixels)

    @pytest.mark.parametrize("looks", [1.0, 4.0, 10.0])
    def test_moments(self, looks):
        # mean(u) = 1, var(u) = 1/L; bounds are 4 sigma on the mean and 5% on
        # the variance at N = 512*512 samples
        n = 512 * 512
        u = sample_speckle(looks, 512, 512, seed=101).pixels.astype(np.float64)
        assert abs(u.mean() - 1.0) <= 4.0 * np.sqrt(1.0 / (looks * n))
        assert abs(u.var(ddof=1) - 1.0 / looks) <= 0.05 / looks

    def test_example_bands(self):
        u4 = sample_speckle(4.0, 512, 512, seed=101).pixels.astype(np.float64)
        assert 0.99 <= u4.mean() <= 1.01
        assert 0.2375 <= u4.var(ddof=1) <= 0.2625
        u1 = sample_speckle(1.0, 512, 512, seed=101).pixels.astype(np.float64)
        assert 0.95 <= u1.var(ddof=1) <= 1.05

    def test_invalid_inputs(self):
        with pytest.raises(ValidationError):
            sample_speckle(0.0, 8, 8, seed=0)
        with pytest.raises(ValidationError):
            sample_speckle(-1.0, 8, 8, seed=0)
        with pytest.raises(ValidationError):
            sample_speckle(4.0, 0, 8, seed=0)


class TestCorrupt:
    def test_rejects_non_positive_reflectivity(self):
        with pytest.raises(ValidationError, match="positive"):
            corrupt(Image.filled(8, 8, 0.0), 4.0, seed=1)

    def test_multiplicative_model_inverts(self):
        v = Image(np.linspace(1, 200, 64, dtype=np.float32).reshape(8, 8))
        w = corrupt(v, 4.0, seed=9)
        u = sample_speckle(4.0, 8, 8, seed=9)
        np.testing.assert_allclose(w.pixels / u.pixels, v.pixels, rtol=1e-6)

    def test_mean_band(self):
        w = corrupt(Image.filled(512, 512, 100.0), 4.0, seed=77)
        assert 99.0 <= float(w.pixels.mean()) <= 101.0

    @given(c=st.floats(0.01, 100.0))
    @settings(max_examples=25, deadline=None)
    def test_scale_equivariance(self, c):
        v = Image(np.linspace(0.5, 50, 256, dtype=np.float32).reshape(16, 16))
        scaled = corrupt(Image(np.float32(c) * v.pixels), 4.0, seed=5)
        reference = corrupt(v, 4.0, seed=5)
        np.testing.assert_allclose(
            scaled.pixels, np.float32(c) * reference.pixels, rtol=1e-5
        )


class TestGenerateScene:
    def test_constant(self):
        img = generate_scene(ConstantScene(100.0), 64, 64)
        assert np.all(img.pixels == np.float32(100.0))

    def test_edge(self):
        img = generate_scene(EdgeScene(50.0, 200.0, 32), 64, 64)
        assert np.all(img.pixels[:, :32] == np.float32(50.0))
        assert np.all(img.pixels[:, 32:] == np.float32(200.0))

    def test_point_targets(self):
        img = generate_scene(PointTargetsScene(50.0, 5000.0, ((10, 10),)), 32, 32)
        assert img.pixels[10, 10] == np.float32(5000.0)
        mask = np.ones((32, 32), dtype=bool)
        mask[10, 10] = False
        assert np.all(img.pixels[mask] == np.float32(50.0))

    def test_lines(self):
        img = generate_scene(LinesScene(50.0, 500.0, (3, 7)), 16, 16)
        assert np.all(img.pixels[3, :] == np.float32(500.0))
        assert np.all(img.pixels[7, :] == np.float32(500.0))
        assert np.all(img.pixels[0, :] == np.float32(50.0))

    def test_invalid_parameters(self):
        with pytest.raises(ValidationError):
            generate_scene(ConstantScene(0.0), 8, 8)
        with pytest.raises(ValidationError):
            generate_scene(EdgeScene(50.0, 200.0, 8), 8, 8)
        with pytest.raises(ValidationError):
            generate_scene(PointTargetsScene(50.0, 500.0, ((8, 0),)), 8, 8)
        with pytest.raises(ValidationError):
            generate_scene(LinesScene(50.0, 500.0, (9,)), 8, 8)


class TestSceneScript:
    def test_no_events_truths_equal_base(self):
        base = generate_scene(ConstantScene(42.0), 8, 8)
        script = SceneScript(base=base, num_dates=3, looks=4.0)
        truths = truth_sequence(script)
        assert len(truths) == 3
        for v in truths:
            assert np.array_equal(v.pixels, base.pixels)

    def test_cumulative_event_semantics(self):
        base = generate_scene(ConstantScene(50.0), 16, 16)
        region = Region(4, 4, 5, 5)
        script = SceneScript(
            base=base, events=(ChangeEvent(1, region, 500.0),), num_dates=3, looks=4.0
        )
        truths = truth_sequence(script)
        assert np.all(truths[0].pixels == np.float32(50.0))
        for t in (1, 2):
            sl = region.slices()
            assert np.all(truths[t].pixels[sl] == np.float32(500.0))
            outside = truths[t].pixels.copy()
            outside[sl] = 50.0
            assert np.all(outside == np.float32(50.0))

    def test_script_validation(self):
        base = generate_scene(ConstantScene(50.0), 8, 8)
        with pytest.raises(ValidationError):
            SceneScript(base=base, num_dates=0)
        with pytest.raises(ValidationError):
            SceneScript(base=base, events=(ChangeEvent(5, Region(0, 0, 2, 2), 1.0),), num_dates=3)
        with pytest.raises(ValidationError):
            SceneScript(base=base, events=(ChangeEvent(0, Region(0, 0, 2, 2), 0.0),), num_dates=3)
        with pytest.raises(ValidationError):
            SceneScript(base=base, events=(ChangeEvent(0, Region(6, 6, 4, 4), 1.0),), num_dates=3)


class TestGenerateStack:
    def test_valid_and_deterministic(self):
        base = generate_scene(ConstantScene(100.0), 32, 32)
        script = SceneScript(base=base, num_dates=5, looks=4.0)
        stack_a, truths_a = generate_stack(script, seed=7)
        stack_b, _ = generate_stack(script, seed=7)
        validate_stack(stack_a)
        assert len(stack_a) == 5 and len(truths_a) == 5
        for a, b in zip(stack_a.images, stack_b.images):
            assert np.array_equal(a.pixels, b.pixels)
        # distinct per-date realizations
        assert not np.array_equal(stack_a.images[0].pixels, stack_a.images[1].pixels)

    def test_per_date_seeds_are_stable_hashes(self):
        assert derive_date_seed(7, 0) == derive_date_seed(7, 0)
        assert derive_date_seed(7, 0) != derive_date_seed(7, 1)
        assert derive_date_seed(7, 1) != derive_date_seed(8, 1)

    def test_speckle_normalization(self):
        # full-frame mean of w_t / v_t within 2% at 256x256, L=4
        base = generate_scene(ConstantScene(100.0), 256, 256)
        script = SceneScript(base=base, num_dates=3, looks=4.0)
        stack, truths = generate_stack(script, seed=7)
        for w, v in zip(stack.images, truths):
            ratio = w.pixels.astype(np.float64) / v.pixels.astype(np.float64)
            assert abs(ratio.mean() - 1.0) <= 0.02
