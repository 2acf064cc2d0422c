import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtsar.core import Image, Region, Stack, ValidationError, crop, validate_stack

from .conftest import make_stack


class TestImage:
    def test_casts_to_float32_row_major(self):
        img = Image(np.arange(6, dtype=np.float64).reshape(2, 3))
        assert img.pixels.dtype == np.float32
        assert img.pixels.flags.c_contiguous
        assert (img.width, img.height) == (3, 2)

    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError, match="non-finite"):
            Image(np.array([[1.0, np.nan]], dtype=np.float32))
        with pytest.raises(ValidationError, match="non-finite"):
            Image(np.array([[np.inf, 1.0]], dtype=np.float32))

    def test_rejects_bad_rank_and_empty(self):
        with pytest.raises(ValidationError):
            Image(np.zeros(4, dtype=np.float32))
        with pytest.raises(ValidationError):
            Image(np.zeros((2, 2, 2), dtype=np.float32))
        with pytest.raises(ValidationError):
            Image(np.zeros((0, 3), dtype=np.float32))

    def test_pixels_are_read_only(self):
        img = Image.filled(4, 4, 1.0)
        with pytest.raises(ValueError):
            img.pixels[0, 0] = 2.0

    def test_filled(self):
        img = Image.filled(3, 2, 5.5)
        assert img.shape == (2, 3)
        assert np.all(img.pixels == np.float32(5.5))


class TestValidateStack:
    def test_ok(self):
        validate_stack(make_stack([np.ones((4, 4))] * 3))

    def test_dimension_mismatch(self):
        stack = Stack(
            (Image.filled(64, 64, 1.0), Image.filled(32, 32, 1.0)),
            ("a", "b"),
            4.0,
        )
        with pytest.raises(ValidationError, match="dimension mismatch"):
            validate_stack(stack)

    def test_empty_stack(self):
        with pytest.raises(ValidationError, match="empty"):
            validate_stack(Stack((), (), 4.0))

    def test_non_positive_looks(self):
        stack = make_stack([np.ones((2, 2))], looks=0.0)
        with pytest.raises(ValidationError, match="looks"):
            validate_stack(stack)

    def test_date_count_mismatch(self):
        stack = Stack((Image.filled(2, 2, 1.0),), ("a", "b"), 4.0)
        with pytest.raises(ValidationError, match="date"):
            validate_stack(stack)

    def test_duplicate_dates(self):
        stack = Stack(
            (Image.filled(2, 2, 1.0), Image.filled(2, 2, 2.0)), ("a", "a"), 4.0
        )
        with pytest.raises(ValidationError, match="unique"):
            validate_stack(stack)


class TestCrop:
    def test_identity_crop(self):
        img = Image(np.arange(64 * 64, dtype=np.float32).reshape(64, 64))
        out = crop(img, Region(0, 0, 64, 64))
        assert np.array_equal(out.pixels, img.pixels)

    def test_constant_preserved(self):
        out = crop(Image.filled(16, 16, 5.0), Region(3, 4, 7, 5))
        assert out.shape == (5, 7)
        assert np.all(out.pixels == np.float32(5.0))

    def test_pixel_mapping(self):
        img = Image(np.arange(30, dtype=np.float32).reshape(5, 6))
        out = crop(img, Region(2, 1, 3, 2))
        assert out.pixels[0, 0] == img.pixels[1, 2]
        assert out.pixels[1, 2] == img.pixels[2, 4]

    def test_out_of_bounds(self):
        img = Image.filled(64, 64, 1.0)
        with pytest.raises(ValidationError, match="outside"):
            crop(img, Region(60, 60, 10, 10))
        with pytest.raises(ValidationError, match="outside"):
            crop(img, Region(-1, 0, 4, 4))

    def test_degenerate_region_rejected(self):
        with pytest.raises(ValidationError):
            Region(0, 0, 0, 3)


@given(
    ax=st.integers(0, 5),
    ay=st.integers(0, 5),
    aw=st.integers(2, 10),
    ah=st.integers(2, 10),
    bx=st.integers(0, 5),
    by=st.integers(0, 5),
    data=st.data(),
)
@settings(max_examples=50, deadline=None)
def test_crop_composes(ax, ay, aw, ah, bx, by, data):
    # crop(crop(img, A), B) == crop(img, A-then-B composed)
    rng = np.random.default_rng(0)
    img = Image(rng.uniform(0, 10, (20, 20)).astype(np.float32))
    bx, by = min(bx, aw - 1), min(by, ah - 1)
    bw = data.draw(st.integers(1, aw - bx))
    bh = data.draw(st.integers(1, ah - by))
    inner = crop(crop(img, Region(ax, ay, aw, ah)), Region(bx, by, bw, bh))
    composed = crop(img, Region(ax + bx, ay + by, bw, bh))
    assert np.array_equal(inner.pixels, composed.pixels)


@st.composite
def _valid_stacks(draw):
    t = draw(st.integers(1, 4))
    w = draw(st.integers(1, 8))
    h = draw(st.integers(1, 8))
    looks = draw(st.floats(0.25, 16.0))
    images = tuple(Image.filled(w, h, float(i + 1)) for i in range(t))
    dates = tuple(f"d{i}" for i in range(t))
    return Stack(images, dates, looks)


@given(
    stack=_valid_stacks(),
    corruption=st.sampled_from(
        ["ok", "resize", "zero_looks", "negative_looks", "dup_dates", "drop_date"]
    ),
)
@settings(max_examples=80, deadline=None)
def test_validate_stack_accepts_exactly_valid_stacks(stack, corruption):
    if corruption in ("dup_dates", "drop_date") and len(stack) < 2:
        corruption = "ok"
    if corruption == "ok":
        validate_stack(stack)
        return
    if corruption == "resize":
        first = stack.images[0]
        resized = Image.filled(first.width + 1, first.height, 1.0)
        bad = Stack((resized,) + stack.images[1:], stack.dates, stack.looks)
    elif corruption == "zero_looks":
        bad = Stack(stack.images, stack.dates, 0.0)
    elif corruption == "negative_looks":
        bad = Stack(stack.images, stack.dates, -2.0)
    elif corruption == "dup_dates":
        bad = Stack(stack.images, (stack.dates[0],) + stack.dates[:-1], stack.looks)
    else:  # drop_date
        bad = Stack(stack.images, stack.dates[:-1], stack.looks)
    with pytest.raises(ValidationError):
        validate_stack(bad)
