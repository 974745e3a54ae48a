"""Image IO round trips and format rejection."""
import numpy as np
import pytest

from posefit.errors import ImageFormatError
from posefit.imgio import (
    load_gray,
    read_attribute_dump,
    read_float_image,
    read_pgm,
    save_gray,
    write_attribute_dump,
    write_float_image,
    write_pgm,
)
from posefit.render import AttributeImage, GrayImage


def test_pgm_round_trip_preserves_integer_pixels(tmp_path):
    rng = np.random.default_rng(7)
    img = GrayImage(rng.integers(0, 256, size=(5, 9)).astype(np.float64))
    path = tmp_path / "img.pgm"
    write_pgm(path, img)
    again = read_pgm(path)
    assert again.width == 9 and again.height == 5
    assert np.array_equal(again.pixels, img.pixels)


def test_pgm_write_clips_and_rounds(tmp_path):
    img = GrayImage(np.array([[-3.0, 0.4, 254.6, 300.0]]))
    path = tmp_path / "clip.pgm"
    write_pgm(path, img)
    assert np.array_equal(read_pgm(path).pixels, [[0.0, 0.0, 255.0, 255.0]])


def test_pgm_header_comments_are_skipped(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# made by hand\n2 1\n255\n\x07\x20")
    img = read_pgm(path)
    assert np.array_equal(img.pixels, [[7.0, 32.0]])


@pytest.mark.parametrize(
    "data",
    [
        b"P6\n1 1\n255\n\x00",
        b"P5\n1 1\n",
        b"P5\n2 2\n255\n\x00\x00",
        b"P5\nx 1\n255\n\x00",
        b"P5\n1 1\n70000\n\x00",
    ],
)
def test_bad_pgm_is_rejected(tmp_path, data):
    path = tmp_path / "bad.pgm"
    path.write_bytes(data)
    with pytest.raises(ImageFormatError):
        read_pgm(path)


def test_float_image_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(11)
    img = GrayImage(rng.standard_normal((4, 6)) * 1e3)
    path = tmp_path / "img.p2f"
    write_float_image(path, img)
    again = read_float_image(path)
    assert np.array_equal(again.pixels, img.pixels)


def test_float_image_negative_values_survive(tmp_path):
    img = GrayImage(np.array([[-1.5, 2.25]]))
    path = tmp_path / "neg.p2f"
    write_float_image(path, img)
    assert np.array_equal(read_float_image(path).pixels, img.pixels)


@pytest.mark.parametrize(
    "text",
    [
        "P2\n1 1\n0\n",
        "P2F\n2 2\n1 2 3\n",
        "P2F\n1\n",
        "P2F\na b\n1\n",
    ],
)
def test_bad_float_image_is_rejected(tmp_path, text):
    path = tmp_path / "bad.p2f"
    path.write_text(text)
    with pytest.raises(ImageFormatError):
        read_float_image(path)


def test_load_gray_dispatches_on_magic(tmp_path):
    img = GrayImage(np.array([[1.0, 2.0], [3.0, 4.0]]))
    p1 = tmp_path / "a.pgm"
    p2 = tmp_path / "b.p2f"
    save_gray(p1, img)
    save_gray(p2, img)
    assert np.array_equal(load_gray(p1).pixels, img.pixels)
    assert np.array_equal(load_gray(p2).pixels, img.pixels)
    junk = tmp_path / "c.img"
    junk.write_bytes(b"???")
    with pytest.raises(ImageFormatError):
        load_gray(junk)


def test_attribute_dump_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    attrs = np.zeros((3, 5, 4))
    coverage = rng.random((3, 5)) > 0.4
    attrs[coverage] = rng.random((int(coverage.sum()), 4)) + 0.25
    img = AttributeImage(attributes=attrs, coverage=coverage)
    path = tmp_path / "attrs.txt"
    write_attribute_dump(path, img)
    again = read_attribute_dump(path)
    assert np.array_equal(again.attributes, img.attributes)
    assert np.array_equal(again.coverage, img.coverage)


def test_attribute_dump_rejects_wrong_count(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("ATTR4\n2 1\n1 2 3\n")
    with pytest.raises(ImageFormatError):
        read_attribute_dump(path)
    path.write_text("NOPE\n1 1\n" + "0 " * 4)
    with pytest.raises(ImageFormatError):
        read_attribute_dump(path)
