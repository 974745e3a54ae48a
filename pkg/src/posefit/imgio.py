"""Grayscale image IO.

Two interchange formats are supported:

* binary PGM, magic ``P5``, maxval up to 255, for ordinary photos;
* a plain-text float variant, magic ``P2F``, used where exact pixel
  values matter.  Layout::

      P2F
      width height
      <height rows of width decimal reals>

``save_gray`` picks the format from the file suffix: ``.pgm`` writes
binary PGM, anything else writes ``P2F``.  ``load_gray`` dispatches on
the magic number.  Attribute images use a third format, magic ``ATTR4``,
holding four float planes; coverage is implied by any nonzero attribute.
"""

import re

import numpy as np

from .errors import ImageFormatError
from .render import AttributeImage, GrayImage


def _read_pgm_tokens(data: bytes, count: int, start: int):
    """Read whitespace/comment separated ASCII tokens from a PGM header."""
    tokens = []
    i = start
    while len(tokens) < count:
        if i >= len(data):
            raise ImageFormatError("truncated PGM header")
        c = data[i : i + 1]
        if c.isspace():
            i += 1
        elif c == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    return tokens, i


def read_pgm(path) -> GrayImage:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ImageFormatError(f"{path}: not a binary PGM (missing P5 magic)")
    tokens, pos = _read_pgm_tokens(data, 3, 2)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ImageFormatError(f"{path}: bad PGM header") from exc
    if width < 1 or height < 1 or not 0 < maxval <= 255:
        raise ImageFormatError(f"{path}: unsupported PGM dimensions or maxval")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise ImageFormatError(f"{path}: truncated PGM raster")
    pixels = np.frombuffer(raster, dtype=np.uint8).astype(np.float64)
    return GrayImage(pixels.reshape(height, width))


def write_pgm(path, image: GrayImage) -> None:
    """Write binary PGM; values are clipped to [0, 255] and rounded."""
    pixels = np.clip(np.rint(image.pixels), 0, 255).astype(np.uint8)
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header + pixels.tobytes())


def read_float_image(path) -> GrayImage:
    with open(path, "r", encoding="ascii") as fh:
        text = fh.read()
    body = re.sub(r"#[^\n]*", " ", text)
    tokens = body.split()
    if not tokens or tokens[0] != "P2F":
        raise ImageFormatError(f"{path}: not a float image (missing P2F magic)")
    if len(tokens) < 3:
        raise ImageFormatError(f"{path}: truncated float image header")
    try:
        width, height = int(tokens[1]), int(tokens[2])
        values = np.array(tokens[3:], dtype=np.float64)
    except ValueError as exc:
        raise ImageFormatError(f"{path}: bad float image data") from exc
    if width < 1 or height < 1 or values.size != width * height:
        raise ImageFormatError(
            f"{path}: expected {width}x{height} values, got {values.size}"
        )
    return GrayImage(values.reshape(height, width))


def write_float_image(path, image: GrayImage) -> None:
    lines = ["P2F", f"{image.width} {image.height}"]
    for row in image.pixels:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_gray(path) -> GrayImage:
    with open(path, "rb") as fh:
        magic = fh.read(3)
    if magic.startswith(b"P5"):
        return read_pgm(path)
    if magic == b"P2F":
        return read_float_image(path)
    raise ImageFormatError(f"{path}: unrecognized image format")


def save_gray(path, image: GrayImage) -> None:
    if str(path).endswith(".pgm"):
        write_pgm(path, image)
    else:
        write_float_image(path, image)


def write_attribute_dump(path, image: AttributeImage) -> None:
    """Write the four attribute planes as text, magic ATTR4."""
    lines = ["ATTR4", f"{image.width} {image.height}"]
    for plane in range(4):
        for row in image.attributes[:, :, plane]:
            lines.append(" ".join(f"{v:.17g}" for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_attribute_dump(path) -> AttributeImage:
    with open(path, "r", encoding="ascii") as fh:
        tokens = fh.read().split()
    if not tokens or tokens[0] != "ATTR4":
        raise ImageFormatError(f"{path}: not an attribute dump (missing ATTR4)")
    try:
        width, height = int(tokens[1]), int(tokens[2])
        values = np.array(tokens[3:], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise ImageFormatError(f"{path}: bad attribute dump") from exc
    if values.size != 4 * width * height:
        raise ImageFormatError(
            f"{path}: expected {4 * width * height} values, got {values.size}"
        )
    planes = values.reshape(4, height, width)
    attrs = np.moveaxis(planes, 0, -1).copy()
    coverage = np.any(attrs != 0.0, axis=-1)
    return AttributeImage(attributes=attrs, coverage=coverage)
