"""Grayscale signature image preprocessing.

Images are 2-D uint8 numpy arrays, shape (height, width).  The default chain
for raw signature scans is::

    center_on_canvas -> remove_background_and_invert
        -> resize_bilinear(170, 242) -> center_crop(150, 220)

All operations are pure. Binary PGM (P5, maxval 255) is the on-disk format.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DataError, FormatError

RESIZE_HEIGHT = 170
RESIZE_WIDTH = 242
CROP_HEIGHT = 150
CROP_WIDTH = 220


def _check_image(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.size == 0:
        raise DataError("image must be a non-empty 2-D array")
    if arr.dtype != np.uint8:
        raise DataError(f"image must be uint8, got {arr.dtype}")
    return arr


def histogram(img: np.ndarray) -> np.ndarray:
    """256-bin intensity histogram."""
    return np.bincount(_check_image(img).ravel(), minlength=256)


def otsu_threshold(hist: np.ndarray) -> int:
    """Threshold maximizing between-class variance of {<= t} vs {> t}.

    Candidate thresholds are restricted to those where both classes are
    non-empty, i.e. t in [first nonzero bin, last nonzero bin - 1]; ties go
    to the smallest t.  A single-intensity histogram returns that intensity.
    """
    hist = np.asarray(hist, dtype=np.float64)
    if hist.shape != (256,):
        raise DataError(f"histogram must have 256 bins, got shape {hist.shape}")
    if np.any(hist < 0) or not np.all(np.isfinite(hist)):
        raise DataError("histogram bins must be finite and non-negative")
    nonzero = np.nonzero(hist)[0]
    if nonzero.size == 0:
        raise DataError("histogram is empty")
    lo, hi = int(nonzero[0]), int(nonzero[-1])
    if lo == hi:
        return lo

    total = hist.sum()
    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)
    m0 = np.cumsum(hist * levels)
    mean_total = m0[-1]
    best_t = lo
    best_var = -1.0
    for t in range(lo, hi):
        weight0 = w0[t] / total
        weight1 = 1.0 - weight0
        mu0 = m0[t] / w0[t]
        mu1 = (mean_total - m0[t]) / (total - w0[t])
        var = weight0 * weight1 * (mu0 - mu1) ** 2
        if var > best_var:
            best_var = var
            best_t = t
    return best_t


def center_on_canvas(img: np.ndarray, canvas_w: int, canvas_h: int) -> np.ndarray:
    """Place the image on a white canvas, extra margin pixel going right/bottom."""
    img = _check_image(img)
    h, w = img.shape
    if canvas_h < h or canvas_w < w:
        raise DataError(
            f"canvas {canvas_w}x{canvas_h} smaller than image {w}x{h}"
        )
    canvas = np.full((canvas_h, canvas_w), 255, dtype=np.uint8)
    top = (canvas_h - h) // 2
    left = (canvas_w - w) // 2
    canvas[top : top + h, left : left + w] = img
    return canvas


def remove_background_and_invert(img: np.ndarray) -> np.ndarray:
    """Set pixels above the Otsu threshold to white, then invert.

    After inversion the background is exactly 0 and the strokes keep their
    grayscale values flipped.
    """
    img = _check_image(img)
    t = otsu_threshold(histogram(img))
    cleaned = np.where(img > t, np.uint8(255), img)
    return (255 - cleaned).astype(np.uint8)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize with round-half-up quantization."""
    img = _check_image(img)
    if out_h < 1 or out_w < 1:
        raise DataError("target dimensions must be >= 1")
    in_h, in_w = img.shape
    src = img.astype(np.float64)

    ys = np.linspace(0.0, in_h - 1.0, out_h) if out_h > 1 else np.zeros(1)
    xs = np.linspace(0.0, in_w - 1.0, out_w) if out_w > 1 else np.zeros(1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]

    top = src[y0][:, x0] * (1 - wx) + src[y0][:, x1] * wx
    bottom = src[y1][:, x0] * (1 - wx) + src[y1][:, x1] * wx
    values = top * (1 - wy) + bottom * wy
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def center_crop(img: np.ndarray, crop_h: int, crop_w: int) -> np.ndarray:
    """Centered window; remainder pixel stays on the right/bottom side."""
    img = _check_image(img)
    h, w = img.shape
    if crop_h > h or crop_w > w:
        raise DataError(f"crop {crop_w}x{crop_h} larger than image {w}x{h}")
    if crop_h < 1 or crop_w < 1:
        raise DataError("crop dimensions must be >= 1")
    top = (h - crop_h) // 2
    left = (w - crop_w) // 2
    return img[top : top + crop_h, left : left + crop_w].copy()


def preprocess_image(
    img: np.ndarray, canvas_w: int, canvas_h: int
) -> tuple[np.ndarray, int]:
    """Full default chain. Returns (150x220 image, otsu threshold used)."""
    centered = center_on_canvas(img, canvas_w, canvas_h)
    t = otsu_threshold(histogram(centered))
    cleaned = np.where(centered > t, np.uint8(255), centered)
    inverted = (255 - cleaned).astype(np.uint8)
    resized = resize_bilinear(inverted, RESIZE_HEIGHT, RESIZE_WIDTH)
    return center_crop(resized, CROP_HEIGHT, CROP_WIDTH), t


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary (P5) PGM file with maxval <= 255."""
    blob = Path(path).read_bytes()
    if blob[:2] != b"P5":
        raise FormatError(f"{path}: not a P5 PGM file")
    # Header tokens are separated by whitespace; '#' starts a comment line.
    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        try:
            tokens.append(int(blob[start:pos]))
        except ValueError as exc:
            raise FormatError(f"{path}: bad PGM header token") from exc
    width, height, maxval = tokens
    if width < 1 or height < 1 or not 0 < maxval < 256:
        raise FormatError(f"{path}: unsupported PGM geometry {width}x{height} maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    data = blob[pos : pos + width * height]
    if len(data) != width * height:
        raise FormatError(f"{path}: expected {width * height} pixel bytes, got {len(data)}")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(img: np.ndarray, path: str | Path) -> None:
    img = _check_image(img)
    h, w = img.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + img.tobytes())
