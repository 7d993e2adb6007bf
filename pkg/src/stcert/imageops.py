"""Raster geometry: ROI masking, tight boxes, context expansion, crop/resize, RLE.

Images are (H, W, 3) uint8 numpy arrays, masks are (H, W) bool arrays.
Every operation is a pure function; nothing here holds state.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

__all__ = [
    "BBox",
    "BLACK",
    "MEAN_GRAY",
    "apply_mask",
    "tight_bbox",
    "expand_box",
    "crop_resize",
    "rle_encode",
    "rle_decode",
    "png_encode",
    "png_decode",
    "as_image",
    "as_mask",
]

# Blank-fill presets: plain black, and the conventional ImageNet channel means
# for callers worried about shifting pixel statistics.
BLACK = (0, 0, 0)
MEAN_GRAY = (124, 116, 104)


@dataclass(frozen=True, order=True)
class BBox:
    """Axis-aligned half-open pixel box [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (0 <= self.x0 < self.x1 and 0 <= self.y0 < self.y1):
            raise ValueError(f"degenerate box {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def contains(self, other: "BBox") -> bool:
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and self.x1 >= other.x1
            and self.y1 >= other.y1
        )

    def within(self, image_w: int, image_h: int) -> bool:
        return self.x1 <= image_w and self.y1 <= image_h

    def to_list(self) -> list[int]:
        return [self.x0, self.y0, self.x1, self.y1]


def as_image(arr) -> np.ndarray:
    a = np.asarray(arr, dtype=np.uint8)
    if a.ndim != 3 or a.shape[2] != 3 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected (H, W, 3) uint8 image, got shape {a.shape}")
    return a


def as_mask(arr) -> np.ndarray:
    a = np.asarray(arr)
    if a.ndim != 2:
        raise ValueError(f"expected (H, W) mask, got shape {a.shape}")
    return a.astype(bool)


def apply_mask(image, mask, blank=BLACK) -> np.ndarray:
    """Keep pixels where the mask is set, replace the rest with the blank color.

    Element-wise x*m + (1-m)*B on each channel.
    """
    image = as_image(image)
    mask = as_mask(mask)
    if mask.shape != image.shape[:2]:
        raise ValueError(
            f"mask shape {mask.shape} does not match image {image.shape[:2]}"
        )
    blank = tuple(int(v) for v in blank)
    if len(blank) != 3 or any(not 0 <= v <= 255 for v in blank):
        raise ValueError(f"blank fill {blank} outside 8-bit range")
    fill = np.array(blank, dtype=np.uint8)
    return np.where(mask[:, :, None], image, fill[None, None, :])


def tight_bbox(mask) -> BBox:
    """Minimal half-open box covering all set bits."""
    mask = as_mask(mask)
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        raise ValueError("empty mask has no bounding box")
    cols = np.flatnonzero(mask.any(axis=0))
    return BBox(int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)


def expand_box(box: BBox, level: int, image_w: int, image_h: int,
               step: float = 0.25) -> BBox:
    """Grow a box about its center by scale 1 + step*level, then clamp.

    Level 0 is the identity. Fractional edges round outward (floor mins,
    ceil maxes) so the original box is never cropped by rounding.
    """
    if not isinstance(level, int) or not 0 <= level <= 5:
        raise ValueError(f"context level must be an integer in 0..5, got {level!r}")
    if not box.within(image_w, image_h):
        raise ValueError(f"box {box} outside {image_w}x{image_h} image")
    scale = 1.0 + step * level
    cx = (box.x0 + box.x1) / 2.0
    cy = (box.y0 + box.y1) / 2.0
    half_w = scale * box.width / 2.0
    half_h = scale * box.height / 2.0
    x0 = max(0, math.floor(cx - half_w))
    y0 = max(0, math.floor(cy - half_h))
    x1 = min(image_w, math.ceil(cx + half_w))
    y1 = min(image_h, math.ceil(cy + half_h))
    return BBox(x0, y0, x1, y1)


def _resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    # Half-pixel-center sampling, no antialiasing; kept exact and
    # vectorized so independent scalar references can match it bit-for-bit.
    in_h, in_w = image.shape[:2]
    src = image.astype(np.float64)

    def axis_coords(n_out, n_in):
        # multiply before dividing: keeps floats identical to the scalar
        # form (i + 0.5) * n_in / n_out - 0.5
        c = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
        return np.clip(c, 0.0, n_in - 1.0)

    ys = axis_coords(out_h, in_h)
    xs = axis_coords(out_w, in_w)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    # Four-corner weighted sum with a fixed multiply/add order, so scalar
    # reimplementations of the same formula round identically.
    out = (src[y0][:, x0] * (1 - fy) * (1 - fx)
           + src[y0][:, x1] * (1 - fy) * fx
           + src[y1][:, x0] * fy * (1 - fx)
           + src[y1][:, x1] * fy * fx)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def crop_resize(image, box: BBox, target: int = 224) -> np.ndarray:
    """Crop the box and bilinearly resample to target x target."""
    image = as_image(image)
    h, w = image.shape[:2]
    if not box.within(w, h):
        raise ValueError(f"box {box} outside {w}x{h} image")
    if target < 1:
        raise ValueError(f"target size must be >= 1, got {target}")
    crop = image[box.y0 : box.y1, box.x0 : box.x1]
    return _resize_bilinear(crop, target, target)


def rle_encode(mask) -> list[int]:
    """Row-major run-length code starting with the zero run (possibly 0)."""
    flat = as_mask(mask).ravel().astype(np.int8)
    if flat.size == 0:
        return [0]
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs.insert(0, 0)
    return [int(r) for r in runs]


def rle_decode(runs, width: int, height: int) -> np.ndarray:
    """Inverse of rle_encode; validates the run sum against width*height."""
    runs = [int(r) for r in runs]
    if any(r < 0 for r in runs):
        raise ValueError(f"negative run length in {runs}")
    total = sum(runs)
    if total != width * height:
        raise ValueError(f"run sum {total} != {width}x{height} = {width * height}")
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape(height, width)


def png_encode(image) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(as_image(image), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def png_decode(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return as_image(np.asarray(im.convert("RGB")))
