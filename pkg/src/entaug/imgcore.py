"""Pixel-level image primitives.

Images are numpy arrays of shape (H, W, 3), float64, RGB, channel values
in [0, 1]. Disk I/O is 8-bit PNG/JPEG; an 8-bit value b maps to b/255 on
load and v maps to round(255*v) on save, so PNG round-trips are bit-exact
after quantization.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

# Standard-definition luma weights (sum to 1).
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class ImageError(ValueError):
    """Raised for unreadable files or arrays that are not valid images."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle, origin top-left."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"rect dims must be >= 1, got {self.w}x{self.h}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"rect origin must be >= 0, got ({self.x},{self.y})")


def validate_image(img: np.ndarray) -> np.ndarray:
    """Check shape (H,W,3), H,W >= 1 and channel values in [0,1]."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ImageError(f"expected (H,W,3) array, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ImageError(f"empty image: shape {img.shape}")
    if not np.isfinite(img).all():
        raise ImageError("image contains non-finite values")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ImageError(
            f"channel values outside [0,1]: min {img.min()}, max {img.max()}"
        )
    return img


def load_image(path) -> np.ndarray:
    """Load an 8-bit RGB raster; each 8-bit value b maps to b/255 exactly."""
    path = Path(path)
    if not path.is_file():
        raise ImageError(f"no such image file: {path}")
    try:
        with PILImage.open(path) as im:
            if im.mode != "RGB":
                raise ImageError(
                    f"expected RGB image, got mode {im.mode!r}: {path}"
                )
            arr = np.asarray(im, dtype=np.uint8)
    except ImageError:
        raise
    except Exception as exc:
        raise ImageError(f"cannot decode image {path}: {exc}") from exc
    return arr.astype(np.float64) / 255.0


def save_image(img: np.ndarray, path) -> None:
    """Quantize with round(255*v) and write PNG/JPEG chosen by extension."""
    img = validate_image(img)
    data = np.rint(img * 255.0).astype(np.uint8)
    PILImage.fromarray(data, mode="RGB").save(path)


def luminance(img: np.ndarray) -> np.ndarray:
    """Per-pixel luma map, Y = 0.299 R + 0.587 G + 0.114 B."""
    r, g, b = LUMA_WEIGHTS
    return r * img[:, :, 0] + g * img[:, :, 1] + b * img[:, :, 2]


def saturation_map(img: np.ndarray) -> np.ndarray:
    """Per-pixel HSV saturation, S = (max-min)/max, with S = 0 where max = 0."""
    mx = img.max(axis=2)
    mn = img.min(axis=2)
    out = np.zeros_like(mx)
    np.divide(mx - mn, mx, out=out, where=mx > 0)
    return out


def resize(img: np.ndarray, target_w: int, target_h: int, keep_aspect: bool = False) -> np.ndarray:
    """Bilinear resize (half-pixel-center sampling, edge clamp).

    With keep_aspect the image is scaled to fit inside target_w x target_h
    and the output has the fitted dims (rounded, at least 1).
    """
    if target_w < 1 or target_h < 1:
        raise ImageError(f"resize target must be >= 1, got {target_w}x{target_h}")
    h, w = img.shape[:2]
    if keep_aspect:
        scale = min(target_w / w, target_h / h)
        target_w = max(1, round(w * scale))
        target_h = max(1, round(h * scale))
    if (target_h, target_w) == (h, w):
        return img.copy()
    # Sample positions in source coordinates, half-pixel-center convention.
    sx = (np.arange(target_w) + 0.5) * (w / target_w) - 0.5
    sy = (np.arange(target_h) + 0.5) * (h / target_h) - 0.5
    x0 = np.floor(sx).astype(int)
    y0 = np.floor(sy).astype(int)
    fx = sx - x0
    fy = sy - y0
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = img[y0c][:, x0c] * (1 - fx) + img[y0c][:, x1c] * fx
    bot = img[y1c][:, x0c] * (1 - fx) + img[y1c][:, x1c] * fx
    out = top * (1 - fy) + bot * fy
    return np.clip(out, 0.0, 1.0)


def crop(img: np.ndarray, r: Rect) -> np.ndarray:
    """Exact pixel copy of r; r must lie fully inside the image."""
    h, w = img.shape[:2]
    if r.x + r.w > w or r.y + r.h > h:
        raise ImageError(
            f"crop rect ({r.x},{r.y},{r.w},{r.h}) exceeds image {w}x{h}"
        )
    return img[r.y : r.y + r.h, r.x : r.x + r.w].copy()


def hflip(img: np.ndarray) -> np.ndarray:
    """Reverse column order."""
    return img[:, ::-1].copy()


def _tail_even_index(n: int) -> np.ndarray | None:
    """Index map appending one mirrored row/col when n is odd, else None."""
    if n % 2 == 0:
        return None
    return np.concatenate([np.arange(n), [n - 2 if n >= 2 else 0]])


def _pad_reflect_to_even(img: np.ndarray) -> np.ndarray:
    ih = _tail_even_index(img.shape[0])
    iw = _tail_even_index(img.shape[1])
    if ih is not None:
        img = img[ih]
    if iw is not None:
        img = img[:, iw]
    return img


def downsample2(img: np.ndarray) -> np.ndarray:
    """Non-overlapping 2x2 average pooling; odd dims reflect-pad one row/col."""
    img = _pad_reflect_to_even(img)
    h, w = img.shape[:2]
    return img.reshape(h // 2, 2, w // 2, 2, 3).mean(axis=(1, 3))
