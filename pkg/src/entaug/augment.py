"""Detection-side augmentation built on environment translation.

Covers the 50/50 original/translated training mix, a deterministic
reference translator (a closed-form stand-in for the learned network
realizing the same guide-vector semantics), region-mosaic augmentation
and geometric preprocessing with bounding-box bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from . import envvec, imgcore
from .dataset import BBox, DatasetRecord
from .envvec import EnvStats, EnvVector, RawEnvVector

PROV_ORIGINAL = "original"
PROV_TRANSLATED = "translated"
PROV_MOSAIC = "mosaic"

# A translator maps (image, guide vector) -> image.
Translator = Callable[[np.ndarray, EnvVector], np.ndarray]


@dataclass(frozen=True)
class GeometricConfig:
    resize_hw: tuple[int, int] = (800, 1333)
    hflip_p: float = 0.5
    random_scale_crop: bool = False
    scale_range: tuple[float, float] = (0.9, 1.1)
    crop_hw: tuple[int, int] = (384, 600)


@dataclass(frozen=True)
class AugConfig:
    mix_fraction: float = 0.5  # share of untouched originals in the stream
    env_sampling: str = envvec.UNIFORM
    mosaic_enabled: bool = False
    region_count_range: tuple[int, int] = (0, 4)
    region_dim_fraction_range: tuple[float, float] = (0.2, 0.8)
    geometric: GeometricConfig = field(default_factory=GeometricConfig)

    def __post_init__(self):
        if not 0.0 <= self.mix_fraction <= 1.0:
            raise ValueError(f"mix_fraction must be in [0,1], got {self.mix_fraction}")
        lo, hi = self.region_dim_fraction_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError(f"bad region dim fractions ({lo}, {hi})")
        if self.env_sampling not in envvec.SAMPLING_STRATEGIES:
            raise ValueError(f"unknown sampling strategy {self.env_sampling!r}")


@dataclass
class Sample:
    """One augmented training example."""

    image: np.ndarray
    boxes: tuple[BBox, ...]
    provenance: str
    source_path: str | None = None
    env_vector: EnvVector | None = None
    regions: tuple = ()  # mosaic (Rect, EnvVector) pairs


@dataclass(frozen=True)
class ReferenceTranslation:
    image: np.ndarray
    reachable: bool
    clamped_fraction: float


class _ImagePhotometry:
    """Target-independent per-image quantities for the reference translator."""

    def __init__(self, img: np.ndarray):
        self.img = img
        self.luma = imgcore.luminance(img)
        self.mean = float(self.luma.mean())
        self.std = float(self.luma.std())
        self.chroma = img - self.luma[:, :, None]
        # chroma order is luma-shift invariant: per-pixel saturation of
        # luma + k*chroma is k*spread / (luma + k*top)
        self.top = self.chroma.max(axis=2)
        self.bottom = self.chroma.min(axis=2)
        self.spread = self.top - self.bottom
        self.gray = bool(np.abs(self.chroma).max() < 1e-12)


def _mean_saturation(luma: np.ndarray, pre: _ImagePhotometry, k: float) -> float:
    peak = luma + k * pre.top
    sat = np.zeros_like(peak)
    np.divide(k * pre.spread, peak, out=sat, where=peak > 0)
    return float(sat.mean())


def _chroma_scale_bound(luma: np.ndarray, pre: _ImagePhotometry) -> float:
    """Largest chroma multiplier keeping luma + k*chroma inside [0,1]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(pre.top > 1e-12, (1.0 - luma) / pre.top, np.inf)
        dn = np.where(pre.bottom < -1e-12, -luma / pre.bottom, np.inf)
    return float(max(min(up.min(), dn.min()), 0.0))


def _translate_prepared(
    pre: _ImagePhotometry, target: EnvVector, stats: EnvStats
) -> ReferenceTranslation:
    raw_t = envvec.denormalize(target, stats)
    reachable = True

    if pre.std > 0:
        new_luma = (pre.luma - pre.mean) * (raw_t.contrast / pre.std) + raw_t.brightness
    else:
        new_luma = np.full_like(pre.luma, raw_t.brightness)
        if raw_t.contrast > 1e-9:
            reachable = False
    luma = np.clip(new_luma, 0.0, 1.0)
    if np.abs(luma - new_luma).max() > 1e-12:
        reachable = False

    target_sat = raw_t.saturation
    if pre.gray:
        k = 0.0
        if target_sat > 1e-9:
            reachable = False  # gray stays gray under chroma scaling
    else:
        k_max = _chroma_scale_bound(luma, pre)
        if _mean_saturation(luma, pre, k_max) < target_sat - 1e-6:
            k = k_max  # closest approach without leaving [0,1]
            reachable = False
        else:
            lo, hi = 0.0, k_max
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                if _mean_saturation(luma, pre, mid) < target_sat:
                    lo = mid
                else:
                    hi = mid
            k = 0.5 * (lo + hi)

    out = luma[:, :, None] + k * pre.chroma
    clamped = np.clip(out, 0.0, 1.0)
    clamped_fraction = float((np.abs(clamped - out) > 1e-12).mean())
    if clamped_fraction > 0:
        reachable = False
    return ReferenceTranslation(image=clamped, reachable=reachable, clamped_fraction=clamped_fraction)


def reference_translate(
    img: np.ndarray, target: EnvVector, stats: EnvStats
) -> ReferenceTranslation:
    """Deterministic photometric translation hitting the guide vector.

    Luma is remapped affinely so its mean/std equal the denormalized
    brightness/contrast targets; chroma is then scaled about the new luma
    (a hue-preserving move that leaves luma untouched) with the scale
    solved by bisection so mean saturation meets its target. Channels are
    clamped to [0,1] at the end. `reachable` is False when the contrast
    or saturation target cannot be met (zero-contrast or gray inputs) or
    when clamping distorted the result.
    """
    return _translate_prepared(_ImagePhotometry(img), target, stats)


def make_reference_translator(stats: EnvStats, cache_size: int = 64) -> Translator:
    """Plain (image, vector) -> image translator with per-image memoization.

    Entries hold a strong reference to their key array, so ids stay valid
    while cached; eviction is oldest-first.
    """
    cache: dict[int, _ImagePhotometry] = {}

    def translator(img: np.ndarray, e: EnvVector) -> np.ndarray:
        key = id(img)
        pre = cache.get(key)
        if pre is None or pre.img is not img:
            pre = _ImagePhotometry(img)
            while len(cache) >= cache_size:
                cache.pop(next(iter(cache)))
            cache[key] = pre
        return _translate_prepared(pre, e, stats).image

    return translator


def _sample_vector(cfg: AugConfig, rng, target_pool) -> EnvVector:
    return envvec.sample_env(cfg.env_sampling, rng, target_pool)


def mixed_stream(
    records: Sequence[DatasetRecord],
    translator: Translator,
    cfg: AugConfig,
    rng: np.random.Generator,
    count: int | None = None,
    target_pool: Sequence[EnvVector] | None = None,
    image_loader: Callable[[DatasetRecord], np.ndarray] | None = None,
    cache_size: int = 64,
) -> Iterable[Sample]:
    """Deterministic stream mixing untouched and translated samples.

    Records are visited cyclically in manifest order; each emission keeps
    the original with probability mix_fraction, otherwise translates it
    under a freshly sampled guide vector. Boxes are carried unchanged
    (translation is photometric). count defaults to one pass.
    """
    if not records:
        raise ValueError("mixed_stream needs a non-empty training set")
    if count is None:
        count = len(records)
    if image_loader is None:
        image_loader = lambda rec: imgcore.load_image(rec.path)
    cache: dict[str, np.ndarray] = {}
    for i in range(count):
        rec = records[i % len(records)]
        keep_original = rng.random() < cfg.mix_fraction
        vector = None if keep_original else _sample_vector(cfg, rng, target_pool)
        img = cache.get(rec.path)
        if img is None:
            img = image_loader(rec)
            while len(cache) >= cache_size:
                cache.pop(next(iter(cache)))
            cache[rec.path] = img
        if keep_original:
            yield Sample(
                image=img.copy(),
                boxes=rec.boxes,
                provenance=PROV_ORIGINAL,
                source_path=rec.path,
            )
        else:
            yield Sample(
                image=translator(img, vector),
                boxes=rec.boxes,
                provenance=PROV_TRANSLATED,
                source_path=rec.path,
                env_vector=vector,
            )


def mosaic(
    img: np.ndarray,
    boxes: Sequence[BBox],
    translator: Translator,
    rng: np.random.Generator,
    cfg: AugConfig | None = None,
    target_pool: Sequence[EnvVector] | None = None,
) -> Sample:
    """Replace up to four rectangles with translated copies of themselves.

    Region count is uniform over the configured range; each region's
    width/height is an independent uniform fraction of the image dims and
    its position uniform over in-bounds placements. Regions may overlap;
    later regions paint over earlier ones. Each region gets its own guide
    vector. Boxes are untouched.
    """
    if cfg is None:
        cfg = AugConfig()
    h, w = img.shape[:2]
    lo_n, hi_n = cfg.region_count_range
    lo_f, hi_f = cfg.region_dim_fraction_range
    n_regions = int(rng.integers(lo_n, hi_n + 1))
    out = img.copy()
    regions = []
    for _ in range(n_regions):
        rw = max(1, round(rng.uniform(lo_f, hi_f) * w))
        rh = max(1, round(rng.uniform(lo_f, hi_f) * h))
        rx = int(rng.integers(0, w - rw + 1))
        ry = int(rng.integers(0, h - rh + 1))
        vector = _sample_vector(cfg, rng, target_pool)
        translated = translator(img, vector)
        out[ry : ry + rh, rx : rx + rw] = translated[ry : ry + rh, rx : rx + rw]
        regions.append((imgcore.Rect(rx, ry, rw, rh), vector))
    return Sample(
        image=out,
        boxes=tuple(boxes),
        provenance=PROV_MOSAIC,
        regions=tuple(regions),
    )


# -- geometric preprocessing with box bookkeeping ---------------------------

# boxes keeping less than this share of their area after crop-clipping drop
MIN_CLIP_AREA_RATIO = 0.25


def _scale_boxes(boxes: Sequence[BBox], sx: float, sy: float) -> tuple[BBox, ...]:
    return tuple(replace(b, x=b.x * sx, y=b.y * sy, w=b.w * sx, h=b.h * sy) for b in boxes)


def _hflip_boxes(boxes: Sequence[BBox], width: float) -> tuple[BBox, ...]:
    return tuple(replace(b, x=width - b.x - b.w) for b in boxes)


def _crop_boxes(boxes: Sequence[BBox], ox: float, oy: float, cw: float, ch: float) -> tuple[BBox, ...]:
    kept = []
    for b in boxes:
        x0 = max(b.x - ox, 0.0)
        y0 = max(b.y - oy, 0.0)
        x1 = min(b.x + b.w - ox, cw)
        y1 = min(b.y + b.h - oy, ch)
        if x1 <= x0 or y1 <= y0:
            continue
        if (x1 - x0) * (y1 - y0) < MIN_CLIP_AREA_RATIO * b.w * b.h:
            continue
        kept.append(replace(b, x=x0, y=y0, w=x1 - x0, h=y1 - y0))
    return tuple(kept)


def detection_preprocess(sample: Sample, cfg: AugConfig, rng: np.random.Generator) -> Sample:
    """Keep-aspect resize, random flip, optional random scale and crop.

    Box geometry follows every transform; boxes clipped by the crop are
    dropped once they keep under 25% of their area.
    """
    geo = cfg.geometric
    img = sample.image
    boxes = sample.boxes
    h, w = img.shape[:2]

    th, tw = geo.resize_hw
    img = imgcore.resize(img, tw, th, keep_aspect=True)
    nh, nw = img.shape[:2]
    boxes = _scale_boxes(boxes, nw / w, nh / h)

    if rng.random() < geo.hflip_p:
        img = imgcore.hflip(img)
        boxes = _hflip_boxes(boxes, nw)

    if geo.random_scale_crop:
        s = rng.uniform(*geo.scale_range)
        sh = max(1, round(nh * s))
        sw = max(1, round(nw * s))
        boxes = _scale_boxes(boxes, sw / nw, sh / nh)
        img = imgcore.resize(img, sw, sh)
        ch = min(geo.crop_hw[0], sh)
        cw = min(geo.crop_hw[1], sw)
        oy = int(rng.integers(0, sh - ch + 1))
        ox = int(rng.integers(0, sw - cw + 1))
        img = img[oy : oy + ch, ox : ox + cw]
        boxes = _crop_boxes(boxes, ox, oy, cw, ch)

    return Sample(
        image=np.ascontiguousarray(img),
        boxes=boxes,
        provenance=sample.provenance,
        source_path=sample.source_path,
        env_vector=sample.env_vector,
        regions=sample.regions,
    )
