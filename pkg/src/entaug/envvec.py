"""Environment guide vectors.

An image's environment is summarized by three statistics: brightness
(mean luma), contrast (RMS, i.e. population standard deviation of luma)
and saturation (mean HSV saturation). Raw vectors are normalized to
[-1, 1] per component against dataset-wide min/max statistics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import imgcore

UNIFORM = "uniform"
TARGET_DOMAIN = "target_domain"
SAMPLING_STRATEGIES = (UNIFORM, TARGET_DOMAIN)

# Additive jitter applied to pool vectors under target-domain sampling.
TARGET_JITTER = 0.2

COMPONENT_NAMES = ("brightness", "contrast", "saturation")


@dataclass(frozen=True)
class RawEnvVector:
    """Unnormalized environment statistics of one image."""

    brightness: float
    contrast: float
    saturation: float

    def as_array(self) -> np.ndarray:
        return np.array([self.brightness, self.contrast, self.saturation], dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "RawEnvVector":
        a = np.asarray(a, dtype=np.float64)
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class EnvVector:
    """Normalized environment guide vector, each component in [-1, 1]."""

    values: tuple[float, float, float]

    def __post_init__(self):
        if len(self.values) != 3:
            raise ValueError(f"need 3 components, got {len(self.values)}")
        for v in self.values:
            if not np.isfinite(v) or v < -1.0 or v > 1.0:
                raise ValueError(f"component {v} outside [-1,1]")

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "EnvVector":
        a = np.asarray(a, dtype=np.float64)
        return cls((float(a[0]), float(a[1]), float(a[2])))


@dataclass(frozen=True)
class EnvStats:
    """Component-wise min/max over a set of raw vectors."""

    vmin: tuple[float, float, float]
    vmax: tuple[float, float, float]
    n_images: int
    source_manifest: str | None = None

    def __post_init__(self):
        if self.n_images < 1:
            raise ValueError("stats need at least one image")
        for lo, hi in zip(self.vmin, self.vmax):
            if lo > hi:
                raise ValueError(f"min {lo} > max {hi}")

    def min_array(self) -> np.ndarray:
        return np.array(self.vmin, dtype=np.float64)

    def max_array(self) -> np.ndarray:
        return np.array(self.vmax, dtype=np.float64)

    def to_json(self) -> str:
        doc = {
            "min": list(self.vmin),
            "max": list(self.vmax),
            "n_images": self.n_images,
            "source_manifest": self.source_manifest,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EnvStats":
        doc = json.loads(text)
        return cls(
            vmin=tuple(float(v) for v in doc["min"]),
            vmax=tuple(float(v) for v in doc["max"]),
            n_images=int(doc["n_images"]),
            source_manifest=doc.get("source_manifest"),
        )


def extract_raw(img: np.ndarray) -> RawEnvVector:
    """Brightness, RMS contrast and mean saturation of one image."""
    luma = imgcore.luminance(img)
    sat = imgcore.saturation_map(img)
    return RawEnvVector(
        brightness=float(luma.mean()),
        contrast=float(luma.std()),
        saturation=float(sat.mean()),
    )


def fit_stats(
    vectors: Sequence[RawEnvVector], source_manifest: str | None = None
) -> EnvStats:
    """Component-wise min and max over the provided vectors."""
    if not vectors:
        raise ValueError("cannot fit stats on an empty vector list")
    arr = np.stack([v.as_array() for v in vectors])
    return EnvStats(
        vmin=tuple(float(v) for v in arr.min(axis=0)),
        vmax=tuple(float(v) for v in arr.max(axis=0)),
        n_images=len(vectors),
        source_manifest=source_manifest,
    )


def normalization_coeffs(stats: EnvStats) -> tuple[np.ndarray, np.ndarray]:
    """Per-component (scale, offset) with raw*scale + offset in [-1,1].

    Degenerate components (min == max) get scale 0 and offset 0, so they
    normalize to 0 regardless of input.
    """
    lo = stats.min_array()
    hi = stats.max_array()
    span = hi - lo
    scale = np.zeros(3)
    np.divide(2.0, span, out=scale, where=span > 0)
    offset = np.where(span > 0, -2.0 * lo / np.where(span > 0, span, 1.0) - 1.0, 0.0)
    return scale, offset


def normalize(raw: RawEnvVector, stats: EnvStats) -> EnvVector:
    """Map raw components affinely onto [-1, 1], clamping out-of-range input."""
    scale, offset = normalization_coeffs(stats)
    e = np.clip(raw.as_array() * scale + offset, -1.0, 1.0)
    return EnvVector.from_array(e)


def denormalize(e: EnvVector, stats: EnvStats) -> RawEnvVector:
    """Affine inverse of normalize; degenerate components map to their min."""
    lo = stats.min_array()
    hi = stats.max_array()
    raw = lo + (e.as_array() + 1.0) * 0.5 * (hi - lo)
    return RawEnvVector.from_array(raw)


def cdf(
    vectors: Sequence[RawEnvVector],
    component: int,
    groups: Sequence[str],
) -> dict[str, list[tuple[float, float]]]:
    """Empirical CDF point lists per group for one vector component.

    Returns, per group, sorted (value, k/n) points. Raises on an unknown
    component index or empty groups.
    """
    if component not in (0, 1, 2):
        raise ValueError(f"component index must be 0..2, got {component}")
    if len(vectors) != len(groups):
        raise ValueError("vectors and groups must align")
    if not vectors:
        raise ValueError("cdf needs at least one vector")
    by_group: dict[str, list[float]] = {}
    for vec, grp in zip(vectors, groups):
        by_group.setdefault(grp, []).append(float(vec.as_array()[component]))
    out: dict[str, list[tuple[float, float]]] = {}
    for grp, vals in by_group.items():
        vals.sort()
        n = len(vals)
        out[grp] = [(v, (k + 1) / n) for k, v in enumerate(vals)]
    return out


def cdf_csv_rows(cdf_points: dict[str, list[tuple[float, float]]]) -> list[str]:
    """CSV lines (with header) for a cdf() result, group order sorted."""
    rows = ["value,fraction,group"]
    for grp in sorted(cdf_points):
        for value, fraction in cdf_points[grp]:
            rows.append(f"{value!r},{fraction!r},{grp}")
    return rows


def sample_env(
    strategy: str,
    rng: np.random.Generator,
    target_pool: Sequence[EnvVector] | None = None,
) -> EnvVector:
    """Draw a guide vector.

    uniform: each component i.i.d. U[-1,1]. target_domain: a pool vector
    chosen uniformly plus i.i.d. U[-0.2,0.2] jitter, clamped to [-1,1].
    """
    if strategy == UNIFORM:
        return EnvVector.from_array(rng.uniform(-1.0, 1.0, size=3))
    if strategy == TARGET_DOMAIN:
        if not target_pool:
            raise ValueError("target-domain sampling requires a non-empty pool")
        base = target_pool[int(rng.integers(len(target_pool)))].as_array()
        jitter = rng.uniform(-TARGET_JITTER, TARGET_JITTER, size=3)
        return EnvVector.from_array(np.clip(base + jitter, -1.0, 1.0))
    raise ValueError(f"unknown sampling strategy {strategy!r}")


def extract_env(img: np.ndarray, stats: EnvStats) -> EnvVector:
    """Normalized environment vector of an image (extract + normalize)."""
    return normalize(extract_raw(img), stats)


def collect_raw(images: Iterable[np.ndarray]) -> list[RawEnvVector]:
    return [extract_raw(img) for img in images]
