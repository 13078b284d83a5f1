"""Shared fixtures: synthetic images and manifests."""

import json
from pathlib import Path

import numpy as np
import pytest

from entaug import imgcore
from entaug.dataset import EXPECTED_COUNTS


def synth_image(rng: np.random.Generator, h: int = 32, w: int = 64) -> np.ndarray:
    """Structured random image: shaded gradient plus a colored disc."""
    yy, xx = np.mgrid[0:h, 0:w]
    base = 0.5 + 0.4 * np.sin(2 * np.pi * (xx / w * rng.uniform(0.5, 2.0) + rng.random()))
    base = base * rng.uniform(0.3, 1.0)
    img = np.stack([base * rng.uniform(0.5, 1.0) for _ in range(3)], axis=2)
    cx = rng.integers(w // 4, 3 * w // 4)
    cy = rng.integers(h // 4, 3 * h // 4)
    r = rng.integers(min(h, w) // 8, min(h, w) // 3)
    mask = (xx - cx) ** 2 + (yy - cy) ** 2 < r**2
    img[mask] = rng.uniform(0.0, 1.0, 3)
    return np.clip(img, 0.0, 1.0)


def synth_corpus(seed: int, n: int, h: int = 32, w: int = 64) -> list:
    rng = np.random.default_rng(seed)
    return [synth_image(rng, h, w) for _ in range(n)]


def write_png(img: np.ndarray, path: Path) -> Path:
    imgcore.save_image(img, path)
    return path


def manifest_line(path, split="train", place="outdoor", time="daytime", weather="sunny",
                  vehicle="bolt", boxes=()) -> str:
    return json.dumps(
        {
            "path": str(path),
            "vehicle": vehicle,
            "place": place,
            "time": time,
            "weather": weather,
            "split": split,
            "boxes": list(boxes),
        }
    )


def full_count_manifest_lines(scheme: str) -> list[str]:
    """Synthetic manifest reproducing every published split-cell count."""
    lines = []
    i = 0
    for (split, cell), count in EXPECTED_COUNTS[scheme].items():
        for _ in range(count):
            vehicle = "bolt" if i % 2 == 0 else "niro"
            if cell == "indoor":
                place, time, weather = "indoor", "none", "none"
            elif cell == "day_morning":
                place, time, weather = "outdoor", ("daytime" if i % 2 == 0 else "morning"), "sunny"
            else:
                place, time, weather = "outdoor", ("night" if i % 2 == 0 else "evening"), "sunny"
            if place == "outdoor" and vehicle == "bolt" and time == "morning":
                weather = "rainy"
            lines.append(
                manifest_line(
                    f"img_{scheme}_{i:05d}.png",
                    split=split,
                    place=place,
                    time=time,
                    weather=weather,
                    vehicle=vehicle,
                )
            )
            i += 1
    return lines


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_corpus():
    return synth_corpus(seed=11, n=8)
