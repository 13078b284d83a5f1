"""EVCI dataset schema: JSON-Lines manifests, annotations, split checks.

A manifest is one JSON object per line with keys
{path, vehicle, place, time, weather, split, boxes:[{cls,x,y,w,h}]}.
Coordinates are pixels, origin top-left, x rightward, y downward. Split
membership is stored, not recomputed; the published per-cell counts act
as a checksum for full-dataset manifests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

CLS_TOP = "top"
CLS_BOTTOM_LEFT = "bottom_left"
CLS_BOTTOM_RIGHT = "bottom_right"
CLASSES = (CLS_TOP, CLS_BOTTOM_LEFT, CLS_BOTTOM_RIGHT)

VEHICLES = ("bolt", "niro")
PLACES = ("indoor", "outdoor")
TIMES = ("daytime", "morning", "night", "evening", "none")
WEATHERS = ("sunny", "rainy", "none")
SPLITS = ("train", "val", "test")
SCHEMES = ("EVCI-A", "EVCI-B")

DAY_GROUP = ("daytime", "morning")
NIGHT_GROUP = ("night", "evening")

# Expected per-cell counts for full manifests, keyed by
# (split, cell) where cell is "indoor", "day_morning" or "night_evening".
EXPECTED_COUNTS = {
    "EVCI-A": {
        ("train", "indoor"): 1273,
        ("train", "day_morning"): 562,
        ("train", "night_evening"): 409,
        ("val", "indoor"): 267,
        ("val", "day_morning"): 74,
        ("val", "night_evening"): 196,
        ("test", "indoor"): 410,
        ("test", "day_morning"): 373,
        ("test", "night_evening"): 589,
    },
    "EVCI-B": {
        ("train", "indoor"): 1207,
        ("train", "day_morning"): 832,
        ("train", "night_evening"): 0,
        ("val", "indoor"): 319,
        ("val", "day_morning"): 0,
        ("val", "night_evening"): 287,
        ("test", "indoor"): 424,
        ("test", "day_morning"): 177,
        ("test", "night_evening"): 907,
    },
}
EXPECTED_TOTAL = 4153

# Valid capture combinations (vehicle, place, time, weather); indoor rows
# accept any time since indoor sessions ran at various times of day.
_CAPTURE_COMBOS = {
    ("bolt", "daytime", "sunny"),
    ("bolt", "morning", "rainy"),
    ("bolt", "night", "sunny"),
    ("bolt", "evening", "sunny"),
    ("niro", "daytime", "sunny"),
    ("niro", "morning", "sunny"),
    ("niro", "night", "sunny"),
    ("niro", "evening", "sunny"),
}


class ManifestError(ValueError):
    """Raised for malformed manifests; message names the offending line."""


@dataclass(frozen=True)
class BBox:
    """One component annotation: class plus pixel-space geometry."""

    cls: str
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.cls not in CLASSES:
            raise ValueError(f"unknown box class {self.cls!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box dims must be > 0, got {self.w}x{self.h}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"box origin must be >= 0, got ({self.x},{self.y})")


@dataclass(frozen=True)
class DatasetRecord:
    path: str
    vehicle: str
    place: str
    time: str
    weather: str
    split: str
    boxes: tuple[BBox, ...] = ()

    def __post_init__(self):
        for name, value, allowed in (
            ("vehicle", self.vehicle, VEHICLES),
            ("place", self.place, PLACES),
            ("time", self.time, TIMES),
            ("weather", self.weather, WEATHERS),
            ("split", self.split, SPLITS),
        ):
            if value not in allowed:
                raise ValueError(f"unknown {name} value {value!r}")
        seen = set()
        for box in self.boxes:
            if box.cls in seen:
                raise ValueError(f"duplicate box class {box.cls!r}")
            seen.add(box.cls)

    def time_group(self) -> str:
        if self.place == "indoor":
            return "indoor"
        return "day_morning" if self.time in DAY_GROUP else "night_evening"

    def capture_combo_known(self) -> bool:
        if self.place == "indoor":
            return self.weather == "none"
        return (self.vehicle, self.time, self.weather) in _CAPTURE_COMBOS


@dataclass(frozen=True)
class Manifest:
    records: tuple[DatasetRecord, ...]
    scheme: str = "EVCI-A"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")

    def __len__(self) -> int:
        return len(self.records)


def record_from_obj(obj: dict) -> DatasetRecord:
    boxes = tuple(
        BBox(
            cls=b["cls"],
            x=float(b["x"]),
            y=float(b["y"]),
            w=float(b["w"]),
            h=float(b["h"]),
        )
        for b in obj.get("boxes", [])
    )
    return DatasetRecord(
        path=str(obj["path"]),
        vehicle=obj["vehicle"],
        place=obj["place"],
        time=obj.get("time", "none"),
        weather=obj.get("weather", "none"),
        split=obj["split"],
        boxes=boxes,
    )


def record_to_obj(rec: DatasetRecord) -> dict:
    return {
        "path": rec.path,
        "vehicle": rec.vehicle,
        "place": rec.place,
        "time": rec.time,
        "weather": rec.weather,
        "split": rec.split,
        "boxes": [
            {"cls": b.cls, "x": b.x, "y": b.y, "w": b.w, "h": b.h}
            for b in rec.boxes
        ],
    }


def load_manifest(path, scheme: str = "EVCI-A") -> Manifest:
    """Parse a JSON-Lines manifest, validating every record."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"no such manifest: {path}")
    records = []
    seen_paths = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                rec = record_from_obj(obj)
            except (ValueError, KeyError, TypeError) as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
            if rec.path in seen_paths:
                raise ManifestError(f"{path}:{lineno}: duplicate path {rec.path!r}")
            seen_paths.add(rec.path)
            records.append(rec)
    return Manifest(records=tuple(records), scheme=scheme)


def save_manifest(m: Manifest, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in m.records:
            fh.write(json.dumps(record_to_obj(rec), sort_keys=True) + "\n")


@dataclass
class SplitReport:
    """Per-cell counts compared against the published full-dataset table."""

    scheme: str
    counts: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    total: int = 0
    mismatches: list = field(default_factory=list)
    irregular_combos: list = field(default_factory=list)

    @property
    def full_match(self) -> bool:
        return not self.mismatches and self.total == EXPECTED_TOTAL

    def to_json_obj(self) -> dict:
        return {
            "scheme": self.scheme,
            "total": self.total,
            "expected_total": EXPECTED_TOTAL,
            "full_match": self.full_match,
            "cells": [
                {
                    "split": split,
                    "cell": cell,
                    "count": self.counts.get((split, cell), 0),
                    "expected": self.expected[(split, cell)],
                }
                for (split, cell) in sorted(self.expected)
            ],
            "mismatches": [
                {"split": s, "cell": c, "count": n, "expected": e}
                for (s, c, n, e) in self.mismatches
            ],
            "irregular_combos": list(self.irregular_combos),
        }

    def to_text(self) -> str:
        lines = [f"split report ({self.scheme}): {self.total} records"]
        for (split, cell) in sorted(self.expected):
            count = self.counts.get((split, cell), 0)
            expected = self.expected[(split, cell)]
            mark = "ok" if count == expected else f"expected {expected}"
            lines.append(f"  {split:<6} {cell:<14} {count:>6}  [{mark}]")
        lines.append(
            f"  total {self.total} (expected {EXPECTED_TOTAL})"
            + ("" if self.total == EXPECTED_TOTAL else "  MISMATCH")
        )
        if self.irregular_combos:
            lines.append(f"  irregular capture combos: {len(self.irregular_combos)}")
        return "\n".join(lines)


def validate_splits(m: Manifest) -> SplitReport:
    """Count records per (split, place/time cell) and diff against the table.

    Mismatches are reported, never fatal: partial manifests are expected
    during development, the full dataset must reproduce every cell.
    """
    expected = EXPECTED_COUNTS[m.scheme]
    report = SplitReport(scheme=m.scheme, expected=dict(expected))
    for rec in m.records:
        key = (rec.split, rec.time_group())
        report.counts[key] = report.counts.get(key, 0) + 1
        report.total += 1
        if not rec.capture_combo_known():
            report.irregular_combos.append(rec.path)
    for key, exp in expected.items():
        got = report.counts.get(key, 0)
        if got != exp:
            report.mismatches.append((key[0], key[1], got, exp))
    return report


def select(m: Manifest, split: str | None = None, predicate=None) -> list[DatasetRecord]:
    """Matching records in stable manifest order."""
    out = []
    for rec in m.records:
        if split is not None and rec.split != split:
            continue
        if predicate is not None and not predicate(rec):
            continue
        out.append(rec)
    return out
