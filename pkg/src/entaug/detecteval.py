"""COCO-style average precision over the three inlet-component classes.

AP uses 101-point interpolation of the precision envelope, averaged over
classes and the ten IoU thresholds 0.5, 0.55, ..., 0.95. Matching is
greedy per image and class in descending score order (ties broken by
input order); each ground truth matches at most once. Class/threshold
cells without ground truth are excluded from the mean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import BBox, CLASSES, Manifest

IOU_THRESHOLDS = tuple(t / 100 for t in range(50, 100, 5))
RECALL_POINTS = 101


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class Detection:
    path: str
    cls: str
    score: float
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValueError(f"non-finite score for {self.path}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"detection dims must be > 0, got {self.w}x{self.h}")


def iou(a, b) -> float:
    """Intersection over union of two (x, y, w, h) boxes; 0 when disjoint."""
    ix0 = max(a.x, b.x)
    iy0 = max(a.y, b.y)
    ix1 = min(a.x + a.w, b.x + b.w)
    iy1 = min(a.y + a.h, b.y + b.h)
    iw = ix1 - ix0
    ih = iy1 - iy0
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.w * a.h + b.w * b.h - inter
    return inter / union


def match(dets: list, gts: list, iou_threshold: float) -> tuple[list[bool], int]:
    """Greedy matching for one image and class.

    dets must already be sorted by descending score. Each detection takes
    the unmatched ground truth of highest IoU >= threshold; duplicates
    become false positives. Returns per-detection TP flags and the count
    of unmatched ground truths (false negatives).
    """
    taken = [False] * len(gts)
    flags = []
    for det in dets:
        best = -1
        best_v = 0.0
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            v = iou(det, gt)
            if v >= iou_threshold and v > best_v:
                best, best_v = j, v
        if best >= 0:
            taken[best] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags, taken.count(False)


def average_precision(flags: list[bool], n_gt: int) -> float | None:
    """101-point interpolated AP from score-ordered TP flags.

    Returns None when the class has no ground truth (undefined cell).
    """
    if n_gt == 0:
        return None
    if not flags:
        return 0.0
    tp = np.cumsum(np.asarray(flags, dtype=np.float64))
    fp = np.cumsum(1.0 - np.asarray(flags, dtype=np.float64))
    recall = tp / n_gt
    precision = tp / (tp + fp)
    # precision envelope sampled at 101 recall points
    ap = 0.0
    for r in np.linspace(0.0, 1.0, RECALL_POINTS):
        mask = recall >= r
        ap += precision[mask].max() if mask.any() else 0.0
    return ap / RECALL_POINTS


@dataclass
class EvalResult:
    ap: float
    per_class_per_iou: np.ndarray  # (len(CLASSES), 10), NaN where undefined
    classes: tuple = CLASSES
    thresholds: tuple = IOU_THRESHOLDS

    def per_class(self) -> dict[str, float]:
        out = {}
        for i, cls in enumerate(self.classes):
            row = self.per_class_per_iou[i]
            valid = ~np.isnan(row)
            out[cls] = float(row[valid].mean()) if valid.any() else float("nan")
        return out

    def per_iou(self) -> dict[float, float]:
        out = {}
        for j, thr in enumerate(self.thresholds):
            col = self.per_class_per_iou[:, j]
            valid = ~np.isnan(col)
            out[thr] = float(col[valid].mean()) if valid.any() else float("nan")
        return out

    def to_json_obj(self) -> dict:
        return {
            "ap": self.ap,
            "per_class": self.per_class(),
            "per_iou": {f"{t:.2f}": v for t, v in self.per_iou().items()},
        }

    def to_text(self) -> str:
        lines = [f"AP (IoU 0.50:0.05:0.95): {self.ap:.4f}"]
        for cls, v in self.per_class().items():
            lines.append(f"  {cls:<13} {v:.4f}")
        return "\n".join(lines)


def coco_ap(detections: list[Detection], ground_truths: dict[str, list[BBox]]) -> EvalResult:
    """AP per class per IoU threshold over a set of images.

    ground_truths maps image path -> annotated boxes. Detections are
    pooled per class across images after per-image matching; score ties
    keep input order (stable sort).
    """
    n_gt_total = sum(len(v) for v in ground_truths.values())
    if n_gt_total == 0:
        raise EvalError("no ground-truth boxes to evaluate against")

    matrix = np.full((len(CLASSES), len(IOU_THRESHOLDS)), np.nan)
    for ci, cls in enumerate(CLASSES):
        gts_by_img = {
            path: [b for b in boxes if b.cls == cls] for path, boxes in ground_truths.items()
        }
        n_gt = sum(len(v) for v in gts_by_img.values())
        if n_gt == 0:
            continue
        cls_dets = [d for d in detections if d.cls == cls]
        order = sorted(range(len(cls_dets)), key=lambda i: -cls_dets[i].score)
        dets_by_img: dict[str, list[Detection]] = {path: [] for path in gts_by_img}
        for i in order:
            d = cls_dets[i]
            if d.path in dets_by_img:
                dets_by_img[d.path].append(d)  # stays in score order
        for ti, thr in enumerate(IOU_THRESHOLDS):
            flags_by_img: dict[str, list[bool]] = {}
            for path, img_dets in dets_by_img.items():
                img_flags, _ = match(img_dets, gts_by_img[path], thr)
                flags_by_img[path] = img_flags
            # pool flags in global score order
            pos_by_img: dict[str, int] = {path: 0 for path in flags_by_img}
            flags = []
            for i in order:
                d = cls_dets[i]
                if d.path not in gts_by_img:
                    raise EvalError(f"detection references unknown image {d.path!r}")
                k = pos_by_img[d.path]
                # flags_by_img is in per-image score order; walk it in step
                flags.append(flags_by_img[d.path][k])
                pos_by_img[d.path] = k + 1
            matrix[ci, ti] = average_precision(flags, n_gt)
    valid = ~np.isnan(matrix)
    if not valid.any():
        raise EvalError("no class has ground truth")
    return EvalResult(ap=float(matrix[valid].mean()), per_class_per_iou=matrix)


# -- detections file (JSON lines) -------------------------------------------


def load_detections(path) -> list[Detection]:
    path = Path(path)
    if not path.is_file():
        raise EvalError(f"no such detections file: {path}")
    out = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                out.append(
                    Detection(
                        path=str(obj["path"]),
                        cls=obj["cls"],
                        score=float(obj["score"]),
                        x=float(obj["x"]),
                        y=float(obj["y"]),
                        w=float(obj["w"]),
                        h=float(obj["h"]),
                    )
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise EvalError(f"{path}:{lineno}: {exc}") from exc
    return out


def ground_truths_from_manifest(m: Manifest, split: str | None = None) -> dict[str, list[BBox]]:
    out: dict[str, list[BBox]] = {}
    for rec in m.records:
        if split is not None and rec.split != split:
            continue
        out[rec.path] = list(rec.boxes)
    return out
