"""AP evaluator vs a from-scratch brute-force implementation."""

import numpy as np
import pytest

from entaug import detecteval
from entaug.dataset import BBox, CLASSES
from entaug.detecteval import Detection, average_precision, coco_ap, iou, match


# -- independent brute-force evaluator (plain python, no shared code) --------


def bf_iou(ax, ay, aw, ah, bx, by, bw, bh):
    x0 = max(ax, bx)
    y0 = max(ay, by)
    x1 = min(ax + aw, bx + bw)
    y1 = min(ay + ah, by + bh)
    if x1 <= x0 or y1 <= y0:
        return 0.0
    inter = (x1 - x0) * (y1 - y0)
    return inter / (aw * ah + bw * bh - inter)


def bf_ap_from_flags(flags, n_gt):
    points = []
    tp = 0
    for k, flag in enumerate(flags, start=1):
        tp += 1 if flag else 0
        points.append((tp / n_gt, tp / k))
    total = 0.0
    for i in range(101):
        r = i / 100
        best = 0.0
        for rec, prec in points:
            if rec >= r and prec > best:
                best = prec
        total += best
    return total / 101


def bf_evaluate(dets, gts_by_img):
    """dets: list of (path, cls, score, x, y, w, h); gts: path -> [(cls,x,y,w,h)]."""
    thresholds = [t / 100 for t in range(50, 100, 5)]
    cells = []
    for cls in CLASSES:
        n_gt = sum(1 for boxes in gts_by_img.values() for b in boxes if b[0] == cls)
        if n_gt == 0:
            continue
        for thr in thresholds:
            scored = [d for d in dets if d[1] == cls]
            order = sorted(range(len(scored)), key=lambda i: -scored[i][2])
            taken = {path: [False] * len(boxes) for path, boxes in gts_by_img.items()}
            flags = []
            for i in order:
                path, _, _, x, y, w, h = scored[i]
                best_j, best_v = -1, 0.0
                for j, g in enumerate(gts_by_img[path]):
                    if g[0] != cls or taken[path][j]:
                        continue
                    v = bf_iou(x, y, w, h, g[1], g[2], g[3], g[4])
                    if v >= thr and v > best_v:
                        best_j, best_v = j, v
                if best_j >= 0:
                    taken[path][best_j] = True
                    flags.append(True)
                else:
                    flags.append(False)
            cells.append(bf_ap_from_flags(flags, n_gt))
    return sum(cells) / len(cells)


def random_instance(rng):
    n_imgs = int(rng.integers(1, 4))
    gts_by_img = {}
    gt_boxes = {}
    for i in range(n_imgs):
        path = f"im{i}"
        boxes = []
        for _ in range(int(rng.integers(1, 6))):
            cls = CLASSES[int(rng.integers(3))]
            x, y = rng.uniform(0, 50, 2)
            w, h = rng.uniform(5, 30, 2)
            boxes.append((cls, float(x), float(y), float(w), float(h)))
        gts_by_img[path] = boxes
        gt_boxes[path] = [BBox(c, x, y, w, h) for c, x, y, w, h in boxes]
    dets = []
    for path, boxes in gts_by_img.items():
        for cls, x, y, w, h in boxes:
            if rng.random() < 0.8:  # jittered hit
                dx, dy = rng.uniform(-8, 8, 2)
                dets.append(
                    (path, cls, float(rng.random()), x + dx, y + dy, w * rng.uniform(0.7, 1.3), h)
                )
        for _ in range(int(rng.integers(0, 4))):  # noise
            cls = CLASSES[int(rng.integers(3))]
            x, y = rng.uniform(0, 60, 2)
            w, h = rng.uniform(4, 25, 2)
            dets.append((path, cls, float(rng.random()), float(x), float(y), float(w), float(h)))
    detections = [Detection(*d) for d in dets]
    return detections, dets, gt_boxes, gts_by_img


class TestIou:
    def test_self_is_one(self):
        b = BBox("top", 3, 4, 10, 12)
        assert iou(b, b) == 1.0

    def test_disjoint_zero(self):
        assert iou(BBox("top", 0, 0, 5, 5), BBox("top", 10, 10, 5, 5)) == 0.0

    def test_half_overlap(self):
        a = BBox("top", 0, 0, 10, 10)
        b = BBox("top", 5, 0, 10, 10)
        assert iou(a, b) == pytest.approx(1 / 3, abs=1e-12)

    def test_touching_edges_zero(self):
        assert iou(BBox("top", 0, 0, 5, 5), BBox("top", 5, 0, 5, 5)) == 0.0


class TestMatch:
    def test_exact_hit(self):
        gt = [BBox("top", 0, 0, 10, 10)]
        det = [Detection("i", "top", 0.9, 0, 0, 10, 10)]
        flags, fn = match(det, gt, 0.5)
        assert flags == [True] and fn == 0

    def test_duplicate_detection_is_fp(self):
        gt = [BBox("top", 0, 0, 10, 10)]
        dets = [
            Detection("i", "top", 0.9, 0, 0, 10, 10),
            Detection("i", "top", 0.5, 0, 0, 10, 10),
        ]
        flags, fn = match(dets, gt, 0.5)
        assert flags == [True, False] and fn == 0

    def test_no_detections_all_fn(self):
        gt = [BBox("top", 0, 0, 10, 10)]
        flags, fn = match([], gt, 0.5)
        assert flags == [] and fn == 1

    def test_highest_iou_wins(self):
        gts = [BBox("top", 0, 0, 10, 10), BBox("top", 2, 0, 10, 10)]
        det = [Detection("i", "top", 0.9, 1.5, 0, 10, 10)]
        flags, fn = match(det, gts, 0.5)
        assert flags == [True] and fn == 1


class TestAveragePrecision:
    def test_single_tp_full_recall(self):
        assert average_precision([True], 1) == 1.0

    def test_single_fp_zero(self):
        assert average_precision([False], 1) == 0.0

    def test_no_gt_undefined(self):
        assert average_precision([False], 0) is None

    def test_mixed_flags_match_envelope_oracle(self):
        flags = [True, False, True]
        got = average_precision(flags, 2)
        assert got == pytest.approx(bf_ap_from_flags(flags, 2), abs=1e-12)

    def test_random_flags_match_oracle(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 12))
            flags = [bool(rng.random() < 0.6) for _ in range(n)]
            n_gt = max(1, sum(flags) + int(rng.integers(0, 3)))
            assert average_precision(flags, n_gt) == pytest.approx(
                bf_ap_from_flags(flags, n_gt), abs=1e-12
            )


class TestCocoAp:
    def test_perfect_detections(self):
        gts = {
            "a": [BBox("top", 0, 0, 10, 10), BBox("bottom_left", 20, 20, 8, 8)],
            "b": [BBox("bottom_right", 5, 5, 6, 6)],
        }
        dets = [
            Detection("a", "top", 0.9, 0, 0, 10, 10),
            Detection("a", "bottom_left", 0.8, 20, 20, 8, 8),
            Detection("b", "bottom_right", 0.7, 5, 5, 6, 6),
        ]
        result = coco_ap(dets, gts)
        assert result.ap == 1.0

    def test_iou_point_six_sweep(self):
        # dets at IoU exactly 0.6: TP at thresholds 0.50/0.55/0.60, FP above
        gts = {"a": [BBox("top", 0, 0, 10, 10)]}
        dets = [Detection("a", "top", 0.9, 0, 2.5, 10, 10)]
        result = coco_ap(dets, gts)
        assert iou(dets[0], gts["a"][0]) == 0.6
        assert result.ap == pytest.approx(0.3, abs=1e-12)

    def test_empty_ground_truth_rejected(self):
        with pytest.raises(detecteval.EvalError):
            coco_ap([], {"a": []})

    def test_unknown_image_rejected(self):
        gts = {"a": [BBox("top", 0, 0, 10, 10)]}
        dets = [Detection("zzz", "top", 0.9, 0, 0, 10, 10)]
        with pytest.raises(detecteval.EvalError, match="unknown image"):
            coco_ap(dets, gts)

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(1001)
        for _ in range(100):
            detections, dets, gt_boxes, gts_by_img = random_instance(rng)
            got = coco_ap(detections, gt_boxes).ap
            want = bf_evaluate(dets, gts_by_img)
            assert got == pytest.approx(want, abs=1e-9)


class TestApProperties:
    def test_score_monotone_transform_invariance(self):
        rng = np.random.default_rng(2002)
        for _ in range(10):
            detections, _, gt_boxes, _ = random_instance(rng)
            base = coco_ap(detections, gt_boxes).ap
            squashed = [
                Detection(d.path, d.cls, float(np.tanh(d.score) * 3 + 5), d.x, d.y, d.w, d.h)
                for d in detections
            ]
            assert coco_ap(squashed, gt_boxes).ap == pytest.approx(base, abs=1e-12)

    def test_appended_low_score_fp_never_increases(self):
        rng = np.random.default_rng(3003)
        for _ in range(10):
            detections, _, gt_boxes, _ = random_instance(rng)
            base = coco_ap(detections, gt_boxes).ap
            lowest = min((d.score for d in detections), default=1.0)
            path = next(iter(gt_boxes))
            junk = Detection(path, CLASSES[0], lowest - 1.0, 900.0, 900.0, 5.0, 5.0)
            assert coco_ap(detections + [junk], gt_boxes).ap <= base + 1e-12

    def test_per_threshold_monotone_in_iou(self):
        rng = np.random.default_rng(4004)
        for _ in range(10):
            detections, _, gt_boxes, _ = random_instance(rng)
            result = coco_ap(detections, gt_boxes)
            per_iou = [v for v in result.per_iou().values() if not np.isnan(v)]
            assert all(a >= b - 1e-12 for a, b in zip(per_iou, per_iou[1:]))

    def test_ap_in_unit_interval(self):
        rng = np.random.default_rng(5005)
        for _ in range(20):
            detections, _, gt_boxes, _ = random_instance(rng)
            result = coco_ap(detections, gt_boxes)
            assert 0.0 <= result.ap <= 1.0


class TestDetectionsFile:
    def test_load_and_roundtrip(self, tmp_path):
        lines = [
            '{"path": "a", "cls": "top", "score": 0.7, "x": 1, "y": 2, "w": 3, "h": 4}',
            '{"path": "b", "cls": "bottom_left", "score": 0.1, "x": 0, "y": 0, "w": 5, "h": 5}',
        ]
        p = tmp_path / "dets.jsonl"
        p.write_text("\n".join(lines) + "\n")
        dets = detecteval.load_detections(p)
        assert len(dets) == 2 and dets[0].cls == "top"

    def test_bad_line_reported(self, tmp_path):
        p = tmp_path / "dets.jsonl"
        p.write_text('{"path": "a", "cls": "top", "score": 0.7, "x": 1, "y": 2, "w": 0, "h": 4}\n')
        with pytest.raises(detecteval.EvalError, match=":1:"):
            detecteval.load_detections(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(detecteval.EvalError):
            detecteval.load_detections(tmp_path / "none.jsonl")
