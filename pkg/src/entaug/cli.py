"""Command-line surface: stats, train, translate, augment, mosaic, eval, validate.

Every command is reproducible from its flags plus --seed; reruns write
byte-identical outputs. Errors exit non-zero with a single parsable
"error <category>: <detail>" line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import augment, dataset, detecteval, envvec, imgcore
from .enttgan import (
    ModelConfig,
    fit,
    load_checkpoint,
    save_checkpoint,
    translate,
)

LOSS_CSV_COLUMNS = (
    "iter",
    "l_rec",
    "l_cyc",
    "l_env",
    "l_perc",
    "l_adv_g",
    "l_adv_d",
    "total_eg",
    "total_d",
    "lr",
)


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


def _parse_env_vector(text: str) -> envvec.EnvVector:
    """Vectors on the command line look like "-0.8,-0.8,-0.8"."""
    parts = text.split(",")
    if len(parts) != 3:
        raise CliError("bad-flag", f"--env needs 3 comma-separated values, got {text!r}")
    try:
        return envvec.EnvVector(tuple(float(p) for p in parts))
    except ValueError as exc:
        raise CliError("bad-flag", f"bad --env {text!r}: {exc}") from exc


def _load_manifest(path, scheme) -> dataset.Manifest:
    try:
        return dataset.load_manifest(path, scheme=scheme)
    except dataset.ManifestError as exc:
        raise CliError("bad-manifest", str(exc)) from exc


def _load_stats(path) -> envvec.EnvStats:
    p = Path(path)
    if not p.is_file():
        raise CliError("missing-input", f"no such stats file: {p}")
    return envvec.EnvStats.from_json(p.read_text(encoding="utf-8"))


def _require_out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out

def _format_float(v: float) -> str:
    return repr(float(v))


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _category(rec: dataset.DatasetRecord) -> str:
    return "indoor" if rec.place == "indoor" else rec.time


def cmd_stats(args) -> int:
    manifest = _load_manifest(args.manifest, args.scheme)
    out = _require_out_dir(args.out)
    vectors = []
    groups = []
    rows = []
    skipped = 0
    for rec in manifest.records:
        try:
            img = imgcore.load_image(rec.path)
        except imgcore.ImageError as exc:
            print(f"warning: skipping {rec.path}: {exc}", file=sys.stderr)
            skipped += 1
            continue
        raw = envvec.extract_raw(img)
        vectors.append(raw)
        groups.append(_category(rec))
        rows.append((raw.brightness, raw.contrast, raw.saturation, groups[-1]))
    if not vectors:
        raise CliError("missing-input", "no readable images in manifest")
    stats = envvec.fit_stats(vectors, source_manifest=str(args.manifest))
    (out / "stats.json").write_text(stats.to_json() + "\n", encoding="utf-8")
    for ci, name in enumerate(envvec.COMPONENT_NAMES):
        points = envvec.cdf(vectors, ci, groups)
        lines = envvec.cdf_csv_rows(points)
        (out / f"cdf_{name}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_csv(
        out / "scatter.csv",
        ("brightness", "contrast", "saturation", "category"),
        [(_format_float(b), _format_float(c), _format_float(s), g) for b, c, s, g in rows],
    )
    print(f"stats over {len(vectors)} images ({skipped} skipped, seed {args.seed}) -> {out}")
    return 0


def cmd_validate(args) -> int:
    manifest = _load_manifest(args.manifest, args.scheme)
    report = dataset.validate_splits(manifest)
    print(report.to_text())
    print(f"(seed {args.seed})")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report.to_json_obj(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_train(args) -> int:
    manifest = _load_manifest(args.manifest, args.scheme)
    records = dataset.select(manifest, split="train")
    if not records:
        raise CliError("missing-input", "manifest has no training records")
    stats = _load_stats(args.stats) if args.stats else None
    if args.toy:
        cfg = ModelConfig.toy(epochs=args.epochs or 10)
    else:
        cfg = ModelConfig(epochs=args.epochs or 20)
    out = _require_out_dir(args.out)
    rng = np.random.default_rng(args.seed)
    rows = []

    def progress(epoch, step, lr, report):
        row = report.as_row()
        rows.append([step] + [_format_float(row[c]) for c in LOSS_CSV_COLUMNS[1:-1]] + [_format_float(lr)])

    result = fit(records, cfg, rng, stats=stats, progress=progress)
    save_checkpoint(result.checkpoint, out / "checkpoint.entg")
    _write_csv(out / "losses.csv", LOSS_CSV_COLUMNS, rows)
    print(f"trained {result.checkpoint.step} iterations (seed {args.seed}) -> {out}")
    return 0


def _open_checkpoint(path):
    from .enttgan import CheckpointError

    try:
        return load_checkpoint(path)
    except CheckpointError as exc:
        raise CliError("bad-checkpoint", str(exc)) from exc


def cmd_translate(args) -> int:
    ck = _open_checkpoint(args.checkpoint)
    pairs = []
    if args.pairs:
        with Path(args.pairs).open("r", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            for row in reader:
                if not row or row[0] == "image":
                    continue
                pairs.append((row[0], _parse_env_vector(",".join(row[1:4]))))
    elif args.image and args.env:
        pairs.append((args.image, _parse_env_vector(args.env)))
    else:
        raise CliError("bad-flag", "translate needs --image and --env, or --pairs")
    out = _require_out_dir(args.out)
    for i, (img_path, vector) in enumerate(pairs):
        try:
            img = imgcore.load_image(img_path)
        except imgcore.ImageError as exc:
            raise CliError("missing-input", str(exc)) from exc
        result = translate(ck, img, vector)
        name = f"{Path(img_path).stem}_e{i:03d}.png"
        imgcore.save_image(result, out / name)
        print(f"[seed {args.seed}] {img_path} @ {','.join(_format_float(v) for v in vector.values)} -> {out / name}")
    return 0


def _make_translator(args, stats):
    if args.checkpoint:
        ck = _open_checkpoint(args.checkpoint)
        return lambda img, e: translate(ck, img, e)
    return augment.make_reference_translator(stats)


def _target_pool(manifest, stats):
    pool = []
    for rec in dataset.select(manifest, split="val") + dataset.select(manifest, split="test"):
        try:
            img = imgcore.load_image(rec.path)
        except imgcore.ImageError:
            continue
        pool.append(envvec.extract_env(img, stats))
    return pool


def cmd_augment(args) -> int:
    manifest = _load_manifest(args.manifest, args.scheme)
    records = dataset.select(manifest, split="train")
    if not records:
        raise CliError("missing-input", "manifest has no training records")
    stats = _load_stats(args.stats)
    sampling = envvec.TARGET_DOMAIN if args.sampling == "target" else envvec.UNIFORM
    cfg = augment.AugConfig(mix_fraction=args.mix, env_sampling=sampling, mosaic_enabled=args.mosaic)
    translator = _make_translator(args, stats)
    pool = _target_pool(manifest, stats) if sampling == envvec.TARGET_DOMAIN else None
    rng = np.random.default_rng(args.seed)
    out = _require_out_dir(args.out)
    img_dir = _require_out_dir(out / "images")
    lines = []
    stream = augment.mixed_stream(records, translator, cfg, rng, count=args.count, target_pool=pool)
    for i, sample in enumerate(stream):
        if cfg.mosaic_enabled and sample.provenance == augment.PROV_ORIGINAL:
            mosaicked = augment.mosaic(sample.image, sample.boxes, translator, rng, cfg, pool)
            mosaicked.source_path = sample.source_path
            sample = mosaicked
        name = f"aug_{i:06d}.png"
        imgcore.save_image(sample.image, img_dir / name)
        lines.append(json.dumps(_provenance_obj(sample, str(img_dir / name)), sort_keys=True))
    (out / "manifest.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines)} samples (seed {args.seed}) -> {out}")
    return 0


def _provenance_obj(sample: augment.Sample, out_path: str) -> dict:
    return {
        "path": out_path,
        "source_path": sample.source_path,
        "provenance": sample.provenance,
        "env_vector": list(sample.env_vector.values) if sample.env_vector else None,
        "regions": [
            {"x": r.x, "y": r.y, "w": r.w, "h": r.h, "env_vector": list(v.values)}
            for r, v in sample.regions
        ],
        "boxes": [
            {"cls": b.cls, "x": b.x, "y": b.y, "w": b.w, "h": b.h} for b in sample.boxes
        ],
    }


def cmd_mosaic(args) -> int:
    manifest = _load_manifest(args.manifest, args.scheme)
    records = dataset.select(manifest, split="train")
    if not records:
        raise CliError("missing-input", "manifest has no training records")
    stats = _load_stats(args.stats)
    translator = _make_translator(args, stats)
    rng = np.random.default_rng(args.seed)
    out = _require_out_dir(args.out)
    img_dir = _require_out_dir(out / "images")
    lines = []
    for i, rec in enumerate(records):
        try:
            img = imgcore.load_image(rec.path)
        except imgcore.ImageError as exc:
            raise CliError("missing-input", str(exc)) from exc
        sample = augment.mosaic(img, rec.boxes, translator, rng)
        sample.source_path = rec.path
        name = f"mosaic_{i:06d}.png"
        imgcore.save_image(sample.image, img_dir / name)
        lines.append(json.dumps(_provenance_obj(sample, str(img_dir / name)), sort_keys=True))
    (out / "manifest.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines)} mosaics (seed {args.seed}) -> {out}")
    return 0


def cmd_eval(args) -> int:
    manifest = _load_manifest(args.manifest, args.scheme)
    try:
        detections = detecteval.load_detections(args.detections)
        gts = detecteval.ground_truths_from_manifest(manifest, split=args.split)
        result = detecteval.coco_ap(detections, gts)
    except detecteval.EvalError as exc:
        raise CliError("bad-input", str(exc)) from exc
    print(result.to_text())
    print(f"(seed {args.seed})")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(result.to_json_obj(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entaug", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--scheme", choices=dataset.SCHEMES, default="EVCI-A")

    p = sub.add_parser("stats", help="fit environment stats and emit CDF/scatter data")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("validate", help="check manifest counts against the published split table")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("train", help="train the translation network")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--stats")
    p.add_argument("--out", required=True)
    p.add_argument("--toy", action="store_true")
    p.add_argument("--epochs", type=int)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("translate", help="synthesize images under guide vectors")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image")
    p.add_argument("--env", help='guide vector like "-0.8,-0.8,-0.8"')
    p.add_argument("--pairs", help="CSV of image,e1,e2,e3 rows")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_translate)

    p = sub.add_parser("augment", help="materialize a mixed original/translated dataset")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--stats", required=True)
    p.add_argument("--checkpoint", help="translation checkpoint; reference translator if omitted")
    p.add_argument("--mix", type=float, default=0.5)
    p.add_argument("--sampling", choices=("uniform", "target"), default="uniform")
    p.add_argument("--mosaic", action="store_true")
    p.add_argument("--count", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_augment)

    p = sub.add_parser("mosaic", help="materialize mosaic-augmented copies of the training split")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--stats", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_mosaic)

    p = sub.add_parser("eval", help="COCO-style AP of a detections file against a manifest")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error {exc.category}: {exc}", file=sys.stderr)
        return 1
    except (imgcore.ImageError, dataset.ManifestError, detecteval.EvalError, ValueError) as exc:
        print(f"error bad-input: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
