"""Training loop and inference entry points for the translation network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import imgcore
from ..envvec import EnvStats, extract_raw, fit_stats
from ..neuralnet import AdamState, Tensor, adam_step
from .checkpoint import Checkpoint
from .losses import LossReport, build_graph, env_to_array, report_from_graph
from .model import (
    ModelConfig,
    discriminator_params,
    encode_content_t,
    generate_t,
    generator_params,
    image_to_nchw,
    init_params,
    nchw_to_image,
    zero_grads,
)


def lr_for_epoch(epoch: int, cfg: ModelConfig) -> float:
    """Constant until the decay epoch, then linear to 0 at the final epoch."""
    if epoch <= cfg.decay_start_epoch:
        return cfg.lr
    span = cfg.epochs - cfg.decay_start_epoch
    return cfg.lr * (cfg.epochs - epoch) / span


def preprocess_train(img: np.ndarray, cfg: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    """Resize, random-scale, random-crop to the training size, random flip."""
    rh, rw = cfg.resize_size
    ch, cw = cfg.image_size
    img = imgcore.resize(img, rw, rh)
    s = rng.uniform(0.9, 1.1)
    sh = max(ch, round(rh * s))
    sw = max(cw, round(rw * s))
    img = imgcore.resize(img, sw, sh)
    oy = int(rng.integers(0, sh - ch + 1))
    ox = int(rng.integers(0, sw - cw + 1))
    img = img[oy : oy + ch, ox : ox + cw]
    if rng.random() < 0.5:
        img = imgcore.hflip(img)
    return np.ascontiguousarray(img)


def train_step(
    params: dict[str, Tensor],
    cfg: ModelConfig,
    stats: EnvStats,
    img_a: np.ndarray,
    img_b: np.ndarray,
    g_state: AdamState,
    d_state: AdamState,
    lr: float,
) -> LossReport:
    """One encoder/generator update followed by one critic update.

    Returns the loss values measured before either update.
    """
    graph = build_graph(params, cfg, stats, img_a, img_b)
    report = report_from_graph(cfg, graph)

    zero_grads(params)
    graph["total_eg"].backward()
    adam_step(generator_params(params), g_state, lr)

    zero_grads(params)
    graph["total_d"].backward()
    adam_step(discriminator_params(params), d_state, lr)
    zero_grads(params)
    return report


@dataclass
class FitResult:
    checkpoint: Checkpoint
    history: list  # one LossReport per iteration
    lr_by_epoch: list
    snapshots: dict = None  # step -> Checkpoint, when requested


def _load_training_image(item) -> np.ndarray:
    if isinstance(item, np.ndarray):
        return imgcore.validate_image(item)
    path = getattr(item, "path", item)
    return imgcore.load_image(path)


def fit(
    records,
    cfg: ModelConfig,
    rng: np.random.Generator,
    stats: EnvStats | None = None,
    progress=None,
    snapshot_steps: tuple = (),
) -> FitResult:
    """Train from dataset records (or arrays); pairs reshuffle every epoch."""
    if len(records) < 2:
        raise ValueError("training needs at least two images")
    images = [_load_training_image(r) for r in records]
    if stats is None:
        stats = fit_stats([extract_raw(im) for im in images])
    params = init_params(cfg, rng)
    g_state = AdamState.for_params(generator_params(params))
    d_state = AdamState.for_params(discriminator_params(params))
    history: list[LossReport] = []
    lr_by_epoch: list[float] = []
    snapshots: dict[int, Checkpoint] = {}
    n = len(images)
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        lr = lr_for_epoch(epoch, cfg)
        lr_by_epoch.append(lr)
        order = rng.permutation(n)
        partner = rng.permutation(n)
        for k in range(n):
            img_a = preprocess_train(images[order[k]], cfg, rng)
            img_b = preprocess_train(images[partner[k]], cfg, rng)
            report = train_step(params, cfg, stats, img_a, img_b, g_state, d_state, lr)
            step += 1
            history.append(report)
            if step in snapshot_steps:
                snapshots[step] = Checkpoint.from_tensors(cfg, params, stats, step)
            if progress is not None:
                progress(epoch, step, lr, report)
    ck = Checkpoint.from_tensors(cfg, params, stats, step)
    return FitResult(checkpoint=ck, history=history, lr_by_epoch=lr_by_epoch, snapshots=snapshots)


def _pad_to_multiple_of_4(img: np.ndarray) -> tuple[np.ndarray, int, int]:
    h, w = img.shape[:2]
    ph = (-h) % 4
    pw = (-w) % 4
    if ph == 0 and pw == 0:
        return img, h, w
    if h < 4 or w < 4:
        raise ValueError(f"image too small to translate: {h}x{w}")
    padded = np.pad(img, ((0, ph), (0, pw), (0, 0)), mode="reflect")
    return padded, h, w


def translate(ck: Checkpoint, img: np.ndarray, e) -> np.ndarray:
    """Synthesize the image under a guide vector, at the input resolution."""
    params = ck.as_tensors(requires_grad=False)
    padded, h, w = _pad_to_multiple_of_4(img)
    x = Tensor(image_to_nchw(padded, np.float32))
    content = encode_content_t(params, x)
    ev = Tensor(env_to_array(e).astype(np.float32).reshape(1, 3))
    out = generate_t(params, ck.config, content, ev)
    return nchw_to_image(out.data)[:h, :w]
