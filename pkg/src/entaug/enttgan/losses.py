"""Training objectives of the translation network.

Five terms steer the content encoder and generator: pixel reconstruction,
cycle reconstruction, guide-vector consistency of all three synthesized
images, content-map consistency, and a least-squares adversarial term at
two scales. The critics minimize the matching least-squares real/fake
objective.

Guide vectors fed to the generator and used as loss targets are plain
constants (the vector extractor is non-learnable); the extractor applied
to synthesized images runs in-graph so the consistency term trains the
generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import envvec
from .. import neuralnet as nn
from ..imgcore import LUMA_WEIGHTS
from ..neuralnet import Tensor
from .model import (
    ModelConfig,
    discriminate_t,
    encode_content_t,
    generate_t,
    image_to_nchw,
)


class NonFiniteLoss(RuntimeError):
    """A loss came out NaN/Inf; carries the offending components."""


def env_to_array(e) -> np.ndarray:
    if hasattr(e, "as_array"):
        return e.as_array()
    return np.asarray(e, dtype=np.float64).reshape(3)


def extract_env_t(img: Tensor, stats: envvec.EnvStats) -> Tensor:
    """Differentiable guide-vector extraction from an NCHW image tensor.

    Matches envvec.extract_env numerically: mean luma, population std of
    luma, mean HSV saturation, then the affine map onto [-1, 1] with
    clamping and degenerate components pinned to 0.
    """
    if img.shape[0] != 1:
        raise ValueError("environment extraction is per-image (batch of 1)")
    wr, wg, wb = LUMA_WEIGHTS
    luma = (
        nn.channel_select(img, 0) * wr
        + nn.channel_select(img, 1) * wg
        + nn.channel_select(img, 2) * wb
    )
    brightness = luma.mean()
    dev = luma - brightness
    contrast = nn.sqrt_safe((dev * dev).mean())
    mx = nn.channel_max(img)
    mn = nn.channel_min(img)
    saturation = nn.safe_div(mx - mn, mx).mean()
    raw = nn.stack_scalars([brightness, contrast, saturation])
    scale, offset = envvec.normalization_coeffs(stats)
    dtype = img.data.dtype
    scaled = raw * Tensor(scale.astype(dtype)) + Tensor(offset.astype(dtype))
    return nn.clamp(scaled, -1.0, 1.0)


def l1_sum(a: Tensor, b: Tensor) -> Tensor:
    """Sum of absolute elementwise differences."""
    return nn.absolute(a - b).sum()


def _lsq_to(d_out: Tensor, target: float) -> Tensor:
    """Patch-averaged least-squares distance of a score map to a label."""
    diff = d_out - target
    return (diff * diff).mean()


@dataclass(frozen=True)
class LossReport:
    """Per-step unweighted loss components plus the weighted totals."""

    l_rec: float
    l_cyc: float
    l_env: float
    l_perc: float
    l_adv_g: float
    l_adv_d: float
    total_eg: float
    total_d: float

    @classmethod
    def from_components(
        cls, cfg: ModelConfig, l_rec, l_cyc, l_env, l_perc, l_adv_g, l_adv_d
    ) -> "LossReport":
        total_eg = (
            cfg.lambda_rec * l_rec
            + cfg.lambda_cyc * l_cyc
            + cfg.lambda_env * l_env
            + cfg.lambda_perc * l_perc
            + cfg.lambda_adv_g * l_adv_g
        )
        total_d = cfg.lambda_adv_d * l_adv_d
        return cls(l_rec, l_cyc, l_env, l_perc, l_adv_g, l_adv_d, total_eg, total_d)

    def finite(self) -> bool:
        return all(
            np.isfinite(v)
            for v in (
                self.l_rec,
                self.l_cyc,
                self.l_env,
                self.l_perc,
                self.l_adv_g,
                self.l_adv_d,
            )
        )

    def as_row(self) -> dict:
        return {
            "l_rec": self.l_rec,
            "l_cyc": self.l_cyc,
            "l_env": self.l_env,
            "l_perc": self.l_perc,
            "l_adv_g": self.l_adv_g,
            "l_adv_d": self.l_adv_d,
            "total_eg": self.total_eg,
            "total_d": self.total_d,
        }


def build_graph(
    params: dict[str, Tensor],
    cfg: ModelConfig,
    stats: envvec.EnvStats,
    img_a: np.ndarray,
    img_b: np.ndarray,
) -> dict:
    """All loss tensors for one training pair, sharing intermediates.

    img_a is the reconstruction/cycle target; img_b donates the second
    guide vector. Returned dict holds scalar loss tensors, the weighted
    totals and the synthesized images.
    """
    dtype = next(iter(params.values())).data.dtype
    xa = Tensor(image_to_nchw(img_a, dtype))
    xb = Tensor(image_to_nchw(img_b, dtype))
    # Constant guide vectors from the real images (non-learnable extractor).
    e_a = envvec.extract_env(img_a, stats).as_array().astype(dtype)
    e_b = envvec.extract_env(img_b, stats).as_array().astype(dtype)
    ea_t = Tensor(e_a.reshape(1, 3))
    eb_t = Tensor(e_b.reshape(1, 3))

    content = encode_content_t(params, xa)
    recon = generate_t(params, cfg, content, ea_t)  # same content, own vector
    trans = generate_t(params, cfg, content, eb_t)  # translated toward e_b
    content_t = encode_content_t(params, trans)
    cycle = generate_t(params, cfg, content_t, ea_t)  # back toward e_a

    l_rec = l1_sum(recon, xa)
    l_cyc = l1_sum(cycle, xa)
    l_perc = l1_sum(content_t, content)
    l_env = (
        l1_sum(extract_env_t(recon, stats), Tensor(e_a))
        + l1_sum(extract_env_t(trans, stats), Tensor(e_b))
        + l1_sum(extract_env_t(cycle, stats), Tensor(e_a))
    )

    fakes = (recon, trans, cycle)
    l_adv_g = None
    for fake in fakes:
        for prefix, view in (("d1", fake), ("d2", nn.avg_pool2(fake))):
            term = _lsq_to(discriminate_t(params, prefix, view), 1.0)
            l_adv_g = term if l_adv_g is None else l_adv_g + term

    l_adv_d = _lsq_to(discriminate_t(params, "d1", xa), 1.0) + _lsq_to(
        discriminate_t(params, "d2", nn.avg_pool2(xa)), 1.0
    )
    for fake in fakes:
        held = fake.detach()
        l_adv_d = l_adv_d + _lsq_to(discriminate_t(params, "d1", held), 0.0)
        l_adv_d = l_adv_d + _lsq_to(discriminate_t(params, "d2", nn.avg_pool2(held)), 0.0)

    total_eg = (
        l_rec * cfg.lambda_rec
        + l_cyc * cfg.lambda_cyc
        + l_env * cfg.lambda_env
        + l_perc * cfg.lambda_perc
        + l_adv_g * cfg.lambda_adv_g
    )
    total_d = l_adv_d * cfg.lambda_adv_d

    return {
        "l_rec": l_rec,
        "l_cyc": l_cyc,
        "l_env": l_env,
        "l_perc": l_perc,
        "l_adv_g": l_adv_g,
        "l_adv_d": l_adv_d,
        "total_eg": total_eg,
        "total_d": total_d,
        "recon": recon,
        "trans": trans,
        "cycle": cycle,
    }


def report_from_graph(cfg: ModelConfig, graph: dict) -> LossReport:
    report = LossReport.from_components(
        cfg,
        graph["l_rec"].item(),
        graph["l_cyc"].item(),
        graph["l_env"].item(),
        graph["l_perc"].item(),
        graph["l_adv_g"].item(),
        graph["l_adv_d"].item(),
    )
    if not report.finite():
        raise NonFiniteLoss(f"non-finite loss components: {report.as_row()}")
    return report


# -- single-loss entry points (recompute the shared graph) -----------------


def loss_rec(params, cfg, stats, img) -> float:
    return build_graph(params, cfg, stats, img, img)["l_rec"].item()


def loss_cyc(params, cfg, stats, img_a, img_b) -> float:
    return build_graph(params, cfg, stats, img_a, img_b)["l_cyc"].item()


def loss_env(params, cfg, stats, img_a, img_b) -> float:
    return build_graph(params, cfg, stats, img_a, img_b)["l_env"].item()


def loss_perc(params, cfg, stats, img_a, img_b) -> float:
    return build_graph(params, cfg, stats, img_a, img_b)["l_perc"].item()


def loss_adv(params, cfg, stats, img_a, img_b) -> tuple[float, float]:
    graph = build_graph(params, cfg, stats, img_a, img_b)
    return graph["l_adv_g"].item(), graph["l_adv_d"].item()
