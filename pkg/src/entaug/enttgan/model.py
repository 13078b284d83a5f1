"""Translation network: content encoder, conditioned generator, critics.

The content encoder downsamples x4 (one stride-1 conv then two stride-2
convs, channels B -> 2B -> 4B) into five residual blocks. The generator
runs the guide vector through a three-layer MLP into per-channel AdaIN
scale/shift applied once to the content map, then four residual blocks,
two stride-2 transposed convs back to full resolution and a final conv
whose tanh output is mapped onto [0, 1]. Two independent patch critics
score full and half resolution.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import neuralnet as nn
from ..neuralnet import Tensor

ENCODER_BLOCKS = 5
GENERATOR_BLOCKS = 4
DISCRIMINATOR_PREFIXES = ("d1", "d2")


@dataclass(frozen=True)
class ModelConfig:
    base_channels: int = 64
    mlp_hidden: int = 256
    image_size: tuple[int, int] = (256, 512)  # (h, w) in training
    resize_size: tuple[int, int] = (286, 572)  # pre-crop resize target
    epochs: int = 20
    lr: float = 2e-4
    decay_start_epoch: int = 10

    def __post_init__(self):
        h, w = self.image_size
        if h % 4 or w % 4:
            raise ValueError(f"training size must be divisible by 4, got {h}x{w}")
        # half-scale critic halves four times, so dims below 32 collapse
        if min(h, w) < 32:
            raise ValueError(f"training size must be at least 32, got {h}x{w}")
        rh, rw = self.resize_size
        if rh < h or rw < w:
            raise ValueError("resize size must not be smaller than the crop size")

    @classmethod
    def toy(cls, **overrides) -> "ModelConfig":
        """Desk-scale config for verification runs (minutes, not days).

        The learning rate is raised to 1e-3: the full-scale 2e-4 schedule
        is calibrated for 20-epoch runs on thousands of images and barely
        moves in a few hundred toy iterations.
        """
        merged = dict(
            base_channels=16,
            mlp_hidden=64,
            image_size=(32, 64),
            resize_size=(36, 72),
            lr=1e-3,
        )
        merged.update(overrides)
        return cls(**merged)

    @property
    def content_channels(self) -> int:
        return 4 * self.base_channels

    @property
    def content_size(self) -> tuple[int, int]:
        return (self.image_size[0] // 4, self.image_size[1] // 4)

    # Loss weights; rec/cyc and perc are mean-scaled by the pixel counts
    # of the image and the content map respectively.
    @property
    def lambda_rec(self) -> float:
        h, w = self.image_size
        return 10.0 / (h * w)

    @property
    def lambda_cyc(self) -> float:
        return self.lambda_rec

    @property
    def lambda_env(self) -> float:
        return 0.5

    @property
    def lambda_perc(self) -> float:
        hc, wc = self.content_size
        return 1.0 / (hc * wc)

    @property
    def lambda_adv_g(self) -> float:
        return 0.5

    @property
    def lambda_adv_d(self) -> float:
        return 0.5

    def to_json_obj(self) -> dict:
        obj = asdict(self)
        obj["image_size"] = list(self.image_size)
        obj["resize_size"] = list(self.resize_size)
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ModelConfig":
        obj = dict(obj)
        obj["image_size"] = tuple(obj["image_size"])
        obj["resize_size"] = tuple(obj["resize_size"])
        return cls(**obj)


def init_params(cfg: ModelConfig, rng: np.random.Generator, dtype=np.float32) -> dict[str, Tensor]:
    """Fresh parameter dict; names are stable and define checkpoint order.

    Convolutions feeding an instance norm carry no bias: the norm's mean
    subtraction makes such a bias exactly inert.
    """
    B = cfg.base_channels
    C = cfg.content_channels
    raw: dict[str, np.ndarray] = {}

    def conv(name, out_c, in_c, k, bias=True):
        raw[f"{name}.w"] = nn.he_normal(rng, (out_c, in_c, k, k), fan_in=in_c * k * k, dtype=dtype)
        if bias:
            raw[f"{name}.b"] = np.zeros(out_c, dtype=dtype)

    def dense(name, in_f, out_f):
        raw[f"{name}.w"] = nn.he_normal(rng, (in_f, out_f), fan_in=in_f, dtype=dtype)
        raw[f"{name}.b"] = np.zeros(out_f, dtype=dtype)

    conv("ec.conv1", B, 3, 7, bias=False)
    conv("ec.conv2", 2 * B, B, 3, bias=False)
    conv("ec.conv3", C, 2 * B, 3, bias=False)
    for i in range(1, ENCODER_BLOCKS + 1):
        conv(f"ec.res{i}.conv1", C, C, 3, bias=False)
        conv(f"ec.res{i}.conv2", C, C, 3, bias=False)

    dense("gen.mlp1", 3, cfg.mlp_hidden)
    dense("gen.mlp2", cfg.mlp_hidden, cfg.mlp_hidden)
    dense("gen.mlp3", cfg.mlp_hidden, 2 * C)
    for i in range(1, GENERATOR_BLOCKS + 1):
        conv(f"gen.res{i}.conv1", C, C, 3, bias=False)
        conv(f"gen.res{i}.conv2", C, C, 3, bias=False)
    # transposed-conv weights: (in_channels, out_channels, k, k)
    raw["gen.up1.w"] = nn.he_normal(rng, (C, 2 * B, 4, 4), fan_in=C * 16, dtype=dtype)
    raw["gen.up2.w"] = nn.he_normal(rng, (2 * B, B, 4, 4), fan_in=2 * B * 16, dtype=dtype)
    conv("gen.out", 3, B, 7)

    for d in DISCRIMINATOR_PREFIXES:
        conv(f"{d}.conv1", B, 3, 4)
        conv(f"{d}.conv2", 2 * B, B, 4, bias=False)
        conv(f"{d}.conv3", 4 * B, 2 * B, 4, bias=False)
        conv(f"{d}.conv4", 8 * B, 4 * B, 4, bias=False)
        conv(f"{d}.out", 1, 8 * B, 1)

    return {name: Tensor(arr, requires_grad=True, name=name) for name, arr in raw.items()}


def param_group(params: dict[str, Tensor], prefixes: tuple[str, ...]) -> dict[str, Tensor]:
    return {k: v for k, v in params.items() if k.startswith(prefixes)}


def generator_params(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return param_group(params, ("ec.", "gen."))


def discriminator_params(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return param_group(params, ("d1.", "d2."))


def zero_grads(params: dict[str, Tensor]) -> None:
    for p in params.values():
        p.zero_grad()


def _conv_in(params, name, x, stride, padding):
    h = nn.conv2d(x, params[f"{name}.w"], params.get(f"{name}.b"), stride, padding)
    return nn.instance_norm(h)


def _resblock(params, prefix, x):
    h = nn.relu(_conv_in(params, f"{prefix}.conv1", x, 1, 1))
    return x + _conv_in(params, f"{prefix}.conv2", h, 1, 1)


def encode_content_t(params: dict[str, Tensor], x: Tensor) -> Tensor:
    """Content map at 1/4 resolution; x is NCHW with dims divisible by 4."""
    n, c, h, w = x.shape
    if h % 4 or w % 4:
        raise ValueError(f"encoder input dims must be divisible by 4, got {h}x{w}")
    out = nn.relu(_conv_in(params, "ec.conv1", x, 1, 3))
    out = nn.relu(_conv_in(params, "ec.conv2", out, 2, 1))
    out = nn.relu(_conv_in(params, "ec.conv3", out, 2, 1))
    for i in range(1, ENCODER_BLOCKS + 1):
        out = _resblock(params, f"ec.res{i}", out)
    return out


def style_coeffs_t(params: dict[str, Tensor], cfg: ModelConfig, e: Tensor) -> tuple[Tensor, Tensor]:
    """MLP from guide vector to AdaIN (scale, shift), scale offset by +1."""
    h = nn.relu(nn.linear(e, params["gen.mlp1.w"], params["gen.mlp1.b"]))
    h = nn.relu(nn.linear(h, params["gen.mlp2.w"], params["gen.mlp2.b"]))
    h = nn.linear(h, params["gen.mlp3.w"], params["gen.mlp3.b"])
    C = cfg.content_channels
    gamma = nn.slice_cols(h, 0, C) + 1.0
    beta = nn.slice_cols(h, C, 2 * C)
    return gamma, beta


def generate_t(params: dict[str, Tensor], cfg: ModelConfig, c: Tensor, e: Tensor) -> Tensor:
    """Synthesize an NCHW image in [0,1] from a content map and guide vector."""
    if c.shape[1] != cfg.content_channels:
        raise ValueError(f"content map has {c.shape[1]} channels, expected {cfg.content_channels}")
    if e.data.ndim == 1:
        e = e.reshape(1, e.shape[0])
    gamma, beta = style_coeffs_t(params, cfg, e)
    h = nn.adain(c, gamma, beta)
    for i in range(1, GENERATOR_BLOCKS + 1):
        h = _resblock(params, f"gen.res{i}", h)
    h = nn.relu(nn.instance_norm(nn.conv_transpose2d(h, params["gen.up1.w"], None, 2, 1)))
    h = nn.relu(nn.instance_norm(nn.conv_transpose2d(h, params["gen.up2.w"], None, 2, 1)))
    h = nn.conv2d(h, params["gen.out.w"], params["gen.out.b"], 1, 3)
    return (nn.tanh(h) + 1.0) * 0.5


def discriminate_t(params: dict[str, Tensor], prefix: str, x: Tensor) -> Tensor:
    """Patch score map of one critic ("d1" full scale, "d2" half scale)."""
    h = nn.lrelu(nn.conv2d(x, params[f"{prefix}.conv1.w"], params[f"{prefix}.conv1.b"], 2, 1))
    h = nn.lrelu(_conv_in(params, f"{prefix}.conv2", h, 2, 1))
    h = nn.lrelu(_conv_in(params, f"{prefix}.conv3", h, 2, 1))
    h = nn.lrelu(_conv_in(params, f"{prefix}.conv4", h, 2, 1))
    return nn.conv2d(h, params[f"{prefix}.out.w"], params[f"{prefix}.out.b"], 1, 0)


# -- numpy-facing wrappers -------------------------------------------------


def image_to_nchw(img: np.ndarray, dtype=None) -> np.ndarray:
    arr = np.transpose(img, (2, 0, 1))[None]
    return arr.astype(dtype) if dtype is not None else arr


def nchw_to_image(arr: np.ndarray) -> np.ndarray:
    return np.transpose(arr[0], (1, 2, 0)).astype(np.float64)


def _param_dtype(params: dict[str, Tensor]):
    return next(iter(params.values())).data.dtype


def encode_content(params: dict[str, Tensor], img: np.ndarray) -> np.ndarray:
    """Content map (C, H/4, W/4) of an (H, W, 3) image."""
    x = Tensor(image_to_nchw(img, _param_dtype(params)))
    return encode_content_t(params, x).data[0]


def generate(params: dict[str, Tensor], cfg: ModelConfig, content: np.ndarray, e) -> np.ndarray:
    """Image (H, W, 3) from a content map (C, h, w) and a guide vector."""
    c = Tensor(content[None].astype(_param_dtype(params), copy=False))
    ev = Tensor(np.asarray(e, dtype=_param_dtype(params)).reshape(1, 3))
    out = generate_t(params, cfg, c, ev)
    return nchw_to_image(out.data)
