"""Binary checkpoints: magic, version, JSON header, raw float32 tensors.

Layout: b"ENTG", little-endian u32 version (1), u32 header length, UTF-8
JSON header {config, env_stats, step}, then one entry per parameter:
u32 name length, name bytes, u32 rank, u32 dims, raw little-endian
float32 values. Entries run to end of file in insertion order, so a
save/load round trip is bit-exact.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..envvec import EnvStats
from ..neuralnet import Tensor
from .model import ModelConfig

MAGIC = b"ENTG"
VERSION = 1


class CheckpointError(ValueError):
    """Unreadable, truncated or version-mismatched checkpoint."""


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict[str, np.ndarray]  # float32 arrays
    stats: EnvStats | None
    step: int = 0

    @classmethod
    def from_tensors(
        cls, cfg: ModelConfig, params: dict[str, Tensor], stats: EnvStats | None, step: int
    ) -> "Checkpoint":
        # always copy: live training params are updated in place
        arrays = {name: np.array(p.data, dtype=np.float32) for name, p in params.items()}
        return cls(config=cfg, params=arrays, stats=stats, step=step)

    def as_tensors(self, requires_grad: bool = False, dtype=None) -> dict[str, Tensor]:
        return {
            name: Tensor(
                np.array(arr, dtype=dtype) if dtype is not None else arr.copy(),
                requires_grad=requires_grad,
                name=name,
            )
            for name, arr in self.params.items()
        }


def save_checkpoint(ck: Checkpoint, path) -> None:
    header = {
        "config": ck.config.to_json_obj(),
        "env_stats": json.loads(ck.stats.to_json()) if ck.stats is not None else None,
        "step": ck.step,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    buf.write(struct.pack("<I", len(header_bytes)))
    buf.write(header_bytes)
    for name, arr in ck.params.items():
        arr32 = np.ascontiguousarray(arr, dtype="<f4")
        name_bytes = name.encode("utf-8")
        buf.write(struct.pack("<I", len(name_bytes)))
        buf.write(name_bytes)
        buf.write(struct.pack("<I", arr32.ndim))
        buf.write(struct.pack(f"<{arr32.ndim}I", *arr32.shape))
        buf.write(arr32.tobytes())
    Path(path).write_bytes(buf.getvalue())


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint: wanted {n} bytes, got {len(data)}")
    return data


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"no such checkpoint: {path}")
    with path.open("rb") as fh:
        if _read_exact(fh, 4) != MAGIC:
            raise CheckpointError(f"bad magic in {path}")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (header_len,) = struct.unpack("<I", _read_exact(fh, 4))
        header = json.loads(_read_exact(fh, header_len).decode("utf-8"))
        params: dict[str, np.ndarray] = {}
        while True:
            raw = fh.read(4)
            if not raw:
                break
            if len(raw) != 4:
                raise CheckpointError("truncated parameter entry")
            (name_len,) = struct.unpack("<I", raw)
            name = _read_exact(fh, name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(fh, 4))
            dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank))
            count = int(np.prod(dims)) if rank else 1
            data = np.frombuffer(_read_exact(fh, 4 * count), dtype="<f4").reshape(dims)
            params[name] = np.array(data)  # own, writable copy
    stats = None
    if header.get("env_stats") is not None:
        stats = EnvStats.from_json(json.dumps(header["env_stats"]))
    return Checkpoint(
        config=ModelConfig.from_json_obj(header["config"]),
        params=params,
        stats=stats,
        step=int(header["step"]),
    )
