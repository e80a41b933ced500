"""Binary checkpoint format.

Layout (all integers little-endian)::

    magic            8 bytes  b"XLRECKPT"
    format version   u32
    n_layers, hidden_size, n_heads, ffn_size, max_positions, vocab_size   6 x u32
    dropout_rate     f64
    vocabulary hash  32 bytes (SHA-256 of the vocabulary file content)
    tensor count     u32
    per tensor, in model parameter order:
        name length u32, name (UTF-8), rank u32, dims rank x u32,
        values as little-endian float32, row-major

Model metadata that is not a tensor (summary scheme, marker scheme, class
count, schema, training history) lives in an adjacent ``<ckpt>.json``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointError, VocabularyMismatch
from .transformer import ModelConfig, parameter_names

MAGIC = b"XLRECKPT"
FORMAT_VERSION = 1
_CONFIG_FIELDS = ("n_layers", "hidden_size", "n_heads", "ffn_size", "max_positions", "vocab_size")


@dataclass
class RawCheckpoint:
    config: ModelConfig
    vocab_hash: bytes
    tensors: dict[str, np.ndarray]


def write_checkpoint(path, config: ModelConfig, tensors: dict[str, np.ndarray], vocab_hash: bytes) -> None:
    if len(vocab_hash) != 32:
        raise CheckpointError("vocabulary hash must be 32 bytes")
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION),
             struct.pack("<6I", *(getattr(config, f) for f in _CONFIG_FIELDS)),
             struct.pack("<d", config.dropout_rate), vocab_hash, struct.pack("<I", len(tensors))]
    for name, value in tensors.items():
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(value, dtype="<f4")
        parts += [struct.pack("<I", len(raw)), raw, struct.pack("<I", arr.ndim),
                  struct.pack(f"<{arr.ndim}I", *arr.shape), arr.tobytes()]
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("truncated checkpoint")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_checkpoint(path, expected_vocab_hash: bytes | None = None, dtype: str = "float32") -> RawCheckpoint:
    r = _Reader(Path(path).read_bytes())
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointError(f"{path}: not an xlre checkpoint")
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    fields = dict(zip(_CONFIG_FIELDS, r.unpack("<6I")))
    (dropout,) = r.unpack("<d")
    config = ModelConfig(**fields, dropout_rate=dropout, dtype=dtype)
    vocab_hash = r.take(32)
    if expected_vocab_hash is not None and vocab_hash != expected_vocab_hash:
        raise VocabularyMismatch(f"{path}: checkpoint was built with a different vocabulary")
    (count,) = r.unpack("<I")
    tensors = {}
    for _ in range(count):
        (n,) = r.unpack("<I")
        name = r.take(n).decode("utf-8")
        (rank,) = r.unpack("<I")
        dims = r.unpack(f"<{rank}I") if rank else ()
        size = int(np.prod(dims)) if dims else 1
        arr = np.frombuffer(r.take(4 * size), dtype="<f4").reshape(dims)
        tensors[name] = arr.astype(dtype)
    if r.pos != len(r.data):
        raise CheckpointError(f"{path}: trailing bytes after last tensor")
    return RawCheckpoint(config, vocab_hash, tensors)


def metadata_path(path) -> Path:
    return Path(str(path) + ".json")


def save_model(path, model, vocab, schema=None, extra: dict | None = None) -> None:
    """Write the binary checkpoint plus its JSON metadata sidecar."""
    write_checkpoint(path, model.config, model.params, vocab.content_hash())
    meta = {
        "format_version": FORMAT_VERSION,
        "kind": "relation_model",
        "model_config": model.config.to_dict(),
        "summary": model.summary.to_dict(),
        "marker_scheme": model.marker_scheme.value,
        "n_classes": model.n_classes,
        "n_types": model.n_types,
        "vocab_hash": vocab.content_hash().hex(),
    }
    if schema is not None:
        meta["schema"] = schema.to_dict()
    if extra:
        meta.update(extra)
    metadata_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_metadata(path) -> dict:
    p = metadata_path(path)
    if not p.exists():
        raise CheckpointError(f"missing metadata file {p}")
    return json.loads(p.read_text(encoding="utf-8"))


def load_model(path, vocab):
    """Rebuild a :class:`RelationModel`; rejects a mismatched vocabulary."""
    from .head import SummaryScheme
    from .model import RelationModel

    meta = load_metadata(path)
    dtype = meta.get("model_config", {}).get("dtype", "float32")
    raw = read_checkpoint(path, vocab.content_hash(), dtype=dtype)
    return RelationModel(raw.config, SummaryScheme.from_dict(meta["summary"]), meta["marker_scheme"],
                         meta["n_classes"], meta["n_types"], raw.tensors)


def save_encoder(path, config: ModelConfig, params: dict, vocab, extra: dict | None = None) -> None:
    """Checkpoint of encoder tensors only (the output of MLM pretraining)."""
    write_checkpoint(path, config, {k: params[k] for k in parameter_names(config)}, vocab.content_hash())
    meta = {"format_version": FORMAT_VERSION, "kind": "encoder", "model_config": config.to_dict(),
            "vocab_hash": vocab.content_hash().hex()}
    meta.update(extra or {})
    metadata_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_encoder(path, vocab, dtype: str = "float32"):
    """Return ``(config, encoder_params)`` from an encoder or full-model checkpoint."""
    raw = read_checkpoint(path, vocab.content_hash(), dtype=dtype)
    names = parameter_names(raw.config)
    missing = [n for n in names if n not in raw.tensors]
    if missing:
        raise CheckpointError(f"{path}: missing encoder tensors {missing[:3]}")
    return raw.config, {n: raw.tensors[n] for n in names}
