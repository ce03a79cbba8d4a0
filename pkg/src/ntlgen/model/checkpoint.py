"""Binary checkpoint format.

Layout: the 8-byte magic ``NTLGAN01``, a little-endian uint64 byte length,
a UTF-8 JSON index of that length, then raw little-endian float32 blobs in
index order. The index maps each parameter name to its byte offset (relative
to the start of the blob section), shape and dtype, and carries the model
metadata needed to rebuild the networks.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ConfigError, FormatError
from .params import ModelParams, build_model
from .specs import PatchGANSpec, ScenarioConfig, UNetSpec

MAGIC = b"NTLGAN01"
BLOB_DTYPE = np.dtype("<f4")


def _arrays(model: ModelParams) -> dict[str, np.ndarray]:
    out = {f"g.{k}": v for k, v in model.generator.state_arrays().items()}
    out.update({f"d.{k}": v for k, v in model.discriminator.state_arrays().items()})
    return out


def _meta(model: ModelParams) -> dict:
    return {
        "scenario": model.scenario.name,
        "channels": list(model.scenario.channels),
        "unet": model.unet.to_dict(),
        "patchgan": model.patchgan.to_dict(),
    }


def save_checkpoint(model: ModelParams, path: str | Path, extra: dict | None = None) -> None:
    arrays = _arrays(model)
    tensors, offset = {}, 0
    for name, arr in arrays.items():
        nbytes = arr.size * BLOB_DTYPE.itemsize
        tensors[name] = {"offset": offset, "shape": list(arr.shape), "dtype": "float32"}
        offset += nbytes
    index = {"meta": _meta(model), "extra": extra or {}, "tensors": tensors}
    header = json.dumps(index, sort_keys=False, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype=BLOB_DTYPE).tobytes())


def read_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Validate and decode a checkpoint into (index, name -> float32 array)."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 8 or raw[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: missing NTLGAN01 header")
    (hlen,) = struct.unpack_from("<Q", raw, len(MAGIC))
    start = len(MAGIC) + 8
    if start + hlen > len(raw):
        raise FormatError(f"{path}: index length {hlen} exceeds file size")
    try:
        index = json.loads(raw[start : start + hlen].decode("utf-8"))
        tensors = index["tensors"]
        index["meta"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: corrupt index ({exc})") from None
    blob = memoryview(raw)[start + hlen :]
    arrays, expected = {}, 0
    for name, entry in tensors.items():
        shape = tuple(entry["shape"])
        if entry.get("dtype") != "float32" or entry["offset"] != expected:
            raise FormatError(f"{path}: bad index entry for {name!r}")
        nbytes = int(np.prod(shape, dtype=np.int64)) * BLOB_DTYPE.itemsize
        if expected + nbytes > len(blob):
            raise FormatError(f"{path}: truncated data for {name!r}")
        arrays[name] = np.frombuffer(blob[expected : expected + nbytes], dtype=BLOB_DTYPE).reshape(shape).astype(np.float32)
        expected += nbytes
    if expected != len(blob):
        raise FormatError(f"{path}: {len(blob) - expected} trailing bytes after parameter data")
    return index, arrays


def load_checkpoint(path: str | Path, expect: ModelParams | None = None) -> ModelParams:
    """Rebuild a model from a checkpoint.

    With ``expect``, the stored arrays are loaded into that model instead and
    any name or shape disagreement raises ConfigError.
    """
    index, arrays = read_checkpoint(path)
    meta = index["meta"]
    if expect is None:
        try:
            scenario = ScenarioConfig.from_name(meta["scenario"])
            model = build_model(scenario, UNetSpec.from_dict(meta["unet"]), PatchGANSpec.from_dict(meta["patchgan"]))
        except (KeyError, TypeError) as exc:
            raise FormatError(f"{path}: incomplete model metadata ({exc})") from None
    else:
        model = expect
    g = {k[2:]: v for k, v in arrays.items() if k.startswith("g.")}
    d = {k[2:]: v for k, v in arrays.items() if k.startswith("d.")}
    if len(g) + len(d) != len(arrays):
        raise ConfigError(f"{path}: parameter names must start with 'g.' or 'd.'")
    model.generator.load_arrays(g)
    model.discriminator.load_arrays(d)
    return model
