"""Binary checkpoint I/O for trained denoiser models.

Layout (all little-endian):
    magic   4 bytes  b"CRLD"
    u32     format version (currently 1)
    u32 x8  hyper header: blocks, layers_per_block, filters, ma, mb, pilots,
            kernel_size, recon kind (0 = conv1x1, 1 = dense)
    f64...  trainable parameters, flattened C-order, in named_parameters() order
    f64...  batch-norm running statistics, in named_running_stats() order
    u32     CRC32 of every preceding byte
"""

import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import FormatError
from .model import RECON_CONV1X1, RECON_DENSE, DenoiserHyper, ResidualDenoiser, build_model

MAGIC = b"CRLD"
VERSION = 1
_RECON_CODES = {RECON_CONV1X1: 0, RECON_DENSE: 1}
_RECON_NAMES = {code: name for name, code in _RECON_CODES.items()}
_HEADER = struct.Struct("<4sI8I")


def save_checkpoint(model: ResidualDenoiser, path: str | Path) -> None:
    """Serialize every parameter, BN running stat, and hyperparameter, bit-exactly."""
    hp = model.hyper
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        hp.blocks,
        hp.layers_per_block,
        hp.filters,
        hp.ma,
        hp.mb,
        hp.pilots,
        hp.kernel_size,
        _RECON_CODES[hp.recon],
    )
    chunks = [header]
    for arr in model.named_parameters().values():
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    for arr in model.named_running_stats().values():
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    body = b"".join(chunks)
    crc = zlib.crc32(body) & 0xFFFFFFFF
    Path(path).write_bytes(body + struct.pack("<I", crc))


def load_checkpoint(path: str | Path) -> ResidualDenoiser:
    """Reconstruct a model from a checkpoint file; the mode is left unset."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + 4:
        raise FormatError(f"checkpoint {path} is truncated (only {len(raw)} bytes)")
    magic, version, b, l, f, ma, mb, p, k, recon_code = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} in {path}: not a checkpoint file")
    if version != VERSION:
        raise FormatError(
            f"unsupported checkpoint version {version} in {path}; supported versions: {VERSION}"
        )
    if recon_code not in _RECON_NAMES:
        raise FormatError(f"unknown reconstruction-layer code {recon_code} in {path}")
    hyper = DenoiserHyper(
        blocks=b, layers_per_block=l, filters=f, ma=ma, mb=mb, pilots=p,
        kernel_size=k, recon=_RECON_NAMES[recon_code],
    )
    model = build_model(hyper, rng=0)  # placeholder init, overwritten below
    slots = dict(model.named_parameters())
    slots.update(model.named_running_stats())
    n_floats = sum(arr.size for arr in slots.values())
    expected = _HEADER.size + 8 * n_floats + 4
    if len(raw) != expected:
        raise FormatError(
            f"checkpoint {path} has {len(raw)} bytes, expected {expected} for this header"
        )
    crc_stored = struct.unpack_from("<I", raw, len(raw) - 4)[0]
    crc_actual = zlib.crc32(raw[:-4]) & 0xFFFFFFFF
    if crc_stored != crc_actual:
        raise FormatError(f"checkpoint {path} failed its CRC32 integrity check")
    flat = np.frombuffer(raw, dtype="<f8", count=n_floats, offset=_HEADER.size)
    offset = 0
    for arr in slots.values():
        np.copyto(arr, flat[offset : offset + arr.size].reshape(arr.shape))
        offset += arr.size
    return model
