"""Versioned binary checkpoints: parameters, optimizer state, epoch, dev accuracy.

Layout (all little-endian):
  magic "GSCK" | u32 version | u32 hash_len | spec hash bytes
  u32 n_param_layers, then per layer: name, W tensor, b tensor
  u8 has_optimizer_state; if set: u64 step count, then per layer m/v tensors
  u32 epoch | f64 dev_accuracy
Tensors are stored as u8 ndim, u32 dims, float32 data.
"""

import io
import os
import struct

import numpy as np

MAGIC = b"GSCK"
VERSION = 1


def _write_tensor(fh, arr):
    arr = np.ascontiguousarray(arr, dtype="<f4")
    fh.write(struct.pack("<B", arr.ndim))
    for d in arr.shape:
        fh.write(struct.pack("<I", d))
    fh.write(arr.tobytes())


def _read_tensor(fh):
    (ndim,) = struct.unpack("<B", fh.read(1))
    shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(ndim))
    count = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(fh.read(4 * count), dtype="<f4")
    return data.reshape(shape).copy()


def _write_name(fh, name: str):
    raw = name.encode("utf-8")
    fh.write(struct.pack("<H", len(raw)))
    fh.write(raw)


def _read_name(fh) -> str:
    (n,) = struct.unpack("<H", fh.read(2))
    return fh.read(n).decode("utf-8")


def save_checkpoint(path, spec_hash: bytes, params: dict, opt_state=None, epoch: int = 0, dev_accuracy: float = 0.0):
    """Atomic write: serialize to a temp file, then rename into place."""
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    buf.write(struct.pack("<I", len(spec_hash)))
    buf.write(spec_hash)

    names = list(params.keys())
    buf.write(struct.pack("<I", len(names)))
    for name in names:
        _write_name(buf, name)
        _write_tensor(buf, params[name]["W"])
        _write_tensor(buf, params[name]["b"])

    if opt_state is None:
        buf.write(struct.pack("<B", 0))
    else:
        buf.write(struct.pack("<B", 1))
        buf.write(struct.pack("<Q", opt_state.t))
        for name in names:
            for key in ("W", "b"):
                _write_tensor(buf, opt_state.m[name][key])
                _write_tensor(buf, opt_state.v[name][key])

    buf.write(struct.pack("<I", epoch))
    buf.write(struct.pack("<d", dev_accuracy))

    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, str(path))


def load_checkpoint(path):
    """Returns a dict with spec_hash, params, opt_state (or None), epoch,
    dev_accuracy.  Optimizer moments come back as plain m/v dicts plus t."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic)")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (hash_len,) = struct.unpack("<I", fh.read(4))
        spec_hash = fh.read(hash_len)

        (n_layers,) = struct.unpack("<I", fh.read(4))
        params = {}
        names = []
        for _ in range(n_layers):
            name = _read_name(fh)
            names.append(name)
            w = _read_tensor(fh)
            b = _read_tensor(fh)
            params[name] = {"W": w, "b": b}

        (has_opt,) = struct.unpack("<B", fh.read(1))
        opt_state = None
        if has_opt:
            (t,) = struct.unpack("<Q", fh.read(8))
            m = {}
            v = {}
            for name in names:
                m[name] = {}
                v[name] = {}
                for key in ("W", "b"):
                    m[name][key] = _read_tensor(fh)
                    v[name][key] = _read_tensor(fh)
            opt_state = {"t": t, "m": m, "v": v}

        (epoch,) = struct.unpack("<I", fh.read(4))
        (dev_accuracy,) = struct.unpack("<d", fh.read(8))
    return {
        "spec_hash": spec_hash,
        "params": params,
        "opt_state": opt_state,
        "epoch": epoch,
        "dev_accuracy": dev_accuracy,
    }
