"""Checkpoint serialization.

Layout: magic "MMVSCKPT", version byte, uint32 entry count, then a
manifest sorted by tensor name (uint16 name length, utf-8 name, uint8
axis count, uint32 axis lengths, uint64 byte offset), followed by the
raw little-endian float32 blobs the offsets point into. Model tensors
live under "model/", batchnorm running statistics under "state/", and
optimizer state under "optim/".
"""
import struct

import numpy as np

CHECKPOINT_MAGIC = b"MMVSCKPT"
CHECKPOINT_VERSION = 1

MODEL_PREFIX = "model/"
STATE_PREFIX = "state/"
OPTIM_PREFIX = "optim/"


def save_checkpoint(path, named_arrays):
    """Write a name -> array mapping; payloads are stored as float32."""
    entries = []
    offset = 0
    for name in sorted(named_arrays):
        arr = np.asarray(named_arrays[name], dtype="<f4")
        entries.append((name, arr, offset))
        offset += arr.nbytes
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<B", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(entries)))
        for name, arr, off in entries:
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(struct.pack("<Q", off))
        for _, arr, _ in entries:
            fh.write(arr.tobytes())


def load_checkpoint(path):
    """Read a checkpoint back as a name -> float32 array mapping."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint (magic {blob[:8]!r})")
    version = blob[8]
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    (count,) = struct.unpack_from("<I", blob, 9)
    pos = 13
    manifest = []
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos:pos + name_len].decode("utf-8")
        pos += name_len
        ndim = blob[pos]
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", blob, pos)
        pos += 4 * ndim
        (offset,) = struct.unpack_from("<Q", blob, pos)
        pos += 8
        manifest.append((name, shape, offset))
    payload_start = pos
    named = {}
    for name, shape, offset in manifest:
        size = int(np.prod(shape, dtype=np.int64)) if shape else 1
        start = payload_start + offset
        data = np.frombuffer(blob, dtype="<f4", count=size, offset=start)
        named[name] = data.reshape(shape).copy()
    return named


def split_namespaces(named):
    """Partition checkpoint entries into (model, state, optim) groups."""
    model, state, optim = {}, {}, {}
    for name, arr in named.items():
        if name.startswith(MODEL_PREFIX):
            model[name[len(MODEL_PREFIX):]] = arr
        elif name.startswith(STATE_PREFIX):
            state[name[len(STATE_PREFIX):]] = arr
        elif name.startswith(OPTIM_PREFIX):
            optim[name[len(OPTIM_PREFIX):]] = arr
        else:
            raise ValueError(f"checkpoint tensor {name!r} has no recognized namespace")
    return model, state, optim


def pack_namespaces(model=None, state=None, optim=None):
    named = {}
    for prefix, group in ((MODEL_PREFIX, model), (STATE_PREFIX, state), (OPTIM_PREFIX, optim)):
        if group:
            for key, arr in group.items():
                named[prefix + key] = arr
    return named
