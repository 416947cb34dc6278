"""Bit-exact file formats shared across the toolkit.

Tensor file ("MMVS"): magic, version byte, axis-count byte, axis lengths as
little-endian uint32, then the payload as little-endian float32, row-major.
NaN payload entries encode missing depth.

Depth histogram ("DHST"): magic, version byte 1, uint32 bin count,
float64 d_max, then the per-bin counts as uint64. All little-endian.

Plane sets are plain text, one decimal depth per line, ascending. Images
are binary PPM (P6, maxval 255). Poses are plain-text rows of 12 numbers
(rotation row-major, then translation); intrinsics a row of 4 (fx fy cx cy).
"""
import struct

import numpy as np

TENSOR_MAGIC = b"MMVS"
TENSOR_VERSION = 1
HISTOGRAM_MAGIC = b"DHST"
HISTOGRAM_VERSION = 1


def write_tensor(path, array):
    """Write an array as a tensor file; data is stored as float32."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    if arr.ndim > 255:
        raise ValueError("tensor files support at most 255 axes")
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<BB", TENSOR_VERSION, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def read_tensor(path):
    """Read a tensor file back as a float32 array."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != TENSOR_MAGIC:
            raise ValueError(f"{path}: not a tensor file (magic {magic!r})")
        version, ndim = struct.unpack("<BB", fh.read(2))
        if version != TENSOR_VERSION:
            raise ValueError(f"{path}: unsupported tensor file version {version}")
        shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
        count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        payload = fh.read(4 * count)
        if len(payload) != 4 * count:
            raise ValueError(f"{path}: truncated tensor payload")
        extra = fh.read(1)
        if extra:
            raise ValueError(f"{path}: trailing bytes after tensor payload")
    return np.frombuffer(payload, dtype="<f4").reshape(shape).copy()


def write_histogram(path, bin_count, d_max, counts):
    counts = np.ascontiguousarray(counts, dtype="<u8")
    if counts.shape != (bin_count,):
        raise ValueError("histogram counts length does not match bin count")
    with open(path, "wb") as fh:
        fh.write(HISTOGRAM_MAGIC)
        fh.write(struct.pack("<B", HISTOGRAM_VERSION))
        fh.write(struct.pack("<I", bin_count))
        fh.write(struct.pack("<d", float(d_max)))
        fh.write(counts.tobytes())


def read_histogram(path):
    """Read a histogram file; returns (bin_count, d_max, counts)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != HISTOGRAM_MAGIC:
            raise ValueError(f"{path}: not a histogram file (magic {magic!r})")
        (version,) = struct.unpack("<B", fh.read(1))
        if version != HISTOGRAM_VERSION:
            raise ValueError(f"{path}: unsupported histogram version {version}")
        (bins,) = struct.unpack("<I", fh.read(4))
        (d_max,) = struct.unpack("<d", fh.read(8))
        payload = fh.read(8 * bins)
        if len(payload) != 8 * bins:
            raise ValueError(f"{path}: truncated histogram payload")
    counts = np.frombuffer(payload, dtype="<u8").copy()
    return bins, d_max, counts


def write_planes(path, depths):
    depths = np.asarray(depths, dtype=np.float64)
    if depths.ndim != 1 or len(depths) < 1:
        raise ValueError("plane list must be a nonempty 1-d sequence")
    if np.any(np.diff(depths) <= 0):
        raise ValueError("plane depths must be strictly increasing")
    with open(path, "w") as fh:
        for d in depths:
            fh.write(f"{float(d)!r}\n")


def read_planes(path):
    depths = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                depths.append(float(line))
    if not depths:
        raise ValueError(f"{path}: empty plane file")
    arr = np.asarray(depths, dtype=np.float64)
    if np.any(np.diff(arr) <= 0):
        raise ValueError(f"{path}: plane depths not strictly increasing")
    return arr


def write_ppm(path, image):
    """Write a (3, h, w) image with values in [0, 1] as binary PPM."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError("PPM output requires a (3, h, w) image")
    quantized = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    _, h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(quantized.transpose(1, 2, 0).tobytes())


def read_ppm(path):
    """Read a binary PPM back as a (3, h, w) float64 image in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P6"):
        raise ValueError(f"{path}: not a binary PPM")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1
    w, h, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=3 * h * w, offset=pos)
    return pixels.reshape(h, w, 3).transpose(2, 0, 1).astype(np.float64) / 255.0


def write_poses(path, poses):
    """Write rows of 12 numbers: rotation row-major then translation."""
    with open(path, "w") as fh:
        for rotation, translation in poses:
            row = [float(v) for v in np.asarray(rotation, dtype=np.float64).reshape(9)]
            row += [float(v) for v in np.asarray(translation, dtype=np.float64).reshape(3)]
            fh.write(" ".join(repr(v) for v in row) + "\n")


def read_poses(path):
    poses = []
    with open(path) as fh:
        for line in fh:
            values = [float(tok) for tok in line.split()]
            if not values:
                continue
            if len(values) != 12:
                raise ValueError(f"{path}: pose rows need 12 numbers, got {len(values)}")
            poses.append((np.array(values[:9]).reshape(3, 3), np.array(values[9:])))
    return poses


def write_intrinsics(path, fx, fy, cx, cy):
    with open(path, "w") as fh:
        fh.write(" ".join(repr(float(v)) for v in (fx, fy, cx, cy)) + "\n")


def read_intrinsics(path):
    with open(path) as fh:
        values = [float(tok) for tok in fh.read().split()]
    if len(values) != 4:
        raise ValueError(f"{path}: intrinsics need 4 numbers, got {len(values)}")
    return tuple(values)
