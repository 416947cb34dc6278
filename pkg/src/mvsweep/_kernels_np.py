"""Pure-numpy implementations of the hot kernels.

Drop-in fallback for the compiled extension (`mvsweep._kernels_cy`). Both
backends perform the same arithmetic in the same order, so results are
bit-identical between them.
"""
import numpy as np

NAME = "numpy"


def conv_out_size(size, kernel, stride, pad):
    return (size + 2 * pad - kernel) // stride + 1


def im2col(x, kh, kw, stride, ph, pw):
    """Unfold (n, c, h, w) into (n, c*kh*kw, oh*ow) patch columns.

    Zero padding of ph/pw rows/cols on each side; patches ordered
    channel-major then kernel-row then kernel-col, matching a reshape of
    conv weights (cout, cin, kh, kw) -> (cout, cin*kh*kw).
    """
    n, c, h, w = x.shape
    oh = conv_out_size(h, kh, stride, ph)
    ow = conv_out_size(w, kw, stride, pw)
    if ph or pw:
        xp = np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=x.dtype)
        xp[:, :, ph:ph + h, pw:pw + w] = x
    else:
        xp = x
    s0, s1, s2, s3 = xp.strides
    windows = np.lib.stride_tricks.as_strided(
        xp,
        shape=(n, c, kh, kw, oh, ow),
        strides=(s0, s1, s2, s3, s2 * stride, s3 * stride),
        writeable=False,
    )
    return np.ascontiguousarray(windows).reshape(n, c * kh * kw, oh * ow)


def col2im(cols, h, w, kh, kw, stride, ph, pw):
    """Scatter-add patch columns back onto the (n, c, h, w) image grid.

    Adjoint of :func:`im2col`; overlapping patch entries accumulate.
    """
    n = cols.shape[0]
    c = cols.shape[1] // (kh * kw)
    oh = conv_out_size(h, kh, stride, ph)
    ow = conv_out_size(w, kw, stride, pw)
    cols6 = cols.reshape(n, c, kh, kw, oh, ow)
    xp = np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += cols6[:, :, i, j]
    if ph or pw:
        return np.ascontiguousarray(xp[:, :, ph:ph + h, pw:pw + w])
    return xp


def warp_bilinear(img, hmat):
    """Warp (c, h, w) image by a 3x3 pixel homography, bilinear sampling.

    Output pixel (x, y) samples the input at hmat @ (x, y, 1). Samples that
    fall outside the image (or behind the plane at infinity, i.e. the
    homogeneous scale is not positive) are zero-filled and marked invalid.

    Returns (warped (c, h, w), valid (h, w) bool).
    """
    c, h, w = img.shape
    xs = np.arange(w, dtype=img.dtype)
    ys = np.arange(h, dtype=img.dtype)
    gx, gy = np.meshgrid(xs, ys)
    hm = hmat.astype(img.dtype)
    qx = hm[0, 0] * gx + hm[0, 1] * gy + hm[0, 2]
    qy = hm[1, 0] * gx + hm[1, 1] * gy + hm[1, 2]
    qz = hm[2, 0] * gx + hm[2, 1] * gy + hm[2, 2]
    valid = qz > 1e-12
    qzs = np.where(valid, qz, 1.0)
    u = qx / qzs
    v = qy / qzs
    valid &= (u >= 0.0) & (u <= w - 1.0) & (v >= 0.0) & (v <= h - 1.0)
    u = np.where(valid, u, 0.0)
    v = np.where(valid, v, 0.0)
    x0f = np.clip(np.floor(u), 0.0, w - 2.0)
    y0f = np.clip(np.floor(v), 0.0, h - 2.0)
    fx = u - x0f
    fy = v - y0f
    x0 = x0f.astype(np.intp)
    y0 = y0f.astype(np.intp)
    out = np.empty_like(img)
    for ch in range(c):
        plane = img[ch]
        v00 = plane[y0, x0]
        v01 = plane[y0, x0 + 1]
        v10 = plane[y0 + 1, x0]
        v11 = plane[y0 + 1, x0 + 1]
        out[ch] = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11)
        out[ch][~valid] = 0.0
    return out, valid
