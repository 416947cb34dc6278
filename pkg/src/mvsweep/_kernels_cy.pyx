# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot kernels.

Mirrors `mvsweep._kernels_np` operation-for-operation (same arithmetic in
the same order) so both backends produce bit-identical arrays. Compiled
with FP contraction disabled to keep float semantics aligned with numpy.
"""
import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

NAME = "cython"

ctypedef fused floating:
    float
    double


def conv_out_size(size, kernel, stride, pad):
    return (size + 2 * pad - kernel) // stride + 1


def im2col(x, int kh, int kw, int stride, int ph, int pw):
    """Unfold (n, c, h, w) into (n, c*kh*kw, oh*ow) patch columns."""
    xc = np.ascontiguousarray(x)
    if xc.dtype == np.float32:
        return _im2col[float](xc, kh, kw, stride, ph, pw)
    return _im2col[double](xc, kh, kw, stride, ph, pw)


def col2im(cols, int h, int w, int kh, int kw, int stride, int ph, int pw):
    """Scatter-add patch columns back onto the (n, c, h, w) image grid."""
    cc = np.ascontiguousarray(cols)
    if cc.dtype == np.float32:
        return _col2im[float](cc, h, w, kh, kw, stride, ph, pw)
    return _col2im[double](cc, h, w, kh, kw, stride, ph, pw)


def warp_bilinear(img, hmat):
    """Warp (c, h, w) image by a 3x3 pixel homography, bilinear sampling."""
    ic = np.ascontiguousarray(img)
    if ic.dtype == np.float32:
        return _warp_bilinear[float](ic, np.ascontiguousarray(hmat, dtype=np.float32))
    return _warp_bilinear[double](ic, np.ascontiguousarray(hmat, dtype=np.float64))


cdef inline Py_ssize_t _imax(Py_ssize_t a, Py_ssize_t b) nogil:
    return a if a > b else b


cdef inline Py_ssize_t _imin(Py_ssize_t a, Py_ssize_t b) nogil:
    return a if a < b else b


cdef inline Py_ssize_t _ceil_div(Py_ssize_t a, Py_ssize_t b) nogil:
    # ceiling division for positive b and any a
    if a <= 0:
        return 0
    return (a + b - 1) // b


cdef _im2col(floating[:, :, :, ::1] x, int kh, int kw, int stride, int ph, int pw):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = (h + 2 * ph - kh) // stride + 1
    cdef Py_ssize_t ow = (w + 2 * pw - kw) // stride + 1
    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out_arr = np.empty((n, c * kh * kw, oh * ow), dtype=dtype)
    cdef floating[:, :, ::1] cols = out_arr
    cdef Py_ssize_t b, ch, ki, kj, oy, ox, iy, row, base
    cdef Py_ssize_t oy_lo, oy_hi, ox_lo, ox_hi
    cdef const floating * src
    cdef floating * dst
    with nogil:
        for b in range(n):
            for ch in range(c):
                for ki in range(kh):
                    # rows with iy = oy*stride - ph + ki inside [0, h)
                    oy_lo = _ceil_div(ph - ki, stride)
                    oy_hi = _imin(oh, _ceil_div(h + ph - ki, stride))
                    for kj in range(kw):
                        row = (ch * kh + ki) * kw + kj
                        ox_lo = _ceil_div(pw - kj, stride)
                        ox_hi = _imin(ow, _ceil_div(w + pw - kj, stride))
                        dst = &cols[b, row, 0]
                        for oy in range(oh):
                            base = oy * ow
                            if oy < oy_lo or oy >= oy_hi:
                                for ox in range(ow):
                                    dst[base + ox] = 0.0
                                continue
                            iy = oy * stride - ph + ki
                            src = &x[b, ch, iy, 0]
                            for ox in range(ox_lo):
                                dst[base + ox] = 0.0
                            for ox in range(ox_lo, ox_hi):
                                dst[base + ox] = src[ox * stride - pw + kj]
                            for ox in range(ox_hi, ow):
                                dst[base + ox] = 0.0
    return out_arr


cdef _col2im(floating[:, :, ::1] cols, int h, int w, int kh, int kw,
             int stride, int ph, int pw):
    cdef Py_ssize_t n = cols.shape[0]
    cdef Py_ssize_t c = cols.shape[1] // (kh * kw)
    cdef Py_ssize_t oh = (h + 2 * ph - kh) // stride + 1
    cdef Py_ssize_t ow = (w + 2 * pw - kw) // stride + 1
    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out_arr = np.zeros((n, c, h, w), dtype=dtype)
    cdef floating[:, :, :, ::1] xg = out_arr
    cdef Py_ssize_t b, ch, ki, kj, oy, ox, iy, row, base
    cdef Py_ssize_t oy_lo, oy_hi, ox_lo, ox_hi
    cdef const floating * src
    cdef floating * dst
    with nogil:
        for b in range(n):
            for ch in range(c):
                for ki in range(kh):
                    oy_lo = _ceil_div(ph - ki, stride)
                    oy_hi = _imin(oh, _ceil_div(h + ph - ki, stride))
                    for kj in range(kw):
                        row = (ch * kh + ki) * kw + kj
                        ox_lo = _ceil_div(pw - kj, stride)
                        ox_hi = _imin(ow, _ceil_div(w + pw - kj, stride))
                        src = &cols[b, row, 0]
                        for oy in range(oy_lo, oy_hi):
                            iy = oy * stride - ph + ki
                            base = oy * ow
                            dst = &xg[b, ch, iy, 0]
                            for ox in range(ox_lo, ox_hi):
                                dst[ox * stride - pw + kj] += src[base + ox]
    return out_arr


cdef _warp_bilinear(floating[:, :, ::1] img, floating[:, ::1] hm):
    cdef Py_ssize_t c = img.shape[0], h = img.shape[1], w = img.shape[2]
    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out_arr = np.empty((c, h, w), dtype=dtype)
    valid_arr = np.empty((h, w), dtype=np.bool_)
    cdef floating[:, :, ::1] out = out_arr
    cdef cnp.uint8_t[:, ::1] valid = valid_arr.view(np.uint8)
    cdef floating h00 = hm[0, 0], h01 = hm[0, 1], h02 = hm[0, 2]
    cdef floating h10 = hm[1, 0], h11 = hm[1, 1], h12 = hm[1, 2]
    cdef floating h20 = hm[2, 0], h21 = hm[2, 1], h22 = hm[2, 2]
    cdef floating wm1 = <floating>(w - 1.0), hm1 = <floating>(h - 1.0)
    cdef floating wm2 = <floating>(w - 2.0), hm2 = <floating>(h - 2.0)
    cdef Py_ssize_t y, x, ch, x0, y0, stride_c = h * w
    cdef floating qx, qy, qz, u, v, x0f, y0f, fx, fy
    cdef const floating * plane
    cdef bint ok
    with nogil:
        for y in range(h):
            for x in range(w):
                qx = h00 * x + h01 * y + h02
                qy = h10 * x + h11 * y + h12
                qz = h20 * x + h21 * y + h22
                ok = qz > 1e-12
                if not ok:
                    qz = 1.0
                u = qx / qz
                v = qy / qz
                ok = ok and u >= 0.0 and u <= wm1 and v >= 0.0 and v <= hm1
                valid[y, x] = ok
                if not ok:
                    for ch in range(c):
                        out[ch, y, x] = 0.0
                    continue
                x0f = _clipf(_floorf(u), <floating>0.0, wm2)
                y0f = _clipf(_floorf(v), <floating>0.0, hm2)
                fx = u - x0f
                fy = v - y0f
                x0 = <Py_ssize_t>x0f
                y0 = <Py_ssize_t>y0f
                plane = &img[0, y0, x0]
                for ch in range(c):
                    out[ch, y, x] = ((<floating>1.0 - fy) * ((<floating>1.0 - fx) * plane[0] + fx * plane[1])
                                     + fy * ((<floating>1.0 - fx) * plane[w] + fx * plane[w + 1]))
                    plane += stride_c
    return out_arr, valid_arr


cdef inline floating _floorf(floating v) nogil:
    cdef floating f = <floating><long long>v
    if f > v:
        f -= 1.0
    return f


cdef inline floating _clipf(floating v, floating lo, floating hi) nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v
