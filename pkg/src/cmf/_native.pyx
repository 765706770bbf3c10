# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the hot loops.

Convolutions parallelize over output rows (od, oh); every output element is
reduced by exactly one thread in a fixed order, so results do not depend on
the thread count. Shape validation happens in the Python callers.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.stdlib cimport malloc, free
from libc.math cimport floor

cnp.import_array()

cdef extern from "_kernels.h" nogil:
    void cmf_conv3d_row(const float *x, Py_ssize_t D, Py_ssize_t H, Py_ssize_t W,
                        const double *wt, Py_ssize_t Ci, Py_ssize_t KD, Py_ssize_t KH,
                        Py_ssize_t KW, Py_ssize_t Co, Py_ssize_t od, Py_ssize_t oh, Py_ssize_t Wo,
                        Py_ssize_t sd, Py_ssize_t sh, Py_ssize_t sw,
                        Py_ssize_t pd, Py_ssize_t ph, Py_ssize_t pw, double *out)
    void cmf_tconv3d_row(const float *x, Py_ssize_t D, Py_ssize_t H, Py_ssize_t W,
                         const double *wt, Py_ssize_t Ci, Py_ssize_t KD, Py_ssize_t KH,
                         Py_ssize_t KW, Py_ssize_t Co, Py_ssize_t od, Py_ssize_t oh, Py_ssize_t Wo,
                         Py_ssize_t sd, Py_ssize_t sh, Py_ssize_t sw,
                         Py_ssize_t pd, Py_ssize_t ph, Py_ssize_t pw, double *out)


def _repack(w):
    # [Co, Ci, kd, kh, kw] -> [Ci, kd, kh, kw, Co], co contiguous
    return np.ascontiguousarray(np.moveaxis(np.asarray(w, dtype=np.float64), 0, -1))


cdef object _run(bint transposed, const float[:, :, :, ::1] x, weights,
                 const float[::1] bias, stride, padding, int num_threads):
    cdef Py_ssize_t Co = weights.shape[0], Ci = weights.shape[1]
    cdef Py_ssize_t KD = weights.shape[2], KH = weights.shape[3], KW = weights.shape[4]
    cdef Py_ssize_t D = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t sd = stride[0], sh = stride[1], sw = stride[2]
    cdef Py_ssize_t pd = padding[0], ph = padding[1], pw = padding[2]
    cdef Py_ssize_t Do, Ho, Wo
    if transposed:
        Do = (D - 1) * sd - 2 * pd + KD
        Ho = (H - 1) * sh - 2 * ph + KH
        Wo = (W - 1) * sw - 2 * pw + KW
    else:
        Do = (D + 2 * pd - KD) // sd + 1
        Ho = (H + 2 * ph - KH) // sh + 1
        Wo = (W + 2 * pw - KW) // sw + 1
    out = np.empty((Co, Do, Ho, Wo), dtype=np.float32)
    if out.size == 0:
        return out
    cdef const double[:, :, :, :, ::1] wt = _repack(weights)
    cdef float[:, :, :, ::1] y = out
    cdef Py_ssize_t row, od, oh, ow, co
    cdef double *buf
    for row in prange(Do * Ho, nogil=True, num_threads=num_threads, schedule='static'):
        od = row // Ho
        oh = row % Ho
        buf = <double *> malloc(Wo * Co * sizeof(double))
        if transposed:
            cmf_tconv3d_row(&x[0, 0, 0, 0], D, H, W, &wt[0, 0, 0, 0, 0], Ci, KD, KH, KW, Co,
                            od, oh, Wo, sd, sh, sw, pd, ph, pw, buf)
        else:
            cmf_conv3d_row(&x[0, 0, 0, 0], D, H, W, &wt[0, 0, 0, 0, 0], Ci, KD, KH, KW, Co,
                           od, oh, Wo, sd, sh, sw, pd, ph, pw, buf)
        for co in range(Co):
            for ow in range(Wo):
                y[co, od, oh, ow] = <float> (buf[ow * Co + co] + bias[co])
        free(buf)
    return out


def conv3d(const float[:, :, :, ::1] x, weights, const float[::1] bias,
           stride, padding, int num_threads=1):
    return _run(False, x, weights, bias, stride, padding, num_threads)


def conv_transpose3d(const float[:, :, :, ::1] x, weights, const float[::1] bias,
                     stride, padding, int num_threads=1):
    return _run(True, x, weights, bias, stride, padding, num_threads)


cdef inline double _bilerp(const float[:, :, ::1] src, Py_ssize_t c, double x, double y,
                           Py_ssize_t H, Py_ssize_t W) noexcept nogil:
    cdef Py_ssize_t x0 = <Py_ssize_t> floor(x)
    cdef Py_ssize_t y0 = <Py_ssize_t> floor(y)
    cdef double fx = x - x0
    cdef double fy = y - y0
    cdef Py_ssize_t x1 = x0 + 1
    cdef Py_ssize_t y1 = y0 + 1
    if x1 > W - 1:
        x1 = W - 1
    if y1 > H - 1:
        y1 = H - 1
    cdef double top = (1.0 - fx) * src[c, y0, x0] + fx * src[c, y0, x1]
    cdef double bot = (1.0 - fx) * src[c, y1, x0] + fx * src[c, y1, x1]
    return (1.0 - fy) * top + fy * bot


def bilinear_sample(const float[:, :, ::1] src, const double[:, ::1] gx,
                    const double[:, ::1] gy, const cnp.uint8_t[:, ::1] valid,
                    int num_threads=1):
    cdef Py_ssize_t C = src.shape[0], H = src.shape[1], W = src.shape[2]
    cdef Py_ssize_t Ho = gx.shape[0], Wo = gx.shape[1]
    out = np.zeros((C, Ho, Wo), dtype=np.float32)
    cdef float[:, :, ::1] y = out
    cdef Py_ssize_t v, u, c
    for v in prange(Ho, nogil=True, num_threads=num_threads, schedule='static'):
        for u in range(Wo):
            if not valid[v, u]:
                continue
            for c in range(C):
                y[c, v, u] = <float> _bilerp(src, c, gx[v, u], gy[v, u], H, W)
    return out


def sweep_abs_diff(const float[:, :, ::1] src, const float[:, :, ::1] tgt,
                   const double[:, :, ::1] gx, const double[:, :, ::1] gy,
                   const cnp.uint8_t[:, :, ::1] valid, int num_threads=1):
    """Fused warp and |warped - target| for every depth plane.

    Invalid entries are written as -1.0; the caller replaces them with its
    sentinel cost.
    """
    cdef Py_ssize_t C = src.shape[0], H = src.shape[1], W = src.shape[2]
    cdef Py_ssize_t Dn = gx.shape[0]
    out = np.empty((Dn, C, H, W), dtype=np.float32)
    cdef float[:, :, :, ::1] y = out
    cdef Py_ssize_t row, d, v, u, c
    cdef float w, t
    for row in prange(Dn * H, nogil=True, num_threads=num_threads, schedule='static'):
        d = row // H
        v = row % H
        for u in range(W):
            if not valid[d, v, u]:
                for c in range(C):
                    y[d, c, v, u] = -1.0
                continue
            for c in range(C):
                w = <float> _bilerp(src, c, gx[d, v, u], gy[d, v, u], H, W)
                t = tgt[c, v, u]
                y[d, c, v, u] = w - t if w >= t else t - w
    return out
