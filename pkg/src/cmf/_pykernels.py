"""Pure numpy versions of the compiled kernels.

Same signatures and output conventions as ``_native``. Convolutions reduce in
double precision through BLAS, so results agree with the compiled path to
rounding but not bit for bit.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from threadpoolctl import threadpool_limits

# bound on the im2col buffer per chunk (float64 elements)
_CHUNK_ELEMS = 1 << 25


def conv3d(x, weights, bias, stride, padding, num_threads=1):
    co, ci, kd, kh, kw = weights.shape
    sd, sh, sw = stride
    pd, ph, pw = padding
    _, d, h, w = x.shape
    do = (d + 2 * pd - kd) // sd + 1
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (w + 2 * pw - kw) // sw + 1
    out = np.empty((co, do, ho, wo), dtype=np.float32)
    if out.size == 0:
        return out
    xp = np.pad(x.astype(np.float64), ((0, 0), (pd, pd), (ph, ph), (pw, pw)))
    wmat = weights.reshape(co, -1).astype(np.float64)
    per_slice = ci * kd * kh * kw * ho * wo
    step = max(1, _CHUNK_ELEMS // max(per_slice, 1))
    with threadpool_limits(limits=num_threads, user_api="blas"):
        for o0 in range(0, do, step):
            o1 = min(do, o0 + step)
            sub = xp[:, o0 * sd:(o1 - 1) * sd + kd]
            win = sliding_window_view(sub, (kd, kh, kw), axis=(1, 2, 3))[:, ::sd, ::sh, ::sw]
            # win: [ci, n, ho, wo, kd, kh, kw] -> columns [ci*kd*kh*kw, n*ho*wo]
            cols = np.ascontiguousarray(win.transpose(0, 4, 5, 6, 1, 2, 3)).reshape(ci * kd * kh * kw, -1)
            res = wmat @ cols
            res += bias.astype(np.float64)[:, None]
            out[:, o0:o1] = res.reshape(co, o1 - o0, ho, wo)
    return out


def conv_transpose3d(x, weights, bias, stride, padding, num_threads=1):
    co, ci, kd, kh, kw = weights.shape
    sd, sh, sw = stride
    pd, ph, pw = padding
    _, d, h, w = x.shape
    fd, fh, fw = (d - 1) * sd + kd, (h - 1) * sh + kh, (w - 1) * sw + kw
    do, ho, wo = fd - 2 * pd, fh - 2 * ph, fw - 2 * pw
    if min(do, ho, wo) <= 0:
        return np.empty((co, max(do, 0), max(ho, 0), max(wo, 0)), dtype=np.float32)
    full = np.zeros((co, fd, fh, fw), dtype=np.float64)
    xm = x.reshape(ci, -1).astype(np.float64)
    w64 = weights.astype(np.float64)
    with threadpool_limits(limits=num_threads, user_api="blas"):
        for a in range(kd):
            for b in range(kh):
                for c in range(kw):
                    contrib = (w64[:, :, a, b, c] @ xm).reshape(co, d, h, w)
                    full[:, a:a + (d - 1) * sd + 1:sd, b:b + (h - 1) * sh + 1:sh,
                         c:c + (w - 1) * sw + 1:sw] += contrib
    out = full[:, pd:pd + do, ph:ph + ho, pw:pw + wo] + bias.astype(np.float64)[:, None, None, None]
    return out.astype(np.float32)


def _bilerp(src, gx, gy):
    _, h, w = src.shape
    x0 = np.floor(gx).astype(np.intp)
    y0 = np.floor(gy).astype(np.intp)
    fx = gx - x0
    fy = gy - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    s = src.astype(np.float64)
    top = (1.0 - fx) * s[:, y0, x0] + fx * s[:, y0, x1]
    bot = (1.0 - fx) * s[:, y1, x0] + fx * s[:, y1, x1]
    return (1.0 - fy) * top + fy * bot


def bilinear_sample(src, gx, gy, valid, num_threads=1):
    c = src.shape[0]
    out = np.zeros((c,) + gx.shape, dtype=np.float32)
    mask = valid.astype(bool)
    if mask.any():
        out[:, mask] = _bilerp(src, gx[mask], gy[mask]).astype(np.float32)
    return out


def sweep_abs_diff(src, tgt, gx, gy, valid, num_threads=1):
    n = gx.shape[0]
    c, h, w = src.shape
    out = np.empty((n, c, h, w), dtype=np.float32)
    for d in range(n):
        warped = bilinear_sample(src, gx[d], gy[d], valid[d])
        diff = np.abs(warped - tgt)
        diff[:, ~valid[d].astype(bool)] = -1.0
        out[d] = diff
    return out
