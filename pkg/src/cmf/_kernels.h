/* Register-blocked 3D (transposed) convolution rows.
 *
 * Each output element is reduced by one call in the fixed order
 * c_in -> kd -> kh -> kw (kw innermost), accumulating in double precision.
 * Output tiles are TW positions x 16 channels held in two 8-lane vectors.
 * Channel tails (Co % 16) go through the scalar path with the same order.
 */
#ifndef CMF_KERNELS_H
#define CMF_KERNELS_H

#include <stddef.h>
#include <string.h>

typedef double cmf_v8d __attribute__((vector_size(64), aligned(8)));

#define CMF_TW 8

static void cmf_conv3d_row(const float *x, ptrdiff_t D, ptrdiff_t H, ptrdiff_t W,
                           const double *wt, ptrdiff_t Ci, ptrdiff_t KD, ptrdiff_t KH,
                           ptrdiff_t KW, ptrdiff_t Co, ptrdiff_t od, ptrdiff_t oh, ptrdiff_t Wo,
                           ptrdiff_t sd, ptrdiff_t sh, ptrdiff_t sw,
                           ptrdiff_t pd, ptrdiff_t ph, ptrdiff_t pw,
                           double *out /* Wo x Co */)
{
    ptrdiff_t co0 = 0;
    for (; co0 + 16 <= Co; co0 += 16) {
        for (ptrdiff_t ow0 = 0; ow0 < Wo; ow0 += CMF_TW) {
            ptrdiff_t nw = Wo - ow0 < CMF_TW ? Wo - ow0 : CMF_TW;
            cmf_v8d a[CMF_TW][2];
            for (int j = 0; j < CMF_TW; j++) {
                a[j][0] = (cmf_v8d){0};
                a[j][1] = (cmf_v8d){0};
            }
            for (ptrdiff_t ci = 0; ci < Ci; ci++)
            for (ptrdiff_t kd = 0; kd < KD; kd++) {
                ptrdiff_t id = od * sd - pd + kd;
                if (id < 0 || id >= D) continue;
                for (ptrdiff_t kh = 0; kh < KH; kh++) {
                    ptrdiff_t ih = oh * sh - ph + kh;
                    if (ih < 0 || ih >= H) continue;
                    const float *xrow = x + ((ci * D + id) * H + ih) * W;
                    for (ptrdiff_t kw = 0; kw < KW; kw++) {
                        const double *wp = wt + (((ci * KD + kd) * KH + kh) * KW + kw) * Co + co0;
                        cmf_v8d w0 = *(const cmf_v8d *)wp;
                        cmf_v8d w1 = *(const cmf_v8d *)(wp + 8);
                        for (int j = 0; j < CMF_TW; j++) {
                            ptrdiff_t iw = (ow0 + j) * sw - pw + kw;
                            double xv = (j < nw && iw >= 0 && iw < W) ? (double)xrow[iw] : 0.0;
                            a[j][0] += xv * w0;
                            a[j][1] += xv * w1;
                        }
                    }
                }
            }
            for (ptrdiff_t j = 0; j < nw; j++) {
                memcpy(out + (ow0 + j) * Co + co0, &a[j][0], 8 * sizeof(double));
                memcpy(out + (ow0 + j) * Co + co0 + 8, &a[j][1], 8 * sizeof(double));
            }
        }
    }
    for (; co0 < Co; co0++) {
        for (ptrdiff_t ow = 0; ow < Wo; ow++) {
            double acc = 0.0;
            for (ptrdiff_t ci = 0; ci < Ci; ci++)
            for (ptrdiff_t kd = 0; kd < KD; kd++) {
                ptrdiff_t id = od * sd - pd + kd;
                if (id < 0 || id >= D) continue;
                for (ptrdiff_t kh = 0; kh < KH; kh++) {
                    ptrdiff_t ih = oh * sh - ph + kh;
                    if (ih < 0 || ih >= H) continue;
                    const float *xrow = x + ((ci * D + id) * H + ih) * W;
                    for (ptrdiff_t kw = 0; kw < KW; kw++) {
                        ptrdiff_t iw = ow * sw - pw + kw;
                        if (iw < 0 || iw >= W) continue;
                        acc += (double)xrow[iw] * wt[(((ci * KD + kd) * KH + kh) * KW + kw) * Co + co0];
                    }
                }
            }
            out[ow * Co + co0] = acc;
        }
    }
}

/* Gather form of the transposed convolution:
 *   y[co, o] = sum_{ci, k : o = i*s - p + k} x[ci, i] * w[co, ci, k]
 * Output columns are visited by residue class r = ow mod sw so that, for a
 * contributing kw, the input column is iw = m + (r + pw - kw) / sw.
 * Contributing taps are listed once per row; the reduction order is still
 * c_in -> kd -> kh -> kw. Kernel extents are bounded by CMF_KMAX. */
#define CMF_KMAX 256

static int cmf_taps(ptrdiff_t o, ptrdiff_t p, ptrdiff_t s, ptrdiff_t K, ptrdiff_t n,
                    ptrdiff_t *k_out, ptrdiff_t *i_out)
{
    int cnt = 0;
    for (ptrdiff_t k = 0; k < K && k < CMF_KMAX; k++) {
        ptrdiff_t t = o + p - k;
        if (t < 0 || t % s != 0 || t / s >= n) continue;
        k_out[cnt] = k;
        i_out[cnt] = t / s;
        cnt++;
    }
    return cnt;
}

static void cmf_tconv3d_row(const float *x, ptrdiff_t D, ptrdiff_t H, ptrdiff_t W,
                            const double *wt, ptrdiff_t Ci, ptrdiff_t KD, ptrdiff_t KH,
                            ptrdiff_t KW, ptrdiff_t Co, ptrdiff_t od, ptrdiff_t oh, ptrdiff_t Wo,
                            ptrdiff_t sd, ptrdiff_t sh, ptrdiff_t sw,
                            ptrdiff_t pd, ptrdiff_t ph, ptrdiff_t pw,
                            double *out /* Wo x Co */)
{
    ptrdiff_t kds[CMF_KMAX], ids[CMF_KMAX], khs[CMF_KMAX], ihs[CMF_KMAX];
    ptrdiff_t kws[CMF_KMAX], bases[CMF_KMAX];
    int nkd = cmf_taps(od, pd, sd, KD, D, kds, ids);
    int nkh = cmf_taps(oh, ph, sh, KH, H, khs, ihs);
    for (ptrdiff_t r = 0; r < sw && r < Wo; r++) {
        ptrdiff_t M = (Wo - r + sw - 1) / sw;
        int nkw = 0;
        for (ptrdiff_t kw = 0; kw < KW && kw < CMF_KMAX; kw++) {
            ptrdiff_t t = r + pw - kw;
            if (((t % sw) + sw) % sw != 0) continue;
            kws[nkw] = kw;
            bases[nkw] = t / sw;
            nkw++;
        }
        ptrdiff_t co0 = 0;
        for (; co0 + 16 <= Co; co0 += 16) {
            for (ptrdiff_t m0 = 0; m0 < M; m0 += CMF_TW) {
                ptrdiff_t nm = M - m0 < CMF_TW ? M - m0 : CMF_TW;
                cmf_v8d a[CMF_TW][2];
                for (int j = 0; j < CMF_TW; j++) {
                    a[j][0] = (cmf_v8d){0};
                    a[j][1] = (cmf_v8d){0};
                }
                for (ptrdiff_t ci = 0; ci < Ci; ci++)
                for (int a_d = 0; a_d < nkd; a_d++)
                for (int a_h = 0; a_h < nkh; a_h++) {
                    const float *xrow = x + ((ci * D + ids[a_d]) * H + ihs[a_h]) * W;
                    const double *wk = wt + ((ci * KD + kds[a_d]) * KH + khs[a_h]) * KW * Co + co0;
                    for (int a_w = 0; a_w < nkw; a_w++) {
                        const double *wp = wk + kws[a_w] * Co;
                        cmf_v8d w0 = *(const cmf_v8d *)wp;
                        cmf_v8d w1 = *(const cmf_v8d *)(wp + 8);
                        ptrdiff_t base = m0 + bases[a_w];
                        for (int j = 0; j < CMF_TW; j++) {
                            ptrdiff_t iw = base + j;
                            double xv = (j < nm && iw >= 0 && iw < W) ? (double)xrow[iw] : 0.0;
                            a[j][0] += xv * w0;
                            a[j][1] += xv * w1;
                        }
                    }
                }
                for (ptrdiff_t j = 0; j < nm; j++) {
                    ptrdiff_t ow = r + (m0 + j) * sw;
                    memcpy(out + ow * Co + co0, &a[j][0], 8 * sizeof(double));
                    memcpy(out + ow * Co + co0 + 8, &a[j][1], 8 * sizeof(double));
                }
            }
        }
        for (; co0 < Co; co0++) {
            for (ptrdiff_t m = 0; m < M; m++) {
                double acc = 0.0;
                for (ptrdiff_t ci = 0; ci < Ci; ci++)
                for (int a_d = 0; a_d < nkd; a_d++)
                for (int a_h = 0; a_h < nkh; a_h++) {
                    const float *xrow = x + ((ci * D + ids[a_d]) * H + ihs[a_h]) * W;
                    for (int a_w = 0; a_w < nkw; a_w++) {
                        ptrdiff_t iw = m + bases[a_w];
                        if (iw < 0 || iw >= W) continue;
                        acc += (double)xrow[iw]
                             * wt[(((ci * KD + kds[a_d]) * KH + khs[a_h]) * KW + kws[a_w]) * Co + co0];
                    }
                }
                out[(r + m * sw) * Co + co0] = acc;
            }
        }
    }
}

#endif
