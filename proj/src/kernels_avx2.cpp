// AVX2 kernel variants. Vector lanes always run across independent output
// elements (output channels, dense outputs, pixels); reductions keep the
// scalar tap order, so every result is bit-identical to the reference
// kernels. Multiply and add stay separate instructions (no FMA), matching
// the scalar arithmetic under -ffp-contract=off.

#if defined(__AVX2__)

#include <immintrin.h>

#include <cmath>
#include <cstdint>

#include "gauntlet/kernels.hpp"

namespace gauntlet::kernels {
namespace {

inline void accum_axpy(float a, const float* x, float* y, int n) {
    const __m256 va = _mm256_set1_ps(a);
    int j = 0;
    for (; j + 8 <= n; j += 8) {
        const __m256 vy = _mm256_loadu_ps(y + j);
        const __m256 vx = _mm256_loadu_ps(x + j);
        _mm256_storeu_ps(y + j, _mm256_add_ps(vy, _mm256_mul_ps(va, vx)));
    }
    for (; j < n; ++j) y[j] += a * x[j];
}

void conv2d_fwd_avx2(const float* in, int h, int w, int cin,
                     const float* ker, int k, int cout,
                     const float* bias, int stride, int pad,
                     float* out, int oh, int ow) {
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            float* o = out + (static_cast<int64_t>(oy) * ow + ox) * cout;
            for (int co = 0; co < cout; ++co) o[co] = bias[co];
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * stride + ky - pad;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride + kx - pad;
                    if (ix < 0 || ix >= w) continue;
                    const float* ip = in + (static_cast<int64_t>(iy) * w + ix) * cin;
                    const float* kp = ker + ((static_cast<int64_t>(ky) * k + kx) * cin) * cout;
                    for (int ci = 0; ci < cin; ++ci)
                        accum_axpy(ip[ci], kp + static_cast<int64_t>(ci) * cout, o, cout);
                }
            }
        }
    }
}

void conv2d_bwd_input_avx2(const float* gout, int oh, int ow, int cout,
                           const float* ker_t, int k, int cin,
                           int stride, int pad,
                           float* gin, int h, int w) {
    for (int64_t i = 0; i < static_cast<int64_t>(h) * w * cin; ++i) gin[i] = 0.0f;
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const float* g = gout + (static_cast<int64_t>(oy) * ow + ox) * cout;
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * stride + ky - pad;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride + kx - pad;
                    if (ix < 0 || ix >= w) continue;
                    float* gi = gin + (static_cast<int64_t>(iy) * w + ix) * cin;
                    const float* kt = ker_t + ((static_cast<int64_t>(ky) * k + kx) * cout) * cin;
                    for (int co = 0; co < cout; ++co)
                        accum_axpy(g[co], kt + static_cast<int64_t>(co) * cin, gi, cin);
                }
            }
        }
    }
}

void conv2d_bwd_params_avx2(const float* in, int h, int w, int cin,
                            const float* gout, int oh, int ow, int cout,
                            int k, int stride, int pad,
                            float* gker, float* gbias) {
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const float* g = gout + (static_cast<int64_t>(oy) * ow + ox) * cout;
            accum_axpy(1.0f, g, gbias, cout);
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * stride + ky - pad;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride + kx - pad;
                    if (ix < 0 || ix >= w) continue;
                    const float* ip = in + (static_cast<int64_t>(iy) * w + ix) * cin;
                    float* kp = gker + ((static_cast<int64_t>(ky) * k + kx) * cin) * cout;
                    for (int ci = 0; ci < cin; ++ci)
                        accum_axpy(ip[ci], g, kp + static_cast<int64_t>(ci) * cout, cout);
                }
            }
        }
    }
}

void dense_fwd_avx2(const float* x, int n, const float* w, const float* b,
                    float* y, int m) {
    for (int j = 0; j < m; ++j) y[j] = b[j];
    for (int i = 0; i < n; ++i)
        accum_axpy(x[i], w + static_cast<int64_t>(i) * m, y, m);
}

void dense_bwd_input_avx2(const float* gout, int m, const float* w_t,
                          float* gin, int n) {
    for (int i = 0; i < n; ++i) gin[i] = 0.0f;
    for (int j = 0; j < m; ++j)
        accum_axpy(gout[j], w_t + static_cast<int64_t>(j) * n, gin, n);
}

void dense_bwd_params_avx2(const float* x, int n, const float* gout, int m,
                           float* gw, float* gb) {
    accum_axpy(1.0f, gout, gb, m);
    for (int i = 0; i < n; ++i)
        accum_axpy(x[i], gout, gw + static_cast<int64_t>(i) * m, m);
}

void maxpool2_fwd_avx2(const float* in, int h, int w, int c,
                       float* out, uint8_t* idx) {
    const int oh = h / 2, ow = w / 2;
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const int64_t obase = (static_cast<int64_t>(oy) * ow + ox) * c;
            const float* p00 = in + ((static_cast<int64_t>(2 * oy) * w) + 2 * ox) * c;
            const float* quad[4] = {p00, p00 + c, p00 + static_cast<int64_t>(w) * c,
                                    p00 + static_cast<int64_t>(w) * c + c};
            int ch = 0;
            for (; ch + 8 <= c; ch += 8) {
                __m256 best = _mm256_loadu_ps(quad[0] + ch);
                __m256i bi = _mm256_setzero_si256();
                for (int q = 1; q < 4; ++q) {
                    const __m256 v = _mm256_loadu_ps(quad[q] + ch);
                    const __m256 gt = _mm256_cmp_ps(v, best, _CMP_GT_OQ);
                    best = _mm256_blendv_ps(best, v, gt);
                    bi = _mm256_blendv_epi8(bi, _mm256_set1_epi32(q),
                                            _mm256_castps_si256(gt));
                }
                _mm256_storeu_ps(out + obase + ch, best);
                alignas(32) int32_t lanes[8];
                _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), bi);
                for (int l = 0; l < 8; ++l)
                    idx[obase + ch + l] = static_cast<uint8_t>(lanes[l]);
            }
            for (; ch < c; ++ch) {
                float best = quad[0][ch];
                uint8_t b = 0;
                for (uint8_t q = 1; q < 4; ++q) {
                    const float v = quad[q][ch];
                    if (v > best) {
                        best = v;
                        b = q;
                    }
                }
                out[obase + ch] = best;
                idx[obase + ch] = b;
            }
        }
    }
}

void maxpool2_bwd_avx2(const float* gout, int oh, int ow, int c,
                       const uint8_t* idx, float* gin, int h, int w) {
    // Scatter with one write per output element; nothing to vectorize safely.
    for (int64_t i = 0; i < static_cast<int64_t>(h) * w * c; ++i) gin[i] = 0.0f;
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const int64_t obase = (static_cast<int64_t>(oy) * ow + ox) * c;
            for (int ch = 0; ch < c; ++ch) {
                const uint8_t q = idx[obase + ch];
                const int iy = 2 * oy + (q >> 1);
                const int ix = 2 * ox + (q & 1);
                gin[(static_cast<int64_t>(iy) * w + ix) * c + ch] += gout[obase + ch];
            }
        }
    }
}

void relu_fwd_avx2(const float* x, float* y, int64_t n) {
    const __m256 zero = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_avx2(const float* x, const float* gout, float* gin, int64_t n) {
    const __m256 zero = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 gt = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        _mm256_storeu_ps(gin + i, _mm256_and_ps(_mm256_loadu_ps(gout + i), gt));
    }
    for (; i < n; ++i) gin[i] = x[i] > 0.0f ? gout[i] : 0.0f;
}

void axpy_avx2(float a, const float* x, float* y, int64_t n) {
    const __m256 va = _mm256_set1_ps(a);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 vy = _mm256_loadu_ps(y + i);
        _mm256_storeu_ps(y + i, _mm256_add_ps(vy, _mm256_mul_ps(va, _mm256_loadu_ps(x + i))));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(float a, float* x, int64_t n) {
    const __m256 va = _mm256_set1_ps(a);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(x + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void clip01_avx2(float* x, int64_t n) {
    const __m256 zero = _mm256_setzero_ps();
    const __m256 one = _mm256_set1_ps(1.0f);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 v = _mm256_loadu_ps(x + i);
        v = _mm256_min_ps(_mm256_max_ps(v, zero), one);
        _mm256_storeu_ps(x + i, v);
    }
    for (; i < n; ++i) {
        float v = x[i];
        v = v > 0.0f ? v : 0.0f;
        x[i] = v < 1.0f ? v : 1.0f;
    }
}

void project_linf_avx2(float* x, const float* x0, float eps, int64_t n) {
    const __m256 vp = _mm256_set1_ps(eps);
    const __m256 vn = _mm256_set1_ps(-eps);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 c = _mm256_loadu_ps(x0 + i);
        __m256 d = _mm256_sub_ps(_mm256_loadu_ps(x + i), c);
        d = _mm256_min_ps(_mm256_max_ps(d, vn), vp);
        _mm256_storeu_ps(x + i, _mm256_add_ps(c, d));
    }
    for (; i < n; ++i) {
        float d = x[i] - x0[i];
        d = d > -eps ? d : -eps;
        d = d < eps ? d : eps;
        x[i] = x0[i] + d;
    }
}

void adam_avx2(float* w, const float* g, float* m, float* v, int64_t n,
               float lr, float b1, float b2, float eps, float bc1, float bc2) {
    const __m256 vb1 = _mm256_set1_ps(b1);
    const __m256 vb2 = _mm256_set1_ps(b2);
    const __m256 v1mb1 = _mm256_set1_ps(1.0f - b1);
    const __m256 v1mb2 = _mm256_set1_ps(1.0f - b2);
    const __m256 vlr = _mm256_set1_ps(lr);
    const __m256 veps = _mm256_set1_ps(eps);
    const __m256 vbc1 = _mm256_set1_ps(bc1);
    const __m256 vbc2 = _mm256_set1_ps(bc2);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 vg = _mm256_loadu_ps(g + i);
        __m256 vm = _mm256_loadu_ps(m + i);
        __m256 vv = _mm256_loadu_ps(v + i);
        vm = _mm256_add_ps(_mm256_mul_ps(vb1, vm), _mm256_mul_ps(v1mb1, vg));
        vv = _mm256_add_ps(_mm256_mul_ps(vb2, vv),
                           _mm256_mul_ps(v1mb2, _mm256_mul_ps(vg, vg)));
        _mm256_storeu_ps(m + i, vm);
        _mm256_storeu_ps(v + i, vv);
        const __m256 mhat = _mm256_mul_ps(vm, vbc1);
        const __m256 vhat = _mm256_mul_ps(vv, vbc2);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), veps);
        const __m256 step = _mm256_mul_ps(vlr, _mm256_div_ps(mhat, denom));
        _mm256_storeu_ps(w + i, _mm256_sub_ps(_mm256_loadu_ps(w + i), step));
    }
    for (; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0f - b1) * g[i];
        v[i] = b2 * v[i] + (1.0f - b2) * (g[i] * g[i]);
        const float mhat = m[i] * bc1;
        const float vhat = v[i] * bc2;
        w[i] -= lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

}  // namespace

const Ops& avx2_ops() {
    static const Ops table = {
        conv2d_fwd_avx2,    conv2d_bwd_input_avx2, conv2d_bwd_params_avx2,
        dense_fwd_avx2,     dense_bwd_input_avx2,  dense_bwd_params_avx2,
        maxpool2_fwd_avx2,  maxpool2_bwd_avx2,     relu_fwd_avx2,
        relu_bwd_avx2,      axpy_avx2,             scale_avx2,
        clip01_avx2,        project_linf_avx2,     adam_avx2,
    };
    return table;
}

}  // namespace gauntlet::kernels

#endif  // __AVX2__
