#include <cmath>
#include <cstdint>

#include "gauntlet/kernels.hpp"

// Reference kernels. Plain loops, one multiply and one add per tap, no FMA;
// the AVX2 variants reproduce this arithmetic lane-for-lane.

namespace gauntlet::kernels {
namespace {

void conv2d_fwd_scalar(const float* in, int h, int w, int cin,
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
                    for (int ci = 0; ci < cin; ++ci) {
                        const float v = ip[ci];
                        const float* kc = kp + static_cast<int64_t>(ci) * cout;
                        for (int co = 0; co < cout; ++co) o[co] += v * kc[co];
                    }
                }
            }
        }
    }
}

void conv2d_bwd_input_scalar(const float* gout, int oh, int ow, int cout,
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
                    for (int co = 0; co < cout; ++co) {
                        const float gv = g[co];
                        const float* kc = kt + static_cast<int64_t>(co) * cin;
                        for (int ci = 0; ci < cin; ++ci) gi[ci] += gv * kc[ci];
                    }
                }
            }
        }
    }
}

void conv2d_bwd_params_scalar(const float* in, int h, int w, int cin,
                              const float* gout, int oh, int ow, int cout,
                              int k, int stride, int pad,
                              float* gker, float* gbias) {
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const float* g = gout + (static_cast<int64_t>(oy) * ow + ox) * cout;
            for (int co = 0; co < cout; ++co) gbias[co] += g[co];
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * stride + ky - pad;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride + kx - pad;
                    if (ix < 0 || ix >= w) continue;
                    const float* ip = in + (static_cast<int64_t>(iy) * w + ix) * cin;
                    float* kp = gker + ((static_cast<int64_t>(ky) * k + kx) * cin) * cout;
                    for (int ci = 0; ci < cin; ++ci) {
                        const float v = ip[ci];
                        float* kc = kp + static_cast<int64_t>(ci) * cout;
                        for (int co = 0; co < cout; ++co) kc[co] += v * g[co];
                    }
                }
            }
        }
    }
}

void dense_fwd_scalar(const float* x, int n, const float* w, const float* b,
                      float* y, int m) {
    for (int j = 0; j < m; ++j) y[j] = b[j];
    for (int i = 0; i < n; ++i) {
        const float v = x[i];
        const float* wr = w + static_cast<int64_t>(i) * m;
        for (int j = 0; j < m; ++j) y[j] += v * wr[j];
    }
}

void dense_bwd_input_scalar(const float* gout, int m, const float* w_t,
                            float* gin, int n) {
    for (int i = 0; i < n; ++i) gin[i] = 0.0f;
    for (int j = 0; j < m; ++j) {
        const float g = gout[j];
        const float* wr = w_t + static_cast<int64_t>(j) * n;
        for (int i = 0; i < n; ++i) gin[i] += g * wr[i];
    }
}

void dense_bwd_params_scalar(const float* x, int n, const float* gout, int m,
                             float* gw, float* gb) {
    for (int j = 0; j < m; ++j) gb[j] += gout[j];
    for (int i = 0; i < n; ++i) {
        const float v = x[i];
        float* gr = gw + static_cast<int64_t>(i) * m;
        for (int j = 0; j < m; ++j) gr[j] += v * gout[j];
    }
}

void maxpool2_fwd_scalar(const float* in, int h, int w, int c,
                         float* out, uint8_t* idx) {
    const int oh = h / 2, ow = w / 2;
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const int64_t obase = (static_cast<int64_t>(oy) * ow + ox) * c;
            for (int ch = 0; ch < c; ++ch) {
                float best = in[((static_cast<int64_t>(2 * oy) * w) + 2 * ox) * c + ch];
                uint8_t bi = 0;
                for (uint8_t q = 1; q < 4; ++q) {
                    const int iy = 2 * oy + (q >> 1);
                    const int ix = 2 * ox + (q & 1);
                    const float v = in[(static_cast<int64_t>(iy) * w + ix) * c + ch];
                    if (v > best) {
                        best = v;
                        bi = q;
                    }
                }
                out[obase + ch] = best;
                idx[obase + ch] = bi;
            }
        }
    }
}

void maxpool2_bwd_scalar(const float* gout, int oh, int ow, int c,
                         const uint8_t* idx, float* gin, int h, int w) {
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

void relu_fwd_scalar(const float* x, float* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_scalar(const float* x, const float* gout, float* gin, int64_t n) {
    for (int64_t i = 0; i < n; ++i) gin[i] = x[i] > 0.0f ? gout[i] : 0.0f;
}

void axpy_scalar(float a, const float* x, float* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(float a, float* x, int64_t n) {
    for (int64_t i = 0; i < n; ++i) x[i] *= a;
}

// Clamp branches are written as (v > lo ? v : lo) / (v < hi ? v : hi) to
// mirror the maxps/minps selection rules exactly (including signed zeros).
void clip01_scalar(float* x, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        float v = x[i];
        v = v > 0.0f ? v : 0.0f;
        x[i] = v < 1.0f ? v : 1.0f;
    }
}

void project_linf_scalar(float* x, const float* x0, float eps, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        float d = x[i] - x0[i];
        d = d > -eps ? d : -eps;
        d = d < eps ? d : eps;
        x[i] = x0[i] + d;
    }
}

void adam_scalar(float* w, const float* g, float* m, float* v, int64_t n,
                 float lr, float b1, float b2, float eps, float bc1, float bc2) {
    for (int64_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0f - b1) * g[i];
        v[i] = b2 * v[i] + (1.0f - b2) * (g[i] * g[i]);
        const float mhat = m[i] * bc1;
        const float vhat = v[i] * bc2;
        w[i] -= lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops table = {
        conv2d_fwd_scalar,    conv2d_bwd_input_scalar, conv2d_bwd_params_scalar,
        dense_fwd_scalar,     dense_bwd_input_scalar,  dense_bwd_params_scalar,
        maxpool2_fwd_scalar,  maxpool2_bwd_scalar,     relu_fwd_scalar,
        relu_bwd_scalar,      axpy_scalar,             scale_scalar,
        clip01_scalar,        project_linf_scalar,     adam_scalar,
    };
    return table;
}

}  // namespace gauntlet::kernels
