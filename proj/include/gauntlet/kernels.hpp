#pragma once

#include <cstdint>
#include <string>

namespace gauntlet::kernels {

// Raw arithmetic kernels behind the layer backward/forward passes. Two
// implementations ship: a scalar reference and an AVX2 variant selected at
// runtime. Both accumulate every output element in exactly the same order
// (vectorization runs across independent output channels, never across a
// reduction axis), so they are bit-identical; the equivalence suite asserts
// this on random inputs.
struct Ops {
    // out[oy][ox][co] = bias[co] + sum_{ky,kx,ci} in[iy][ix][ci] * ker[ky][kx][ci][co]
    // with iy = oy*stride + ky - pad (out-of-range taps skipped).
    void (*conv2d_fwd)(const float* in, int h, int w, int cin,
                       const float* ker, int k, int cout,
                       const float* bias, int stride, int pad,
                       float* out, int oh, int ow);

    // gin accumulation ordered over (oy, ox, ky, kx, co) ascending.
    // ker_t is the kernel transposed to [ky][kx][co][ci].
    void (*conv2d_bwd_input)(const float* gout, int oh, int ow, int cout,
                             const float* ker_t, int k, int cin,
                             int stride, int pad,
                             float* gin, int h, int w);

    // gker[ky][kx][ci][co] += in[iy][ix][ci] * gout[oy][ox][co]; gbias[co] += gout.
    void (*conv2d_bwd_params)(const float* in, int h, int w, int cin,
                              const float* gout, int oh, int ow, int cout,
                              int k, int stride, int pad,
                              float* gker, float* gbias);

    // y[m] = b[m] + sum_i x[i] * w[i*m_dim + m]
    void (*dense_fwd)(const float* x, int n, const float* w, const float* b,
                      float* y, int m);

    // gin[i] = sum_j gout[j] * w_t[j*n + i]   (w_t is w transposed to [m][n])
    void (*dense_bwd_input)(const float* gout, int m, const float* w_t,
                            float* gin, int n);

    void (*dense_bwd_params)(const float* x, int n, const float* gout, int m,
                             float* gw, float* gb);

    // 2x2 stride-2 max pooling; idx records the winning quadrant (0..3),
    // first strict maximum wins ties.
    void (*maxpool2_fwd)(const float* in, int h, int w, int c,
                         float* out, uint8_t* idx);
    void (*maxpool2_bwd)(const float* gout, int oh, int ow, int c,
                         const uint8_t* idx, float* gin, int h, int w);

    void (*relu_fwd)(const float* x, float* y, int64_t n);
    void (*relu_bwd)(const float* x, const float* gout, float* gin, int64_t n);

    void (*axpy)(float a, const float* x, float* y, int64_t n);
    void (*scale)(float a, float* x, int64_t n);
    void (*clip01)(float* x, int64_t n);

    // x = x0 + clamp(x - x0, -eps, eps), the L-inf ball projection.
    void (*project_linf)(float* x, const float* x0, float eps, int64_t n);

    // Adam update with precomputed bias corrections bc1 = 1/(1-b1^t), bc2 likewise.
    void (*adam)(float* w, const float* g, float* m, float* v, int64_t n,
                 float lr, float b1, float b2, float eps, float bc1, float bc2);
};

enum class Backend { scalar, avx2 };

const Ops& scalar_ops();
bool avx2_available();          // compiled in and supported by this CPU
const Ops& avx2_ops();          // valid only if avx2_available()

// Active table. Default: AVX2 when available, otherwise scalar; the
// GAUNTLET_KERNELS environment variable ("scalar", "avx2", "auto") overrides.
const Ops& ops();
Backend active_backend();
void set_backend(Backend b);    // throws if the backend is unavailable
std::string backend_name(Backend b);

}  // namespace gauntlet::kernels
