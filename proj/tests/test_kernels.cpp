#include <doctest.h>

#include <cmath>
#include <vector>

#include "gauntlet/kernels.hpp"
#include "gauntlet/nn.hpp"
#include "gauntlet/rng.hpp"
#include "gauntlet/tensor.hpp"

using namespace gauntlet;

namespace {

Tensor random_tensor(std::vector<int> dims, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(dims));
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

Tensor integer_tensor(std::vector<int> dims, Rng& rng, int lo = -4, int hi = 4) {
    Tensor t(std::move(dims));
    for (auto& v : t.data)
        v = static_cast<float>(lo + static_cast<int>(rng.below(static_cast<uint64_t>(hi - lo + 1))));
    return t;
}

// Independent quadruple-loop convolution, deliberately summing in a different
// (per-output, tap-major) order than the production kernel.
Tensor conv_oracle(const Tensor& in, const Tensor& ker, const Tensor& bias, int stride,
                   int pad) {
    const int h = in.dim(0), w = in.dim(1), cin = in.dim(2);
    const int k = ker.dim(0), cout = ker.dim(3);
    const int oh = (h + 2 * pad - k) / stride + 1;
    const int ow = (w + 2 * pad - k) / stride + 1;
    Tensor out({oh, ow, cout});
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
            for (int co = 0; co < cout; ++co) {
                double acc = bias.data[static_cast<size_t>(co)];
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx)
                        for (int ci = 0; ci < cin; ++ci) {
                            const int iy = oy * stride + ky - pad;
                            const int ix = ox * stride + kx - pad;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                            acc += static_cast<double>(in.at(iy, ix, ci)) *
                                   ker.at(ky, kx, ci, co);
                        }
                out.at(oy, ox, co) = static_cast<float>(acc);
            }
    return out;
}

struct BackendGuard {
    kernels::Backend saved;
    BackendGuard() : saved(kernels::active_backend()) {}
    ~BackendGuard() { kernels::set_backend(saved); }
};

}  // namespace

TEST_CASE("conv2d_forward basics") {
    Tensor in({1, 1, 1}, {5.0f});
    Tensor ker({1, 1, 1, 1}, {2.0f});
    Tensor bias({1}, {1.0f});
    const Tensor out = nn::conv2d_forward(in, ker, bias, 1, 0);
    CHECK(out.dims == std::vector<int>{1, 1, 1});
    CHECK(out.data[0] == 11.0f);  // 5*2 + 1

    Tensor ones_in({3, 3, 1});
    for (auto& v : ones_in.data) v = 1.0f;
    Tensor ones_ker({3, 3, 1, 1});
    for (auto& v : ones_ker.data) v = 1.0f;
    Tensor zero_bias({1});
    const Tensor nine = nn::conv2d_forward(ones_in, ones_ker, zero_bias, 1, 0);
    CHECK(nine.numel() == 1);
    CHECK(nine.data[0] == 9.0f);
}

TEST_CASE("conv2d_forward shape rule and channel mismatch error") {
    Rng rng(3);
    const Tensor in = random_tensor({7, 6, 2}, rng);
    const Tensor ker = random_tensor({3, 3, 2, 5}, rng);
    const Tensor bias = random_tensor({5}, rng);
    const Tensor out = nn::conv2d_forward(in, ker, bias, 2, 1);
    CHECK(out.dim(0) == (7 + 2 - 3) / 2 + 1);
    CHECK(out.dim(1) == (6 + 2 - 3) / 2 + 1);
    CHECK(out.dim(2) == 5);

    const Tensor bad_ker = random_tensor({3, 3, 3, 5}, rng);
    CHECK_THROWS(nn::conv2d_forward(in, bad_ker, bias, 1, 0));
}

TEST_CASE("conv2d_forward equals the quadruple-loop oracle") {
    Rng rng(11);
    // exact equality on integer-valued tensors
    for (int trial = 0; trial < 5; ++trial) {
        const Tensor in = integer_tensor({5, 5, 3}, rng);
        const Tensor ker = integer_tensor({3, 3, 3, 4}, rng);
        const Tensor bias = integer_tensor({4}, rng);
        const Tensor got = nn::conv2d_forward(in, ker, bias, 1, 0);
        const Tensor want = conv_oracle(in, ker, bias, 1, 0);
        REQUIRE(got.dims == want.dims);
        for (int64_t i = 0; i < got.numel(); ++i) CHECK(got[i] == want[i]);
    }
    // near-equality on random real tensors (oracle sums in another order)
    for (int trial = 0; trial < 5; ++trial) {
        const Tensor in = random_tensor({6, 6, 2}, rng);
        const Tensor ker = random_tensor({3, 3, 2, 3}, rng);
        const Tensor bias = random_tensor({3}, rng);
        const Tensor got = nn::conv2d_forward(in, ker, bias, 1, 1);
        const Tensor want = conv_oracle(in, ker, bias, 1, 1);
        for (int64_t i = 0; i < got.numel(); ++i)
            CHECK(std::fabs(got[i] - want[i]) < 1e-5);
    }
}

TEST_CASE("scalar and AVX2 kernels are bit-identical") {
    if (!kernels::avx2_available()) {
        MESSAGE("AVX2 unavailable; equivalence suite reduced to scalar only");
        return;
    }
    Rng rng(1234);
    const auto& s = kernels::scalar_ops();
    const auto& a = kernels::avx2_ops();

    for (int trial = 0; trial < 8; ++trial) {
        const int h = 4 + static_cast<int>(rng.below(8));
        const int w = 4 + static_cast<int>(rng.below(8));
        const int cin = 1 + static_cast<int>(rng.below(20));
        const int cout = 1 + static_cast<int>(rng.below(40));
        const int k = 3;
        const Tensor in = random_tensor({h, w, cin}, rng);
        const Tensor ker = random_tensor({k, k, cin, cout}, rng);
        const Tensor bias = random_tensor({cout}, rng);
        const int oh = h - 2, ow = w - 2;

        Tensor out_s({oh, ow, cout}), out_a({oh, ow, cout});
        s.conv2d_fwd(in.data.data(), h, w, cin, ker.data.data(), k, cout, bias.data.data(),
                     1, 0, out_s.data.data(), oh, ow);
        a.conv2d_fwd(in.data.data(), h, w, cin, ker.data.data(), k, cout, bias.data.data(),
                     1, 0, out_a.data.data(), oh, ow);
        CHECK(out_s.data == out_a.data);

        // backward input (via transposed kernel layout)
        std::vector<float> ker_t(static_cast<size_t>(k) * k * cin * cout);
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
                for (int ci = 0; ci < cin; ++ci)
                    for (int co = 0; co < cout; ++co)
                        ker_t[((static_cast<size_t>(ky) * k + kx) * cout + co) * cin + ci] =
                            ker.at(ky, kx, ci, co);
        const Tensor gout = random_tensor({oh, ow, cout}, rng);
        Tensor gin_s({h, w, cin}), gin_a({h, w, cin});
        s.conv2d_bwd_input(gout.data.data(), oh, ow, cout, ker_t.data(), k, cin, 1, 0,
                           gin_s.data.data(), h, w);
        a.conv2d_bwd_input(gout.data.data(), oh, ow, cout, ker_t.data(), k, cin, 1, 0,
                           gin_a.data.data(), h, w);
        CHECK(gin_s.data == gin_a.data);

        Tensor gker_s({k, k, cin, cout}), gker_a({k, k, cin, cout});
        Tensor gb_s({cout}), gb_a({cout});
        s.conv2d_bwd_params(in.data.data(), h, w, cin, gout.data.data(), oh, ow, cout, k,
                            1, 0, gker_s.data.data(), gb_s.data.data());
        a.conv2d_bwd_params(in.data.data(), h, w, cin, gout.data.data(), oh, ow, cout, k,
                            1, 0, gker_a.data.data(), gb_a.data.data());
        CHECK(gker_s.data == gker_a.data);
        CHECK(gb_s.data == gb_a.data);
    }

    for (int trial = 0; trial < 8; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(300));
        const int m = 1 + static_cast<int>(rng.below(100));
        const Tensor x = random_tensor({n}, rng);
        const Tensor w = random_tensor({n, m}, rng);
        const Tensor b = random_tensor({m}, rng);
        Tensor y_s({m}), y_a({m});
        s.dense_fwd(x.data.data(), n, w.data.data(), b.data.data(), y_s.data.data(), m);
        a.dense_fwd(x.data.data(), n, w.data.data(), b.data.data(), y_a.data.data(), m);
        CHECK(y_s.data == y_a.data);

        std::vector<float> w_t(static_cast<size_t>(n) * m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
                w_t[static_cast<size_t>(j) * n + i] = w.data[static_cast<size_t>(i) * m + j];
        const Tensor gout = random_tensor({m}, rng);
        Tensor gin_s({n}), gin_a({n});
        s.dense_bwd_input(gout.data.data(), m, w_t.data(), gin_s.data.data(), n);
        a.dense_bwd_input(gout.data.data(), m, w_t.data(), gin_a.data.data(), n);
        CHECK(gin_s.data == gin_a.data);

        Tensor gw_s({n, m}), gw_a({n, m}), gb_s({m}), gb_a({m});
        s.dense_bwd_params(x.data.data(), n, gout.data.data(), m, gw_s.data.data(),
                           gb_s.data.data());
        a.dense_bwd_params(x.data.data(), n, gout.data.data(), m, gw_a.data.data(),
                           gb_a.data.data());
        CHECK(gw_s.data == gw_a.data);
        CHECK(gb_s.data == gb_a.data);
    }

    for (int trial = 0; trial < 8; ++trial) {
        const int h = 2 + 2 * static_cast<int>(rng.below(6));
        const int w = 2 + 2 * static_cast<int>(rng.below(6));
        const int c = 1 + static_cast<int>(rng.below(36));
        const Tensor in = random_tensor({h, w, c}, rng);
        const int oh = h / 2, ow = w / 2;
        Tensor out_s({oh, ow, c}), out_a({oh, ow, c});
        std::vector<uint8_t> idx_s(static_cast<size_t>(oh) * ow * c);
        std::vector<uint8_t> idx_a(idx_s.size());
        s.maxpool2_fwd(in.data.data(), h, w, c, out_s.data.data(), idx_s.data());
        a.maxpool2_fwd(in.data.data(), h, w, c, out_a.data.data(), idx_a.data());
        CHECK(out_s.data == out_a.data);
        CHECK(idx_s == idx_a);

        const int64_t n = 1 + static_cast<int64_t>(rng.below(500));
        Tensor xs = random_tensor({static_cast<int>(n)}, rng, -2.0, 2.0);
        Tensor xa = xs;
        s.clip01(xs.data.data(), n);
        a.clip01(xa.data.data(), n);
        CHECK(xs.data == xa.data);

        Tensor rs({static_cast<int>(n)}), ra({static_cast<int>(n)});
        s.relu_fwd(xs.data.data(), rs.data.data(), n);
        a.relu_fwd(xs.data.data(), ra.data.data(), n);
        CHECK(rs.data == ra.data);

        Tensor base = random_tensor({static_cast<int>(n)}, rng);
        Tensor ps = random_tensor({static_cast<int>(n)}, rng, -2.0, 2.0);
        Tensor pa = ps;
        s.project_linf(ps.data.data(), base.data.data(), 0.3f, n);
        a.project_linf(pa.data.data(), base.data.data(), 0.3f, n);
        CHECK(ps.data == pa.data);

        // adam: same update from identical state
        Tensor w_s = random_tensor({static_cast<int>(n)}, rng);
        Tensor w_a = w_s;
        const Tensor g = random_tensor({static_cast<int>(n)}, rng);
        Tensor m_s({static_cast<int>(n)}), v_s({static_cast<int>(n)});
        Tensor m_a = m_s, v_a = v_s;
        s.adam(w_s.data.data(), g.data.data(), m_s.data.data(), v_s.data.data(), n,
               1e-3f, 0.9f, 0.999f, 1e-8f, 10.0f, 1000.0f);
        a.adam(w_a.data.data(), g.data.data(), m_a.data.data(), v_a.data.data(), n,
               1e-3f, 0.9f, 0.999f, 1e-8f, 10.0f, 1000.0f);
        CHECK(w_s.data == w_a.data);
        CHECK(m_s.data == m_a.data);
        CHECK(v_s.data == v_a.data);
    }
}

TEST_CASE("full model forward is backend-independent bit for bit") {
    if (!kernels::avx2_available()) return;
    BackendGuard guard;
    Rng rng(77);
    nn::Architecture arch;
    arch.conv1 = 8;
    arch.conv2 = 12;
    arch.conv3 = 12;
    arch.hidden = 24;
    const auto w = nn::ClassifierWeights::random_init(arch, 99);
    const Tensor x = random_tensor({28, 28, 1}, rng, 0.0, 1.0);

    kernels::set_backend(kernels::Backend::scalar);
    const Tensor logits_scalar = nn::model_forward(w, x);
    const auto grads_scalar = nn::loss_and_gradients(w, x, 3);
    kernels::set_backend(kernels::Backend::avx2);
    const Tensor logits_avx2 = nn::model_forward(w, x);
    const auto grads_avx2 = nn::loss_and_gradients(w, x, 3);

    CHECK(logits_scalar.data == logits_avx2.data);
    CHECK(grads_scalar.loss == grads_avx2.loss);
    CHECK(grads_scalar.grads.input_grad.data == grads_avx2.grads.input_grad.data);
    for (size_t i = 0; i < grads_scalar.grads.parameter_grads.size(); ++i)
        CHECK(grads_scalar.grads.parameter_grads[i].value.data ==
              grads_avx2.grads.parameter_grads[i].value.data);
}
