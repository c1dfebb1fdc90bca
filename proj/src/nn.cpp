#include "gauntlet/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gauntlet/kernels.hpp"
#include "gauntlet/rng.hpp"

namespace gauntlet::nn {

namespace {

int conv_out_extent(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

void check_conv_shapes(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                       int stride, int padding) {
    if (input.rank() != 3) throw std::invalid_argument("conv2d: input must be rank 3");
    if (kernel.rank() != 4) throw std::invalid_argument("conv2d: kernel must be rank 4");
    if (kernel.dim(0) != kernel.dim(1))
        throw std::invalid_argument("conv2d: only square kernels supported");
    if (kernel.dim(2) != input.dim(2))
        throw std::invalid_argument("conv2d: kernel input channels (" +
                                    std::to_string(kernel.dim(2)) +
                                    ") do not match input channels (" +
                                    std::to_string(input.dim(2)) + ")");
    if (bias.numel() != kernel.dim(3))
        throw std::invalid_argument("conv2d: bias length must equal output channels");
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be positive");
    if (padding < 0) throw std::invalid_argument("conv2d: padding must be non-negative");
    const int k = kernel.dim(0);
    if (k > input.dim(0) + 2 * padding || k > input.dim(1) + 2 * padding)
        throw std::invalid_argument("conv2d: kernel larger than padded input");
}

// Kernel transposed to [k][k][cout][cin]; pure data movement, used by the
// backward-input pass so SIMD lanes can run across contiguous cin.
std::vector<float> transpose_kernel(const Tensor& kernel) {
    const int k = kernel.dim(0), cin = kernel.dim(2), cout = kernel.dim(3);
    std::vector<float> t(static_cast<size_t>(k) * k * cin * cout);
    for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx)
            for (int ci = 0; ci < cin; ++ci)
                for (int co = 0; co < cout; ++co)
                    t[((static_cast<size_t>(ky) * k + kx) * cout + co) * cin + ci] =
                        kernel.at(ky, kx, ci, co);
    return t;
}

std::vector<float> transpose_dense(const Tensor& weight) {
    const int n = weight.dim(0), m = weight.dim(1);
    std::vector<float> t(static_cast<size_t>(n) * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            t[static_cast<size_t>(j) * n + i] = weight.data[static_cast<size_t>(i) * m + j];
    return t;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                      int stride, int padding) {
    check_conv_shapes(input, kernel, bias, stride, padding);
    const int h = input.dim(0), w = input.dim(1), cin = input.dim(2);
    const int k = kernel.dim(0), cout = kernel.dim(3);
    const int oh = conv_out_extent(h, k, stride, padding);
    const int ow = conv_out_extent(w, k, stride, padding);
    Tensor out({oh, ow, cout});
    kernels::ops().conv2d_fwd(input.data.data(), h, w, cin, kernel.data.data(), k, cout,
                              bias.data.data(), stride, padding, out.data.data(), oh, ow);
    return out;
}

Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& kernel,
                             int stride, int padding, int in_h, int in_w) {
    const int k = kernel.dim(0), cin = kernel.dim(2), cout = kernel.dim(3);
    Tensor gin({in_h, in_w, cin});
    const auto ker_t = transpose_kernel(kernel);
    kernels::ops().conv2d_bwd_input(grad_out.data.data(), grad_out.dim(0), grad_out.dim(1),
                                    cout, ker_t.data(), k, cin, stride, padding,
                                    gin.data.data(), in_h, in_w);
    return gin;
}

void conv2d_backward_params(const Tensor& grad_out, const Tensor& input,
                            int stride, int padding,
                            Tensor& grad_kernel, Tensor& grad_bias) {
    kernels::ops().conv2d_bwd_params(input.data.data(), input.dim(0), input.dim(1),
                                     input.dim(2), grad_out.data.data(), grad_out.dim(0),
                                     grad_out.dim(1), grad_out.dim(2), grad_kernel.dim(0),
                                     stride, padding, grad_kernel.data.data(),
                                     grad_bias.data.data());
}

Tensor dense_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    const int n = weight.dim(0), m = weight.dim(1);
    if (input.numel() != n) throw std::invalid_argument("dense: input length mismatch");
    Tensor out({m});
    kernels::ops().dense_fwd(input.data.data(), n, weight.data.data(), bias.data.data(),
                             out.data.data(), m);
    return out;
}

Tensor dense_backward_input(const Tensor& grad_out, const Tensor& weight) {
    const int n = weight.dim(0), m = weight.dim(1);
    Tensor gin({n});
    const auto w_t = transpose_dense(weight);
    kernels::ops().dense_bwd_input(grad_out.data.data(), m, w_t.data(), gin.data.data(), n);
    return gin;
}

void dense_backward_params(const Tensor& grad_out, const Tensor& input,
                           Tensor& grad_weight, Tensor& grad_bias) {
    kernels::ops().dense_bwd_params(input.data.data(), static_cast<int>(input.numel()),
                                    grad_out.data.data(), static_cast<int>(grad_out.numel()),
                                    grad_weight.data.data(), grad_bias.data.data());
}

Tensor maxpool2_forward(const Tensor& input, std::vector<uint8_t>& argmax) {
    const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
    const int oh = h / 2, ow = w / 2;
    Tensor out({oh, ow, c});
    argmax.assign(static_cast<size_t>(oh) * ow * c, 0);
    kernels::ops().maxpool2_fwd(input.data.data(), h, w, c, out.data.data(), argmax.data());
    return out;
}

Tensor maxpool2_backward(const Tensor& grad_out, const std::vector<uint8_t>& argmax,
                         int in_h, int in_w) {
    Tensor gin({in_h, in_w, grad_out.dim(2)});
    kernels::ops().maxpool2_bwd(grad_out.data.data(), grad_out.dim(0), grad_out.dim(1),
                                grad_out.dim(2), argmax.data(), gin.data.data(), in_h, in_w);
    return gin;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out(input.dims);
    kernels::ops().relu_fwd(input.data.data(), out.data.data(), input.numel());
    return out;
}

Tensor relu_backward(const Tensor& pre_activation, const Tensor& grad_out) {
    Tensor gin(pre_activation.dims);
    kernels::ops().relu_bwd(pre_activation.data.data(), grad_out.data.data(),
                            gin.data.data(), pre_activation.numel());
    return gin;
}

Tensor softmax(const Tensor& logits) {
    Tensor p(logits.dims);
    float mx = logits.data[0];
    for (float v : logits.data) mx = std::max(mx, v);
    double sum = 0.0;
    for (size_t i = 0; i < logits.data.size(); ++i) {
        const double e = std::exp(static_cast<double>(logits.data[i]) - mx);
        p.data[i] = static_cast<float>(e);
        sum += e;
    }
    const float inv = static_cast<float>(1.0 / sum);
    for (auto& v : p.data) v *= inv;
    return p;
}

double cross_entropy(const Tensor& logits, int label) {
    float mx = logits.data[0];
    for (float v : logits.data) mx = std::max(mx, v);
    double sum = 0.0;
    for (float v : logits.data) sum += std::exp(static_cast<double>(v) - mx);
    const double log_z = std::log(sum) + mx;
    return log_z - logits.data[static_cast<size_t>(label)];
}

Tensor cross_entropy_logit_gradient(const Tensor& logits, int label) {
    Tensor g = softmax(logits);
    g.data[static_cast<size_t>(label)] -= 1.0f;
    return g;
}

// ---- architecture / weights -------------------------------------------------

int Architecture::flat_dim() const {
    // conv1 k3 s1 p0 -> 26x26, conv2 -> 24x24, pool -> 12x12,
    // conv3 -> 10x10, pool -> 5x5
    const int h1 = input_h - 2, w1 = input_w - 2;
    const int h2 = h1 - 2, w2 = w1 - 2;
    const int h3 = h2 / 2 - 2, w3 = w2 / 2 - 2;
    return (h3 / 2) * (w3 / 2) * conv3;
}

std::string Architecture::to_string() const {
    std::ostringstream os;
    os << conv1 << "," << conv2 << "," << conv3 << "," << hidden;
    return os.str();
}

Architecture Architecture::parse(const std::string& s) {
    Architecture a;
    std::istringstream is(s);
    char comma;
    if (!(is >> a.conv1 >> comma >> a.conv2 >> comma >> a.conv3 >> comma >> a.hidden))
        throw std::invalid_argument("architecture must be four comma-separated widths");
    if (a.conv1 < 1 || a.conv2 < 1 || a.conv3 < 1 || a.hidden < 1)
        throw std::invalid_argument("architecture widths must be positive");
    return a;
}

const std::vector<std::string>& ClassifierWeights::weight_names() {
    static const std::vector<std::string> names = {
        "conv1.kernel", "conv1.bias", "conv2.kernel", "conv2.bias",
        "conv3.kernel", "conv3.bias", "fc1.weight",   "fc1.bias",
        "fc2.weight",   "fc2.bias",
    };
    return names;
}

namespace {
std::vector<std::vector<int>> weight_shapes(const Architecture& a) {
    return {
        {3, 3, a.input_c, a.conv1}, {a.conv1},
        {3, 3, a.conv1, a.conv2},   {a.conv2},
        {3, 3, a.conv2, a.conv3},   {a.conv3},
        {a.flat_dim(), a.hidden},   {a.hidden},
        {a.hidden, a.classes},      {a.classes},
    };
}
}  // namespace

ClassifierWeights ClassifierWeights::zeros(const Architecture& arch) {
    ClassifierWeights w;
    w.arch = arch;
    const auto shapes = weight_shapes(arch);
    const auto& names = weight_names();
    for (size_t i = 0; i < names.size(); ++i)
        w.tensors.push_back({names[i], Tensor(shapes[i])});
    return w;
}

ClassifierWeights ClassifierWeights::random_init(const Architecture& arch, uint64_t seed) {
    ClassifierWeights w = zeros(arch);
    Rng rng(seed);
    for (auto& nt : w.tensors) {
        if (nt.value.rank() == 1) continue;  // biases start at zero
        int64_t fan_in, fan_out;
        if (nt.value.rank() == 4) {
            fan_in = static_cast<int64_t>(nt.value.dim(0)) * nt.value.dim(1) * nt.value.dim(2);
            fan_out = static_cast<int64_t>(nt.value.dim(0)) * nt.value.dim(1) * nt.value.dim(3);
        } else {
            fan_in = nt.value.dim(0);
            fan_out = nt.value.dim(1);
        }
        const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (auto& v : nt.value.data) v = static_cast<float>(rng.uniform(-r, r));
    }
    return w;
}

int64_t ClassifierWeights::parameter_count() const {
    int64_t n = 0;
    for (const auto& nt : tensors) n += nt.value.numel();
    return n;
}

bool ClassifierWeights::all_finite() const {
    for (const auto& nt : tensors)
        if (!nt.value.all_finite()) return false;
    return true;
}

void ClassifierWeights::validate() const {
    const auto shapes = weight_shapes(arch);
    const auto& names = weight_names();
    if (tensors.size() != names.size())
        throw std::runtime_error("weights: wrong tensor count");
    for (size_t i = 0; i < names.size(); ++i) {
        if (tensors[i].name != names[i])
            throw std::runtime_error("weights: unexpected tensor name " + tensors[i].name);
        if (tensors[i].value.dims != shapes[i])
            throw std::runtime_error("weights: shape mismatch for " + tensors[i].name +
                                     " (got " + tensors[i].value.shape_str() + ")");
    }
}

// ---- forward / backward ------------------------------------------------------

namespace {

struct ForwardTrace {
    Tensor z1, a1;                    // conv1 pre/post relu
    Tensor z2, a2, p2;                // conv2, relu, pool
    std::vector<uint8_t> p2_idx;
    Tensor z3, a3, p3;                // conv3, relu, pool
    std::vector<uint8_t> p3_idx;
    Tensor flat;                      // p3 flattened
    Tensor z4, a4;                    // fc1 pre/post relu
    Tensor logits;                    // fc2
};

ForwardTrace run_forward(const ClassifierWeights& w, const Tensor& input) {
    ForwardTrace t;
    t.z1 = conv2d_forward(input, w.t(0), w.t(1), 1, 0);
    t.a1 = relu_forward(t.z1);
    t.z2 = conv2d_forward(t.a1, w.t(2), w.t(3), 1, 0);
    t.a2 = relu_forward(t.z2);
    t.p2 = maxpool2_forward(t.a2, t.p2_idx);
    t.z3 = conv2d_forward(t.p2, w.t(4), w.t(5), 1, 0);
    t.a3 = relu_forward(t.z3);
    t.p3 = maxpool2_forward(t.a3, t.p3_idx);
    t.flat = Tensor({static_cast<int>(t.p3.numel())}, t.p3.data);
    t.z4 = dense_forward(t.flat, w.t(6), w.t(7));
    t.a4 = relu_forward(t.z4);
    t.logits = dense_forward(t.a4, w.t(8), w.t(9));
    return t;
}

void check_input(const ClassifierWeights& w, const Tensor& input) {
    if (input.rank() != 3 || input.dim(0) != w.arch.input_h ||
        input.dim(1) != w.arch.input_w || input.dim(2) != w.arch.input_c)
        throw std::invalid_argument("model input must be " +
                                    std::to_string(w.arch.input_h) + "x" +
                                    std::to_string(w.arch.input_w) + "x" +
                                    std::to_string(w.arch.input_c) + ", got " +
                                    input.shape_str());
}

// Backward from a logit-space gradient. Fills parameter gradients when
// requested and returns the input gradient when requested.
LayerGradients backprop(const ClassifierWeights& w, const Tensor& input,
                        const ForwardTrace& t, const Tensor& dlogits,
                        bool want_param_grads, bool want_input_grad) {
    LayerGradients g;
    if (want_param_grads) {
        const auto& names = ClassifierWeights::weight_names();
        for (size_t i = 0; i < names.size(); ++i)
            g.parameter_grads.push_back({names[i], Tensor(w.tensors[i].value.dims)});
    }
    auto pg = [&](int i) -> Tensor& { return g.parameter_grads[static_cast<size_t>(i)].value; };

    if (want_param_grads) dense_backward_params(dlogits, t.a4, pg(8), pg(9));
    Tensor d_a4 = dense_backward_input(dlogits, w.t(8));
    Tensor d_z4 = relu_backward(t.z4, d_a4);

    if (want_param_grads) dense_backward_params(d_z4, t.flat, pg(6), pg(7));
    Tensor d_flat = dense_backward_input(d_z4, w.t(6));
    Tensor d_p3(t.p3.dims, std::move(d_flat.data));

    Tensor d_a3 = maxpool2_backward(d_p3, t.p3_idx, t.a3.dim(0), t.a3.dim(1));
    Tensor d_z3 = relu_backward(t.z3, d_a3);
    if (want_param_grads) conv2d_backward_params(d_z3, t.p2, 1, 0, pg(4), pg(5));
    Tensor d_p2 = conv2d_backward_input(d_z3, w.t(4), 1, 0, t.p2.dim(0), t.p2.dim(1));

    Tensor d_a2 = maxpool2_backward(d_p2, t.p2_idx, t.a2.dim(0), t.a2.dim(1));
    Tensor d_z2 = relu_backward(t.z2, d_a2);
    if (want_param_grads) conv2d_backward_params(d_z2, t.a1, 1, 0, pg(2), pg(3));
    Tensor d_a1 = conv2d_backward_input(d_z2, w.t(2), 1, 0, t.a1.dim(0), t.a1.dim(1));

    Tensor d_z1 = relu_backward(t.z1, d_a1);
    if (want_param_grads) conv2d_backward_params(d_z1, input, 1, 0, pg(0), pg(1));
    if (want_input_grad)
        g.input_grad = conv2d_backward_input(d_z1, w.t(0), 1, 0, input.dim(0), input.dim(1));
    return g;
}

}  // namespace

Tensor model_forward(const ClassifierWeights& w, const Tensor& input) {
    check_input(w, input);
    return run_forward(w, input).logits;
}

LossResult loss_and_gradients(const ClassifierWeights& w, const Tensor& input,
                              int label, bool want_param_grads, bool want_input_grad) {
    check_input(w, input);
    if (label < 0 || label >= w.arch.classes)
        throw std::invalid_argument("label out of range");
    const ForwardTrace t = run_forward(w, input);
    LossResult res;
    res.loss = cross_entropy(t.logits, label);
    if (!std::isfinite(res.loss))
        throw std::runtime_error("non-finite loss: numeric fault");
    const Tensor dlogits = cross_entropy_logit_gradient(t.logits, label);
    res.grads = backprop(w, input, t, dlogits, want_param_grads, want_input_grad);
    return res;
}

Tensor logit_input_gradient(const ClassifierWeights& w, const Tensor& input, int k) {
    check_input(w, input);
    const ForwardTrace t = run_forward(w, input);
    Tensor dlogits({w.arch.classes});
    dlogits.data[static_cast<size_t>(k)] = 1.0f;
    return backprop(w, input, t, dlogits, false, true).input_grad;
}

AdamState AdamState::zeros_like(const ClassifierWeights& w) {
    AdamState s;
    for (const auto& nt : w.tensors) {
        s.m.emplace_back(nt.value.dims);
        s.v.emplace_back(nt.value.dims);
    }
    return s;
}

void adam_step(ClassifierWeights& w, const LayerGradients& grads, AdamState& state,
               float lr, float beta1, float beta2, float eps) {
    if (state.m.size() != w.tensors.size())
        throw std::invalid_argument("adam: state does not match weights");
    state.step += 1;
    const float bc1 =
        static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(beta1), state.step)));
    const float bc2 =
        static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(beta2), state.step)));
    for (size_t i = 0; i < w.tensors.size(); ++i) {
        auto& wt = w.tensors[i].value;
        const auto& gt = grads.parameter_grads[i].value;
        if (!wt.same_shape(gt)) throw std::invalid_argument("adam: gradient shape mismatch");
        kernels::ops().adam(wt.data.data(), gt.data.data(), state.m[i].data.data(),
                            state.v[i].data.data(), wt.numel(), lr, beta1, beta2, eps,
                            bc1, bc2);
    }
}

}  // namespace gauntlet::nn
