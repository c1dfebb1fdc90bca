#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gauntlet/tensor.hpp"

namespace gauntlet::nn {

// ---- layer primitives ------------------------------------------------------

// input [H,W,Cin], kernel [k,k,Cin,Cout], bias [Cout]; cross-correlation plus
// bias, output extent floor((H+2p-k)/stride)+1.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                      int stride, int padding);
Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& kernel,
                             int stride, int padding, int in_h, int in_w);
void conv2d_backward_params(const Tensor& grad_out, const Tensor& input,
                            int stride, int padding,
                            Tensor& grad_kernel, Tensor& grad_bias);

Tensor dense_forward(const Tensor& input, const Tensor& weight, const Tensor& bias);
Tensor dense_backward_input(const Tensor& grad_out, const Tensor& weight);
void dense_backward_params(const Tensor& grad_out, const Tensor& input,
                           Tensor& grad_weight, Tensor& grad_bias);

Tensor maxpool2_forward(const Tensor& input, std::vector<uint8_t>& argmax);
Tensor maxpool2_backward(const Tensor& grad_out, const std::vector<uint8_t>& argmax,
                         int in_h, int in_w);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& pre_activation, const Tensor& grad_out);

// Numerically stable softmax / log-softmax over a flat logit vector.
Tensor softmax(const Tensor& logits);
double cross_entropy(const Tensor& logits, int label);
// d loss / d logits = softmax(logits) - onehot(label)
Tensor cross_entropy_logit_gradient(const Tensor& logits, int label);

// ---- the sub-model network -------------------------------------------------

// Three 3x3 conv layers with ReLU (pooling after the second and third),
// a hidden dense layer with ReLU, and a dense output layer producing ten
// logits. Channel widths are configurable; spatial geometry is fixed for
// 28x28x1 inputs.
struct Architecture {
    int conv1 = 32;
    int conv2 = 64;
    int conv3 = 64;
    int hidden = 128;
    int input_h = 28, input_w = 28, input_c = 1;
    int classes = 10;

    int flat_dim() const;  // flattened extent entering the hidden dense layer
    bool operator==(const Architecture&) const = default;
    std::string to_string() const;           // "32,64,64,128"
    static Architecture parse(const std::string& s);
};

struct NamedTensor {
    std::string name;
    Tensor value;
};

struct ClassifierWeights {
    Architecture arch;
    std::vector<NamedTensor> tensors;  // fixed order, see weight_names()

    static const std::vector<std::string>& weight_names();
    static ClassifierWeights zeros(const Architecture& arch);
    static ClassifierWeights random_init(const Architecture& arch, uint64_t seed);

    Tensor& t(int i) { return tensors[static_cast<size_t>(i)].value; }
    const Tensor& t(int i) const { return tensors[static_cast<size_t>(i)].value; }
    int64_t parameter_count() const;
    bool all_finite() const;
    // throws if tensor shapes are inconsistent with arch
    void validate() const;
};

struct LayerGradients {
    std::vector<NamedTensor> parameter_grads;  // same order/shapes as weights
    Tensor input_grad;                         // shape of the model input
};

Tensor model_forward(const ClassifierWeights& w, const Tensor& input);

struct LossResult {
    double loss = 0.0;
    LayerGradients grads;
};

// Cross-entropy loss plus gradients. want_param_grads=false skips the
// parameter side (attack loops only need the input gradient).
LossResult loss_and_gradients(const ClassifierWeights& w, const Tensor& input,
                              int label, bool want_param_grads = true,
                              bool want_input_grad = true);

// Gradient of a single raw logit w.r.t. the input pixels (DeepFool needs
// per-class logit gradients, not loss gradients).
Tensor logit_input_gradient(const ClassifierWeights& w, const Tensor& input, int k);

// ---- optimizer -------------------------------------------------------------

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    int64_t step = 0;

    static AdamState zeros_like(const ClassifierWeights& w);
};

void adam_step(ClassifierWeights& w, const LayerGradients& grads, AdamState& state,
               float lr, float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f);

}  // namespace gauntlet::nn
