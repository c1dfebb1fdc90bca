#pragma once

#include <cstdint>
#include <string>

#include "gauntlet/dataset.hpp"
#include "gauntlet/nn.hpp"
#include "gauntlet/transforms.hpp"

namespace gauntlet::classifier {

// One ensemble member: a CNN bound to its transformation. Predictions always
// run on apply(spec, x); the raw_* entry points operate in the transformed
// domain and are what the attack loops use.
struct SubModel {
    transforms::TransformSpec spec;
    nn::ClassifierWeights weights;

    Tensor raw_logits(const Tensor& x_transformed) const {
        return nn::model_forward(weights, x_transformed);
    }
};

struct Prediction {
    int label = 0;
    Tensor probabilities;
    Tensor logits;
};

Prediction predict(const SubModel& sub, const Tensor& x);

// Gradient of the cross-entropy loss w.r.t. the (already transformed) input.
Tensor input_gradient(const SubModel& sub, const Tensor& x_transformed, int label);

struct TrainingConfig {
    float lr = 1e-3f;
    int batch_size = 64;
    int max_epochs = 30;
    int patience = 5;  // epochs without validation improvement before stopping
    nn::Architecture arch;
};

struct TrainedModel {
    SubModel sub;
    double best_val_loss = 0.0;
    int best_epoch = 0;
    int epochs_run = 0;
};

// Trains one sub-model on apply(spec, .) of every example, Adam with
// mini-batches, early stopping on validation cross-entropy; returns the
// weights of the best validation epoch. Deterministic for a given seed.
TrainedModel train_submodel(const transforms::TransformSpec& spec,
                            const data::LabelledSet& train,
                            const data::LabelledSet& val,
                            const TrainingConfig& config, uint64_t seed);

double accuracy(const SubModel& sub, const data::LabelledSet& set, int threads = 0);

// Weight file, magic "EGW1": little-endian u32 tensor count, then per tensor
// u16 name length + UTF-8 name, u8 rank, u32 dims, raw little-endian f32.
void save_weights(const nn::ClassifierWeights& w, const std::string& path);
nn::ClassifierWeights load_weights(const std::string& path);

}  // namespace gauntlet::classifier
