#pragma once

#include <string>

#include "gauntlet/classifier.hpp"
#include "gauntlet/tensor.hpp"

namespace gauntlet::attacks {

// What an attack needs from a victim: logits and input-space gradients.
// SubModels expose this over their transformed domain; tests drive the same
// algorithms with closed-form linear models.
class DifferentiableModel {
public:
    virtual ~DifferentiableModel() = default;
    virtual int num_classes() const = 0;
    virtual Tensor logits(const Tensor& x) const = 0;
    virtual Tensor loss_input_gradient(const Tensor& x, int label) const = 0;
    virtual Tensor logit_input_gradient(const Tensor& x, int k) const = 0;

    int predict_label(const Tensor& x) const {
        const Tensor z = logits(x);
        int best = 0;
        for (int i = 1; i < static_cast<int>(z.numel()); ++i)
            if (z.data[static_cast<size_t>(i)] > z.data[static_cast<size_t>(best)]) best = i;
        return best;
    }
};

// Transformed-domain view of a SubModel (no transform application here;
// attacks operate where the sub-model actually lives).
class SubModelView final : public DifferentiableModel {
public:
    explicit SubModelView(const classifier::SubModel& sub) : sub_(sub) {}
    int num_classes() const override { return sub_.weights.arch.classes; }
    Tensor logits(const Tensor& x) const override { return sub_.raw_logits(x); }
    Tensor loss_input_gradient(const Tensor& x, int label) const override {
        return classifier::input_gradient(sub_, x, label);
    }
    Tensor logit_input_gradient(const Tensor& x, int k) const override {
        return nn::logit_input_gradient(sub_.weights, x, k);
    }

private:
    const classifier::SubModel& sub_;
};

enum class Algorithm { fgsm, pgd, cw_l2, deepfool };

struct AttackConfig {
    Algorithm algorithm = Algorithm::fgsm;
    float epsilon = 0.3f;          // L-inf budget (FGSM/PGD)
    float step_size = 0.0f;        // PGD step; 0 means epsilon/10
    int max_iterations = 100;
    int binary_search_steps = 10;  // CW
    float initial_constant = 0.01f;
    float learning_rate = 0.01f;
    float overshoot = 1e-6f;       // DeepFool
    int num_candidates = 3;
};

struct AttackResult {
    Tensor adversarial;
    bool success = false;  // victim label != ground truth
    int iterations_used = 0;
    double l2_distortion = 0.0;
};

AttackResult fgsm(const DifferentiableModel& model, const Tensor& x, int y, float epsilon);
AttackResult pgd(const DifferentiableModel& model, const Tensor& x, int y, float epsilon,
                 float step_size, int max_iterations);
AttackResult cw_l2(const DifferentiableModel& model, const Tensor& x, int y,
                   const AttackConfig& config);
AttackResult deepfool(const DifferentiableModel& model, const Tensor& x, int y,
                      const AttackConfig& config);

AttackResult run_attack(const DifferentiableModel& model, const Tensor& x, int y,
                        const AttackConfig& config);

// Named parameter presets: taa-fgsm, paa-fgsm, taa-pgd, paa-pgd, cw, deepfool.
AttackConfig preset(const std::string& name);
std::string algorithm_name(Algorithm a);

}  // namespace gauntlet::attacks
