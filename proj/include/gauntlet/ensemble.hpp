#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gauntlet/classifier.hpp"
#include "gauntlet/dataset.hpp"

namespace gauntlet::ensemble {

enum class Strategy { rd, mv, t2mv, avep, avel };

Strategy strategy_from_name(const std::string& name);
std::string strategy_name(Strategy s);

struct EnsembleConfig {
    std::vector<std::shared_ptr<const classifier::SubModel>> members;
    Strategy strategy = Strategy::mv;
    uint64_t rd_seed = 0;

    void validate() const;  // non-empty, unique member transform ids
};

// Combined prediction on one image. RD draws its member from
// (rd_seed, example_index); the other strategies ignore the index.
int ensemble_predict_at(const EnsembleConfig& config, const Tensor& x,
                        uint64_t example_index);

inline int ensemble_predict(const EnsembleConfig& config, const Tensor& x) {
    return ensemble_predict_at(config, x, 0);
}

double ensemble_accuracy(const EnsembleConfig& config, const data::LabelledSet& set,
                         int threads = 0);

// Accuracy of one strategy over precomputed per-member outputs, letting callers
// evaluate several strategies without re-running the models.
struct MemberOutputs {
    std::vector<Tensor> probabilities;  // one per member
    std::vector<Tensor> logits;
    std::vector<int> labels;
};

MemberOutputs member_outputs(const EnsembleConfig& config, const Tensor& x);
int combine(const MemberOutputs& outs, Strategy strategy, uint64_t rd_seed,
            uint64_t example_index);

}  // namespace gauntlet::ensemble
