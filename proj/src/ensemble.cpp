#include "gauntlet/ensemble.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "gauntlet/parallel.hpp"
#include "gauntlet/rng.hpp"

namespace gauntlet::ensemble {

Strategy strategy_from_name(const std::string& name) {
    if (name == "rd") return Strategy::rd;
    if (name == "mv") return Strategy::mv;
    if (name == "t2mv") return Strategy::t2mv;
    if (name == "avep") return Strategy::avep;
    if (name == "avel") return Strategy::avel;
    throw std::invalid_argument("unknown ensemble strategy '" + name + "'");
}

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::rd: return "rd";
        case Strategy::mv: return "mv";
        case Strategy::t2mv: return "t2mv";
        case Strategy::avep: return "avep";
        case Strategy::avel: return "avel";
    }
    return "?";
}

void EnsembleConfig::validate() const {
    if (members.empty()) throw std::invalid_argument("ensemble has no members");
    std::set<std::string> ids;
    for (const auto& m : members)
        if (!ids.insert(m->spec.id).second)
            throw std::invalid_argument("duplicate ensemble member id '" + m->spec.id + "'");
}

MemberOutputs member_outputs(const EnsembleConfig& config, const Tensor& x) {
    MemberOutputs outs;
    outs.probabilities.reserve(config.members.size());
    outs.logits.reserve(config.members.size());
    outs.labels.reserve(config.members.size());
    for (const auto& m : config.members) {
        auto p = classifier::predict(*m, x);
        outs.probabilities.push_back(std::move(p.probabilities));
        outs.logits.push_back(std::move(p.logits));
        outs.labels.push_back(p.label);
    }
    return outs;
}

namespace {

int argmax_lowest(const std::vector<double>& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[static_cast<size_t>(i)] > v[static_cast<size_t>(best)]) best = i;
    return best;
}

// Modal label; ties go to the tied label with the largest summed probability,
// then the lowest label id.
int vote(const std::vector<int>& counts_in, const MemberOutputs& outs, int classes) {
    int best_count = 0;
    for (int c : counts_in) best_count = std::max(best_count, c);
    std::vector<double> prob_sum(static_cast<size_t>(classes), 0.0);
    for (const auto& p : outs.probabilities)
        for (int k = 0; k < classes; ++k) prob_sum[static_cast<size_t>(k)] += p.data[static_cast<size_t>(k)];
    int winner = -1;
    for (int k = 0; k < classes; ++k) {
        if (counts_in[static_cast<size_t>(k)] != best_count) continue;
        if (winner < 0 || prob_sum[static_cast<size_t>(k)] > prob_sum[static_cast<size_t>(winner)])
            winner = k;
    }
    return winner;
}

}  // namespace

int combine(const MemberOutputs& outs, Strategy strategy, uint64_t rd_seed,
            uint64_t example_index) {
    const int classes = static_cast<int>(outs.probabilities.front().numel());
    const size_t n = outs.labels.size();
    switch (strategy) {
        case Strategy::rd: {
            Rng rng(mix_seed(rd_seed, example_index));
            return outs.labels[static_cast<size_t>(rng.below(n))];
        }
        case Strategy::mv: {
            std::vector<int> counts(static_cast<size_t>(classes), 0);
            for (int l : outs.labels) ++counts[static_cast<size_t>(l)];
            return vote(counts, outs, classes);
        }
        case Strategy::t2mv: {
            // one vote for each member's two highest-probability labels
            std::vector<int> counts(static_cast<size_t>(classes), 0);
            for (const auto& p : outs.probabilities) {
                int top1 = 0;
                for (int k = 1; k < classes; ++k)
                    if (p.data[static_cast<size_t>(k)] > p.data[static_cast<size_t>(top1)]) top1 = k;
                int top2 = top1 == 0 ? 1 : 0;
                for (int k = 0; k < classes; ++k) {
                    if (k == top1) continue;
                    if (p.data[static_cast<size_t>(k)] > p.data[static_cast<size_t>(top2)]) top2 = k;
                }
                ++counts[static_cast<size_t>(top1)];
                ++counts[static_cast<size_t>(top2)];
            }
            return vote(counts, outs, classes);
        }
        case Strategy::avep: {
            std::vector<double> mean(static_cast<size_t>(classes), 0.0);
            for (const auto& p : outs.probabilities)
                for (int k = 0; k < classes; ++k)
                    mean[static_cast<size_t>(k)] += p.data[static_cast<size_t>(k)];
            return argmax_lowest(mean);
        }
        case Strategy::avel: {
            std::vector<double> mean(static_cast<size_t>(classes), 0.0);
            for (const auto& z : outs.logits)
                for (int k = 0; k < classes; ++k)
                    mean[static_cast<size_t>(k)] += z.data[static_cast<size_t>(k)];
            return argmax_lowest(mean);
        }
    }
    throw std::invalid_argument("unknown ensemble strategy");
}

int ensemble_predict_at(const EnsembleConfig& config, const Tensor& x,
                        uint64_t example_index) {
    config.validate();
    if (config.strategy == Strategy::rd) {
        // RD consults exactly one member
        Rng rng(mix_seed(config.rd_seed, example_index));
        const auto& m = *config.members[static_cast<size_t>(rng.below(config.members.size()))];
        return classifier::predict(m, x).label;
    }
    const MemberOutputs outs = member_outputs(config, x);
    return combine(outs, config.strategy, config.rd_seed, example_index);
}

double ensemble_accuracy(const EnsembleConfig& config, const data::LabelledSet& set,
                         int threads) {
    config.validate();
    if (set.empty()) return 0.0;
    std::vector<uint8_t> correct(set.size(), 0);
    parallel_for(
        static_cast<int64_t>(set.size()),
        [&](int64_t i) {
            const int label =
                ensemble_predict_at(config, set.images[static_cast<size_t>(i)],
                                    static_cast<uint64_t>(i));
            correct[static_cast<size_t>(i)] =
                label == static_cast<int>(set.labels[static_cast<size_t>(i)]) ? 1 : 0;
        },
        threads);
    int64_t n = 0;
    for (uint8_t c : correct) n += c;
    return static_cast<double>(n) / static_cast<double>(set.size());
}

}  // namespace gauntlet::ensemble
