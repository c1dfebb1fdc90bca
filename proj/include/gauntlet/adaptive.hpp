#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gauntlet/attacks.hpp"
#include "gauntlet/classifier.hpp"
#include "gauntlet/dataset.hpp"

namespace gauntlet::adaptive {

using SubModelPtr = std::shared_ptr<const classifier::SubModel>;

// normalized L2 dissimilarity ||x_adv - x0||_2 / ||x0||_2
double dissimilarity(const Tensor& x_adv, const Tensor& x0);

// victims (rows) x evaluators (columns); diagonal 1 by construction. A victim
// with no successful AEs gets an undefined row (nullopt) rather than zeros.
struct TransferMatrix {
    std::vector<std::string> victim_ids;
    std::vector<std::string> evaluator_ids;
    std::vector<std::vector<std::optional<double>>> rates;
    std::vector<int> ae_counts;                      // per victim
    std::vector<std::optional<double>> row_averages; // excludes the victim column
};

// Per victim: attack every example it classifies correctly in its own
// transformed domain, reset to the original space, keep the AEs that fool the
// victim itself, then score every evaluator on that successful set.
TransferMatrix transfer_matrix(const std::vector<SubModelPtr>& victims,
                               const attacks::AttackConfig& attack,
                               const data::LabelledSet& set, int threads = 0);

// Ordered (member id, mean accuracy of the other members on its AEs),
// ascending; position 0 is the most transferable victim.
struct TransferRanking {
    std::vector<std::pair<std::string, double>> entries;

    size_t size() const { return entries.size(); }
    const std::string& id_at(size_t i) const { return entries[i].first; }
    // 1-based position of a member id; throws if absent
    int position_of(const std::string& id) const;
};

TransferRanking transfer_ranking(const std::vector<SubModelPtr>& members,
                                 const attacks::AttackConfig& attack,
                                 const data::LabelledSet& sample, int threads = 0);

// Attack the top-ranked member in its transformed domain and reset the result
// to the original space.
attacks::AttackResult taa(const Tensor& x, int y, const attacks::AttackConfig& attack,
                          const TransferRanking& ranking,
                          const std::vector<SubModelPtr>& members);

enum class Aggregation { maxp, avgp, mvotep, wsump };

Aggregation aggregation_from_name(const std::string& name);
std::string aggregation_name(Aggregation a);

// WSumP weights: w_i = softmax(pos_i), pos_i = clamp(N - i, 0.8 N, N - 2)
// over 1-based ranking positions. Computed for the members present; softmax
// renormalizes, so a single delta degenerates to weight 1.
std::vector<double> wsump_weights(const std::vector<int>& positions_1based, int n_total);

// Combines per-member perturbations (deltas in the ORIGINAL space, aligned
// with member_ids) into one delta.
Tensor aggregate(const std::vector<Tensor>& deltas,
                 const std::vector<std::string>& member_ids, Aggregation strategy,
                 const TransferRanking& ranking);

// quantization grid for MVoteP (equals the PAA FGSM epsilon)
inline constexpr double kMVoteGrid = 0.05;

struct PaaResult {
    attacks::AttackResult result;
    int rounds = 0;
    int members_fooled = 0;
};

// Perturbation Aggregation Attack: per round, attack every not-yet-fooled
// member from the current adversarial point, aggregate the reset deltas, and
// accept the proposal only while dissimilarity(x_tmp, x) stays within budget.
// success is reported as "every member individually fooled".
PaaResult paa(const Tensor& x, int y, const std::vector<SubModelPtr>& members,
              double budget, const attacks::AttackConfig& attack,
              Aggregation strategy, const TransferRanking& ranking,
              int max_rounds = 40);

}  // namespace gauntlet::adaptive
