#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "gauntlet/adaptive.hpp"
#include "gauntlet/config.hpp"
#include "gauntlet/dataset.hpp"
#include "gauntlet/ensemble.hpp"
#include "gauntlet/report.hpp"

namespace gauntlet::harness {

// train / validation / test / seeded evaluation subset, derived from the IDX
// files under data_dir (train-images-idx3-ubyte, train-labels-idx1-ubyte,
// t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte).
struct DataBundle {
    data::LabelledSet train;
    data::LabelledSet val;
    data::LabelledSet test;
    data::LabelledSet eval;  // take_subset(test, eval_subset, seeded)
};

DataBundle load_data(const ExperimentConfig& config);

struct Suite {
    adaptive::SubModelPtr original;
    std::vector<adaptive::SubModelPtr> reversible;
    std::vector<adaptive::SubModelPtr> irreversible;

    std::vector<adaptive::SubModelPtr> with_original() const;
};

// Builds the attack config for a named preset, applying the config's CW
// effort overrides.
attacks::AttackConfig attack_from_name(const ExperimentConfig& config,
                                       const std::string& preset_name);

// Trains original + 14 reversible (+ irreversible subset when hybrid_models)
// and writes models_dir/<id>.egw plus manifest.json; returns the manifest.
nlohmann::json cmd_train(const ExperimentConfig& config);

Suite load_suite(const ExperimentConfig& config, bool need_irreversible = false);

// Alg. 2 ranking over the reversible members, computed on a seeded
// ranking_subset sample of the validation half with ranking_attack.
adaptive::TransferRanking compute_ranking(const ExperimentConfig& config,
                                          const Suite& suite, const DataBundle& data);

Report cmd_benign(const ExperimentConfig& config);
std::vector<Report> cmd_transfer(const ExperimentConfig& config);
Report cmd_taa(const ExperimentConfig& config);
Report cmd_paa(const ExperimentConfig& config);
Report cmd_hybrid(const ExperimentConfig& config);

// Writes <out_dir>/<stem>.csv and <stem>.json.
void emit(const Report& r, const ExperimentConfig& config, const std::string& stem);

}  // namespace gauntlet::harness
