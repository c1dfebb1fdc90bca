#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gauntlet::harness {

// One config fully determines an experiment; the fingerprint of the
// canonical serialization is embedded in every report.
struct ExperimentConfig {
    // paths
    std::string data_dir;  // empty: $GAUNTLET_DATA_DIR, else "data"
    std::string models_dir = "models";
    std::string out_dir = "reports";

    uint64_t seed = 7;

    // training
    std::string arch = "32,64,64,128";
    int train_subset = 10000;  // 0 = full training set
    double lr = 1e-3;
    int batch = 64;
    int max_epochs = 30;
    int patience = 5;
    bool hybrid_models = false;  // also train the irreversible subset

    // evaluation
    int eval_subset = 500;  // 0 = full test half
    int ranking_subset = 100;
    std::string ranking_attack = "taa-fgsm";
    std::string attacks = "taa-fgsm,taa-pgd,cw,deepfool";      // transfer + taa
    std::string paa_attacks = "paa-fgsm,paa-pgd,cw,deepfool";  // paa grid
    std::string aggregations = "maxp,avgp,mvotep,wsump";
    std::string ensembles = "rd,mv,t2mv,avep,avel";
    std::string taa_targets = "all";  // "all" | "top" | comma-separated ids
    int transfer_subset = 150;
    int cw_transfer_subset = 40;  // 0 = transfer_subset
    int cw_taa_subset = 60;       // 0 = eval_subset
    int paa_subset = 50;
    int cw_paa_subset = 10;       // 0 = paa_subset
    double budget = 0.3;
    std::string hybrid_m = "0,7,14";
    int hybrid_reps = 5;
    std::string hybrid_attack = "taa-pgd";

    // iteration-effort overrides for desk-scale runs (0 keeps preset values)
    int cw_search_steps = 0;
    int cw_iters = 0;
    int pgd_iters = 0;

    // execution
    int threads = 0;  // 0 = hardware concurrency
    bool dump_aes = false;
    std::string backend = "auto";  // auto | scalar | avx2

    std::string resolved_data_dir() const;
    std::vector<std::string> attack_list() const;
    std::vector<std::string> paa_attack_list() const;
    std::vector<std::string> aggregation_list() const;
    std::vector<std::string> ensemble_list() const;
    std::vector<int> hybrid_m_list() const;

    // canonical "key = value" serialization (sorted keys) and its FNV-1a hash
    std::string canonical() const;
    std::string fingerprint() const;

    void set(const std::string& key, const std::string& value);  // throws on unknown key
    static ExperimentConfig from_file(const std::string& path);
    void apply_backend() const;  // select the kernel backend
};

std::vector<std::string> split_list(const std::string& csv);

}  // namespace gauntlet::harness
