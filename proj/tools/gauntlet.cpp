#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gauntlet/digits.hpp"
#include "gauntlet/harness.hpp"
#include "gauntlet/kernels.hpp"

namespace fs = std::filesystem;
using gauntlet::harness::ExperimentConfig;
using gauntlet::harness::Report;

namespace {

struct CliOverrides {
    std::string config_path;
    std::string data_dir, models_dir, out_dir;
    std::string attack, ensemble, backend, taa_targets;
    double budget = -1.0;
    long long seed = -1;
    int subset = -1;
    int threads = -1;
    bool dump_aes = false;
};

void add_common(CLI::App* cmd, CliOverrides& o) {
    cmd->add_option("--config", o.config_path, "config file (key = value lines)");
    cmd->add_option("--seed", o.seed, "experiment seed");
    cmd->add_option("--attack", o.attack, "attack preset list, e.g. taa-pgd,cw");
    cmd->add_option("--ensemble", o.ensemble, "ensemble strategies (rd,mv,t2mv,avep,avel)");
    cmd->add_option("--budget", o.budget, "PAA dissimilarity budget");
    cmd->add_option("--subset", o.subset, "evaluation subset size (0 = all)");
    cmd->add_option("--data-dir", o.data_dir, "IDX dataset directory");
    cmd->add_option("--models-dir", o.models_dir, "model weight directory");
    cmd->add_option("--out-dir", o.out_dir, "report output directory");
    cmd->add_option("--threads", o.threads, "worker threads (0 = auto)");
    cmd->add_option("--backend", o.backend, "kernel backend: auto|scalar|avx2");
    cmd->add_option("--targets", o.taa_targets, "taa targets: all|top|id list");
    cmd->add_flag("--dump-aes", o.dump_aes, "persist generated adversarial examples");
}

ExperimentConfig build_config(const CliOverrides& o) {
    ExperimentConfig c;
    if (!o.config_path.empty()) c = ExperimentConfig::from_file(o.config_path);
    if (o.seed >= 0) c.seed = static_cast<uint64_t>(o.seed);
    if (!o.attack.empty()) {
        c.attacks = o.attack;
        c.paa_attacks = o.attack;
        c.hybrid_attack = o.attack;
    }
    if (!o.ensemble.empty()) c.ensembles = o.ensemble;
    if (o.budget >= 0.0) c.budget = o.budget;
    if (o.subset >= 0) c.eval_subset = o.subset;
    if (!o.data_dir.empty()) c.data_dir = o.data_dir;
    if (!o.models_dir.empty()) c.models_dir = o.models_dir;
    if (!o.out_dir.empty()) c.out_dir = o.out_dir;
    if (o.threads >= 0) c.threads = o.threads;
    if (!o.backend.empty()) c.backend = o.backend;
    if (!o.taa_targets.empty()) c.taa_targets = o.taa_targets;
    if (o.dump_aes) c.dump_aes = true;
    return c;
}

void print_report(const Report& r) {
    std::cout << gauntlet::harness::to_csv(r);
    std::fprintf(stderr, "[%s] %.1fs\n", r.kind.c_str(), r.wall_seconds);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gauntlet: transformation-ensemble defence evaluation"};
    app.require_subcommand(1);

    CliOverrides o;
    auto* train = app.add_subcommand("train", "train the sub-model suite");
    auto* benign = app.add_subcommand("benign", "benign ensemble accuracy");
    auto* transfer = app.add_subcommand("transfer", "AE transferability matrix");
    auto* taa = app.add_subcommand("taa", "transferability-based adaptive attack sweep");
    auto* paa = app.add_subcommand("paa", "perturbation aggregation attack grid");
    auto* hybrid = app.add_subcommand("hybrid", "reversible/irreversible member sweep");
    for (auto* cmd : {train, benign, transfer, taa, paa, hybrid}) add_common(cmd, o);

    bool train_hybrid = false;
    train->add_flag("--hybrid", train_hybrid, "also train the irreversible subset");

    auto* synth = app.add_subcommand("synthdata", "generate a synthetic IDX digit dataset");
    std::string synth_out = "data";
    int synth_train = 12000, synth_test = 2000;
    long long synth_seed = 1;
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--train", synth_train, "training example count");
    synth->add_option("--test", synth_test, "test example count");
    synth->add_option("--seed", synth_seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            fs::create_directories(synth_out);
            const auto train_set = gauntlet::data::synth_digits(
                static_cast<size_t>(synth_train), static_cast<uint64_t>(synth_seed));
            const auto test_set = gauntlet::data::synth_digits(
                static_cast<size_t>(synth_test), static_cast<uint64_t>(synth_seed) + 1);
            gauntlet::data::write_idx(train_set,
                                      (fs::path(synth_out) / "train-images-idx3-ubyte").string(),
                                      (fs::path(synth_out) / "train-labels-idx1-ubyte").string());
            gauntlet::data::write_idx(test_set,
                                      (fs::path(synth_out) / "t10k-images-idx3-ubyte").string(),
                                      (fs::path(synth_out) / "t10k-labels-idx1-ubyte").string());
            std::cout << "wrote " << train_set.size() << " train / " << test_set.size()
                      << " test examples to " << synth_out << "\n";
            return 0;
        }

        ExperimentConfig c = build_config(o);
        c.apply_backend();
        std::fprintf(stderr, "kernel backend: %s\n",
                     gauntlet::kernels::backend_name(gauntlet::kernels::active_backend())
                         .c_str());

        if (train->parsed()) {
            if (train_hybrid) c.hybrid_models = true;
            const auto manifest = gauntlet::harness::cmd_train(c);
            std::cout << manifest.dump(2) << "\n";
        } else if (benign->parsed()) {
            const Report r = gauntlet::harness::cmd_benign(c);
            gauntlet::harness::emit(r, c, "benign");
            print_report(r);
        } else if (transfer->parsed()) {
            for (const auto& r : gauntlet::harness::cmd_transfer(c)) {
                gauntlet::harness::emit(r, c, "transfer_" + r.rows.at(0).at(1));
                print_report(r);
            }
        } else if (taa->parsed()) {
            const Report r = gauntlet::harness::cmd_taa(c);
            gauntlet::harness::emit(r, c, "taa");
            print_report(r);
        } else if (paa->parsed()) {
            const Report r = gauntlet::harness::cmd_paa(c);
            gauntlet::harness::emit(r, c, "paa");
            print_report(r);
        } else if (hybrid->parsed()) {
            const Report r = gauntlet::harness::cmd_hybrid(c);
            gauntlet::harness::emit(r, c, "hybrid");
            print_report(r);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
