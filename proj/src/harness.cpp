#include "gauntlet/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "gauntlet/parallel.hpp"
#include "gauntlet/rng.hpp"

namespace fs = std::filesystem;

namespace gauntlet::harness {

namespace {

// substream salts
constexpr uint64_t kSaltSplit = 0x5717;
constexpr uint64_t kSaltTrainSubset = 0x7a11;
constexpr uint64_t kSaltEval = 0xe7a1;
constexpr uint64_t kSaltRanking = 0x4a2c;
constexpr uint64_t kSaltTransfer = 0x7a2f;
constexpr uint64_t kSaltRd = 0x4d01;
constexpr uint64_t kSaltHybrid = 0x1b2d;

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

nn::Architecture arch_of(const ExperimentConfig& c) {
    return nn::Architecture::parse(c.arch);
}

uint64_t model_seed(const ExperimentConfig& c, const std::string& id) {
    return mix_seed(c.seed, fnv1a(id.data(), id.size()));
}

std::string model_path(const ExperimentConfig& c, const std::string& id) {
    return (fs::path(c.models_dir) / (id + ".egw")).string();
}

data::LabelledSet prefix_subset(const data::LabelledSet& set, int n, uint64_t seed) {
    if (n <= 0 || static_cast<size_t>(n) >= set.size()) return set;
    return data::take_subset(set, static_cast<size_t>(n), seed);
}

ensemble::EnsembleConfig make_ensemble(const std::vector<adaptive::SubModelPtr>& members,
                                       ensemble::Strategy strategy, uint64_t rd_seed) {
    ensemble::EnsembleConfig e;
    e.members = members;
    e.strategy = strategy;
    e.rd_seed = rd_seed;
    return e;
}

// Accuracy of every configured strategy over a fixed set of (image, label)
// pairs, re-using one set of member outputs per example.
std::vector<double> strategy_accuracies(const std::vector<adaptive::SubModelPtr>& members,
                                        const std::vector<ensemble::Strategy>& strategies,
                                        const std::vector<Tensor>& images,
                                        const std::vector<uint8_t>& labels,
                                        uint64_t rd_seed, int threads) {
    std::vector<std::vector<uint8_t>> correct(strategies.size(),
                                              std::vector<uint8_t>(images.size(), 0));
    ensemble::EnsembleConfig probe = make_ensemble(members, ensemble::Strategy::mv, rd_seed);
    parallel_for(
        static_cast<int64_t>(images.size()),
        [&](int64_t i) {
            const auto outs = ensemble::member_outputs(probe, images[static_cast<size_t>(i)]);
            for (size_t s = 0; s < strategies.size(); ++s) {
                const int label = ensemble::combine(outs, strategies[s], rd_seed,
                                                    static_cast<uint64_t>(i));
                correct[s][static_cast<size_t>(i)] =
                    label == static_cast<int>(labels[static_cast<size_t>(i)]) ? 1 : 0;
            }
        },
        threads);
    std::vector<double> acc(strategies.size(), 0.0);
    for (size_t s = 0; s < strategies.size(); ++s) {
        int64_t hits = 0;
        for (uint8_t c : correct[s]) hits += c;
        acc[s] = images.empty() ? 0.0 : static_cast<double>(hits) /
                                            static_cast<double>(images.size());
    }
    return acc;
}

std::vector<ensemble::Strategy> strategies_of(const ExperimentConfig& c) {
    std::vector<ensemble::Strategy> out;
    for (const auto& name : c.ensemble_list())
        out.push_back(ensemble::strategy_from_name(name));
    return out;
}

void dump_ae(const ExperimentConfig& config, const std::string& group, size_t index,
             const Tensor& ae, const std::string& victim_id, size_t source_index) {
    const fs::path dir = fs::path(config.out_dir) / "aes" / group;
    fs::create_directories(dir);
    const std::string stem = (dir / std::to_string(index)).string();
    std::ofstream bin(stem + ".bin", std::ios::binary);
    for (float v : ae.data) {
        const uint32_t u = std::bit_cast<uint32_t>(v);
        const unsigned char b[4] = {
            static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
            static_cast<unsigned char>(u >> 16), static_cast<unsigned char>(u >> 24)};
        bin.write(reinterpret_cast<const char*>(b), 4);
    }
    nlohmann::json side;
    side["shape"] = ae.dims;
    side["source_example_index"] = source_index;
    side["victim_id"] = victim_id;
    std::ofstream js(stem + ".json");
    js << side.dump(2) << "\n";
}

Report new_report(const ExperimentConfig& config, const std::string& kind) {
    Report r;
    r.kind = kind;
    r.config_fingerprint = config.fingerprint();
    r.seed = config.seed;
    return r;
}

}  // namespace

attacks::AttackConfig attack_from_name(const ExperimentConfig& config,
                                       const std::string& preset_name) {
    attacks::AttackConfig a = attacks::preset(preset_name);
    if (a.algorithm == attacks::Algorithm::cw_l2) {
        if (config.cw_search_steps > 0) a.binary_search_steps = config.cw_search_steps;
        if (config.cw_iters > 0) a.max_iterations = config.cw_iters;
    }
    if (a.algorithm == attacks::Algorithm::pgd && config.pgd_iters > 0)
        a.max_iterations = std::min(a.max_iterations, config.pgd_iters);
    return a;
}

DataBundle load_data(const ExperimentConfig& config) {
    const fs::path dir = config.resolved_data_dir();
    DataBundle d;
    d.train = data::load_idx((dir / "train-images-idx3-ubyte").string(),
                             (dir / "train-labels-idx1-ubyte").string());
    data::LabelledSet t10k = data::load_idx((dir / "t10k-images-idx3-ubyte").string(),
                                            (dir / "t10k-labels-idx1-ubyte").string());
    auto [val, test] = data::split_val_test(t10k, mix_seed(config.seed, kSaltSplit));
    d.val = std::move(val);
    d.test = std::move(test);
    if (config.train_subset > 0 && static_cast<size_t>(config.train_subset) < d.train.size())
        d.train = data::take_subset(d.train, static_cast<size_t>(config.train_subset),
                                    mix_seed(config.seed, kSaltTrainSubset));
    d.eval = prefix_subset(d.test, config.eval_subset, mix_seed(config.seed, kSaltEval));
    return d;
}

nlohmann::json cmd_train(const ExperimentConfig& config) {
    const DataBundle data = load_data(config);
    fs::create_directories(config.models_dir);

    std::vector<transforms::TransformSpec> specs;
    specs.push_back(transforms::identity_spec());
    for (auto& s : transforms::registry(config.hybrid_models)) specs.push_back(s);

    classifier::TrainingConfig tc;
    tc.lr = static_cast<float>(config.lr);
    tc.batch_size = config.batch;
    tc.max_epochs = config.max_epochs;
    tc.patience = config.patience;
    tc.arch = arch_of(config);

    struct Row {
        std::string id;
        double val_loss;
        int best_epoch;
        int epochs_run;
    };
    std::vector<Row> rows(specs.size());
    parallel_for(
        static_cast<int64_t>(specs.size()),
        [&](int64_t i) {
            const auto& spec = specs[static_cast<size_t>(i)];
            const auto trained = classifier::train_submodel(spec, data.train, data.val, tc,
                                                            model_seed(config, spec.id));
            classifier::save_weights(trained.sub.weights, model_path(config, spec.id));
            rows[static_cast<size_t>(i)] = {spec.id, trained.best_val_loss,
                                            trained.best_epoch, trained.epochs_run};
        },
        config.threads);

    nlohmann::json manifest;
    manifest["config_fingerprint"] = config.fingerprint();
    manifest["seed"] = config.seed;
    manifest["arch"] = config.arch;
    manifest["models"] = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json m;
        m["id"] = r.id;
        m["file"] = r.id + ".egw";
        m["val_loss"] = fmt4(r.val_loss);
        m["best_epoch"] = r.best_epoch;
        m["epochs_run"] = r.epochs_run;
        manifest["models"].push_back(m);
    }
    std::ofstream out(fs::path(config.models_dir) / "manifest.json");
    out << manifest.dump(2) << "\n";
    return manifest;
}

Suite load_suite(const ExperimentConfig& config, bool need_irreversible) {
    Suite suite;
    auto load_one = [&](const transforms::TransformSpec& spec) -> adaptive::SubModelPtr {
        const std::string path = model_path(config, spec.id);
        if (!fs::exists(path)) return nullptr;
        auto sub = std::make_shared<classifier::SubModel>();
        sub->spec = spec;
        sub->weights = classifier::load_weights(path);
        return sub;
    };

    suite.original = load_one(transforms::identity_spec());
    if (!suite.original)
        throw std::runtime_error("missing model file for 'original' in " +
                                 config.models_dir + " (run `gauntlet train` first)");
    for (const auto& spec : transforms::registry(false)) {
        auto sub = load_one(spec);
        if (!sub)
            throw std::runtime_error("missing model file for '" + spec.id + "' in " +
                                     config.models_dir);
        suite.reversible.push_back(std::move(sub));
    }
    const auto all = transforms::registry(true);
    for (size_t i = 14; i < all.size(); ++i) {
        auto sub = load_one(all[i]);
        if (sub) suite.irreversible.push_back(std::move(sub));
    }
    if (need_irreversible && suite.irreversible.empty())
        throw std::runtime_error("no irreversible models in " + config.models_dir +
                                 " (train with hybrid_models = true)");
    return suite;
}

std::vector<adaptive::SubModelPtr> Suite::with_original() const {
    std::vector<adaptive::SubModelPtr> out;
    out.push_back(original);
    for (const auto& m : reversible) out.push_back(m);
    return out;
}

adaptive::TransferRanking compute_ranking(const ExperimentConfig& config,
                                          const Suite& suite, const DataBundle& data) {
    const data::LabelledSet sample = prefix_subset(
        data.val, config.ranking_subset, mix_seed(config.seed, kSaltRanking));
    return adaptive::transfer_ranking(suite.reversible,
                                      attack_from_name(config, config.ranking_attack),
                                      sample, config.threads);
}

void emit(const Report& r, const ExperimentConfig& config, const std::string& stem) {
    fs::create_directories(config.out_dir);
    write_report(r, (fs::path(config.out_dir) / (stem + ".csv")).string(),
                 ReportFormat::csv);
    write_report(r, (fs::path(config.out_dir) / (stem + ".json")).string(),
                 ReportFormat::json);
}

Report cmd_benign(const ExperimentConfig& config) {
    Stopwatch timer;
    config.apply_backend();
    const DataBundle data = load_data(config);
    const Suite suite = load_suite(config);
    const auto strategies = strategies_of(config);
    const uint64_t rd_seed = mix_seed(config.seed, kSaltRd);

    Report r = new_report(config, "benign");
    r.columns = {"row"};
    for (const auto& s : config.ensemble_list()) r.columns.push_back(s);
    const auto acc = strategy_accuracies(suite.reversible, strategies, data.eval.images,
                                         data.eval.labels, rd_seed, config.threads);
    std::vector<std::string> row = {"benign"};
    for (double a : acc) row.push_back(fmt4(a));
    r.rows.push_back(std::move(row));
    r.wall_seconds = timer.seconds();
    return r;
}

std::vector<Report> cmd_transfer(const ExperimentConfig& config) {
    config.apply_backend();
    const DataBundle data = load_data(config);
    const Suite suite = load_suite(config);
    const auto victims = suite.with_original();

    std::vector<Report> reports;
    for (const auto& name : config.attack_list()) {
        Stopwatch timer;
        const attacks::AttackConfig attack = attack_from_name(config, name);
        const int subset = attack.algorithm == attacks::Algorithm::cw_l2 &&
                                   config.cw_transfer_subset > 0
                               ? std::min(config.cw_transfer_subset, config.transfer_subset)
                               : config.transfer_subset;
        const data::LabelledSet set =
            prefix_subset(data.test, subset, mix_seed(config.seed, kSaltTransfer));
        const auto matrix =
            adaptive::transfer_matrix(victims, attack, set, config.threads);

        Report r = new_report(config, "transfer");
        r.columns = {"victim", "attack", "num_aes"};
        for (const auto& id : matrix.evaluator_ids) r.columns.push_back(id);
        r.columns.push_back("average");
        for (size_t vi = 0; vi < matrix.victim_ids.size(); ++vi) {
            std::vector<std::string> row = {matrix.victim_ids[vi], name,
                                            std::to_string(matrix.ae_counts[vi])};
            for (const auto& cell : matrix.rates[vi])
                row.push_back(cell ? fmt4(*cell) : "na");
            row.push_back(matrix.row_averages[vi] ? fmt4(*matrix.row_averages[vi]) : "na");
            r.rows.push_back(std::move(row));
        }
        r.wall_seconds = timer.seconds();
        reports.push_back(std::move(r));
    }
    return reports;
}

namespace {

// Generates per-example AEs on one target member over the evaluation images
// and evaluates every strategy on them; also reports the mean dissimilarity.
struct TargetSweep {
    std::vector<double> accuracies;
    double mean_dis = 0.0;
};

TargetSweep sweep_target(const ExperimentConfig& config, const Suite& suite,
                         const adaptive::SubModelPtr& target,
                         const attacks::AttackConfig& attack,
                         const std::vector<ensemble::Strategy>& strategies,
                         const data::LabelledSet& eval_set, uint64_t rd_seed,
                         const std::string& dump_group) {
    std::vector<Tensor> aes(eval_set.size());
    std::vector<double> dis(eval_set.size(), 0.0);
    parallel_for(
        static_cast<int64_t>(eval_set.size()),
        [&](int64_t i) {
            const size_t idx = static_cast<size_t>(i);
            const Tensor xt = transforms::apply(target->spec, eval_set.images[idx]);
            const attacks::SubModelView view(*target);
            auto res = attacks::run_attack(view, xt, eval_set.labels[idx], attack);
            Tensor adv = transforms::to_original(target->spec, res.adversarial);
            dis[idx] = adaptive::dissimilarity(adv, eval_set.images[idx]);
            aes[idx] = std::move(adv);
        },
        config.threads);

    if (config.dump_aes && !dump_group.empty())
        for (size_t i = 0; i < aes.size(); ++i)
            dump_ae(config, dump_group, i, aes[i], target->spec.id, i);

    TargetSweep out;
    out.accuracies = strategy_accuracies(suite.reversible, strategies, aes,
                                         eval_set.labels, rd_seed, config.threads);
    double sum = 0.0;
    for (double d : dis) sum += d;
    out.mean_dis = eval_set.empty() ? 0.0 : sum / static_cast<double>(eval_set.size());
    return out;
}

}  // namespace

Report cmd_taa(const ExperimentConfig& config) {
    Stopwatch timer;
    config.apply_backend();
    const DataBundle data = load_data(config);
    const Suite suite = load_suite(config);
    const auto strategies = strategies_of(config);
    const uint64_t rd_seed = mix_seed(config.seed, kSaltRd);
    const auto ranking = compute_ranking(config, suite, data);

    // target selection
    std::vector<adaptive::SubModelPtr> targets;
    if (config.taa_targets == "all") {
        targets = suite.with_original();
    } else if (config.taa_targets == "top") {
        for (const auto& m : suite.reversible)
            if (m->spec.id == ranking.id_at(0)) targets.push_back(m);
    } else {
        for (const auto& id : split_list(config.taa_targets))
            for (const auto& m : suite.with_original())
                if (m->spec.id == id) targets.push_back(m);
    }
    if (targets.empty()) throw std::runtime_error("taa: no targets selected");

    Report r = new_report(config, "taa");
    r.columns = {"target", "attack"};
    for (const auto& s : config.ensemble_list()) r.columns.push_back(s);
    r.columns.push_back("dis");

    {  // benign reference row
        const auto acc = strategy_accuracies(suite.reversible, strategies,
                                             data.eval.images, data.eval.labels, rd_seed,
                                             config.threads);
        std::vector<std::string> row = {"benign", "none"};
        for (double a : acc) row.push_back(fmt4(a));
        row.push_back("na");
        r.rows.push_back(std::move(row));
    }

    for (const auto& name : config.attack_list()) {
        const attacks::AttackConfig attack = attack_from_name(config, name);
        data::LabelledSet eval_set = data.eval;
        if (attack.algorithm == attacks::Algorithm::cw_l2 && config.cw_taa_subset > 0 &&
            static_cast<size_t>(config.cw_taa_subset) < eval_set.size())
            eval_set = prefix_subset(data.test, config.cw_taa_subset,
                                     mix_seed(config.seed, kSaltEval));
        for (const auto& target : targets) {
            const std::string group =
                config.dump_aes ? "taa_" + name + "_" + target->spec.id : "";
            const auto sweep = sweep_target(config, suite, target, attack, strategies,
                                            eval_set, rd_seed, group);
            std::vector<std::string> row = {target->spec.id, name};
            for (double a : sweep.accuracies) row.push_back(fmt4(a));
            row.push_back(fmt4(sweep.mean_dis));
            r.rows.push_back(std::move(row));
        }
    }
    r.wall_seconds = timer.seconds();
    return r;
}

Report cmd_paa(const ExperimentConfig& config) {
    Stopwatch timer;
    config.apply_backend();
    const DataBundle data = load_data(config);
    const Suite suite = load_suite(config);
    const auto strategies = strategies_of(config);
    const uint64_t rd_seed = mix_seed(config.seed, kSaltRd);
    const auto ranking = compute_ranking(config, suite, data);

    Report r = new_report(config, "paa");
    r.columns = {"attack", "aggregation"};
    for (const auto& s : config.ensemble_list()) r.columns.push_back(s);
    r.columns.push_back("mean_dis");
    r.columns.push_back("max_dis");

    for (const auto& name : config.paa_attack_list()) {
        const attacks::AttackConfig attack = attack_from_name(config, name);
        const int subset = attack.algorithm == attacks::Algorithm::cw_l2 &&
                                   config.cw_paa_subset > 0
                               ? std::min(config.cw_paa_subset, config.paa_subset)
                               : config.paa_subset;
        const data::LabelledSet eval_set =
            prefix_subset(data.eval, subset, mix_seed(config.seed, kSaltEval + 1));

        for (const auto& agg_name : config.aggregation_list()) {
            const auto strategy = adaptive::aggregation_from_name(agg_name);
            std::vector<Tensor> aes(eval_set.size());
            std::vector<double> dis(eval_set.size(), 0.0);
            parallel_for(
                static_cast<int64_t>(eval_set.size()),
                [&](int64_t i) {
                    const size_t idx = static_cast<size_t>(i);
                    auto res = adaptive::paa(eval_set.images[idx], eval_set.labels[idx],
                                             suite.reversible, config.budget, attack,
                                             strategy, ranking);
                    dis[idx] = adaptive::dissimilarity(res.result.adversarial,
                                                       eval_set.images[idx]);
                    aes[idx] = std::move(res.result.adversarial);
                },
                config.threads);

            if (config.dump_aes)
                for (size_t i = 0; i < aes.size(); ++i)
                    dump_ae(config, "paa_" + name + "_" + agg_name, i, aes[i],
                            "ensemble", i);

            const auto acc = strategy_accuracies(suite.reversible, strategies, aes,
                                                 eval_set.labels, rd_seed, config.threads);
            double sum = 0.0, mx = 0.0;
            for (double d : dis) {
                sum += d;
                mx = std::max(mx, d);
            }
            std::vector<std::string> row = {name, agg_name};
            for (double a : acc) row.push_back(fmt4(a));
            row.push_back(fmt4(eval_set.empty() ? 0.0
                                                : sum / static_cast<double>(eval_set.size())));
            row.push_back(fmt4(mx));
            r.rows.push_back(std::move(row));
        }
    }
    r.wall_seconds = timer.seconds();
    return r;
}

Report cmd_hybrid(const ExperimentConfig& config) {
    Stopwatch timer;
    config.apply_backend();
    const DataBundle data = load_data(config);
    const Suite suite = load_suite(config, /*need_irreversible=*/true);
    const auto strategies = strategies_of(config);
    const uint64_t rd_seed = mix_seed(config.seed, kSaltRd);

    Report r = new_report(config, "hybrid");
    r.columns = {"attack", "m", "rep", "members"};
    for (const auto& s : config.ensemble_list()) r.columns.push_back(s);

    std::vector<std::string> attack_names = split_list(config.hybrid_attack);
    for (const auto& name : attack_names) {
        // AEs generated once, on the original model
        const attacks::AttackConfig attack = attack_from_name(config, name);
        std::vector<Tensor> aes(data.eval.size());
        parallel_for(
            static_cast<int64_t>(data.eval.size()),
            [&](int64_t i) {
                const size_t idx = static_cast<size_t>(i);
                const attacks::SubModelView view(*suite.original);
                auto res = attacks::run_attack(view, data.eval.images[idx],
                                               data.eval.labels[idx], attack);
                aes[idx] = std::move(res.adversarial);  // identity domain
            },
            config.threads);

        for (int m : config.hybrid_m_list()) {
            if (m > static_cast<int>(suite.irreversible.size()))
                throw std::runtime_error("hybrid: m = " + std::to_string(m) +
                                         " exceeds the " +
                                         std::to_string(suite.irreversible.size()) +
                                         " available irreversible models");
            for (int rep = 0; rep < config.hybrid_reps; ++rep) {
                std::vector<size_t> order(suite.irreversible.size());
                std::iota(order.begin(), order.end(), size_t{0});
                Rng rng(mix_seed(config.seed,
                                 kSaltHybrid + 1000 * static_cast<uint64_t>(m) + rep));
                rng.shuffle(order);
                std::vector<adaptive::SubModelPtr> drawn;
                for (int i = 0; i < m; ++i) drawn.push_back(suite.irreversible[order[i]]);

                std::vector<adaptive::SubModelPtr> hybrid = suite.reversible;
                for (const auto& d : drawn) hybrid.push_back(d);

                auto add_rows = [&](const std::vector<adaptive::SubModelPtr>& members,
                                    const std::string& kind) {
                    if (members.empty()) return;
                    const auto adv_acc =
                        strategy_accuracies(members, strategies, aes, data.eval.labels,
                                            rd_seed, config.threads);
                    std::vector<std::string> row = {name, std::to_string(m),
                                                    std::to_string(rep), kind};
                    for (double a : adv_acc) row.push_back(fmt4(a));
                    r.rows.push_back(std::move(row));
                    const auto ben_acc =
                        strategy_accuracies(members, strategies, data.eval.images,
                                            data.eval.labels, rd_seed, config.threads);
                    std::vector<std::string> brow = {"none", std::to_string(m),
                                                     std::to_string(rep), kind};
                    for (double a : ben_acc) brow.push_back(fmt4(a));
                    r.rows.push_back(std::move(brow));
                };
                add_rows(hybrid, "reversible+irreversible");
                if (m > 0) add_rows(drawn, "irreversible-only");
            }
        }
    }
    r.wall_seconds = timer.seconds();
    return r;
}

}  // namespace gauntlet::harness
