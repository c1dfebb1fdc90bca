#include "gauntlet/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "gauntlet/kernels.hpp"
#include "gauntlet/rng.hpp"

namespace gauntlet::harness {

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::string ExperimentConfig::resolved_data_dir() const {
    if (!data_dir.empty()) return data_dir;
    if (const char* env = std::getenv("GAUNTLET_DATA_DIR")) return env;
    return "data";
}

std::vector<std::string> ExperimentConfig::attack_list() const { return split_list(attacks); }
std::vector<std::string> ExperimentConfig::paa_attack_list() const {
    return split_list(paa_attacks);
}
std::vector<std::string> ExperimentConfig::aggregation_list() const {
    return split_list(aggregations);
}
std::vector<std::string> ExperimentConfig::ensemble_list() const {
    return split_list(ensembles);
}

std::vector<int> ExperimentConfig::hybrid_m_list() const {
    std::vector<int> out;
    for (const auto& s : split_list(hybrid_m)) out.push_back(std::stoi(s));
    return out;
}

namespace {

std::map<std::string, std::string> as_map(const ExperimentConfig& c) {
    std::map<std::string, std::string> m;
    m["data_dir"] = c.resolved_data_dir();
    m["models_dir"] = c.models_dir;
    m["out_dir"] = c.out_dir;
    m["seed"] = std::to_string(c.seed);
    m["arch"] = c.arch;
    m["train_subset"] = std::to_string(c.train_subset);
    {
        std::ostringstream os;
        os << c.lr;
        m["lr"] = os.str();
    }
    m["batch"] = std::to_string(c.batch);
    m["max_epochs"] = std::to_string(c.max_epochs);
    m["patience"] = std::to_string(c.patience);
    m["hybrid_models"] = c.hybrid_models ? "true" : "false";
    m["eval_subset"] = std::to_string(c.eval_subset);
    m["ranking_subset"] = std::to_string(c.ranking_subset);
    m["ranking_attack"] = c.ranking_attack;
    m["attacks"] = c.attacks;
    m["paa_attacks"] = c.paa_attacks;
    m["aggregations"] = c.aggregations;
    m["ensembles"] = c.ensembles;
    m["taa_targets"] = c.taa_targets;
    m["transfer_subset"] = std::to_string(c.transfer_subset);
    m["cw_transfer_subset"] = std::to_string(c.cw_transfer_subset);
    m["cw_taa_subset"] = std::to_string(c.cw_taa_subset);
    m["paa_subset"] = std::to_string(c.paa_subset);
    m["cw_paa_subset"] = std::to_string(c.cw_paa_subset);
    {
        std::ostringstream os;
        os << c.budget;
        m["budget"] = os.str();
    }
    m["hybrid_m"] = c.hybrid_m;
    m["hybrid_reps"] = std::to_string(c.hybrid_reps);
    m["hybrid_attack"] = c.hybrid_attack;
    m["cw_search_steps"] = std::to_string(c.cw_search_steps);
    m["cw_iters"] = std::to_string(c.cw_iters);
    m["pgd_iters"] = std::to_string(c.pgd_iters);
    m["dump_aes"] = c.dump_aes ? "true" : "false";
    // threads and backend affect scheduling, never results; they stay out of
    // the fingerprint
    return m;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

}  // namespace

std::string ExperimentConfig::canonical() const {
    std::ostringstream os;
    for (const auto& [k, v] : as_map(*this)) os << k << " = " << v << "\n";
    return os.str();
}

std::string ExperimentConfig::fingerprint() const {
    const std::string c = canonical();
    const uint64_t h = fnv1a(c.data(), c.size());
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    if (key == "data_dir") data_dir = value;
    else if (key == "models_dir") models_dir = value;
    else if (key == "out_dir") out_dir = value;
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "arch") arch = value;
    else if (key == "train_subset") train_subset = std::stoi(value);
    else if (key == "lr") lr = std::stod(value);
    else if (key == "batch") batch = std::stoi(value);
    else if (key == "max_epochs") max_epochs = std::stoi(value);
    else if (key == "patience") patience = std::stoi(value);
    else if (key == "hybrid_models") hybrid_models = parse_bool(value);
    else if (key == "eval_subset") eval_subset = std::stoi(value);
    else if (key == "ranking_subset") ranking_subset = std::stoi(value);
    else if (key == "ranking_attack") ranking_attack = value;
    else if (key == "attacks") attacks = value;
    else if (key == "paa_attacks") paa_attacks = value;
    else if (key == "aggregations") aggregations = value;
    else if (key == "ensembles") ensembles = value;
    else if (key == "taa_targets") taa_targets = value;
    else if (key == "transfer_subset") transfer_subset = std::stoi(value);
    else if (key == "cw_transfer_subset") cw_transfer_subset = std::stoi(value);
    else if (key == "cw_taa_subset") cw_taa_subset = std::stoi(value);
    else if (key == "paa_subset") paa_subset = std::stoi(value);
    else if (key == "cw_paa_subset") cw_paa_subset = std::stoi(value);
    else if (key == "budget") budget = std::stod(value);
    else if (key == "hybrid_m") hybrid_m = value;
    else if (key == "hybrid_reps") hybrid_reps = std::stoi(value);
    else if (key == "hybrid_attack") hybrid_attack = value;
    else if (key == "cw_search_steps") cw_search_steps = std::stoi(value);
    else if (key == "cw_iters") cw_iters = std::stoi(value);
    else if (key == "pgd_iters") pgd_iters = std::stoi(value);
    else if (key == "threads") threads = std::stoi(value);
    else if (key == "dump_aes") dump_aes = parse_bool(value);
    else if (key == "backend") backend = value;
    else throw std::invalid_argument("unknown config key '" + key + "'");
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    ExperimentConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = true;
            for (char ch : line)
                if (!std::isspace(static_cast<unsigned char>(ch))) blank = false;
            if (blank) continue;
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected 'key = value'");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

void ExperimentConfig::apply_backend() const {
    if (backend == "scalar") kernels::set_backend(kernels::Backend::scalar);
    else if (backend == "avx2") kernels::set_backend(kernels::Backend::avx2);
    else if (backend != "auto")
        throw std::invalid_argument("backend must be auto, scalar or avx2");
}

}  // namespace gauntlet::harness
