#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "gauntlet/digits.hpp"
#include "gauntlet/harness.hpp"

using namespace gauntlet;
using harness::ExperimentConfig;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("gauntlet_h_" + std::to_string(::getpid()) + "_" + std::to_string(n()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& n() {
        static int c = 0;
        return c;
    }
};

// Minimal dataset + 15-model suite for end-to-end harness tests. Deliberately
// tiny: the goal here is plumbing, not accuracy.
ExperimentConfig tiny_harness(const TempDir& dir) {
    const fs::path data_dir = dir.path / "data";
    fs::create_directories(data_dir);
    const auto train = data::synth_digits(240, 1);
    const auto test = data::synth_digits(80, 2);
    data::write_idx(train, (data_dir / "train-images-idx3-ubyte").string(),
                    (data_dir / "train-labels-idx1-ubyte").string());
    data::write_idx(test, (data_dir / "t10k-images-idx3-ubyte").string(),
                    (data_dir / "t10k-labels-idx1-ubyte").string());

    ExperimentConfig c;
    c.data_dir = data_dir.string();
    c.models_dir = (dir.path / "models").string();
    c.out_dir = (dir.path / "reports").string();
    c.arch = "2,4,4,8";
    c.train_subset = 120;
    c.max_epochs = 1;
    c.patience = 0;
    c.eval_subset = 12;
    c.ranking_subset = 6;
    c.transfer_subset = 6;
    c.cw_transfer_subset = 4;
    c.cw_taa_subset = 4;
    c.paa_subset = 4;
    c.cw_paa_subset = 2;
    c.hybrid_reps = 2;
    c.hybrid_m = "0,2";
    c.taa_targets = "top";
    c.attacks = "taa-fgsm";
    c.paa_attacks = "paa-fgsm";
    c.cw_search_steps = 2;
    c.cw_iters = 5;
    return c;
}

}  // namespace

TEST_CASE("config: round-trip through file, unknown keys rejected, fingerprint stable") {
    TempDir dir;
    const fs::path cfg_path = dir.path / "a.cfg";
    {
        std::ofstream out(cfg_path);
        out << "# comment line\n";
        out << "seed = 12\n";
        out << "arch = 8,8,8,16   # trailing comment\n";
        out << "budget = 0.25\n";
        out << "\n";
        out << "ensembles = mv,avep\n";
    }
    const auto c = ExperimentConfig::from_file(cfg_path.string());
    CHECK(c.seed == 12);
    CHECK(c.arch == "8,8,8,16");
    CHECK(c.budget == doctest::Approx(0.25));
    CHECK(c.ensemble_list() == std::vector<std::string>{"mv", "avep"});

    ExperimentConfig c2 = c;
    CHECK(c2.fingerprint() == c.fingerprint());
    c2.seed = 13;
    CHECK(c2.fingerprint() != c.fingerprint());

    ExperimentConfig c3;
    CHECK_THROWS(c3.set("no_such_key", "1"));

    std::ofstream(dir.path / "bad.cfg") << "this is not a key-value line\n";
    CHECK_THROWS(ExperimentConfig::from_file((dir.path / "bad.cfg").string()));
}

TEST_CASE("fmt4 formatting rule") {
    CHECK(harness::fmt4(1.0) == "1.0000");
    CHECK(harness::fmt4(0.0) == "0.0000");
    CHECK(harness::fmt4(0.123456) == "0.1235");
    CHECK(harness::fmt4(0.985) == "0.9850");
}

TEST_CASE("report: csv layout and json payload round-trip") {
    harness::Report r;
    r.kind = "benign";
    r.config_fingerprint = "f00";
    r.seed = 5;
    r.columns = {"row", "mv"};
    r.rows = {{"benign", "0.9900"}};
    r.wall_seconds = 1.25;

    const std::string csv = harness::to_csv(r);
    CHECK(csv == "row,mv\nbenign,0.9900\n");

    const auto j = harness::full_json(r);
    const auto parsed = nlohmann::json::parse(j.dump());
    CHECK(parsed["payload"] == harness::payload_json(r));
    CHECK(parsed["payload"]["rows"][0][1] == "0.9900");
    CHECK(parsed["meta"].contains("wall_seconds"));

    TempDir dir;
    const std::string path = (dir.path / "r.json").string();
    harness::write_report(r, path, harness::ReportFormat::json);
    std::ifstream in(path);
    const auto back = nlohmann::json::parse(in);
    CHECK(back["payload"] == harness::payload_json(r));
}

TEST_CASE("attack_from_name applies CW effort overrides without touching presets") {
    ExperimentConfig c;
    c.cw_search_steps = 3;
    c.cw_iters = 20;
    const auto cw = harness::attack_from_name(c, "cw");
    CHECK(cw.binary_search_steps == 3);
    CHECK(cw.max_iterations == 20);
    const auto pgd = harness::attack_from_name(c, "taa-pgd");
    CHECK(pgd.max_iterations == 100);  // untouched
    CHECK(attacks::preset("cw").binary_search_steps == 10);
}

TEST_CASE("end-to-end harness on a tiny suite") {
    TempDir dir;
    ExperimentConfig c = tiny_harness(dir);

    const auto manifest = harness::cmd_train(c);
    CHECK(manifest["models"].size() == 15);  // original + 14 reversible
    CHECK(fs::exists(fs::path(c.models_dir) / "original.egw"));
    CHECK(fs::exists(fs::path(c.models_dir) / "shift-top-left.egw"));
    CHECK(fs::exists(fs::path(c.models_dir) / "manifest.json"));

    // deterministic retrain: byte-identical weights
    const auto before = [&] {
        std::ifstream in(fs::path(c.models_dir) / "rotate-90.egw", std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    }();
    harness::cmd_train(c);
    const auto after = [&] {
        std::ifstream in(fs::path(c.models_dir) / "rotate-90.egw", std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    }();
    CHECK(before == after);

    const auto suite = harness::load_suite(c);
    CHECK(suite.reversible.size() == 14);
    CHECK(suite.original->spec.id == "original");

    // benign report: one row, strategies as columns, values in [0,1]
    const auto benign = harness::cmd_benign(c);
    CHECK(benign.rows.size() == 1);
    CHECK(benign.columns.front() == "row");
    for (size_t i = 1; i < benign.rows[0].size(); ++i) {
        const double v = std::stod(benign.rows[0][i]);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    // reproducibility: identical payloads on a rerun
    const auto benign2 = harness::cmd_benign(c);
    CHECK(harness::payload_json(benign) == harness::payload_json(benign2));

    const auto transfer = harness::cmd_transfer(c);
    REQUIRE(transfer.size() == 1);
    CHECK(transfer[0].rows.size() == 15);  // 15 victims
    CHECK(transfer[0].columns[0] == "victim");

    const auto taa = harness::cmd_taa(c);
    CHECK(taa.rows.size() == 2);  // benign row + one (top target, fgsm) row
    CHECK(taa.rows[0][0] == "benign");

    const auto paa = harness::cmd_paa(c);
    CHECK(paa.rows.size() == 4);  // one attack x four aggregations
    // dissimilarity column respects the budget
    for (const auto& row : paa.rows) {
        const double max_dis = std::stod(row.back());
        CHECK(max_dis <= c.budget + 1e-9);
    }

    // hybrid needs irreversible models
    CHECK_THROWS(harness::cmd_hybrid(c));

    // reports land on disk via emit()
    harness::emit(benign, c, "benign");
    CHECK(fs::exists(fs::path(c.out_dir) / "benign.csv"));
    CHECK(fs::exists(fs::path(c.out_dir) / "benign.json"));

    // CSV parses back to the same cell grid
    std::ifstream csv_in(fs::path(c.out_dir) / "benign.csv");
    std::string header, row;
    std::getline(csv_in, header);
    std::getline(csv_in, row);
    CHECK(header == "row,rd,mv,t2mv,avep,avel");
    CHECK(row.substr(0, 7) == "benign,");
}
