#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "alora/checkpoint.hpp"
#include "alora/config.hpp"
#include "alora/experiment.hpp"
#include "alora/results.hpp"
#include "support.hpp"

using namespace alora;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("alora_harness_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> config_errors(std::string_view text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.errors();
    }
    return {};
}

const char* kMultitask =
    "kind = multitask\n"
    "suite.n_tasks = 3\n"
    "suite.d_in = 10\n"
    "suite.d_out = 10\n"
    "suite.samples_per_task = 60\n"
    "suite.task_shift = 2\n"
    "adapter.rank = 2\n"
    "train.epochs = 6\n"
    "train.batch_size = 8\n"
    "train.lr = 0.005\n"
    "checkpoint.every = 2\n";

const char* kFed =
    "kind = fed\n"
    "suite.d_in = 10\n"
    "suite.d_out = 10\n"
    "suite.samples_per_task = 60\n"
    "fed.strategy = fed_alora_hetero\n"
    "fed.n_clients = 3\n"
    "fed.ranks = 4,2,1\n"
    "fed.d_m = 2\n"
    "fed.rounds = 5\n"
    "train.batch_size = 8\n"
    "train.lr = 0.005\n";

ExperimentConfig config_at(const char* text, const fs::path& out, const std::string& resume = {}) {
    ExperimentConfig cfg = parse_config_text(text);
    cfg.out = out.string();
    cfg.resume = resume;
    return cfg;
}

Checkpoint sample_checkpoint() {
    RngStream rng(9);
    Checkpoint c;
    c.tag = "alora";
    c.index = 7;
    c.rng = {123, 45};
    c.integers = {{"a", 1}, {"b", 0xffffffffffffULL}};
    c.matrices = {{"m0", gaussian(3, 2, rng)}, {"empty", Matrix()}};
    return c;
}

}  // namespace

TEST_CASE("config defaults and echo round-trip") {
    const ExperimentConfig d = parse_config_text("");
    ExperimentConfig expected;
    expected.fed.ranks.assign(expected.fed.n_clients, expected.adapter.rank);
    CHECK(d == expected);
    for (const fs::path& p : fs::directory_iterator(ALORA_CONFIG_DIR)) {
        INFO(p.string());
        const ExperimentConfig cfg = parse_config(p);
        const std::string echo = echo_config(cfg);
        CHECK(parse_config_text(echo) == cfg);
        CHECK(echo_config(parse_config_text(echo)) == echo);
    }
}

TEST_CASE("config errors are collected with line numbers") {
    const auto errors = config_errors(
        "kind = multitask\n"
        "# comment\n"
        "bogus.key = 1\n"
        "train.lr = fast\n"
        "seed = 1\n"
        "seed = 2\n"
        "no equals sign\n");
    REQUIRE(errors.size() == 4);
    CHECK(errors[0].find("line 3") == 0);
    CHECK(errors[0].find("bogus.key") != std::string::npos);
    CHECK(errors[1].find("line 4") == 0);
    CHECK(errors[2].find("line 6") == 0);
    CHECK(errors[2].find("line 5") != std::string::npos);
    CHECK(errors[3].find("line 7") == 0);

    CHECK(!config_errors("kind = fed\nfed.n_clients = 3\nfed.ranks = 2,2\n").empty());
    CHECK(!config_errors("kind = analyze\n").empty());
    CHECK(!config_errors("kind = multitask\ntrain.epochs = 0\n").empty());
    CHECK(!config_errors("kind = multitask\nsuite.task_shift = -1\n").empty());
    CHECK(config_errors("kind = multitask   # trailing comment\n").empty());
}

TEST_CASE("config hash ignores output location only") {
    ExperimentConfig a = parse_config_text(kMultitask), b = a;
    b.out = "elsewhere";
    b.resume = "x.ckpt";
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    b.seed = 1;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(suite_seed(a) != suite_seed(b));
    CHECK(train_seed(a) != init_seed(a));
}

TEST_CASE("checkpoint encoding round-trips and rejects damage") {
    const Checkpoint c = sample_checkpoint();
    const auto bytes = encode_checkpoint(c);
    CHECK(decode_checkpoint(bytes) == c);
    CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "ALORACKP");

    const auto offset_of = [](std::vector<unsigned char> b) -> std::uint64_t {
        try {
            decode_checkpoint(b);
        } catch (const CheckpointError& e) {
            return e.offset();
        }
        FAIL("damaged checkpoint decoded");
        return 0;
    };
    auto magic = bytes;
    magic[0] = 'X';
    CHECK(offset_of(magic) == 0);
    auto version = bytes;
    version[8] = 99;
    CHECK(offset_of(version) == 8);
    auto flipped = bytes;
    flipped[bytes.size() - 20] ^= 0x10;
    CHECK(offset_of(flipped) == bytes.size() - 8);
    auto truncated = bytes;
    truncated.resize(bytes.size() / 2);
    CHECK(offset_of(truncated) <= truncated.size());
    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(decode_checkpoint(trailing), CheckpointError);
    for (std::size_t cut = 0; cut < bytes.size(); cut += 7) {
        std::vector<unsigned char> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
        CHECK_THROWS_AS(decode_checkpoint(part), CheckpointError);
    }

    const fs::path dir = scratch("ckpt");
    fs::create_directories(dir);
    save_checkpoint(c, dir / "c.ckpt");
    CHECK(load_checkpoint(dir / "c.ckpt") == c);
    CHECK_THROWS(load_checkpoint(dir / "missing.ckpt"));
}

TEST_CASE("csv rendering and parse-back") {
    Table t{{"k", "x", "name"}, {}};
    t.add({std::int64_t{3}, 0.1, std::string("a")});
    t.add({std::int64_t{-1}, 1.0 / 3.0, std::string("b")});
    CHECK(render_csv(t) == "k,x,name\n3,0.10000000000000001,a\n-1,0.33333333333333331,b\n");
    const fs::path dir = scratch("csv");
    fs::create_directories(dir);
    write_csv(t, dir / "t.csv");
    const Table back = read_csv(dir / "t.csv");
    CHECK(back.columns == t.columns);
    REQUIRE(back.rows.size() == 2);
    CHECK(std::stod(std::get<std::string>(back.rows[1][1])) == 1.0 / 3.0);
    CHECK_THROWS(t.add({std::int64_t{1}}));
}

TEST_CASE("multitask run: artifacts, determinism and resume") {
    const fs::path a = scratch("mt_a"), b = scratch("mt_b"), r = scratch("mt_resume");
    const RunReport ra = run_experiment(config_at(kMultitask, a));
    REQUIRE_MESSAGE(ra.complete, ra.error);
    const RunReport rb = run_experiment(config_at(kMultitask, b));
    REQUIRE(rb.complete);
    for (const char* f : {"results.csv", "results.json", "tasks.csv", "gates.csv"})
        CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
    for (const char* f : {"step-2", "epoch-2", "epoch-4", "final"})
        CHECK(fs::exists(a / "checkpoints" / (std::string(f) + ".ckpt")));
    CHECK(!fs::exists(a / "checkpoints" / "epoch-6.ckpt"));

    const Table curve = read_csv(a / "results.csv");
    CHECK(curve.rows.size() == 6);
    const std::string manifest = slurp(a / kManifestFile);
    CHECK(manifest.find("status = complete") != std::string::npos);
    CHECK(manifest.find(config_hash(parse_config_text(kMultitask))) != std::string::npos);
    for (const auto& f : ra.files) CHECK(manifest.find(f.generic_string()) != std::string::npos);
    CHECK(parse_config(a / kEchoFile) == config_at(kMultitask, a));

    const RunReport rr = run_experiment(config_at(kMultitask, r, (a / "checkpoints/epoch-4.ckpt").string()));
    REQUIRE_MESSAGE(rr.complete, rr.error);
    for (const char* f : {"results.csv", "results.json", "tasks.csv", "gates.csv"})
        CHECK_MESSAGE(slurp(a / f) == slurp(r / f), f);
    CHECK(load_checkpoint(a / "checkpoints/final.ckpt") == load_checkpoint(r / "checkpoints/final.ckpt"));

    const fs::path bad = scratch("mt_bad");
    const RunReport refused = run_experiment(config_at(kMultitask, bad, (a / "checkpoints/step-2.ckpt").string()));
    CHECK(!refused.complete);
    CHECK(refused.error.find("mid-epoch") != std::string::npos);
    CHECK(slurp(bad / kManifestFile).find("status = incomplete") != std::string::npos);
}

TEST_CASE("federated run: artifacts and resume") {
    const fs::path a = scratch("fed_a"), r = scratch("fed_resume");
    const RunReport ra = run_experiment(config_at(kFed, a));
    REQUIRE_MESSAGE(ra.complete, ra.error);
    const Table metrics = read_csv(a / "results.csv");
    CHECK(metrics.rows.size() == 5 * 3);
    const Table ledger = read_csv(a / "ledger.csv");
    for (const auto& row : ledger.rows) {
        CHECK(std::get<std::string>(row[2]) == std::get<std::string>(row[4]));
        CHECK(std::get<std::string>(row[3]) == std::get<std::string>(row[5]));
    }
    CHECK(slurp(a / "results.json").find("\"ledger_matches_formula\": true") != std::string::npos);

    const RunReport rr = run_experiment(config_at(kFed, r, (a / "checkpoints/round-2.ckpt").string()));
    REQUIRE_MESSAGE(rr.complete, rr.error);
    for (const char* f : {"results.csv", "results.json", "ledger.csv"}) CHECK_MESSAGE(slurp(a / f) == slurp(r / f), f);
    CHECK(load_checkpoint(a / "checkpoints/final.ckpt") == load_checkpoint(r / "checkpoints/final.ckpt"));
}

TEST_CASE("analysis and commcost runs") {
    const fs::path mt = scratch("an_src"), an = scratch("an_out"), cc = scratch("cc_out");
    REQUIRE(run_experiment(config_at(kMultitask, mt)).complete);
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::Analysis;
    cfg.out = an.string();
    cfg.analysis_first = (mt / "checkpoints/epoch-2.ckpt").string();
    cfg.analysis_second = (mt / "checkpoints/final.ckpt").string();
    const RunReport ra = run_experiment(cfg);
    REQUIRE_MESSAGE(ra.complete, ra.error);
    CHECK(fs::exists(an / "results.csv"));

    cfg.analysis_second = (mt / "nope.ckpt").string();
    CHECK(!run_experiment(cfg).complete);

    ExperimentConfig c2;
    c2.kind = ExperimentKind::Commcost;
    c2.out = cc.string();
    const RunReport rc = run_experiment(c2);
    REQUIRE(rc.complete);
    CHECK(rc.summary.find("fedit 8.39M") != std::string::npos);
}
