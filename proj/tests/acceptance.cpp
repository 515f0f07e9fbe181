// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>

#include "alora/analysis.hpp"
#include "alora/checkpoint.hpp"
#include "alora/comm.hpp"
#include "alora/config.hpp"
#include "alora/experiment.hpp"
#include "alora/fed.hpp"
#include "alora/gradcheck.hpp"
#include "alora/studies.hpp"
#include "support.hpp"

using namespace alora;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeeds = 10;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome delta_m_reproduction() {
    const Vector single{78.84, 90.70, 73.98, 95.33, 85.80, 89.77, 81.06, 85.64};
    const std::vector<int> higher(8, 1);
    const std::vector<std::pair<Vector, double>> rows{
        {{77.39, 88.13, 73.61, 94.21, 84.20, 87.49, 79.53, 86.11}, 1.51},
        {{78.67, 90.07, 75.15, 95.13, 86.00, 87.92, 79.48, 85.16}, 0.48},
        {{79.69, 90.19, 74.31, 94.68, 86.00, 87.92, 80.40, 85.48}, 0.32},
    };
    Outcome o{true, ""};
    for (const auto& [scores, target] : rows) {
        const double v = delta_m_percent({scores, single, higher});
        o.pass = o.pass && std::abs(v - target) <= 0.01;
        o.detail += fmt("%.4f (want %.2f) ", v, target);
    }
    return o;
}

Outcome commcost_reproduction() {
    const Geometry g{4096, 4096, 64};
    const auto total = [](const std::vector<CommCost>& v, Strategy s) {
        for (const auto& c : v)
            if (c.strategy == s) return c.total() / 1e6;
        return std::nan("");
    };
    const auto homog = comm_cost(g, std::vector<std::size_t>(8, 8), 16);
    const auto het = comm_cost(g, std::vector<std::size_t>{64, 64, 32, 32, 16, 16, 8, 8}, 16);
    struct Row {
        const char* name;
        double got, want, tol;
    };
    const Row rows[] = {
        {"fedit", total(homog, Strategy::FedIT), 8.39, 0.005},
        {"fedsa", total(homog, Strategy::FedSA), 4.19, 0.005},
        {"fed_alora", total(homog, Strategy::FedALoRA), 4.19, 0.005},
        {"zero_padding", total(het, Strategy::ZeroPadding), 49.28, 0.005},
        {"flora", total(het, Strategy::FLoRA), 141.56, 0.005},
        {"fed_alora_hetero", total(het, Strategy::FedALoRAHetero), 12.12, 0.01},
    };
    Outcome o{true, ""};
    for (const Row& r : rows) {
        o.pass = o.pass && std::abs(r.got - r.want) <= r.tol * r.want;
        o.detail += fmt("%s %.2fM ", r.name, r.got);
    }
    return o;
}

Outcome gradient_correctness() {
    RngStream rng(2024);
    double worst = 0.0;
    std::size_t instances = 0;
    for (Scheme scheme : {Scheme::Vanilla, Scheme::SharingA, Scheme::ALoRA}) {
        const std::size_t n = scheme == Scheme::Vanilla ? 1 : 3;
        for (int t = 0; t < 50; ++t) {
            AdapterState s = init_adapter({16, 16, 4, n, scheme, 1.0}, rng);
            testing::randomize(s, rng);
            const Matrix w0 = gaussian(16, 16, rng, 0.25);
            const auto batch = testing::random_batch(4, 16, 16, rng);
            worst = std::max(worst, finite_difference_check(s, w0, batch).max_rel_error);
            ++instances;
        }
    }
    return {worst <= 1e-5, fmt("%zu instances, worst relative error %.2e", instances, worst)};
}

struct FedSetup {
    SyntheticSuite suite;
    std::vector<std::vector<Sample>> data;
};

FedSetup fed_setup(std::size_t clients, std::uint64_t seed) {
    FedSetup s;
    s.suite = gen_suite({.n_tasks = clients, .d_in = 12, .d_out = 12, .true_rank = 2, .samples_per_task = 100,
                         .seed = seed});
    for (const auto& t : s.suite.tasks) s.data.push_back(t.train);
    return s;
}

FedConfig fed_cfg(Strategy s, std::vector<std::size_t> ranks, std::size_t rounds) {
    FedConfig c;
    c.strategy = s;
    c.n_clients = ranks.size();
    c.ranks = std::move(ranks);
    c.rounds = rounds;
    c.d_m = 3;
    c.train = {.optimizer = {.lr = 1e-2}, .batch_size = 16};
    c.seed = 5;
    return c;
}

Outcome ledger_exactness() {
    const FedSetup s = fed_setup(4, 1);
    std::size_t entries = 0, mismatches = 0;
    for (Strategy strategy : all_strategies()) {
        const std::vector<std::size_t> ranks = requires_uniform_ranks(strategy) ? std::vector<std::size_t>{3, 3, 3, 3}
                                                                               : std::vector<std::size_t>{5, 3, 2, 1};
        Federation fed(fed_cfg(strategy, ranks, 4), s.suite.w0, s.data);
        fed.run();
        for (const LedgerEntry& e : fed.ledger().rounds)
            for (std::size_t i = 0; i < ranks.size(); ++i) {
                const Payload p = expected_payload(strategy, 12, 12, ranks, 3, i);
                ++entries;
                mismatches += (e.upload[i] != p.upload) + (e.download[i] != p.download);
            }
    }
    return {mismatches == 0 && entries > 0,
            fmt("%zu client-rounds over %zu strategies, %zu mismatches", entries, all_strategies().size(), mismatches)};
}

double max_diff(std::vector<const Matrix*> a, std::vector<const Matrix*> b) {
    if (a.size() != b.size()) return INFINITY;
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k]->rows() != b[k]->rows() || a[k]->cols() != b[k]->cols()) return INFINITY;
        m = std::max(m, max_abs_diff(*a[k], *b[k]));
    }
    return m;
}

std::vector<const Matrix*> mats(const HeteroBClient& c) { return {&c.a, &c.m, &c.b1, &c.b2, &c.b0}; }
std::vector<const Matrix*> mats(const HeteroAClient& c) { return {&c.b, &c.m, &c.a1, &c.a2, &c.a0}; }

template <class Client>
double hetero_replay_gap(const FedConfig& cfg, const FedSetup& s) {
    Federation fed(cfg, s.suite.w0, s.data);
    fed.run();
    Client c = std::get<Client>(init_client(cfg, 12, 12, 0).model);
    Matrix global;
    for (std::size_t t = 1; t <= cfg.rounds; ++t) {
        if (t > 1) {
            RngStream rng(client_init_seed(cfg, 0, t));
            begin_round(c, global, rng);
        }
        c = train(c, s.suite.w0, s.data[0], local_train_config(cfg, 0, t)).model;
        global = global.empty() ? shared_factor(c) : add(global, shared_factor(c));
    }
    return max_diff(mats(std::get<Client>(fed.clients()[0].model)), mats(c));
}

template <class Client>
double continuity_gap(const FedConfig& cfg, const FedSetup& s) {
    Federation fed(cfg, s.suite.w0, s.data);
    double worst = 0.0;
    for (std::size_t t = 1; t <= cfg.rounds; ++t) {
        fed.run_round();
        Client c = std::get<Client>(fed.clients()[0].model);
        const Matrix trained = effective_delta(c);
        worst = std::max(worst, max_abs_diff(trained, fed.client_delta(0)));
        RngStream rng(client_init_seed(cfg, 0, t + 1));
        begin_round(c, fed.clients()[0].inbox, rng);
        worst = std::max(worst, max_abs_diff(effective_delta(c), trained));
    }
    return worst;
}

Outcome protocol_equivalences() {
    const FedSetup one = fed_setup(1, 2);
    double worst = 0.0;
    std::string detail;
    for (Strategy strategy : {Strategy::FedALoRA, Strategy::FedIT, Strategy::FedSA}) {
        const FedConfig cfg = fed_cfg(strategy, {3}, 5);
        Federation fed(cfg, one.suite.w0, one.data);
        fed.run();
        AdapterState local = std::get<LoraClient>(init_client(cfg, 12, 12, 0).model).adapter;
        for (std::size_t t = 1; t <= cfg.rounds; ++t)
            local = train(local, one.suite.w0, one.data[0], local_train_config(cfg, 0, t)).model;
        const double gap = max_diff(trainable(std::get<LoraClient>(fed.clients()[0].model).adapter), trainable(std::as_const(local)));
        worst = std::max(worst, gap);
        detail += fmt("%s %.1e ", std::string(to_string(strategy)).c_str(), gap);
    }
    const double het = hetero_replay_gap<HeteroBClient>(fed_cfg(Strategy::FedALoRAHetero, {3}, 5), one);
    worst = std::max(worst, het);
    detail += fmt("fed_alora_hetero %.1e ", het);
    const double sa_het = hetero_replay_gap<HeteroAClient>(fed_cfg(Strategy::FedSAHetero, {3}, 5), one);
    worst = std::max(worst, sa_het);
    detail += fmt("fedsa_hetero %.1e ", sa_het);

    const FedSetup three = fed_setup(3, 3);
    Federation zp(fed_cfg(Strategy::ZeroPadding, {3, 3, 3}, 4), three.suite.w0, three.data);
    Federation it(fed_cfg(Strategy::FedIT, {3, 3, 3}, 4), three.suite.w0, three.data);
    zp.run();
    it.run();
    double zgap = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
        zgap = std::max(zgap, max_diff(trainable(std::get<LoraClient>(zp.clients()[i].model).adapter),
                                       trainable(std::get<LoraClient>(it.clients()[i].model).adapter)));
    worst = std::max(worst, zgap);
    detail += fmt("zero_padding~fedit %.1e ", zgap);

    const double cont = std::max(continuity_gap<HeteroBClient>(fed_cfg(Strategy::FedALoRAHetero, {3}, 5), one),
                                 continuity_gap<HeteroAClient>(fed_cfg(Strategy::FedSAHetero, {3}, 5), one));
    worst = std::max(worst, cont);
    detail += fmt("continuity %.1e", cont);
    return {worst <= 1e-12, detail};
}

Outcome init_similarity() {
    const InitSimilaritySettings st;
    const double bound = static_cast<double>(st.rank) / static_cast<double>(st.suite.d_in) + 0.1;
    int ok = 0;
    double min_same = 1.0, max_diff_a = 0.0;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        const InitSimilarityResult r = init_similarity_study(st, seed);
        ok += r.sim_a_same_init > 0.8 && r.sim_a_diff_init < bound && r.sim_b_diff_init > r.sim_a_diff_init;
        min_same = std::min(min_same, r.sim_a_same_init);
        max_diff_a = std::max(max_diff_a, r.sim_a_diff_init);
    }
    return {ok >= 8, fmt("%d/10 seeds; min Sim(A) same init %.3f, max Sim(A) different init %.3f (bound %.4f)", ok,
                         min_same, max_diff_a, bound)};
}

Outcome learning_dynamics() {
    const DynamicsSettings st;
    int ok = 0;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        const DynamicsResult r = dynamics_study(st, seed);
        ok += r.a.delta_d < r.b.delta_d && r.sim_a > r.sim_b;
    }
    return {ok >= 8, fmt("%d/10 seeds with dD(A) < dD(B) and Sim(A) > Sim(B)", ok)};
}

Outcome lazy_learning() {
    const LazySettings st;
    int norms = 0, conflicts = 0, both = 0;
    std::size_t c_sa = 0, c_al = 0;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        const LazyResult r = lazy_learning_study(st, seed);
        const bool n = r.grad_norm_shared_a < r.grad_norm_shared_b;
        const bool c = r.conflicts_sharing_a >= r.conflicts_alora;
        norms += n;
        conflicts += c;
        both += n && c;
        c_sa += r.conflicts_sharing_a;
        c_al += r.conflicts_alora;
    }
    return {both >= 8, fmt("%d/10 seeds; gradient-norm half %d/10, conflict half %d/10 (total conflicts "
                           "SharingA %zu, ALoRA %zu)",
                           both, norms, conflicts, c_sa, c_al)};
}

Outcome transfer() {
    const TransferSettings st;
    int homog = 0, het = 0;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        const TransferResult h = transfer_study(st, seed, false);
        const TransferResult x = transfer_study(st, seed, true);
        homog += h.fed_alora < h.fedsa;
        het += x.fed_alora < x.fedsa;
    }
    return {homog >= 8 && het >= 8, fmt("Fed-ALoRA better in %d/10 homogeneous, %d/10 heterogeneous", homog, het)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome infrastructure() {
    std::string detail;
    bool pass = true;
    const auto note = [&](bool ok, const char* what) {
        pass = pass && ok;
        detail += std::string(what) + (ok ? " ok; " : " FAILED; ");
    };

    RngStream rng(77);
    const AdapterState st = init_adapter({8, 6, 2, 3, Scheme::ALoRA, 1.0}, rng);
    SessionProgress progress;
    progress.loss_curve = {0.5, 0.25};
    const Checkpoint c = pack_session(st, progress);
    const Checkpoint back = decode_checkpoint(encode_checkpoint(c));
    note(back == c && unpack_session(back).state == st, "checkpoint round-trip");

    const fs::path root = fs::temp_directory_path() / "alora_acceptance";
    fs::remove_all(root);
    const std::string mt =
        "kind = multitask\nsuite.d_in = 16\nsuite.d_out = 16\nsuite.samples_per_task = 80\nsuite.task_shift = 2\n"
        "train.epochs = 6\ntrain.batch_size = 8\ncheckpoint.every = 3\n";
    const std::string fed =
        "kind = fed\nsuite.d_in = 16\nsuite.d_out = 16\nsuite.samples_per_task = 80\nfed.strategy = fed_alora_hetero\n"
        "fed.n_clients = 4\nfed.ranks = 4,4,2,1\nfed.d_m = 2\nfed.rounds = 5\ntrain.batch_size = 8\n";
    const auto run = [&](const std::string& text, const std::string& dir, const std::string& resume) {
        ExperimentConfig cfg = parse_config_text(text);
        cfg.out = (root / dir).string();
        cfg.resume = resume;
        return run_experiment(cfg).complete;
    };
    bool ran = run(mt, "mt1", "") && run(mt, "mt2", "") &&
               run(mt, "mt3", (root / "mt1/checkpoints/epoch-3.ckpt").string()) && run(fed, "fed1", "") &&
               run(fed, "fed2", "") && run(fed, "fed3", (root / "fed1/checkpoints/round-2.ckpt").string());
    note(ran, "runs");
    if (!ran) return {false, detail};
    bool rerun = true, resumed = true;
    for (const char* f : {"results.csv", "results.json", "tasks.csv", "gates.csv"}) {
        rerun = rerun && slurp(root / "mt1" / f) == slurp(root / "mt2" / f);
        resumed = resumed && slurp(root / "mt1" / f) == slurp(root / "mt3" / f);
    }
    for (const char* f : {"results.csv", "results.json", "ledger.csv"}) {
        rerun = rerun && slurp(root / "fed1" / f) == slurp(root / "fed2" / f);
        resumed = resumed && slurp(root / "fed1" / f) == slurp(root / "fed3" / f);
    }
    resumed = resumed && load_checkpoint(root / "mt1/checkpoints/final.ckpt") ==
                             load_checkpoint(root / "mt3/checkpoints/final.ckpt");
    resumed = resumed && load_checkpoint(root / "fed1/checkpoints/final.ckpt") ==
                             load_checkpoint(root / "fed3/checkpoints/final.ckpt");
    note(rerun, "rerun byte-identical");
    note(resumed, "resume equals straight run");
    return {pass, detail};
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"delta_m reproduction", delta_m_reproduction},
        {"communication cost reproduction", commcost_reproduction},
        {"gradient correctness", gradient_correctness},
        {"ledger exactness", ledger_exactness},
        {"protocol equivalences", protocol_equivalences},
        {"similarity from initialization", init_similarity},
        {"learning dynamics", learning_dynamics},
        {"lazy learning", lazy_learning},
        {"transfer", transfer},
        {"infrastructure", infrastructure},
    };
    int failed = 0, n = 0;
    for (const auto& [name, fn] : criteria) {
        ++n;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::printf("criterion %d: %s %s [%.1fs] %s\n", n, o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", n - failed, n);
    return failed == 0 ? 0 : 1;
}
