#include "alora/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <limits>
#include <optional>

#include "alora/analysis.hpp"
#include "alora/checkpoint.hpp"
#include "alora/format.hpp"
#include "alora/linalg.hpp"
#include "alora/results.hpp"

namespace alora {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class Outputs {
public:
    explicit Outputs(const ExperimentConfig& cfg) : root_(cfg.out), hash_(config_hash(cfg)) {}

    fs::path path(const std::string& rel) const { return root_ / rel; }
    const std::string& hash() const noexcept { return hash_; }

    void text(const std::string& rel, const std::string& body) {
        write_text(path(rel), body);
        files_.push_back(rel);
    }
    void csv(const std::string& rel, const Table& t) {
        write_csv(t, path(rel));
        files_.push_back(rel);
    }
    void results(const Table& t, ordered_json summary) {
        emit_results(t, std::move(summary), hash_, path("results"));
        files_.push_back("results.csv");
        files_.push_back("results.json");
    }
    void checkpoint(const std::string& name, const Checkpoint& c) {
        const std::string rel = "checkpoints/" + name + ".ckpt";
        save_checkpoint(c, path(rel));
        files_.push_back(rel);
    }
    const std::vector<fs::path>& files() const noexcept { return files_; }

private:
    fs::path root_;
    std::string hash_;
    std::vector<fs::path> files_;
};

ordered_json number_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

std::string run_multitask(const ExperimentConfig& cfg, Outputs& out) {
    SuiteSpec spec = cfg.suite;
    spec.seed = suite_seed(cfg);
    const SyntheticSuite suite = gen_suite(spec);
    AdapterConfig ac = cfg.adapter;
    ac.d_in = suite.spec.d_in;
    ac.d_out = suite.spec.d_out;
    TrainConfig tc = cfg.train;
    tc.seed = train_seed(cfg);
    const std::vector<Sample> pooled = pooled_train(suite);

    std::optional<TrainSession<AdapterState>> session;
    if (!cfg.resume.empty()) {
        const Checkpoint ckpt = load_checkpoint(cfg.resume);
        if (ckpt.has_integer("mid_epoch"))
            throw std::invalid_argument("resume: '" + cfg.resume + "' was taken mid-epoch and cannot be resumed");
        SessionSnapshot snap = unpack_session(ckpt);
        if (!(snap.state.config == ac))
            throw std::invalid_argument("resume: checkpoint adapter does not match the configured adapter");
        session.emplace(std::move(snap.state), suite.w0, pooled, tc, std::move(snap.progress));
    } else {
        RngStream init(init_seed(cfg));
        session.emplace(init_adapter(ac, init), suite.w0, pooled, tc);
    }

    session->set_observer({.before_update = {}, .after_update = [&](const StepEvent<AdapterState>& e) {
                               if (e.step != 2) return;
                               Checkpoint c = pack_session(e.model, session->progress());
                               c.integers.push_back({"mid_epoch", 1});
                               out.checkpoint("step-2", c);
                           }});
    while (session->progress().epochs_done < tc.epochs) {
        session->run_epoch();
        const std::size_t done = session->progress().epochs_done;
        if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done < tc.epochs)
            out.checkpoint("epoch-" + std::to_string(done), pack_session(session->model(), session->progress()));
    }
    const AdapterState& model = session->model();
    out.checkpoint("final", pack_session(model, session->progress()));

    Table metrics{{"epoch", "train_loss"}, {}};
    const auto& curve = session->progress().loss_curve;
    for (std::size_t e = 0; e < curve.size(); ++e) metrics.add({static_cast<std::int64_t>(e + 1), curve[e]});

    std::vector<double> test(suite.tasks.size());
    for (std::size_t k = 0; k < suite.tasks.size(); ++k) test[k] = evaluate(model, suite.w0, suite.tasks[k].test);
    std::vector<double> base(suite.tasks.size(), kNaN);
    std::optional<double> dm;
    if (cfg.baselines) {
        base = single_task_baselines(suite, ac, tc);
        dm = delta_m_percent(TaskScores{test, base, std::vector<int>(test.size(), 0)});
    }
    Table tasks{{"task", "test_mse", "baseline_mse", "change_percent"}, {}};
    for (std::size_t k = 0; k < test.size(); ++k)
        tasks.add({static_cast<std::int64_t>(k), test[k], base[k], (test[k] - base[k]) / base[k] * 100.0});
    out.csv("tasks.csv", tasks);

    if (is_routed(ac.scheme)) {
        std::vector<Sample> evaluated;
        for (const auto& t : suite.tasks) evaluated.insert(evaluated.end(), t.test.begin(), t.test.end());
        const GateLog log = gate_activation_log(model, evaluated);
        Table gates{{"sample", "task", "layer"}, {}};
        for (std::size_t i = 0; i < ac.experts; ++i) gates.columns.push_back("w" + std::to_string(i));
        for (const GateRecord& r : log.rows) {
            std::vector<Cell> row{static_cast<std::int64_t>(r.sample), static_cast<std::int64_t>(r.task),
                                  static_cast<std::int64_t>(r.layer)};
            for (double w : r.weights) row.emplace_back(w);
            gates.add(std::move(row));
        }
        out.csv("gates.csv", gates);
    }

    double mean_test = 0.0;
    for (double v : test) mean_test += v / static_cast<double>(test.size());
    ordered_json summary;
    summary["kind"] = "multitask";
    summary["scheme"] = to_string(ac.scheme);
    summary["trainable_params"] = trainable_count(ac);
    summary["epochs"] = curve.size();
    summary["final_train_loss"] = curve.back();
    summary["mean_test_mse"] = mean_test;
    summary["test_mse"] = test;
    ordered_json base_json = ordered_json::array();
    for (double v : base) base_json.push_back(number_or_null(v));
    summary["baseline_mse"] = base_json;
    summary["delta_m_percent"] = dm ? ordered_json(*dm) : ordered_json(nullptr);
    out.results(metrics, summary);

    std::string text = std::string(to_string(ac.scheme)) + ": " + std::to_string(curve.size()) +
                       " epochs, mean test MSE " + format_17(mean_test);
    if (dm) text += ", delta_m% " + format_17(*dm);
    return text;
}

std::string run_federated(const ExperimentConfig& cfg, Outputs& out) {
    SuiteSpec spec = cfg.suite;
    spec.seed = suite_seed(cfg);
    const SyntheticSuite suite = gen_suite(spec);
    const FedConfig fc = federation_config(cfg);
    std::vector<std::vector<Sample>> data;
    for (std::size_t i = 0; i < fc.n_clients; ++i) data.push_back(suite.tasks[i].train);

    // One row per completed round: client losses, client test MSE, norm of
    // the first broadcast matrix.
    std::vector<std::vector<double>> losses, tests, norms;
    std::optional<Federation> fed;
    if (!cfg.resume.empty()) {
        FederationSnapshot snap = unpack_federation(load_checkpoint(cfg.resume), fc);
        if (snap.history.size() != 3) throw std::invalid_argument("resume: checkpoint lacks round history");
        for (std::size_t t = 0; t < snap.history[0].rows(); ++t) {
            const auto row = [&](const Matrix& m) {
                return std::vector<double>(m.row(t).begin(), m.row(t).end());
            };
            losses.push_back(row(snap.history[0]));
            tests.push_back(row(snap.history[1]));
            norms.push_back(row(snap.history[2]));
        }
        fed.emplace(fc, suite.w0, data, std::move(snap.clients), std::move(snap.server), std::move(snap.ledger));
    } else {
        fed.emplace(fc, suite.w0, data);
    }

    const auto history = [&] {
        const auto to_matrix = [](const std::vector<std::vector<double>>& rows, std::size_t cols) {
            Matrix m(rows.size(), cols);
            for (std::size_t t = 0; t < rows.size(); ++t)
                std::copy(rows[t].begin(), rows[t].end(), m.row(t).begin());
            return m;
        };
        return std::vector<Matrix>{to_matrix(losses, fc.n_clients), to_matrix(tests, fc.n_clients),
                                   to_matrix(norms, 1)};
    };

    while (!fed->finished()) {
        fed->run_round();
        std::vector<double> l(fc.n_clients), s(fc.n_clients);
        for (std::size_t i = 0; i < fc.n_clients; ++i) {
            l[i] = fed->clients()[i].last_loss;
            s[i] = fed->evaluate_client(i, suite.tasks[i].test);
        }
        losses.push_back(std::move(l));
        tests.push_back(std::move(s));
        norms.push_back({fed->server().global.empty() ? 0.0 : frobenius_norm(fed->server().global[0])});
        const std::size_t t = fed->server().round;
        if ((t == 2 || (cfg.checkpoint_every > 0 && t % cfg.checkpoint_every == 0)) && !fed->finished())
            out.checkpoint("round-" + std::to_string(t), pack_federation(*fed, history()));
    }
    out.checkpoint("final", pack_federation(*fed, history()));

    const std::size_t d_in = suite.spec.d_in, d_out = suite.spec.d_out;
    Table metrics{{"round", "client", "rank", "train_loss", "test_mse", "upload", "download", "global_norm"}, {}};
    Table ledger{{"round", "client", "upload", "download", "expected_upload", "expected_download"}, {}};
    bool ledger_exact = true;
    const auto& rounds = fed->ledger().rounds;
    for (std::size_t t = 0; t < rounds.size(); ++t)
        for (std::size_t i = 0; i < fc.n_clients; ++i) {
            const Payload p = expected_payload(fc.strategy, d_in, d_out, fc.ranks, fc.d_m, i);
            const auto up = static_cast<std::int64_t>(rounds[t].upload[i]);
            const auto down = static_cast<std::int64_t>(rounds[t].download[i]);
            ledger_exact = ledger_exact && rounds[t].upload[i] == p.upload && rounds[t].download[i] == p.download;
            metrics.add({static_cast<std::int64_t>(t + 1), static_cast<std::int64_t>(i),
                         static_cast<std::int64_t>(fc.ranks[i]), losses[t][i], tests[t][i], up, down, norms[t][0]});
            ledger.add({static_cast<std::int64_t>(t + 1), static_cast<std::int64_t>(i), up, down,
                        static_cast<std::int64_t>(p.upload), static_cast<std::int64_t>(p.download)});
        }
    out.csv("ledger.csv", ledger);

    double mean = 0.0;
    for (double v : tests.back()) mean += v / static_cast<double>(fc.n_clients);
    ordered_json summary;
    summary["kind"] = "fed";
    summary["strategy"] = to_string(fc.strategy);
    summary["n_clients"] = fc.n_clients;
    summary["rounds"] = rounds.size();
    summary["ranks"] = fc.ranks;
    summary["mean_client_test_mse"] = mean;
    summary["client_test_mse"] = tests.back();
    summary["total_upload"] = fed->ledger().total_upload();
    summary["total_download"] = fed->ledger().total_download();
    summary["ledger_matches_formula"] = ledger_exact;
    out.results(metrics, summary);
    return std::string(to_string(fc.strategy)) + ": " + std::to_string(rounds.size()) +
           " rounds, mean client test MSE " + format_17(mean) + ", uploaded " +
           std::to_string(fed->ledger().total_upload()) + " / downloaded " +
           std::to_string(fed->ledger().total_download()) + " parameters";
}

bool comparable(const std::string& name) {
    for (const char* skip : {"scaling", "loss_curve"})
        if (name == skip) return false;
    for (const char* prefix : {"opt.", "ledger.", "history."})
        if (name.rfind(prefix, 0) == 0) return false;
    for (const char* suffix : {".inbox", ".last_loss"})
        if (name.size() >= std::strlen(suffix) && name.compare(name.size() - std::strlen(suffix), std::string::npos, suffix) == 0)
            return false;
    return true;
}

std::string run_analysis(const ExperimentConfig& cfg, Outputs& out) {
    const Checkpoint first = load_checkpoint(cfg.analysis_first);
    const Checkpoint second = load_checkpoint(cfg.analysis_second);
    Table table{{"matrix", "rows", "cols", "similarity", "delta_m", "delta_d", "undefined_pairs"}, {}};
    for (const NamedMatrix& m : first.matrices) {
        if (!comparable(m.name) || !second.has_matrix(m.name) || m.value.empty()) continue;
        const Matrix& other = second.matrix(m.name);
        if (!other.same_shape(m.value)) continue;
        // The long side is the subspace dimension.
        const bool flip = m.value.rows() < m.value.cols();
        const Matrix lhs = flip ? transpose(m.value) : m.value;
        const Matrix rhs = flip ? transpose(other) : other;
        double sim = kNaN;
        if (orthonormal_basis(lhs).rank > 0 && orthonormal_basis(rhs).rank > 0) sim = subspace_similarity(lhs, rhs);
        const MagDirDelta d = delta_mag_dir(m.value, other);
        table.add({m.name, static_cast<std::int64_t>(m.value.rows()), static_cast<std::int64_t>(m.value.cols()), sim,
                   d.delta_m, d.delta_d, static_cast<std::int64_t>(d.undefined_pairs)});
    }
    ordered_json summary;
    summary["kind"] = "analyze";
    summary["first"] = {{"path", cfg.analysis_first}, {"tag", first.tag}, {"index", first.index}};
    summary["second"] = {{"path", cfg.analysis_second}, {"tag", second.tag}, {"index", second.index}};
    ordered_json rows = ordered_json::object();
    for (const auto& r : table.rows)
        rows[std::get<std::string>(r[0])] = {{"similarity", number_or_null(std::get<double>(r[3]))},
                                             {"delta_m", std::get<double>(r[4])},
                                             {"delta_d", std::get<double>(r[5])}};
    summary["matrices"] = rows;
    out.results(table, summary);
    return "compared " + std::to_string(table.rows.size()) + " matrices";
}

std::string run_commcost(const ExperimentConfig& cfg, Outputs& out) {
    const std::vector<CommCost> costs = comm_cost(cfg.geometry, cfg.commcost_ranks, cfg.commcost_d_m);
    Table table{{"strategy", "upload", "download", "total", "total_millions"}, {}};
    ordered_json per = ordered_json::object();
    std::string text;
    for (const CommCost& c : costs) {
        const double millions = c.total() / 1e6;
        table.add({std::string(to_string(c.strategy)), c.upload, c.download, c.total(), millions});
        per[std::string(to_string(c.strategy))] = {
            {"upload", c.upload}, {"download", c.download}, {"total", c.total()}, {"total_millions", millions}};
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s%s %.2fM", text.empty() ? "" : ", ", std::string(to_string(c.strategy)).c_str(),
                      millions);
        text += buf;
    }
    ordered_json summary;
    summary["kind"] = "commcost";
    summary["geometry"] = {{"d_in", cfg.geometry.d_in}, {"d_out", cfg.geometry.d_out}, {"modules", cfg.geometry.modules}};
    summary["ranks"] = cfg.commcost_ranks;
    summary["d_m"] = cfg.commcost_d_m;
    summary["strategies"] = per;
    out.results(table, summary);
    return text;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& cfg) {
    RunReport report;
    const std::string started = utc_now();
    Outputs out(cfg);
    try {
        validate(cfg);
        out.text(kEchoFile, echo_config(cfg));
        switch (cfg.kind) {
            case ExperimentKind::Multitask: report.summary = run_multitask(cfg, out); break;
            case ExperimentKind::Federated: report.summary = run_federated(cfg, out); break;
            case ExperimentKind::Analysis: report.summary = run_analysis(cfg, out); break;
            case ExperimentKind::Commcost: report.summary = run_commcost(cfg, out); break;
        }
        report.complete = true;
    } catch (const std::exception& e) {
        report.error = e.what();
    }
    report.files = out.files();

    std::string manifest = "status = " + std::string(report.complete ? "complete" : "incomplete") + "\n";
    manifest += "kind = " + std::string(to_string(cfg.kind)) + "\n";
    manifest += "config_hash = " + out.hash() + "\n";
    manifest += "started = " + started + "\n";
    manifest += "finished = " + utc_now() + "\n";
    if (!report.complete) {
        std::string one_line = report.error;
        for (char& ch : one_line)
            if (ch == '\n') ch = ' ';
        manifest += "error = " + one_line + "\n";
    }
    for (const auto& f : report.files) manifest += "file = " + f.generic_string() + "\n";
    try {
        write_text(out.path(kManifestFile), manifest);
    } catch (const std::exception& e) {
        if (report.complete) {
            report.complete = false;
            report.error = e.what();
        }
    }
    return report;
}

}  // namespace alora
