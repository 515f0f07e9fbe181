#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "alora/config.hpp"
#include "alora/experiment.hpp"
#include "alora/selftest.hpp"

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> rounds;
    std::optional<std::size_t> epochs;
    std::vector<std::string> checkpoints;  // analyze: first and second
};

void add_run_options(CLI::App* sub, Options& opt) {
    sub->add_option("--config", opt.config, "experiment config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "master seed, overrides the config");
    sub->add_option("--out", opt.out, "output directory, overrides the config");
    sub->add_option("--rounds", opt.rounds, "federated rounds (fed only)");
    sub->add_option("--epochs", opt.epochs, "training epochs (multitask) or local epochs (fed)");
}

int run(alora::ExperimentKind kind, const Options& opt) {
    using alora::ExperimentKind;
    alora::ExperimentConfig cfg;
    try {
        if (opt.config.empty()) {
            std::string text = "kind = " + std::string(alora::to_string(kind)) + "\n";
            if (opt.checkpoints.size() == 2)
                text += "analysis.first = " + opt.checkpoints[0] + "\nanalysis.second = " + opt.checkpoints[1] + "\n";
            cfg = alora::parse_config_text(text);
        } else {
            cfg = alora::parse_config(opt.config);
        }
    } catch (const alora::ConfigError& e) {
        for (const auto& line : e.errors()) std::cerr << "error: " << line << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    if (cfg.kind != kind) {
        std::cerr << "error: config '" << opt.config << "' has kind = " << alora::to_string(cfg.kind)
                  << " but the subcommand is " << alora::to_string(kind) << "\n";
        return 2;
    }
    if (opt.rounds && kind != ExperimentKind::Federated) {
        std::cerr << "error: --rounds applies to fed runs only\n";
        return 2;
    }
    if (opt.epochs && kind != ExperimentKind::Federated && kind != ExperimentKind::Multitask) {
        std::cerr << "error: --epochs applies to multitask and fed runs only\n";
        return 2;
    }
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.out) cfg.out = *opt.out;
    if (opt.checkpoints.size() == 2) {
        cfg.analysis_first = opt.checkpoints[0];
        cfg.analysis_second = opt.checkpoints[1];
    }
    if (opt.rounds) cfg.fed.rounds = *opt.rounds;
    if (opt.epochs) (kind == ExperimentKind::Federated ? cfg.fed.local_epochs : cfg.train.epochs) = *opt.epochs;

    const alora::RunReport report = alora::run_experiment(cfg);
    if (!report.complete) {
        std::cerr << "error: " << report.error << "\n";
        std::cerr << "partial results and MANIFEST are in " << cfg.out << "\n";
        return 1;
    }
    std::cout << report.summary << "\n";
    std::cout << "wrote " << report.files.size() << " files to " << cfg.out << "\n";
    return 0;
}

int selftest(std::uint64_t seed) {
    std::size_t failed = 0;
    for (const auto& r : alora::run_selftest(seed)) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
        failed += r.passed ? 0 : 1;
    }
    std::cout << (failed ? std::to_string(failed) + " check(s) failed" : std::string("all checks passed")) << "\n";
    return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-LoRA adapter and federated fine-tuning simulator"};
    app.require_subcommand(1);

    Options opt;
    auto* multitask = app.add_subcommand("multitask", "train one adapter on a multi-task synthetic suite");
    auto* fed = app.add_subcommand("fed", "run a federated protocol, one task per client");
    auto* analyze = app.add_subcommand("analyze", "compare the matrices of two checkpoints");
    auto* commcost = app.add_subcommand("commcost", "analytic per-round communication cost");
    for (auto* sub : {multitask, fed, analyze, commcost}) add_run_options(sub, opt);
    analyze->add_option("checkpoints", opt.checkpoints, "two checkpoints, overriding analysis.first/second")
        ->expected(2);
    std::uint64_t selftest_seed = 0;
    auto* self = app.add_subcommand("selftest", "run the built-in gradient and property checks");
    self->add_option("--seed", selftest_seed, "seed of the random instances");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*self) return selftest(selftest_seed);
        if (*multitask) return run(alora::ExperimentKind::Multitask, opt);
        if (*fed) return run(alora::ExperimentKind::Federated, opt);
        if (*analyze) return run(alora::ExperimentKind::Analysis, opt);
        return run(alora::ExperimentKind::Commcost, opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
