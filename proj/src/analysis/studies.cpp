#include "alora/studies.hpp"

#include <stdexcept>

namespace alora {

namespace {

SuiteSpec seeded(SuiteSpec spec, std::uint64_t seed) {
    spec.seed = derive_seed(seed, "study.suite", 0);
    return spec;
}

TrainConfig shuffled(TrainConfig cfg, std::uint64_t seed, std::size_t index) {
    cfg.seed = derive_seed(seed, "study.shuffle", index);
    return cfg;
}

AdapterState fresh(const AdapterConfig& cfg, std::uint64_t seed, std::size_t index) {
    RngStream rng(derive_seed(seed, "study.init", index));
    return init_adapter(cfg, rng);
}

}  // namespace

InitSimilarityResult init_similarity_study(const InitSimilaritySettings& settings, std::uint64_t seed) {
    const SyntheticSuite suite = gen_suite(seeded(settings.suite, seed));
    if (suite.tasks.size() < 2) throw std::invalid_argument("init_similarity_study: needs two tasks");
    const AdapterConfig cfg{suite.spec.d_in, suite.spec.d_out, settings.rank, 1, Scheme::Vanilla};

    const auto run = [&](std::size_t init_index, std::size_t task) {
        return train(fresh(cfg, seed, init_index), suite.w0, suite.tasks[task].train,
                     shuffled(settings.train, seed, task))
            .model;
    };
    const AdapterState m1 = run(0, 0);
    const AdapterState m2 = run(0, 1);
    const AdapterState m3 = run(1, 1);

    InitSimilarityResult out;
    out.sim_a_same_init = subspace_similarity(transpose(m1.a[0]), transpose(m2.a[0]));
    out.sim_a_diff_init = subspace_similarity(transpose(m1.a[0]), transpose(m3.a[0]));
    out.sim_b_diff_init = subspace_similarity(m1.b[0], m3.b[0]);
    return out;
}

DynamicsResult dynamics_study(const DynamicsSettings& settings, std::uint64_t seed) {
    const SyntheticSuite suite = gen_suite(seeded(settings.suite, seed));
    const AdapterConfig cfg{suite.spec.d_in, suite.spec.d_out, settings.rank, 1, Scheme::Vanilla};

    TrainSession<AdapterState> session(fresh(cfg, seed, 0), suite.w0, suite.tasks[0].train,
                                       shuffled(settings.train, seed, 0));
    std::optional<AdapterState> early;
    session.set_observer({.before_update = {}, .after_update = [&](const StepEvent<AdapterState>& e) {
        if (e.step == 2) early = e.model;
    }});
    session.run();
    if (!early) throw std::invalid_argument("dynamics_study: training ran fewer than two steps");
    const AdapterState& late = session.model();

    DynamicsResult out;
    out.a = delta_mag_dir(early->a[0], late.a[0]);
    out.b = delta_mag_dir(early->b[0], late.b[0]);
    out.sim_a = subspace_similarity(transpose(early->a[0]), transpose(late.a[0]));
    out.sim_b = subspace_similarity(early->b[0], late.b[0]);
    return out;
}

LazyResult lazy_learning_study(const LazySettings& settings, std::uint64_t seed) {
    const SyntheticSuite suite = gen_suite(seeded(settings.suite, seed));
    const std::vector<Sample> pooled = pooled_train(suite);
    LazyResult out;

    const auto run = [&](Scheme scheme, double& norm_sum, std::size_t& conflicts, std::size_t& pairs) {
        const AdapterConfig cfg{suite.spec.d_in, suite.spec.d_out, settings.rank, settings.experts, scheme};
        TrainSession<AdapterState> session(fresh(cfg, seed, 0), suite.w0, pooled, shuffled(settings.train, seed, 0));
        // Shared matrix position in trainable order: SharingA's A comes
        // first; ALoRA's B follows its n A experts.
        const std::size_t shared = scheme == Scheme::SharingA ? 0 : settings.experts;
        std::size_t steps = 0;
        session.set_observer({.before_update = [&](const StepEvent<AdapterState>& e) {
            norm_sum += frobenius_norm(e.gradient.grads[shared]);
            ++steps;
            for (const Sample& s : e.batch) {
                const Vector y = forward(e.model, suite.w0, s.x).y;
                const Vector g = mse_gradient(y, s.y);
                const std::vector<Matrix> parts = scheme == Scheme::SharingA
                                                      ? shared_a_grad_components(e.model, s.x, g)
                                                      : alora_grad_components(e.model, s.x, g);
                const ConflictReport report = conflict_count(parts);
                conflicts += report.count;
                pairs += report.pairs.size();
            }
        },
                             .after_update = {}});
        session.run();
        norm_sum /= static_cast<double>(steps);
        return steps;
    };
    out.steps = run(Scheme::SharingA, out.grad_norm_shared_a, out.conflicts_sharing_a, out.pairs_sharing_a);
    run(Scheme::ALoRA, out.grad_norm_shared_b, out.conflicts_alora, out.pairs_alora);
    return out;
}

double mean_client_mse(const Federation& fed, const SyntheticSuite& suite) {
    const std::size_t n = fed.config().n_clients;
    if (suite.tasks.size() < n) throw std::invalid_argument("mean_client_mse: fewer tasks than clients");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += fed.evaluate_client(i, suite.tasks[i].test);
    return total / static_cast<double>(n);
}

TransferResult transfer_study(const TransferSettings& settings, std::uint64_t seed, bool heterogeneous) {
    const SyntheticSuite suite = gen_suite(seeded(settings.suite, seed));
    const std::vector<std::size_t>& ranks = heterogeneous ? settings.hetero_ranks : settings.homog_ranks;
    if (suite.tasks.size() < ranks.size()) throw std::invalid_argument("transfer_study: fewer tasks than clients");
    std::vector<std::vector<Sample>> data;
    for (std::size_t i = 0; i < ranks.size(); ++i) data.push_back(suite.tasks[i].train);

    const auto run = [&](Strategy strategy) {
        FedConfig cfg;
        cfg.strategy = strategy;
        cfg.n_clients = ranks.size();
        cfg.rounds = settings.rounds;
        cfg.local_epochs = settings.local_epochs;
        cfg.ranks = ranks;
        cfg.d_m = settings.d_m;
        cfg.train = settings.train;
        cfg.seed = derive_seed(seed, "study.fed", 0);
        Federation fed(cfg, suite.w0, data);
        fed.run();
        return mean_client_mse(fed, suite);
    };
    TransferResult out;
    out.fed_alora = run(heterogeneous ? Strategy::FedALoRAHetero : Strategy::FedALoRA);
    out.fedsa = run(heterogeneous ? Strategy::FedSAHetero : Strategy::FedSA);
    return out;
}

}  // namespace alora
