#pragma once

#include <cstdint>
#include <vector>

#include "alora/adapters.hpp"
#include "alora/analysis.hpp"
#include "alora/fed.hpp"
#include "alora/tasks.hpp"
#include "alora/train.hpp"

// Small controlled experiments that re-test the qualitative claims about
// shared and unshared adapter factors. Each study is a pure function of its
// settings and a seed; the defaults are the pinned configurations the
// acceptance suite runs.

namespace alora {

/// Two Vanilla adapters trained on two tasks of a SharedB suite, once from
/// the same A initialization and once from different ones. The suite uses
/// small task updates on inputs of low intrinsic dimension, where a random A
/// already sees most of the input variance.
struct InitSimilaritySettings {
    SuiteSpec suite{.n_tasks = 2, .family = Family::SharedB, .perturbation = 0.05, .latent_dim = 4};
    std::size_t rank = 4;
    TrainConfig train{.optimizer = {.kind = OptimizerKind::Adam, .lr = 3e-4}, .epochs = 100, .batch_size = 32};
};

struct InitSimilarityResult {
    double sim_a_same_init = 0.0;  // Sim(A_1, A_2), identical init seeds
    double sim_a_diff_init = 0.0;  // Sim(A_1, A_3), different init seeds
    double sim_b_diff_init = 0.0;  // Sim(B_1, B_3), different init seeds
};

InitSimilarityResult init_similarity_study(const InitSimilaritySettings& settings, std::uint64_t seed);

/// One Vanilla adapter; the state after the second optimizer step is compared
/// with the final state.
struct DynamicsSettings {
    SuiteSpec suite{.n_tasks = 1, .family = Family::SharedB, .perturbation = 0.05, .latent_dim = 4};
    std::size_t rank = 4;
    TrainConfig train{.optimizer = {.kind = OptimizerKind::Adam, .lr = 3e-4}, .epochs = 100, .batch_size = 32};
};

struct DynamicsResult {
    MagDirDelta a;
    MagDirDelta b;
    double sim_a = 0.0;  // Sim(A_step2, A_final)
    double sim_b = 0.0;  // Sim(B_step2, B_final)
};

DynamicsResult dynamics_study(const DynamicsSettings& settings, std::uint64_t seed);

/// SharingA and ALoRA trained on the pooled data of a SharedB suite with the
/// same initialization streams and batch order. Gradient norms of the shared
/// matrix are recorded at every step; per-sample expert components are
/// checked for conflicts at every step.
struct LazySettings {
    SuiteSpec suite{.n_tasks = 3, .family = Family::SharedB};
    std::size_t rank = 4;
    std::size_t experts = 3;
    TrainConfig train{.optimizer = {.kind = OptimizerKind::Adam, .lr = 3e-4}, .epochs = 10, .batch_size = 32};
};

struct LazyResult {
    double grad_norm_shared_a = 0.0;  // mean over steps, SharingA
    double grad_norm_shared_b = 0.0;  // mean over steps, ALoRA
    std::size_t conflicts_sharing_a = 0;
    std::size_t conflicts_alora = 0;
    std::size_t pairs_sharing_a = 0;  // pairs compared (zero components excluded)
    std::size_t pairs_alora = 0;
    std::size_t steps = 0;
};

LazyResult lazy_learning_study(const LazySettings& settings, std::uint64_t seed);

/// Federated clients, client i holding task i of a SharedB suite. The score
/// of a run is the mean over clients of each client's test MSE on its own
/// task after the last round.
struct TransferSettings {
    SuiteSpec suite{.n_tasks = 8, .family = Family::SharedB};
    std::vector<std::size_t> homog_ranks = std::vector<std::size_t>(8, 4);
    std::vector<std::size_t> hetero_ranks = {16, 16, 8, 8, 4, 4, 2, 2};
    std::size_t d_m = 4;
    std::size_t rounds = 30;
    std::size_t local_epochs = 2;
    TrainConfig train{.optimizer = {.kind = OptimizerKind::Adam, .lr = 3e-3}, .batch_size = 32};
};

struct TransferResult {
    double fed_alora = 0.0;
    double fedsa = 0.0;
};

TransferResult transfer_study(const TransferSettings& settings, std::uint64_t seed, bool heterogeneous);

/// Mean over clients of each client's test MSE on its own task.
double mean_client_mse(const Federation& fed, const SyntheticSuite& suite);

}  // namespace alora
