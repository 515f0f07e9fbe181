#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "alora/adapters.hpp"
#include "alora/matrix.hpp"
#include "alora/sample.hpp"

namespace alora {

/// How ground-truth low-rank perturbations relate across tasks.
enum class Family {
    SharedB,      // one B* for every task, independent A*_k
    SharedA,      // one A* for every task, independent B*_k
    Independent,  // independent A*_k and B*_k
};

std::string_view to_string(Family family);
Family parse_family(std::string_view name);

struct SuiteSpec {
    std::size_t n_tasks = 3;
    std::size_t d_in = 64;
    std::size_t d_out = 64;
    std::size_t true_rank = 4;
    Family family = Family::SharedB;
    double noise = 0.01;
    double perturbation = 1.0;  // multiplies B*_k
    std::size_t latent_dim = 0;  // inputs confined to a latent_dim subspace; 0 means isotropic
    double task_shift = 0.0;     // norm of task k's input mean; 0 gives every task the same inputs
    std::size_t samples_per_task = 400;
    std::uint64_t seed = 0;

    friend bool operator==(const SuiteSpec&, const SuiteSpec&) = default;
};

struct TaskData {
    Matrix a_true;  // true_rank x d_in
    Matrix b_true;  // d_out x true_rank
    std::vector<Sample> train;
    std::vector<Sample> test;
};

struct SyntheticSuite {
    SuiteSpec spec;
    Matrix w0;
    Matrix input_basis;  // d_in x latent_dim orthonormal, empty when isotropic
    std::vector<TaskData> tasks;
};

/// Fraction of each task's samples that go to the training split; the rest
/// (the trailing samples in generation order) form the test split.
inline constexpr double kTrainFraction = 0.8;

/// Throws std::invalid_argument naming the first violated constraint.
void validate(const SuiteSpec& spec);

/// Builds a suite deterministically from spec.seed.
///   W0 ~ N(0, 1/d_in);  A*_k ~ N(0, 1/d_in);  B*_k ~ N(0, perturbation^2/true_rank)
///   x ~ N(0, I), or x = sqrt(d_in / latent_dim) Q z with z ~ N(0, I) and Q a
///   random orthonormal d_in x latent_dim basis shared by all tasks, plus
///   a per-task mean mu_k of norm task_shift lying in the same subspace
///   y = (W0 + B*_k A*_k) x + noise * N(0, I)
/// Task k's data depend only on (seed, k) and the shared factors.
SyntheticSuite gen_suite(const SuiteSpec& spec);

/// Union of all tasks' training samples in task order.
std::vector<Sample> pooled_train(const SyntheticSuite& suite);

}  // namespace alora
