#include "alora/tasks.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "alora/linalg.hpp"
#include "alora/rng.hpp"

namespace alora {

std::string_view to_string(Family family) {
    switch (family) {
        case Family::SharedB: return "shared_b";
        case Family::SharedA: return "shared_a";
        case Family::Independent: return "independent";
    }
    return "?";
}

Family parse_family(std::string_view name) {
    if (name == "shared_b") return Family::SharedB;
    if (name == "shared_a") return Family::SharedA;
    if (name == "independent") return Family::Independent;
    throw std::invalid_argument("unknown suite family '" + std::string(name) +
                                "' (expected shared_b, shared_a or independent)");
}

void validate(const SuiteSpec& spec) {
    if (spec.n_tasks == 0) throw std::invalid_argument("gen_suite: n_tasks must be >= 1");
    if (spec.d_in == 0 || spec.d_out == 0 || spec.true_rank == 0)
        throw std::invalid_argument("gen_suite: dimensions must be >= 1");
    if (spec.true_rank > std::min(spec.d_in, spec.d_out))
        throw std::invalid_argument("gen_suite: true_rank " + std::to_string(spec.true_rank) +
                                    " exceeds min(d_in, d_out)");
    if (spec.samples_per_task < 2) throw std::invalid_argument("gen_suite: need at least 2 samples per task");
    if (!(spec.noise >= 0.0)) throw std::invalid_argument("gen_suite: noise must be >= 0");
    if (!(spec.perturbation >= 0.0) || !std::isfinite(spec.perturbation))
        throw std::invalid_argument("gen_suite: perturbation must be finite and >= 0");
    if (!(spec.task_shift >= 0.0) || !std::isfinite(spec.task_shift))
        throw std::invalid_argument("gen_suite: task_shift must be finite and >= 0");
    if (spec.latent_dim > spec.d_in)
        throw std::invalid_argument("gen_suite: latent_dim " + std::to_string(spec.latent_dim) + " exceeds d_in");
}

SyntheticSuite gen_suite(const SuiteSpec& spec) {
    validate(spec);
    const double a_std = 1.0 / std::sqrt(static_cast<double>(spec.d_in));
    const double b_std = spec.perturbation / std::sqrt(static_cast<double>(spec.true_rank));

    SyntheticSuite suite;
    suite.spec = spec;
    RngStream base_rng(derive_seed(spec.seed, "suite.w0"));
    suite.w0 = gaussian(spec.d_out, spec.d_in, base_rng, a_std);

    RngStream shared_rng(derive_seed(spec.seed, "suite.shared"));
    const Matrix shared_a = gaussian(spec.true_rank, spec.d_in, shared_rng, a_std);
    const Matrix shared_b = gaussian(spec.d_out, spec.true_rank, shared_rng, b_std);

    if (spec.latent_dim > 0) {
        RngStream input_rng(derive_seed(spec.seed, "suite.inputs"));
        suite.input_basis = orthonormal_basis(gaussian(spec.d_in, spec.latent_dim, input_rng, 1.0)).vectors;
    }
    const double latent_gain =
        spec.latent_dim > 0 ? std::sqrt(static_cast<double>(spec.d_in) / static_cast<double>(spec.latent_dim)) : 1.0;

    const std::size_t n_train = static_cast<std::size_t>(kTrainFraction * static_cast<double>(spec.samples_per_task));
    for (std::size_t k = 0; k < spec.n_tasks; ++k) {
        RngStream factor_rng(derive_seed(spec.seed, "suite.factors", k));
        TaskData task;
        Matrix own_a = gaussian(spec.true_rank, spec.d_in, factor_rng, a_std);
        Matrix own_b = gaussian(spec.d_out, spec.true_rank, factor_rng, b_std);
        task.a_true = spec.family == Family::SharedA ? shared_a : std::move(own_a);
        task.b_true = spec.family == Family::SharedB ? shared_b : std::move(own_b);

        // Task input mean: a random direction of length task_shift, inside the
        // input subspace.
        Vector mean(spec.d_in, 0.0);
        if (spec.task_shift > 0.0) {
            RngStream mean_rng(derive_seed(spec.seed, "suite.task_mean", k));
            const std::size_t dim = spec.latent_dim > 0 ? spec.latent_dim : spec.d_in;
            Vector u(dim);
            for (double& v : u) v = mean_rng.normal();
            const double n = norm(u);
            for (double& v : u) v *= spec.task_shift / n;
            mean = spec.latent_dim > 0 ? matvec(suite.input_basis, u) : u;
        }

        const Matrix w_task = add(suite.w0, matmul(task.b_true, task.a_true));
        RngStream data_rng(derive_seed(spec.seed, "suite.data", k));
        for (std::size_t s = 0; s < spec.samples_per_task; ++s) {
            Sample sample;
            sample.task = k;
            if (spec.latent_dim == 0) {
                sample.x.resize(spec.d_in);
                for (double& v : sample.x) v = data_rng.normal();
            } else {
                Vector z(spec.latent_dim);
                for (double& v : z) v = latent_gain * data_rng.normal();
                sample.x = matvec(suite.input_basis, z);
            }
            for (std::size_t i = 0; i < spec.d_in; ++i) sample.x[i] += mean[i];
            sample.y = matvec(w_task, sample.x);
            for (double& v : sample.y) v += spec.noise * data_rng.normal();
            (s < n_train ? task.train : task.test).push_back(std::move(sample));
        }
        suite.tasks.push_back(std::move(task));
    }
    return suite;
}

std::vector<Sample> pooled_train(const SyntheticSuite& suite) {
    std::vector<Sample> all;
    for (const auto& t : suite.tasks) all.insert(all.end(), t.train.begin(), t.train.end());
    return all;
}

}  // namespace alora
