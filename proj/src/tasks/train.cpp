#include "alora/train.hpp"

#include "alora/adapters.hpp"
#include "alora/parallel.hpp"

namespace alora {

void validate(const TrainConfig& cfg) {
    if (!(cfg.optimizer.lr >= 0.0) || !std::isfinite(cfg.optimizer.lr))
        throw std::invalid_argument("train: learning rate must be finite and >= 0");
    if (cfg.batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");
    if (!(cfg.optimizer.beta1 >= 0.0 && cfg.optimizer.beta1 < 1.0) ||
        !(cfg.optimizer.beta2 >= 0.0 && cfg.optimizer.beta2 < 1.0))
        throw std::invalid_argument("train: Adam betas must lie in [0, 1)");
    if (!(cfg.optimizer.eps > 0.0)) throw std::invalid_argument("train: Adam eps must be > 0");
}

std::vector<double> single_task_baselines(const SyntheticSuite& suite, const AdapterConfig& adapter,
                                          const TrainConfig& train_cfg) {
    AdapterConfig cfg = adapter;
    cfg.scheme = Scheme::Vanilla;
    cfg.experts = 1;
    cfg.d_in = suite.spec.d_in;
    cfg.d_out = suite.spec.d_out;

    std::vector<double> scores(suite.tasks.size());
    parallel_for(suite.tasks.size(), [&](std::size_t k) {
        RngStream init(derive_seed(train_cfg.seed, "baseline.init", k));
        TrainConfig tc = train_cfg;
        tc.seed = derive_seed(train_cfg.seed, "baseline.shuffle", k);
        auto result = train(init_adapter(cfg, init), suite.w0, suite.tasks[k].train, tc);
        scores[k] = evaluate(result.model, suite.w0, suite.tasks[k].test);
    });
    return scores;
}

}  // namespace alora
