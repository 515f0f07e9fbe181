#include "alora/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace alora {

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "sgd") return OptimizerKind::Sgd;
    if (name == "adam") return OptimizerKind::Adam;
    throw std::invalid_argument("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

void optimizer_step(const OptimizerSettings& settings, std::span<Matrix* const> params,
                    std::span<const Matrix> grads, OptimizerState& state) {
    if (params.size() != grads.size())
        throw std::invalid_argument("optimizer_step: " + std::to_string(params.size()) + " parameters but " +
                                    std::to_string(grads.size()) + " gradients");
    ++state.step;
    if (settings.kind == OptimizerKind::Sgd) {
        for (std::size_t k = 0; k < params.size(); ++k) add_scaled(*params[k], -settings.lr, grads[k]);
        return;
    }

    if (state.first.empty()) {
        for (const Matrix* p : params) {
            state.first.emplace_back(p->rows(), p->cols());
            state.second.emplace_back(p->rows(), p->cols());
        }
    }
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(settings.beta1, t);
    const double c2 = 1.0 - std::pow(settings.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto p = params[k]->data();
        auto g = grads[k].data();
        auto m = state.first[k].data();
        auto v = state.second[k].data();
        if (p.size() != g.size()) throw std::invalid_argument("optimizer_step: gradient shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = settings.beta1 * m[i] + (1.0 - settings.beta1) * g[i];
            v[i] = settings.beta2 * v[i] + (1.0 - settings.beta2) * g[i] * g[i];
            p[i] -= settings.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + settings.eps);
        }
    }
}

}  // namespace alora
