#include "alora/adapters.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "alora/linalg.hpp"
#include "alora/model.hpp"

namespace alora {

double mse(std::span<const double> y, std::span<const double> target) {
    if (y.size() != target.size()) throw std::invalid_argument("mse: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - target[i];
        s += d * d;
    }
    return s / static_cast<double>(y.size());
}

Vector mse_gradient(std::span<const double> y, std::span<const double> target) {
    if (y.size() != target.size()) throw std::invalid_argument("mse_gradient: length mismatch");
    Vector g(y.size());
    const double k = 2.0 / static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = k * (y[i] - target[i]);
    return g;
}

std::string_view to_string(Scheme scheme) {
    switch (scheme) {
        case Scheme::Vanilla: return "vanilla";
        case Scheme::SharingA: return "sharing_a";
        case Scheme::ALoRA: return "alora";
    }
    return "?";
}

Scheme parse_scheme(std::string_view name) {
    if (name == "vanilla") return Scheme::Vanilla;
    if (name == "sharing_a") return Scheme::SharingA;
    if (name == "alora") return Scheme::ALoRA;
    throw std::invalid_argument("unknown adapter scheme '" + std::string(name) +
                                "' (expected vanilla, sharing_a or alora)");
}

bool is_routed(Scheme scheme) { return scheme != Scheme::Vanilla; }

void validate(const AdapterConfig& cfg) {
    if (cfg.d_in == 0 || cfg.d_out == 0) throw std::invalid_argument("adapter: d_in and d_out must be >= 1");
    if (cfg.rank == 0) throw std::invalid_argument("adapter: rank must be >= 1");
    if (cfg.rank > std::min(cfg.d_in, cfg.d_out))
        throw std::invalid_argument("adapter: rank " + std::to_string(cfg.rank) + " exceeds min(d_in, d_out)");
    if (cfg.experts == 0) throw std::invalid_argument("adapter: experts must be >= 1");
    if (cfg.scheme == Scheme::Vanilla && cfg.experts != 1)
        throw std::invalid_argument("adapter: vanilla scheme requires experts == 1");
    if (!std::isfinite(cfg.scaling)) throw std::invalid_argument("adapter: scaling must be finite");
}

AdapterState init_adapter(const AdapterConfig& cfg, RngStream& rng) {
    validate(cfg);
    AdapterState st;
    st.config = cfg;
    const std::size_t n_a = cfg.scheme == Scheme::ALoRA ? cfg.experts : 1;
    const std::size_t n_b = cfg.scheme == Scheme::SharingA ? cfg.experts : 1;
    for (std::size_t i = 0; i < n_a; ++i) st.a.push_back(kaiming_uniform(cfg.rank, cfg.d_in, rng));
    for (std::size_t i = 0; i < n_b; ++i) st.b.emplace_back(cfg.d_out, cfg.rank);
    if (is_routed(cfg.scheme)) st.router = kaiming_uniform(cfg.experts, cfg.d_in, rng);
    return st;
}

namespace {

void check_inputs(const AdapterState& st, const Matrix& w0, std::span<const double> x) {
    const auto& c = st.config;
    if (w0.rows() != c.d_out || w0.cols() != c.d_in)
        throw std::invalid_argument("adapter: W0 is " + std::to_string(w0.rows()) + "x" +
                                    std::to_string(w0.cols()) + ", expected " + std::to_string(c.d_out) +
                                    "x" + std::to_string(c.d_in));
    if (x.size() != c.d_in)
        throw std::invalid_argument("adapter: input length " + std::to_string(x.size()) + ", expected " +
                                    std::to_string(c.d_in));
}

// Intermediate values shared by forward and backward.
struct Activations {
    Vector base;                 // W0 x
    std::vector<Vector> hidden;  // A x (shared A) or A_i x (ALoRA)
    Vector mixed;                // ALoRA: sum_i w_i A_i x
    Vector weights;              // router output, empty for vanilla
    Vector y;
};

Activations activate(const AdapterState& st, const Matrix& w0, std::span<const double> x) {
    check_inputs(st, w0, x);
    const auto& c = st.config;
    Activations act;
    act.base = matvec(w0, x);
    act.y = act.base;
    for (const Matrix& a : st.a) act.hidden.push_back(matvec(a, x));
    if (is_routed(c.scheme)) act.weights = softmax(matvec(st.router, x));

    switch (c.scheme) {
        case Scheme::Vanilla: {
            const Vector d = matvec(st.b[0], act.hidden[0]);
            for (std::size_t i = 0; i < c.d_out; ++i) act.y[i] += c.scaling * d[i];
            break;
        }
        case Scheme::SharingA: {
            for (std::size_t e = 0; e < c.experts; ++e) {
                const Vector d = matvec(st.b[e], act.hidden[0]);
                const double k = c.scaling * act.weights[e];
                for (std::size_t i = 0; i < c.d_out; ++i) act.y[i] += k * d[i];
            }
            break;
        }
        case Scheme::ALoRA: {
            act.mixed.assign(c.rank, 0.0);
            for (std::size_t e = 0; e < c.experts; ++e)
                for (std::size_t j = 0; j < c.rank; ++j) act.mixed[j] += act.weights[e] * act.hidden[e][j];
            const Vector d = matvec(st.b[0], act.mixed);
            for (std::size_t i = 0; i < c.d_out; ++i) act.y[i] += c.scaling * d[i];
            break;
        }
    }
    return act;
}

// Router gradient: dL/dlogit_j = w_j (c_j - sum_k w_k c_k), c = dL/dw.
Matrix router_gradient(const Vector& w, const Vector& dw, std::span<const double> x) {
    double mean = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) mean += w[k] * dw[k];
    Vector dlogit(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) dlogit[j] = w[j] * (dw[j] - mean);
    return outer(dlogit, x);
}

GradBundle backward(const AdapterState& st, const Activations& act, std::span<const double> x,
                    std::span<const double> g) {
    const auto& c = st.config;
    const double s = c.scaling;
    GradBundle gb;
    switch (c.scheme) {
        case Scheme::Vanilla: {
            gb.b.push_back(scale(outer(g, act.hidden[0]), s));
            gb.a.push_back(scale(outer(matvec_transposed(st.b[0], g), x), s));
            break;
        }
        case Scheme::SharingA: {
            Vector dh(c.rank, 0.0);
            Vector dw(c.experts);
            for (std::size_t e = 0; e < c.experts; ++e) {
                gb.b.push_back(scale(outer(g, act.hidden[0]), s * act.weights[e]));
                const Vector u = matvec_transposed(st.b[e], g);
                for (std::size_t j = 0; j < c.rank; ++j) dh[j] += act.weights[e] * u[j];
                dw[e] = s * dot(u, act.hidden[0]);
            }
            gb.a.push_back(scale(outer(dh, x), s));
            gb.router = router_gradient(act.weights, dw, x);
            break;
        }
        case Scheme::ALoRA: {
            gb.b.push_back(scale(outer(g, act.mixed), s));
            const Vector v = matvec_transposed(st.b[0], g);
            Vector dw(c.experts);
            for (std::size_t e = 0; e < c.experts; ++e) {
                gb.a.push_back(scale(outer(v, x), s * act.weights[e]));
                dw[e] = s * dot(v, act.hidden[e]);
            }
            gb.router = router_gradient(act.weights, dw, x);
            break;
        }
    }
    return gb;
}

GradBundle unflatten(const AdapterState& st, FlatGradient flat) {
    GradBundle gb;
    std::size_t k = 0;
    for (std::size_t i = 0; i < st.a.size(); ++i) gb.a.push_back(std::move(flat.grads[k++]));
    for (std::size_t i = 0; i < st.b.size(); ++i) gb.b.push_back(std::move(flat.grads[k++]));
    if (is_routed(st.config.scheme)) gb.router = std::move(flat.grads[k++]);
    gb.loss = flat.loss;
    return gb;
}

}  // namespace

ForwardResult forward(const AdapterState& state, const Matrix& w0, std::span<const double> x) {
    Activations act = activate(state, w0, x);
    ForwardResult r{std::move(act.y), std::nullopt};
    if (is_routed(state.config.scheme)) r.weights = std::move(act.weights);
    return r;
}

Vector route(const AdapterState& state, std::span<const double> x) {
    if (!is_routed(state.config.scheme)) throw std::invalid_argument("route: vanilla adapter has no router");
    if (x.size() != state.config.d_in) throw std::invalid_argument("route: input length mismatch");
    return softmax(matvec(state.router, x));
}

Matrix effective_delta(const AdapterState& state, std::optional<std::span<const double>> x) {
    const auto& c = state.config;
    switch (c.scheme) {
        case Scheme::Vanilla: return scale(matmul(state.b[0], state.a[0]), c.scaling);
        case Scheme::SharingA: {
            if (!x) throw std::invalid_argument("effective_delta: routed scheme requires an input");
            const Vector w = route(state, *x);
            Matrix mixed(c.d_out, c.rank);
            for (std::size_t e = 0; e < c.experts; ++e) add_scaled(mixed, w[e], state.b[e]);
            return scale(matmul(mixed, state.a[0]), c.scaling);
        }
        case Scheme::ALoRA: {
            if (!x) throw std::invalid_argument("effective_delta: routed scheme requires an input");
            const Vector w = route(state, *x);
            Matrix mixed(c.rank, c.d_in);
            for (std::size_t e = 0; e < c.experts; ++e) add_scaled(mixed, w[e], state.a[e]);
            return scale(matmul(state.b[0], mixed), c.scaling);
        }
    }
    throw std::logic_error("effective_delta: unknown scheme");
}

GradBundle sample_grad(const AdapterState& state, const Matrix& w0, const Sample& sample) {
    const Activations act = activate(state, w0, sample.x);
    const Vector g = mse_gradient(act.y, sample.y);
    GradBundle gb = backward(state, act, sample.x, g);
    gb.loss = mse(act.y, sample.y);
    return gb;
}

GradBundle grad(const AdapterState& state, const Matrix& w0, std::span<const Sample> batch) {
    return unflatten(state, batch_gradient(state, w0, batch));
}

FlatGradient batch_gradient(const AdapterState& state, const Matrix& w0, std::span<const Sample> batch) {
    return mean_gradient(batch, [&](const Sample& s) {
        GradBundle gb = sample_grad(state, w0, s);
        const double loss = gb.loss;
        return FlatGradient{flatten(std::move(gb)), loss};
    });
}

Vector predict(const AdapterState& state, const Matrix& w0, std::span<const double> x) {
    return forward(state, w0, x).y;
}

std::vector<Matrix> shared_a_grad_components(const AdapterState& state, std::span<const double> x,
                                             std::span<const double> g) {
    const auto& c = state.config;
    if (c.scheme != Scheme::SharingA)
        throw std::invalid_argument("shared_a_grad_components: adapter scheme is " + std::string(to_string(c.scheme)));
    if (g.size() != c.d_out) throw std::invalid_argument("shared_a_grad_components: g length mismatch");
    const Vector w = route(state, x);
    std::vector<Matrix> parts;
    for (std::size_t e = 0; e < c.experts; ++e)
        parts.push_back(outer(matvec_transposed(state.b[e], g), x));
    for (std::size_t e = 0; e < c.experts; ++e) parts[e] = scale(parts[e], c.scaling * w[e]);
    return parts;
}

std::vector<Matrix> alora_grad_components(const AdapterState& state, std::span<const double> x,
                                          std::span<const double> g) {
    const auto& c = state.config;
    if (c.scheme != Scheme::ALoRA)
        throw std::invalid_argument("alora_grad_components: adapter scheme is " + std::string(to_string(c.scheme)));
    if (g.size() != c.d_out) throw std::invalid_argument("alora_grad_components: g length mismatch");
    const Vector w = route(state, x);
    std::vector<Matrix> parts;
    for (std::size_t e = 0; e < c.experts; ++e) {
        Vector h = matvec(state.a[e], x);
        for (double& v : h) v *= w[e];
        parts.push_back(scale(outer(g, h), c.scaling));
    }
    return parts;
}

std::vector<Matrix*> trainable(AdapterState& state) {
    std::vector<Matrix*> out;
    for (Matrix& m : state.a) out.push_back(&m);
    for (Matrix& m : state.b) out.push_back(&m);
    if (is_routed(state.config.scheme)) out.push_back(&state.router);
    return out;
}

std::vector<const Matrix*> trainable(const AdapterState& state) {
    std::vector<const Matrix*> out;
    for (const Matrix& m : state.a) out.push_back(&m);
    for (const Matrix& m : state.b) out.push_back(&m);
    if (is_routed(state.config.scheme)) out.push_back(&state.router);
    return out;
}

std::vector<Matrix> flatten(GradBundle bundle) {
    std::vector<Matrix> out;
    for (Matrix& m : bundle.a) out.push_back(std::move(m));
    for (Matrix& m : bundle.b) out.push_back(std::move(m));
    if (!bundle.router.empty()) out.push_back(std::move(bundle.router));
    return out;
}

std::size_t trainable_count(const AdapterConfig& cfg) {
    const std::size_t n = cfg.experts;
    const std::size_t r = cfg.rank;
    switch (cfg.scheme) {
        case Scheme::Vanilla: return r * (cfg.d_in + cfg.d_out);
        case Scheme::SharingA: return r * cfg.d_in + n * cfg.d_out * r + n * cfg.d_in;
        case Scheme::ALoRA: return n * r * cfg.d_in + cfg.d_out * r + n * cfg.d_in;
    }
    return 0;
}

namespace reference {

GradBundle grad(const AdapterState& state, const Matrix& w0, std::span<const Sample> batch) {
    return unflatten(state, reference::mean_gradient(batch, [&](const Sample& s) {
                         GradBundle gb = sample_grad(state, w0, s);
                         const double loss = gb.loss;
                         return FlatGradient{flatten(std::move(gb)), loss};
                     }));
}

}  // namespace reference

}  // namespace alora
