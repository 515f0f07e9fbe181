#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "alora/matrix.hpp"
#include "alora/model.hpp"
#include "alora/rng.hpp"
#include "alora/sample.hpp"

namespace alora {

enum class Scheme {
    Vanilla,   // y = W0 x + s B A x
    SharingA,  // y = W0 x + s sum_i w_i B_i A x   (one A, n B experts)
    ALoRA,     // y = W0 x + s B sum_i w_i A_i x   (n A experts, one B)
};

std::string_view to_string(Scheme scheme);
Scheme parse_scheme(std::string_view name);
bool is_routed(Scheme scheme);

struct AdapterConfig {
    std::size_t d_in = 0;
    std::size_t d_out = 0;
    std::size_t rank = 0;
    std::size_t experts = 1;
    Scheme scheme = Scheme::Vanilla;
    double scaling = 1.0;

    friend bool operator==(const AdapterConfig&, const AdapterConfig&) = default;
};

/// Throws std::invalid_argument naming the first violated constraint.
void validate(const AdapterConfig& cfg);

/// Trainable adapter parameters. The A and B lists hold one matrix for the
/// shared side and `experts` matrices for the expert side:
///   Vanilla:  a = {A},          b = {B}
///   SharingA: a = {A},          b = {B_1..B_n}, router W_g (n x d_in)
///   ALoRA:    a = {A_1..A_n},   b = {B},        router W_g (n x d_in)
struct AdapterState {
    AdapterConfig config;
    std::vector<Matrix> a;
    std::vector<Matrix> b;
    Matrix router;  // empty for Vanilla

    friend bool operator==(const AdapterState&, const AdapterState&) = default;
};

/// Gradients mirroring AdapterState's layout.
struct GradBundle {
    std::vector<Matrix> a;
    std::vector<Matrix> b;
    Matrix router;
    double loss = 0.0;  // mean loss over the batch the bundle was computed on
};

/// A-side and router matrices are Kaiming-uniform, B-side matrices are zero.
AdapterState init_adapter(const AdapterConfig& cfg, RngStream& rng);

struct ForwardResult {
    Vector y;
    std::optional<Vector> weights;  // router output for routed schemes
};

ForwardResult forward(const AdapterState& state, const Matrix& w0, std::span<const double> x);

/// Router weights softmax(W_g x); throws for Vanilla.
Vector route(const AdapterState& state, std::span<const double> x);

/// Input-dependent update such that forward(x).y == W0 x + effective_delta(x) x.
/// Routed schemes require x.
Matrix effective_delta(const AdapterState& state, std::optional<std::span<const double>> x = std::nullopt);

/// Gradient of the single-sample MSE loss.
GradBundle sample_grad(const AdapterState& state, const Matrix& w0, const Sample& sample);

/// Mean over the batch of sample_grad. Samples are processed in parallel into
/// per-sample slots and summed in batch order, so the result is bitwise equal
/// to reference::grad regardless of thread count.
GradBundle grad(const AdapterState& state, const Matrix& w0, std::span<const Sample> batch);

/// Per-expert terms of the shared-A gradient, w_i s (B_i^T g) x^T; they sum to
/// the A gradient of the same sample.
std::vector<Matrix> shared_a_grad_components(const AdapterState& state, std::span<const double> x,
                                             std::span<const double> g);

/// Per-expert terms of the shared-B gradient, s g (w_i A_i x)^T; they sum to
/// the B gradient of the same sample.
std::vector<Matrix> alora_grad_components(const AdapterState& state, std::span<const double> x,
                                          std::span<const double> g);

/// Trainable matrices in canonical order: a..., b..., router (if routed).
std::vector<Matrix*> trainable(AdapterState& state);
std::vector<const Matrix*> trainable(const AdapterState& state);
std::vector<Matrix> flatten(GradBundle bundle);

std::size_t trainable_count(const AdapterConfig& cfg);

// TrainableModel hooks.
FlatGradient batch_gradient(const AdapterState& state, const Matrix& w0, std::span<const Sample> batch);
Vector predict(const AdapterState& state, const Matrix& w0, std::span<const double> x);

namespace reference {
GradBundle grad(const AdapterState& state, const Matrix& w0, std::span<const Sample> batch);
}

}  // namespace alora
