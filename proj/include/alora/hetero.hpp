#pragma once

#include <span>
#include <vector>

#include "alora/matrix.hpp"
#include "alora/model.hpp"
#include "alora/rng.hpp"

namespace alora {

/// Heterogeneous-rank client that shares the B side:
///   dW = s (B0 + B2 B1) M A
/// A: r x d_in, M: d_m x r, B1: r x d_m, B2: d_out x r, B0: d_out x d_m.
/// B0 is the frozen accumulator of received global updates; A, M, B1, B2 train.
struct HeteroBClient {
    Matrix a;
    Matrix m;
    Matrix b1;
    Matrix b2;
    Matrix b0;
    double scaling = 1.0;

    std::size_t rank() const { return a.rows(); }

    friend bool operator==(const HeteroBClient&, const HeteroBClient&) = default;
};

/// Round-1 state: A, M, B1 Kaiming-uniform; B0 and B2 zero.
HeteroBClient init_hetero_b(std::size_t d_in, std::size_t d_out, std::size_t rank, std::size_t d_m,
                            RngStream& rng, double scaling = 1.0);

/// Start of a later round: B0 takes the received global matrix, B1 is redrawn
/// and B2 reset to zero; A and M carry over.
void begin_round(HeteroBClient& client, const Matrix& global_b0, RngStream& rng);

/// The d_out x d_m product B2 B1 the server aggregates.
Matrix shared_factor(const HeteroBClient& client);
Matrix effective_delta(const HeteroBClient& client);

std::vector<Matrix*> trainable(HeteroBClient& client);
FlatGradient batch_gradient(const HeteroBClient& client, const Matrix& w0, std::span<const Sample> batch);
Vector predict(const HeteroBClient& client, const Matrix& w0, std::span<const double> x);
FlatGradient sample_gradient(const HeteroBClient& client, const Matrix& w0, const Sample& sample);

/// Mirror of HeteroBClient that shares the A side, used to run FedSA with
/// heterogeneous ranks:
///   dW = s B M (A0 + A1 A2)
/// B: d_out x r, M: r x d_m, A1: d_m x r, A2: r x d_in, A0: d_m x d_in.
struct HeteroAClient {
    Matrix b;
    Matrix m;
    Matrix a1;
    Matrix a2;
    Matrix a0;
    double scaling = 1.0;

    std::size_t rank() const { return b.cols(); }

    friend bool operator==(const HeteroAClient&, const HeteroAClient&) = default;
};

/// Round-1 state: B, M, A1 Kaiming-uniform; A0 and A2 zero.
HeteroAClient init_hetero_a(std::size_t d_in, std::size_t d_out, std::size_t rank, std::size_t d_m,
                            RngStream& rng, double scaling = 1.0);
void begin_round(HeteroAClient& client, const Matrix& global_a0, RngStream& rng);

/// The d_m x d_in product A1 A2 the server aggregates.
Matrix shared_factor(const HeteroAClient& client);
Matrix effective_delta(const HeteroAClient& client);

std::vector<Matrix*> trainable(HeteroAClient& client);
FlatGradient batch_gradient(const HeteroAClient& client, const Matrix& w0, std::span<const Sample> batch);
Vector predict(const HeteroAClient& client, const Matrix& w0, std::span<const double> x);
FlatGradient sample_gradient(const HeteroAClient& client, const Matrix& w0, const Sample& sample);

}  // namespace alora
