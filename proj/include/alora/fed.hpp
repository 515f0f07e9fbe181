#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "alora/adapters.hpp"
#include "alora/comm.hpp"
#include "alora/hetero.hpp"
#include "alora/train.hpp"

namespace alora {

struct FedConfig {
    Strategy strategy = Strategy::FedALoRA;
    std::size_t n_clients = 8;
    std::size_t rounds = 10;
    std::size_t local_epochs = 1;
    std::vector<std::size_t> ranks;  // one per client
    std::size_t d_m = 4;             // shared width of the heterogeneous decomposition
    Vector weights;                  // aggregation weights; empty means uniform
    TrainConfig train;               // train.epochs is ignored, local_epochs applies
    std::uint64_t seed = 0;
    double scaling = 1.0;
    // All clients draw their initial (and re-initialized) factors from the
    // same stream, as if the server distributed one initial model.
    bool shared_init = true;

    friend bool operator==(const FedConfig&, const FedConfig&) = default;
};

void validate(const FedConfig& cfg);

/// Weighted element-wise mean, sum_j weights[j] * matrices[j], accumulated in
/// client order.
Matrix aggregate(std::span<const Matrix> matrices, std::span<const double> weights);

/// Plain LoRA client. frozen_delta is FLoRA's folded-in history (added to W0
/// at forward time) and stays empty for every other strategy.
struct LoraClient {
    AdapterState adapter;
    Matrix frozen_delta;

    friend bool operator==(const LoraClient&, const LoraClient&) = default;
};

using ClientModel = std::variant<LoraClient, HeteroBClient, HeteroAClient>;

struct FedClient {
    ClientModel model;
    // Global matrix received at the end of the previous round, applied by the
    // next round's initialization step (heterogeneous strategies only).
    Matrix inbox;
    double last_loss = 0.0;

    friend bool operator==(const FedClient&, const FedClient&) = default;
};

struct ServerState {
    std::size_t round = 0;        // completed rounds
    std::vector<Matrix> global;   // matrices broadcast in the last round

    friend bool operator==(const ServerState&, const ServerState&) = default;
};

struct RoundContext {
    const FedConfig& cfg;
    const Matrix& w0;
    std::span<const std::vector<Sample>> data;  // per-client training data
    Transport& transport;
    std::size_t round;  // 1-based
};

/// Fed-ALoRA, uniform ranks: local training of (A_i, B_i), upload B_i,
/// aggregate, broadcast B_0 which replaces every B_i; A_i never leaves.
LedgerEntry run_round_homog(std::vector<FedClient>& clients, ServerState& server, const RoundContext& ctx);

/// Fed-ALoRA or mirrored FedSA with heterogeneous ranks. Rounds after the
/// first begin by loading the received accumulator and redrawing the
/// shared factor pair; the server aggregates the reconstructed products and
/// adds them to its accumulator, which is broadcast.
LedgerEntry run_round_hetero(std::vector<FedClient>& clients, ServerState& server, const RoundContext& ctx);

/// FedIT, FedSA, ZeroPadding and FLoRA.
LedgerEntry run_round_baseline(std::vector<FedClient>& clients, ServerState& server, const RoundContext& ctx);

/// Client-side training helper shared by the round functions: one local
/// session of cfg.local_epochs epochs with a fresh optimizer and a shuffle
/// stream seeded by derive_seed(cfg.seed, "client.shuffle", client, round).
TrainConfig local_train_config(const FedConfig& cfg, std::size_t client, std::size_t round);

/// Seed of the stream that initializes (round 0) or re-initializes (round
/// >= 2) a client's factors.
std::uint64_t client_init_seed(const FedConfig& cfg, std::size_t client, std::size_t round);

/// Round-1 client state for a strategy.
FedClient init_client(const FedConfig& cfg, std::size_t d_in, std::size_t d_out, std::size_t client);

/// Synchronous federated training driver.
class Federation {
public:
    Federation(FedConfig cfg, Matrix w0, std::vector<std::vector<Sample>> client_train);
    Federation(FedConfig cfg, Matrix w0, std::vector<std::vector<Sample>> client_train,
               std::vector<FedClient> clients, ServerState server, CommLedger ledger);

    const LedgerEntry& run_round();
    void run();

    /// dW of the model client i would deploy now (received globals applied).
    Matrix client_delta(std::size_t client) const;
    double evaluate_client(std::size_t client, std::span<const Sample> data) const;

    const FedConfig& config() const noexcept { return cfg_; }
    const Matrix& w0() const noexcept { return w0_; }
    const std::vector<FedClient>& clients() const noexcept { return clients_; }
    const ServerState& server() const noexcept { return server_; }
    const CommLedger& ledger() const noexcept { return ledger_; }
    bool finished() const noexcept { return server_.round >= cfg_.rounds; }

private:
    FedConfig cfg_;
    Matrix w0_;
    std::vector<std::vector<Sample>> data_;
    std::vector<FedClient> clients_;
    ServerState server_;
    CommLedger ledger_;
};

}  // namespace alora
