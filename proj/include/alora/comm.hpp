#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "alora/matrix.hpp"

namespace alora {

enum class Strategy {
    FedALoRA,        // homogeneous ranks, share B only
    FedALoRAHetero,  // heterogeneous ranks, dW = (B0 + B2 B1) M A, share B2 B1
    FedIT,           // share A and B
    FedSA,           // share A only
    FedSAHetero,     // FedSA on the mirrored decomposition dW = B M (A0 + A1 A2)
    ZeroPadding,     // pad A/B to r_max, average, truncate
    FLoRA,           // stack A/B, fold the stacked product into a frozen delta
};

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);
bool requires_uniform_ranks(Strategy s);
const std::vector<Strategy>& all_strategies();

/// Scalar counts sent in one round by one client, for one adapted matrix.
struct Payload {
    std::uint64_t upload = 0;
    std::uint64_t download = 0;

    friend bool operator==(const Payload&, const Payload&) = default;
};

/// Closed-form per-client payload of a strategy:
///   FedALoRA        up d_out r           down d_out r
///   FedIT           up (d_in+d_out) r    down (d_in+d_out) r
///   FedSA           up d_in r            down d_in r
///   FedALoRAHetero  up r_i (d_out+d_m)   down d_out d_m
///   FedSAHetero     up r_i (d_in+d_m)    down d_in d_m
///   ZeroPadding     up (d_in+d_out) r_i  down (d_in+d_out) r_max
///   FLoRA           up (d_in+d_out) r_i  down (d_in+d_out) sum_j r_j
Payload expected_payload(Strategy s, std::size_t d_in, std::size_t d_out, std::span<const std::size_t> ranks,
                         std::size_t d_m, std::size_t client);

struct Geometry {
    std::size_t d_in = 0;
    std::size_t d_out = 0;
    std::size_t modules = 1;  // adapted matrices per model
    friend bool operator==(const Geometry&, const Geometry&) = default;
};

struct CommCost {
    Strategy strategy;
    double upload = 0.0;    // mean per client per round, all modules
    double download = 0.0;
    double total() const { return upload + download; }
};

/// Analytic communication cost for every strategy applicable to `ranks`
/// (uniform-rank strategies are skipped when ranks differ).
std::vector<CommCost> comm_cost(const Geometry& geometry, std::span<const std::size_t> ranks, std::size_t d_m);

struct LedgerEntry {
    std::size_t round = 0;
    std::vector<std::uint64_t> upload;    // per client
    std::vector<std::uint64_t> download;  // per client
};

struct CommLedger {
    std::vector<LedgerEntry> rounds;

    std::uint64_t total_upload() const;
    std::uint64_t total_download() const;
};

/// Wire encoding of one matrix: u64 rows, u64 cols (little-endian), then
/// rows*cols IEEE-754 doubles, little-endian, row-major.
inline constexpr std::size_t kFrameHeaderBytes = 16;
std::vector<unsigned char> encode_matrix(const Matrix& m);
Matrix decode_matrix(std::span<const unsigned char> bytes);

/// In-process channel between server and clients. Every matrix crossing it
/// is encoded, counted from the encoded payload (excluding the frame
/// header) and decoded again, so the ledger reflects what was serialized.
class Transport {
public:
    explicit Transport(std::size_t n_clients) : n_clients_(n_clients) {}

    void begin_round(std::size_t round);
    Matrix upload(std::size_t client, const Matrix& m);
    Matrix download(std::size_t client, const Matrix& m);
    LedgerEntry end_round();

private:
    std::uint64_t count(const std::vector<unsigned char>& frame) const;

    std::size_t n_clients_;
    LedgerEntry current_;
    bool open_ = false;
};

}  // namespace alora
