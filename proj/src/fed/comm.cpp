#include "alora/comm.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <stdexcept>
#include <string>

namespace alora {

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::FedALoRA: return "fed_alora";
        case Strategy::FedALoRAHetero: return "fed_alora_hetero";
        case Strategy::FedIT: return "fedit";
        case Strategy::FedSA: return "fedsa";
        case Strategy::FedSAHetero: return "fedsa_hetero";
        case Strategy::ZeroPadding: return "zero_padding";
        case Strategy::FLoRA: return "flora";
    }
    return "?";
}

const std::vector<Strategy>& all_strategies() {
    static const std::vector<Strategy> all = {Strategy::FedIT,       Strategy::FedSA,          Strategy::FedALoRA,
                                              Strategy::ZeroPadding, Strategy::FLoRA,          Strategy::FedSAHetero,
                                              Strategy::FedALoRAHetero};
    return all;
}

Strategy parse_strategy(std::string_view name) {
    for (Strategy s : all_strategies())
        if (to_string(s) == name) return s;
    throw std::invalid_argument("unknown federated strategy '" + std::string(name) + "'");
}

bool requires_uniform_ranks(Strategy s) {
    return s == Strategy::FedALoRA || s == Strategy::FedIT || s == Strategy::FedSA;
}

Payload expected_payload(Strategy s, std::size_t d_in, std::size_t d_out, std::span<const std::size_t> ranks,
                         std::size_t d_m, std::size_t client) {
    if (client >= ranks.size()) throw std::invalid_argument("expected_payload: client index out of range");
    const std::uint64_t r = ranks[client];
    const std::uint64_t r_max = *std::max_element(ranks.begin(), ranks.end());
    const std::uint64_t r_sum = std::accumulate(ranks.begin(), ranks.end(), std::uint64_t{0});
    const std::uint64_t in = d_in;
    const std::uint64_t out = d_out;
    const std::uint64_t m = d_m;
    switch (s) {
        case Strategy::FedALoRA: return {out * r, out * r};
        case Strategy::FedIT: return {(in + out) * r, (in + out) * r};
        case Strategy::FedSA: return {in * r, in * r};
        case Strategy::FedALoRAHetero: return {r * (out + m), out * m};
        case Strategy::FedSAHetero: return {r * (in + m), in * m};
        case Strategy::ZeroPadding: return {(in + out) * r, (in + out) * r_max};
        case Strategy::FLoRA: return {(in + out) * r, (in + out) * r_sum};
    }
    throw std::logic_error("expected_payload: unknown strategy");
}

std::vector<CommCost> comm_cost(const Geometry& g, std::span<const std::size_t> ranks, std::size_t d_m) {
    if (ranks.empty()) throw std::invalid_argument("comm_cost: no clients");
    const bool uniform = std::all_of(ranks.begin(), ranks.end(), [&](std::size_t r) { return r == ranks[0]; });
    std::vector<CommCost> out;
    for (Strategy s : all_strategies()) {
        if (requires_uniform_ranks(s) && !uniform) continue;
        CommCost c{s};
        for (std::size_t i = 0; i < ranks.size(); ++i) {
            const Payload p = expected_payload(s, g.d_in, g.d_out, ranks, d_m, i);
            c.upload += static_cast<double>(p.upload);
            c.download += static_cast<double>(p.download);
        }
        const double scale = static_cast<double>(g.modules) / static_cast<double>(ranks.size());
        c.upload *= scale;
        c.download *= scale;
        out.push_back(c);
    }
    return out;
}

std::uint64_t CommLedger::total_upload() const {
    std::uint64_t t = 0;
    for (const auto& r : rounds) t += std::accumulate(r.upload.begin(), r.upload.end(), std::uint64_t{0});
    return t;
}

std::uint64_t CommLedger::total_download() const {
    std::uint64_t t = 0;
    for (const auto& r : rounds) t += std::accumulate(r.download.begin(), r.download.end(), std::uint64_t{0});
    return t;
}

namespace {

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<unsigned char>(v >> (8 * k)));
}

std::uint64_t get_u64(std::span<const unsigned char> in, std::size_t at) {
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(in[at + k]) << (8 * k);
    return v;
}

}  // namespace

std::vector<unsigned char> encode_matrix(const Matrix& m) {
    std::vector<unsigned char> out;
    out.reserve(kFrameHeaderBytes + 8 * m.size());
    put_u64(out, m.rows());
    put_u64(out, m.cols());
    for (double v : m.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

Matrix decode_matrix(std::span<const unsigned char> bytes) {
    if (bytes.size() < kFrameHeaderBytes) throw std::invalid_argument("decode_matrix: truncated header");
    const std::uint64_t rows = get_u64(bytes, 0);
    const std::uint64_t cols = get_u64(bytes, 8);
    if (bytes.size() != kFrameHeaderBytes + 8 * rows * cols)
        throw std::invalid_argument("decode_matrix: payload length does not match header");
    std::vector<double> values(rows * cols);
    for (std::size_t k = 0; k < values.size(); ++k)
        values[k] = std::bit_cast<double>(get_u64(bytes, kFrameHeaderBytes + 8 * k));
    return Matrix(rows, cols, std::move(values));
}

void Transport::begin_round(std::size_t round) {
    if (open_) throw std::logic_error("Transport: round already open");
    current_ = LedgerEntry{round, std::vector<std::uint64_t>(n_clients_, 0),
                           std::vector<std::uint64_t>(n_clients_, 0)};
    open_ = true;
}

std::uint64_t Transport::count(const std::vector<unsigned char>& frame) const {
    return (frame.size() - kFrameHeaderBytes) / sizeof(double);
}

Matrix Transport::upload(std::size_t client, const Matrix& m) {
    if (!open_) throw std::logic_error("Transport: upload outside a round");
    const auto frame = encode_matrix(m);
    current_.upload.at(client) += count(frame);
    return decode_matrix(frame);
}

Matrix Transport::download(std::size_t client, const Matrix& m) {
    if (!open_) throw std::logic_error("Transport: download outside a round");
    const auto frame = encode_matrix(m);
    current_.download.at(client) += count(frame);
    return decode_matrix(frame);
}

LedgerEntry Transport::end_round() {
    if (!open_) throw std::logic_error("Transport: no open round");
    open_ = false;
    return std::move(current_);
}

}  // namespace alora
