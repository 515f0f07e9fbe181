#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "alora/adapters.hpp"
#include "alora/fed.hpp"
#include "alora/matrix.hpp"
#include "alora/rng.hpp"
#include "alora/train.hpp"

// Binary checkpoint layout, all integers and doubles little-endian:
//
//   offset  size  field
//   0       8     magic "ALORACKP"
//   8       4     u32 format version (kCheckpointVersion)
//   12      4     u32 tag length L, then L bytes of tag (scheme or strategy)
//           8     u64 index (epochs or rounds completed)
//           8     u64 RNG cursor seed
//           8     u64 RNG cursor draws
//           8     u64 number of integer records, each:
//                   u32 name length, name bytes, u64 value
//           8     u64 number of matrix records, each:
//                   u32 name length, name bytes, u64 rows, u64 cols,
//                   rows * cols f64 values in row-major order
//           8     u64 FNV-1a 64 checksum of every preceding byte
//
// Nothing may follow the checksum.

namespace alora {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'A', 'L', 'O', 'R', 'A', 'C', 'K', 'P'};

struct NamedMatrix {
    std::string name;
    Matrix value;

    friend bool operator==(const NamedMatrix&, const NamedMatrix&) = default;
};

struct NamedInteger {
    std::string name;
    std::uint64_t value = 0;

    friend bool operator==(const NamedInteger&, const NamedInteger&) = default;
};

struct Checkpoint {
    std::string tag;
    std::uint64_t index = 0;
    RngCursor rng;
    std::vector<NamedInteger> integers;
    std::vector<NamedMatrix> matrices;

    const Matrix& matrix(std::string_view name) const;
    std::uint64_t integer(std::string_view name) const;
    bool has_matrix(std::string_view name) const;
    bool has_integer(std::string_view name) const;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Raised for unreadable, truncated or corrupt checkpoints; offset is the
/// byte position where decoding failed.
class CheckpointError : public std::runtime_error {
public:
    CheckpointError(const std::string& what, std::uint64_t offset);
    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// A training session: the adapter, optimizer moments, shuffle cursor and
/// loss history. Tag is the scheme name.
Checkpoint pack_session(const AdapterState& state, const SessionProgress& progress);
struct SessionSnapshot {
    AdapterState state;
    SessionProgress progress;
};
SessionSnapshot unpack_session(const Checkpoint& ckpt);

/// Federation state at a round boundary. Tag is "fed:" + strategy name. The
/// per-round history matrices (client losses, test scores) ride along so a
/// resumed run can emit complete tables.
Checkpoint pack_federation(const Federation& fed, std::span<const Matrix> history);
struct FederationSnapshot {
    std::vector<FedClient> clients;
    ServerState server;
    CommLedger ledger;
    std::vector<Matrix> history;
};
FederationSnapshot unpack_federation(const Checkpoint& ckpt, const FedConfig& cfg);

}  // namespace alora
