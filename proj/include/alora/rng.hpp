#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "alora/matrix.hpp"

namespace alora {

/// Position of an RngStream: the stream is fully determined by the seed and
/// the number of raw 64-bit words drawn so far.
struct RngCursor {
    std::uint64_t seed = 0;
    std::uint64_t draws = 0;

    friend bool operator==(const RngCursor&, const RngCursor&) = default;
};

/// Seeded random stream. The engine is std::mt19937_64, whose output sequence
/// is fixed by the C++ standard; the distributions on top are implemented
/// here so draws are identical on every platform:
///   uniform01: top 53 bits of one word, scaled by 2^-53 (range [0, 1))
///   normal:    Box-Muller on two uniforms, one value per pair (no caching)
///   below(n):  rejection sampling on raw words, no modulo bias
class RngStream {
public:
    static constexpr std::string_view kAlgorithm = "mt19937_64+u53+box-muller";

    explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    static RngStream restore(const RngCursor& cursor);

    std::uint64_t next_u64() {
        ++draws_;
        return engine_();
    }
    double uniform01();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    double normal();
    std::uint64_t below(std::uint64_t n);

    RngCursor cursor() const noexcept { return {seed_, draws_}; }
    std::uint64_t seed() const noexcept { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t draws_ = 0;
    std::mt19937_64 engine_;
};

/// Stream seed for a (master seed, role, index, round) tuple. Streams for
/// different clients, tasks or rounds never share draws, so adding a client
/// leaves every other client's sequence untouched.
std::uint64_t derive_seed(std::uint64_t master, std::string_view role, std::uint64_t index = 0,
                          std::uint64_t round = 0);

/// Uniform on [-bound, bound] with bound = gain * sqrt(3 / cols); cols is the
/// fan-in of a matrix applied as `m * x`.
Matrix kaiming_uniform(std::size_t rows, std::size_t cols, RngStream& rng, double gain = 1.0);
double kaiming_bound(std::size_t fan_in, double gain = 1.0);

Matrix gaussian(std::size_t rows, std::size_t cols, RngStream& rng, double stddev = 1.0);

}  // namespace alora
