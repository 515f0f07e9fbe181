#include "alora/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace alora {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

RngStream RngStream::restore(const RngCursor& cursor) {
    RngStream s(cursor.seed);
    s.engine_.discard(cursor.draws);
    s.draws_ = cursor.draws;
    return s;
}

double RngStream::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::below: empty range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view role, std::uint64_t index,
                          std::uint64_t round) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ fnv1a(role));
    h = splitmix64(h ^ index);
    return splitmix64(h ^ (round * 0xd1b54a32d192ed03ULL));
}

double kaiming_bound(std::size_t fan_in, double gain) {
    return gain * std::sqrt(3.0 / static_cast<double>(fan_in));
}

Matrix kaiming_uniform(std::size_t rows, std::size_t cols, RngStream& rng, double gain) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("kaiming_uniform: zero dimension");
    const double bound = kaiming_bound(cols, gain);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(-bound, bound);
    return m;
}

Matrix gaussian(std::size_t rows, std::size_t cols, RngStream& rng, double stddev) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = stddev * rng.normal();
    return m;
}

}  // namespace alora
