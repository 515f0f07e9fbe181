#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace alora {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Built-in oracle checks: finite-difference gradients for every adapter and
/// client model, similarity and factorization properties, the balance metric
/// and communication cost against reference figures, and a checkpoint round
/// trip. Takes well under a second.
std::vector<CheckResult> run_selftest(std::uint64_t seed = 0);

}  // namespace alora
