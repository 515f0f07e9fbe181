#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "alora/adapters.hpp"
#include "alora/comm.hpp"
#include "alora/fed.hpp"
#include "alora/tasks.hpp"
#include "alora/train.hpp"

namespace alora {

enum class ExperimentKind { Multitask, Federated, Analysis, Commcost };

std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_kind(std::string_view name);

/// Fully resolved experiment description. Every field has a documented
/// default (see configs/reference.conf); seeds of the suite, the training
/// streams and the federation are derived from the master seed.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Multitask;
    std::uint64_t seed = 0;
    std::string out = "results";
    std::string resume;  // checkpoint to continue from, empty for a fresh run

    SuiteSpec suite;
    AdapterConfig adapter{.rank = 4, .experts = 3, .scheme = Scheme::ALoRA};
    TrainConfig train;
    bool baselines = true;

    FedConfig fed;  // fed.train and fed.seed are filled by federation_config
    std::size_t checkpoint_every = 0;  // epochs or rounds between periodic checkpoints; 0 disables

    std::string analysis_first;
    std::string analysis_second;

    Geometry geometry{4096, 4096, 64};
    std::vector<std::size_t> commcost_ranks = std::vector<std::size_t>(8, 8);
    std::size_t commcost_d_m = 16;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Every problem found in a config, in file order.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const noexcept { return errors_; }

private:
    std::vector<std::string> errors_;
};

/// Parses the key = value format. Blank lines and lines starting with '#'
/// are ignored; anything after a '#' preceded by whitespace is a comment.
/// Unknown or repeated keys, malformed values and constraint violations are
/// all collected and thrown together as a ConfigError.
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Applies cross-field validation; throws ConfigError listing every problem.
void validate(const ExperimentConfig& cfg);

/// Canonical text with every key written out; parse_config_text of the
/// result gives back an equal config.
std::string echo_config(const ExperimentConfig& cfg);

/// FNV-1a 64 of the echo text with out and resume blanked, as 16 hex
/// digits. Runs that should produce the same numbers share a hash.
std::string config_hash(const ExperimentConfig& cfg);

/// Derived seeds.
std::uint64_t suite_seed(const ExperimentConfig& cfg);
std::uint64_t train_seed(const ExperimentConfig& cfg);
std::uint64_t init_seed(const ExperimentConfig& cfg);
std::uint64_t fed_seed(const ExperimentConfig& cfg);

/// cfg.fed with the shared train settings and the derived seed filled in.
FedConfig federation_config(const ExperimentConfig& cfg);

}  // namespace alora
