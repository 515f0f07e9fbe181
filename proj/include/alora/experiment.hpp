#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "alora/config.hpp"

namespace alora {

struct RunReport {
    bool complete = false;
    std::string error;                          // first failure, empty on success
    std::vector<std::filesystem::path> files;   // artifacts written, relative to cfg.out
    std::string summary;                        // one-paragraph human summary
};

/// Runs one experiment and writes its artifacts under cfg.out:
///   config.resolved        echo of the resolved config
///   <kind tables>.csv/json results (see README "Output files")
///   checkpoints/*.ckpt     multitask and fed runs
///   MANIFEST               status, timestamps and the file list
/// Errors are caught: the report says incomplete and MANIFEST records it.
RunReport run_experiment(const ExperimentConfig& cfg);

/// Output file names, relative to the output directory.
inline constexpr const char* kEchoFile = "config.resolved";
inline constexpr const char* kManifestFile = "MANIFEST";

}  // namespace alora
