#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace certctl::runner {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { certified = 0, failure = 1, undecided = 2, config_error = 64 };

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the config seed
  std::optional<unsigned> workers;    // overrides the config worker count
  bool precision_audit = false;
  std::string base_dir = ".";         // resolves relative paths in the config
};

struct DataFile {
  std::string name;
  std::string content;
};

struct RunResult {
  int exit_code = failure;
  nlohmann::json certificate;
  std::vector<DataFile> files;
};

const std::vector<std::string>& subcommands();

/// Validates and runs a config. ConfigError when the config does not parse
/// or validate; failures during the run are reported in the result.
RunResult run(const nlohmann::json& config, const RunOptions& opts);
RunResult run_text(const std::string& text, const RunOptions& opts);

/// The certificate without its wall-clock field.
nlohmann::json numeric_fields(const nlohmann::json& certificate);

/// SHA-256 of the canonical config text and the effective seed, in hex.
std::string inputs_digest(const nlohmann::json& config, std::uint64_t seed);

}  // namespace certctl::runner
