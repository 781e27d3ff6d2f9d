#pragma once

#include <iosfwd>
#include <string>

#include "json.hpp"

namespace emascale::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDiverged = 3,
  kInsufficientSamples = 4,
};

/// Runs one command line (argv[0] is the program name). Normal output goes
/// to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// 16 hex digits of FNV-1a over the compact dump of `config` minus the keys
/// that do not affect results (threads, output_dir).
std::string config_hash(const nlohmann::ordered_json& config);

}  // namespace emascale::cli
