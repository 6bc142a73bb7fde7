#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ckm::app {

inline constexpr const char* kVersion = "1.0.0";

/// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

struct RunOptions {
  std::string command;  ///< fit, cv, simulate, mc-study, bias, convert-loans
  std::filesystem::path config;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool skip_bad = false;
  bool keep_latents = false;
  bool verify_loo = false;
  bool full_scale = false;
};

struct RunResult {
  int exit_code = kExitOk;
  std::filesystem::path out_dir;
  std::vector<std::string> files;  ///< written file names, relative to out_dir
  std::string message;             ///< error text when exit_code != 0
};

/// Runs one command. Output files are collected in memory and written when
/// the command succeeds; on failure only error.json is written. Never throws
/// for run-time failures: they map to the exit codes above.
RunResult run(const RunOptions& options, std::ostream& log);

/// Output directory: --out, then $CKM_OUT_DIR, then [run] out, then ./ckm_out.
std::filesystem::path resolve_out_dir(const std::optional<std::filesystem::path>& flag,
                                      const std::optional<std::string>& configured);

}  // namespace ckm::app
