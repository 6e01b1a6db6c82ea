#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "bdpre/analysis.hpp"
#include "bdpre/env.hpp"
#include "bdpre/simulate.hpp"

namespace bdpre {

inline constexpr std::string_view kVersion = "0.1.0";

enum class OutputFormat { Json, Csv };

/// One experiment: the environment law plus every tuning knob. Unknown keys
/// are rejected so a report's embedded config always reruns the same way.
struct RunConfig {
  EnvironmentLaw law;
  std::uint64_t seed = 1;
  std::int64_t steps = 100'000;
  std::int64_t replicas = 8;
  std::int64_t burn_in = 1'000;
  double tolerance = 1e-3;
  double horizon = 1'000.0;
  std::int64_t n_paths = 200;
  std::int64_t n_samples = 10'000;
  std::int64_t n_env = 32;
  std::int64_t max_terms = kDefaultMaxTerms;
  double rel_tol = 1e-10;
  std::int64_t step_cap = kDefaultStepCap;
  std::int64_t generation_cap = 10'000;
  std::int64_t target = 1;
  StopRule stop = StopRule::hit_state(1);
  std::string output_path;
  std::optional<OutputFormat> output_format;
};

/// Throws Error(ConfigError) naming the offending key.
RunConfig parse_config(const nlohmann::json& j);

/// Every key with its resolved value (defaults filled in).
nlohmann::json resolved_config(const RunConfig& config, std::string_view command);

nlohmann::json to_json(const ConditionReport& r);
nlohmann::json to_json(const LyapunovEstimate& e);
nlohmann::json to_json(const RecurrenceVerdict& v);
nlohmann::json to_json(const SeriesResult& s);
nlohmann::json to_json(const VelocityReport& r);
nlohmann::json to_json(const DecompositionReport& r);

/// Flattens nested objects into key,value CSV lines ("a.b,1").
std::string flatten_csv(const nlohmann::json& report);

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitDomain = 3 };

struct CommandOutput {
  int exit_code = kExitOk;
  /// Full report; null for validation failures.
  nlohmann::json report;
  /// Rendered primary output in the configured format.
  std::string text;
  /// Path dump CSV when requested (passage) or produced (simulate).
  std::string path_dump;
  std::string error;
};

/// Runs one of check | classify | passage | velocity |
/// verify-decomposition | simulate. Numeric results are independent of
/// `threads`.
CommandOutput run_command(std::string_view command, const nlohmann::json& config, unsigned threads = 1,
                          bool dump_paths = false);

bool is_command(std::string_view command);

}  // namespace bdpre
