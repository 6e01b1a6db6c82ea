#include "bdpre/cli.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "bdpre/error.hpp"
#include "bdpre/matrices.hpp"
#include "bdpre/parallel.hpp"

namespace bdpre {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 6> kCommands = {"check",    "classify",             "passage",
                                                       "velocity", "verify-decomposition", "simulate"};

constexpr std::array<std::string_view, 19> kKeys = {
    "L",       "atoms",    "seed",      "steps",     "replicas",   "burn_in",        "tolerance",
    "horizon", "n_paths",  "n_samples", "n_env",     "max_terms",  "rel_tol",        "step_cap",
    "target",  "stop",     "output_path", "output_format", "generation_cap"};

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

std::int64_t read_count(const json& j, const char* key, std::int64_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) config_error(std::string("key '") + key + "' must be an integer");
  const auto n = v.get<std::int64_t>();
  if (n < 1) config_error(std::string("key '") + key + "' must be positive");
  return n;
}

double read_positive(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) config_error(std::string("key '") + key + "' must be a number");
  const double x = v.get<double>();
  if (!(x > 0.0) || !std::isfinite(x)) config_error(std::string("key '") + key + "' must be positive and finite");
  return x;
}

StopRule read_stop(const json& j) {
  if (!j.is_object()) config_error("key 'stop' must be an object {\"kind\", \"value\"}");
  for (const auto& [key, _] : j.items()) {
    if (key != "kind" && key != "value") config_error("unknown key 'stop." + key + "'");
  }
  if (!j.contains("kind") || !j["kind"].is_string()) config_error("key 'stop.kind' must be a string");
  if (!j.contains("value") || !j["value"].is_number()) config_error("key 'stop.value' must be a number");
  const auto kind = j["kind"].get<std::string>();
  const auto& value = j["value"];
  if (kind == "hit_state") {
    if (!value.is_number_integer()) config_error("key 'stop.value' must be an integer for hit_state");
    return StopRule::hit_state(value.get<std::int64_t>());
  }
  if (kind == "time_horizon") {
    const double t = value.get<double>();
    if (!(t > 0.0) || !std::isfinite(t)) config_error("key 'stop.value' must be positive for time_horizon");
    return StopRule::time_horizon(t);
  }
  if (kind == "step_cap") {
    if (!value.is_number_integer() || value.get<std::int64_t>() < 1) {
      config_error("key 'stop.value' must be a positive integer for step_cap");
    }
    return StopRule::step_cap(value.get<std::int64_t>());
  }
  config_error("key 'stop.kind' must be one of hit_state, time_horizon, step_cap");
}

json stop_to_json(const StopRule& s) {
  switch (s.kind) {
    case StopRule::Kind::HitState: return {{"kind", "hit_state"}, {"value", s.state}};
    case StopRule::Kind::TimeHorizon: return {{"kind", "time_horizon"}, {"value", s.horizon}};
    case StopRule::Kind::StepCap: return {{"kind", "step_cap"}, {"value", s.steps}};
  }
  return nullptr;
}

OutputFormat default_format(std::string_view command) {
  return command == "simulate" ? OutputFormat::Csv : OutputFormat::Json;
}

/// Doubles that may be infinite serialize as null.
json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json quantiles(std::vector<double> xs) {
  json q = json::object();
  if (xs.empty()) return q;
  std::sort(xs.begin(), xs.end());
  for (double p : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    // Type-7 (linear interpolation) sample quantile.
    const double h = (static_cast<double>(xs.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    const double v = xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
    std::ostringstream key;
    key << "p" << static_cast<int>(std::lround(p * 100));
    q[key.str()] = v;
  }
  return q;
}

LyapunovOptions lyapunov_options(const RunConfig& c, unsigned threads) {
  return LyapunovOptions{c.steps, c.replicas, c.burn_in, threads};
}

EnvironmentWindow run_window(const RunConfig& c) {
  return EnvironmentWindow(c.law, derive_key(c.seed, static_cast<std::uint64_t>(Purpose::Window)), -64, 64);
}

void flatten_into(const json& j, const std::string& prefix, std::ostringstream& out) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) flatten_into(value, prefix.empty() ? key : prefix + "." + key, out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten_into(j[i], prefix + "." + std::to_string(i), out);
  } else if (j.is_string()) {
    auto s = j.get<std::string>();
    std::replace(s.begin(), s.end(), '"', '\'');
    out << prefix << ",\"" << s << "\"\n";
  } else {
    out << prefix << ',' << j.dump() << '\n';
  }
}

struct Rendered {
  json result;
  int exit_code = kExitOk;
  std::string path_dump;
};

Rendered cmd_check(const RunConfig& c) {
  const auto report = check_conditions(c.law);
  return {to_json(report), report.ok() ? kExitOk : kExitDomain, {}};
}

Rendered cmd_classify(const RunConfig& c, unsigned threads) {
  const auto est = lyapunov_top(c.law, lyapunov_options(c, threads), c.seed);
  return {to_json(classify_recurrence(est, c.tolerance)), kExitOk, {}};
}

Rendered cmd_passage(const RunConfig& c, unsigned threads, bool dump_paths) {
  require_conditions(c.law);
  auto env = run_window(c);
  const auto n = static_cast<std::size_t>(c.n_samples);
  std::vector<PassageTime> times;
  std::string dump;
  if (dump_paths) {
    // simulate_path consumes the stream exactly like first_passage_time, so
    // the dumped paths are the ones summarized.
    std::vector<PathRecord> paths(n);
    parallel_for(n, threads, [&](std::size_t r) {
      auto rng = Rng::stream(c.seed, Purpose::Path, r);
      paths[r] = simulate_path(env, 0, StopRule::hit_state(c.target), rng, c.step_cap);
    });
    for (const auto& p : paths) {
      times.push_back({p.end_time, p.censored, static_cast<std::int64_t>(p.events.size())});
    }
    std::ostringstream out;
    write_path_csv(out, paths);
    dump = out.str();
  } else {
    times = first_passage_times(env, c.target, n, c.seed, c.step_cap, threads);
  }
  std::vector<double> finished;
  std::int64_t censored = 0;
  for (const auto& t : times) {
    if (t.censored) {
      ++censored;
    } else {
      finished.push_back(t.time);
    }
  }
  const auto s = summarize(finished);
  json result = {{"target", c.target},
                 {"n_samples", c.n_samples},
                 {"completed", s.count},
                 {"censored", censored},
                 {"censoring_rate", static_cast<double>(censored) / static_cast<double>(n)},
                 {"mean", finished.empty() ? json(nullptr) : json(s.mean)},
                 {"std_error", finished.empty() ? json(nullptr) : json(s.std_error)},
                 {"quantiles", quantiles(finished)}};
  return {result, kExitOk, dump};
}

Rendered cmd_velocity(const RunConfig& c, unsigned threads) {
  VelocityOptions options;
  options.n_env = c.n_env;
  options.horizon = c.horizon;
  options.n_paths = c.n_paths;
  options.max_terms = c.max_terms;
  options.rel_tol = c.rel_tol;
  options.tolerance = c.tolerance;
  options.lyapunov = lyapunov_options(c, threads);
  options.step_cap = c.step_cap;
  options.threads = threads;
  return {to_json(velocity(c.law, options, c.seed)), kExitOk, {}};
}

Rendered cmd_verify_decomposition(const RunConfig& c, unsigned threads) {
  DecompositionOptions options;
  options.step_cap = c.step_cap;
  options.generation_cap = c.generation_cap;
  options.tolerance = c.tolerance;
  options.lyapunov = lyapunov_options(c, threads);
  options.threads = threads;
  return {to_json(compare_decomposition(c.law, c.n_samples, c.seed, options)), kExitOk, {}};
}

Rendered cmd_simulate(const RunConfig& c, unsigned threads) {
  require_conditions(c.law);
  auto env = run_window(c);
  const auto n = static_cast<std::size_t>(c.n_paths);
  std::vector<PathRecord> paths(n);
  parallel_for(n, threads, [&](std::size_t r) {
    auto rng = Rng::stream(c.seed, Purpose::Path, r);
    paths[r] = simulate_path(env, 0, c.stop, rng, c.step_cap);
  });
  json result = {{"n_paths", c.n_paths}};
  json records = json::array();
  std::int64_t censored = 0;
  for (const auto& p : paths) {
    censored += p.censored ? 1 : 0;
    json events = json::array();
    for (const auto& e : p.events) events.push_back({e.time, e.state});
    records.push_back({{"start_state", p.start_state},
                       {"censored", p.censored},
                       {"end_time", p.end_time},
                       {"final_state", p.final_state()},
                       {"events", events}});
  }
  result["censored"] = censored;
  result["paths"] = records;
  std::ostringstream out;
  write_path_csv(out, paths);
  return {result, kExitOk, out.str()};
}

}  // namespace

RunConfig parse_config(const json& j) {
  if (!j.is_object()) config_error("config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) config_error("unknown key '" + key + "'");
  }
  RunConfig c{law_from_json(j)};
  if (j.contains("seed")) {
    const auto& s = j["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
      config_error("key 'seed' must be a nonnegative integer");
    }
    c.seed = s.get<std::uint64_t>();
  }
  c.steps = read_count(j, "steps", c.steps);
  c.replicas = read_count(j, "replicas", c.replicas);
  if (j.contains("burn_in")) {
    if (!j["burn_in"].is_number_integer() || j["burn_in"].get<std::int64_t>() < 0) {
      config_error("key 'burn_in' must be a nonnegative integer");
    }
    c.burn_in = j["burn_in"].get<std::int64_t>();
  }
  c.tolerance = read_positive(j, "tolerance", c.tolerance);
  c.horizon = read_positive(j, "horizon", c.horizon);
  c.n_paths = read_count(j, "n_paths", c.n_paths);
  c.n_samples = read_count(j, "n_samples", c.n_samples);
  c.n_env = read_count(j, "n_env", c.n_env);
  c.max_terms = read_count(j, "max_terms", c.max_terms);
  c.rel_tol = read_positive(j, "rel_tol", c.rel_tol);
  if (!(c.rel_tol < 1.0)) config_error("key 'rel_tol' must be in (0, 1)");
  c.step_cap = read_count(j, "step_cap", c.step_cap);
  c.generation_cap = read_count(j, "generation_cap", c.generation_cap);
  c.target = read_count(j, "target", c.target);
  if (j.contains("stop")) c.stop = read_stop(j["stop"]);
  if (j.contains("output_path")) {
    if (!j["output_path"].is_string()) config_error("key 'output_path' must be a string");
    c.output_path = j["output_path"].get<std::string>();
  }
  if (j.contains("output_format")) {
    const auto& f = j["output_format"];
    if (f == "json") {
      c.output_format = OutputFormat::Json;
    } else if (f == "csv") {
      c.output_format = OutputFormat::Csv;
    } else {
      config_error("key 'output_format' must be \"json\" or \"csv\"");
    }
  }
  return c;
}

json resolved_config(const RunConfig& c, std::string_view command) {
  json j = to_json(c.law);
  j["seed"] = c.seed;
  j["steps"] = c.steps;
  j["replicas"] = c.replicas;
  j["burn_in"] = c.burn_in;
  j["tolerance"] = c.tolerance;
  j["horizon"] = c.horizon;
  j["n_paths"] = c.n_paths;
  j["n_samples"] = c.n_samples;
  j["n_env"] = c.n_env;
  j["max_terms"] = c.max_terms;
  j["rel_tol"] = c.rel_tol;
  j["step_cap"] = c.step_cap;
  j["generation_cap"] = c.generation_cap;
  j["target"] = c.target;
  j["stop"] = stop_to_json(c.stop);
  j["output_path"] = c.output_path;
  j["output_format"] = c.output_format.value_or(default_format(command)) == OutputFormat::Csv ? "csv" : "json";
  return j;
}

json to_json(const ConditionReport& r) {
  return {{"c1", r.c1}, {"c2", r.c2}, {"c3", r.c3}, {"violations", r.violations}, {"notes", r.notes}};
}

json to_json(const LyapunovEstimate& e) {
  return {{"gamma_top", e.gamma_top},
          {"std_error", e.std_error},
          {"steps_per_replica", e.steps_per_replica},
          {"replicas", e.replicas},
          {"burn_in", e.burn_in}};
}

json to_json(const RecurrenceVerdict& v) {
  return {{"verdict", to_string(v.verdict)}, {"gamma_estimate", to_json(v.gamma_estimate)}, {"tolerance", v.tolerance}};
}

json to_json(const SeriesResult& s) {
  return {{"value", finite_or_null(s.value)},
          {"terms_used", s.terms_used},
          {"tail_estimate", finite_or_null(s.tail_estimate)},
          {"converged", s.converged},
          {"diverging", s.diverging}};
}

json to_json(const VelocityReport& r) {
  return {{"regime", to_string(r.regime)},
          {"speed", r.speed ? json(*r.speed) : json(nullptr)},
          {"es_estimate", finite_or_null(r.es_estimate)},
          {"es_std_error", finite_or_null(r.es_std_error)},
          {"es_diverging", r.es_diverging},
          {"es_display_estimate", finite_or_null(r.es_display_estimate)},
          {"empirical_speed", r.empirical_speed},
          {"empirical_std_error", r.empirical_std_error},
          {"censored_paths", r.censored_paths},
          {"verdict", to_json(r.verdict)}};
}

json to_json(const DecompositionReport& r) {
  return {{"ks_stat", r.ks_stat},
          {"ks_critical", r.ks_critical},
          {"mean_direct", r.mean_direct},
          {"se_direct", r.se_direct},
          {"mean_reconstructed", r.mean_reconstructed},
          {"se_reconstructed", r.se_reconstructed},
          {"censored_direct", r.censored_direct},
          {"censored_reconstructed", r.censored_reconstructed},
          {"pass", r.pass}};
}

std::string flatten_csv(const json& report) {
  std::ostringstream out;
  out << "key,value\n";
  flatten_into(report, "", out);
  return out.str();
}

bool is_command(std::string_view command) {
  return std::find(kCommands.begin(), kCommands.end(), command) != kCommands.end();
}

CommandOutput run_command(std::string_view command, const json& config, unsigned threads, bool dump_paths) {
  CommandOutput out;
  if (!is_command(command)) {
    out.exit_code = kExitValidation;
    out.error = "unknown command '" + std::string(command) + "'";
    return out;
  }
  std::optional<RunConfig> parsed;
  try {
    parsed = parse_config(config);
  } catch (const Error& e) {
    out.exit_code = kExitValidation;
    out.error = e.what();
    return out;
  }
  const auto& c = *parsed;
  const auto format = c.output_format.value_or(default_format(command));

  const auto started = std::chrono::steady_clock::now();
  Rendered rendered;
  try {
    if (command == "check") {
      rendered = cmd_check(c);
    } else if (command == "classify") {
      rendered = cmd_classify(c, threads);
    } else if (command == "passage") {
      rendered = cmd_passage(c, threads, dump_paths);
    } else if (command == "velocity") {
      rendered = cmd_velocity(c, threads);
    } else if (command == "verify-decomposition") {
      rendered = cmd_verify_decomposition(c, threads);
    } else {
      rendered = cmd_simulate(c, threads);
    }
  } catch (const Error& e) {
    const bool validation = e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::InvalidArgument ||
                            e.code() == ErrorCode::InvalidLaw;
    out.exit_code = validation ? kExitValidation : kExitDomain;
    out.error = e.what();
    if (!validation) {
      out.report = {{"command", command}, {"version", kVersion}, {"seed", c.seed},
                    {"config", resolved_config(c, command)}, {"error", e.what()},
                    {"error_code", to_string(e.code())}};
      out.text = format == OutputFormat::Csv ? flatten_csv(out.report) : out.report.dump(2) + "\n";
    }
    return out;
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;

  out.exit_code = rendered.exit_code;
  out.report = {{"command", command},
                {"version", kVersion},
                {"seed", c.seed},
                {"config", resolved_config(c, command)},
                {"duration_seconds", elapsed.count()},
                {"result", rendered.result}};
  out.path_dump = std::move(rendered.path_dump);
  if (command == "simulate" && format == OutputFormat::Csv) {
    out.text = out.path_dump;
  } else {
    out.text = format == OutputFormat::Csv ? flatten_csv(out.report) : out.report.dump(2) + "\n";
  }
  return out;
}

}  // namespace bdpre
