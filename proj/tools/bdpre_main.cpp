// bdpre: run one experiment from a JSON config.
//
//   bdpre <command> <config.json> [--threads N] [--dump-paths FILE]
//
// Commands: check | classify | passage | velocity | verify-decomposition | simulate.
// Exit codes: 0 success, 2 invalid config, 3 domain error.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bdpre/cli.hpp"

namespace {

bool write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return static_cast<bool>(std::cout);
  }
  std::ofstream out(path);
  out << text;
  return static_cast<bool>(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Birth-and-death processes in random environment: simulation and checks"};
  app.set_version_flag("--version", std::string(bdpre::kVersion));
  std::string command;
  std::string config_path;
  unsigned threads = 1;
  std::string dump_path;
  app.add_option("command", command, "check | classify | passage | velocity | verify-decomposition | simulate")
      ->required()
      ->check([](const std::string& c) { return bdpre::is_command(c) ? std::string() : "unknown command " + c; });
  app.add_option("config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  app.add_option("--threads", threads, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  app.add_option("--dump-paths", dump_path, "write simulated paths as CSV (passage, simulate)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : bdpre::kExitValidation;
  }

  nlohmann::json config;
  try {
    std::ifstream in(config_path);
    config = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "bdpre: cannot parse " << config_path << ": " << e.what() << '\n';
    return bdpre::kExitValidation;
  }

  const auto out = bdpre::run_command(command, config, threads, !dump_path.empty());
  if (!out.error.empty()) std::cerr << "bdpre " << command << ": " << out.error << '\n';
  if (!out.text.empty()) {
    std::string target;
    if (out.report.is_object() && out.report.contains("config")) {
      target = out.report.at("config").value("output_path", std::string());
    }
    if (!write_text(target, out.text)) {
      std::cerr << "bdpre: cannot write " << target << '\n';
      return bdpre::kExitDomain;
    }
  }
  if (!dump_path.empty() && !out.path_dump.empty() && !write_text(dump_path, out.path_dump)) {
    std::cerr << "bdpre: cannot write " << dump_path << '\n';
    return bdpre::kExitDomain;
  }
  return out.exit_code;
}
