// Command-line front end for the experiment runner.
//
//   dualcs list-experiments [name]       catalog (or one experiment in detail)
//   dualcs validate [opts]               check a config, print the effective form
//   dualcs run [opts]                    run an experiment and write its outputs
//
// Options for validate/run: an optional positional experiment name,
// --config FILE with a JSON config, and any number of --key value (or
// --key=value) overrides, e.g. --master-seed 7 --n 128 --snr_grid "[1,5,20]".
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dualcs/experiments.hpp"

namespace {

namespace ex = dualcs::experiments;

// Turns leftover command-line tokens into (key, value) override pairs plus
// an optional bare experiment name. The name cannot be a CLI11 positional:
// that would steal the value token of the first space-separated override.
bool collect_overrides(const std::vector<std::string>& tokens, std::string& name,
                       std::vector<std::pair<std::string, std::string>>& out) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& tok = tokens[i];
    if (tok.rfind("--", 0) != 0) {
      if (!name.empty()) {
        std::cerr << "config error: unexpected argument '" << tok
                  << "' (experiment already named '" << name << "')\n";
        return false;
      }
      name = tok;
      continue;
    }
    const std::string body = tok.substr(2);
    const std::size_t eq = body.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      continue;
    }
    if (i + 1 >= tokens.size()) {
      std::cerr << "config error: override --" << body << " is missing a value\n";
      return false;
    }
    out.emplace_back(body, tokens[++i]);
  }
  return true;
}

// Builds the config from an optional file, bare name, and overrides.
// Returns false (after printing) on any configuration problem.
bool build_config(const std::string& config_path,
                  const std::vector<std::string>& extras, ex::ExperimentConfig& config) {
  if (!config_path.empty()) {
    std::ifstream file(config_path, std::ios::binary);
    if (!file) {
      std::cerr << "config error: cannot read " << config_path << "\n";
      return false;
    }
    std::ostringstream text;
    text << file.rdbuf();
    try {
      config = ex::config_from_json_text(text.str());
    } catch (const std::exception& e) {
      std::cerr << "config error: " << config_path << ": " << e.what() << "\n";
      return false;
    }
  }
  std::string name;
  std::vector<std::pair<std::string, std::string>> overrides;
  if (!collect_overrides(extras, name, overrides)) return false;
  if (!name.empty()) config.experiment = name;
  for (const auto& [key, value] : overrides) {
    try {
      ex::apply_override(config, key, value);
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return false;
    }
  }
  return true;
}

int cmd_list(const std::string& name) {
  if (!name.empty()) {
    if (!ex::is_experiment(name)) {
      std::cerr << "config error: unknown experiment '" << name << "'\n";
      return 2;
    }
    std::cout << ex::describe_experiment(name);
    return 0;
  }
  for (const std::string& n : ex::experiment_names()) {
    const std::string detail = ex::describe_experiment(n);
    // First two lines of the description: name and summary.
    std::istringstream lines(detail);
    std::string title, summary;
    std::getline(lines, title);
    std::getline(lines, summary);
    std::cout << title << "\n" << summary << "\n";
  }
  std::cout << "\nrun 'dualcs list-experiments <name>' for parameters\n";
  return 0;
}

int cmd_validate(const ex::ExperimentConfig& config) {
  const ex::Diagnostics diag = ex::validate_config(config);
  for (const std::string& n : diag.notices) std::cout << "notice: " << n << "\n";
  for (const std::string& e : diag.errors) std::cout << "config error: " << e << "\n";
  if (!diag.ok()) return 2;
  std::cout << "config ok; effective form:\n" << ex::config_to_json_text(config) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-space compressed sensing experiments"};
  app.require_subcommand(1);

  std::string run_config;
  CLI::App* run = app.add_subcommand("run", "run an experiment and write its outputs");
  run->add_option("--config", run_config, "JSON config file");
  run->allow_extras();

  std::string val_config;
  CLI::App* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("--config", val_config, "JSON config file");
  validate->allow_extras();

  std::string list_name;
  CLI::App* list = app.add_subcommand("list-experiments", "show the experiment catalog");
  list->add_option("experiment", list_name, "describe just this experiment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (list->parsed()) return cmd_list(list_name);

  if (validate->parsed()) {
    ex::ExperimentConfig config;
    if (!build_config(val_config, validate->remaining(), config)) return 2;
    return cmd_validate(config);
  }

  ex::ExperimentConfig config;
  if (!build_config(run_config, run->remaining(), config)) return 2;
  return ex::run_experiment(config, std::cout);
}
