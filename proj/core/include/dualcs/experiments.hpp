#pragma once

// Reproducible experiment front-end: every study in the library — paired
// single/dual reconstruction statistics, a worked four-step walkthrough,
// noise sweeps, 1-D and 2-D edge programs, phase transitions, scaling fits,
// and null-space-property verification — behind one config schema and one
// output convention.
//
// Output layout: <output_dir>/<experiment>/<master_seed>/ holding
//   manifest.json  — effective config echo, version, wall time, workers
//                    (the only file allowed nondeterministic content)
//   results.csv    — aggregate table, deterministic bytes for a given config
//   trials.jsonl   — one JSON object per trial (or grid point), same promise
// plus experiment-specific CSV/JSON artifacts documented per runner.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace dualcs::experiments {

// One experiment-specific parameter value, as parsed from config JSON or a
// command-line override.
using ParamValue = std::variant<std::int64_t, double, bool, std::string,
                                std::vector<std::int64_t>, std::vector<double>>;

struct ExperimentConfig {
  std::string experiment;
  std::map<std::string, ParamValue> params;
  std::uint64_t master_seed = 0;
  bool master_seed_given = false;  // false adds a defaulting notice
  std::string output_dir = "out";
  int trials = 0;   // 0 = experiment default; otherwise the primary trial knob
  int workers = 0;  // 0 = DUALCS_WORKERS env var, else hardware concurrency
};

struct Diagnostics {
  std::vector<std::string> errors;   // any entry makes the config unrunnable
  std::vector<std::string> notices;  // informational (e.g. seed defaulting)

  bool ok() const { return errors.empty(); }
};

// Names of all runnable experiments, in catalog order.
std::vector<std::string> experiment_names();
bool is_experiment(const std::string& name);

// Multi-line human-readable description: summary, default trial count, and
// each parameter with type, default, and range. Throws on unknown names.
std::string describe_experiment(const std::string& name);

// Parses a config JSON object:
//   {"experiment": "...", "master_seed": 0, "output_dir": "out",
//    "trials": 100, "workers": 2, "params": {...}}
// Unknown top-level keys are carried into params (so --key value overrides
// and flat config files both work); schema validation decides whether they
// are meaningful. Throws std::runtime_error on malformed JSON or values
// that fit no ParamValue alternative.
ExperimentConfig config_from_json_text(const std::string& text);

// Applies one command-line override. Top-level keys (experiment,
// master_seed, output_dir, trials, workers; hyphens and underscores both
// accepted) set the corresponding field; anything else lands in params,
// parsed as JSON when possible and kept as a string otherwise.
void apply_override(ExperimentConfig& config, const std::string& key,
                    const std::string& value);

// Effective-config echo (defaults applied, schema key order) as a JSON
// object string; this is what the manifest embeds, so a published directory
// is regenerable from its manifest alone.
std::string config_to_json_text(const ExperimentConfig& config);

// Schema check without execution: unknown keys, type mismatches, range and
// cross-field violations as errors; defaulting behavior as notices.
Diagnostics validate_config(const ExperimentConfig& config);

// Validates, resolves defaults, runs, and writes the output directory.
// Progress and diagnostics go to `log` (never into result files). Returns
// 0 on success, 2 on config errors, 3 on runtime failure.
int run_experiment(const ExperimentConfig& config, std::ostream& log);

}  // namespace dualcs::experiments
