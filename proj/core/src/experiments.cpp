#include "dualcs/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "dualcs/analysis.hpp"
#include "dualcs/bpsolver.hpp"
#include "dualcs/edges.hpp"
#include "dualcs/image.hpp"
#include "dualcs/lp.hpp"
#include "dualcs/nsp.hpp"
#include "dualcs/pipeline.hpp"
#include "dualcs/rng.hpp"
#include "dualcs/sampling.hpp"
#include "dualcs/signals.hpp"

#ifndef DUALCS_VERSION_STRING
#define DUALCS_VERSION_STRING "v0.0.0-local"
#endif

namespace dualcs::experiments {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Parameter schema machinery
// ---------------------------------------------------------------------------

enum class Kind { Int, Real, Bool, IntList, RealList };

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Int: return "integer";
    case Kind::Real: return "real";
    case Kind::Bool: return "boolean";
    case Kind::IntList: return "integer list";
    case Kind::RealList: return "real list";
  }
  return "?";
}

struct ParamSpec {
  std::string key;
  Kind kind = Kind::Int;
  ParamValue def;
  double lo = -1e300;  // scalar or element range; ignored for Bool
  double hi = 1e300;
  std::string help;
};

struct RunInput;

struct ExperimentDef {
  std::string name;
  std::string summary;
  int default_trials = 1;
  std::vector<ParamSpec> params;
  void (*run)(const RunInput&) = nullptr;
  void (*extra_validate)(const RunInput&, Diagnostics&) = nullptr;
};

// Resolved, validated inputs handed to a runner.
struct RunInput {
  const ExperimentConfig* config = nullptr;
  const ExperimentDef* def = nullptr;
  std::map<std::string, ParamValue> params;  // defaults overlaid with config
  int trials = 0;
  int workers = 1;
  fs::path dir;
  std::ostream* log = nullptr;

  std::int64_t geti(const std::string& key) const {
    return std::get<std::int64_t>(params.at(key));
  }
  double getd(const std::string& key) const {
    const ParamValue& v = params.at(key);
    if (std::holds_alternative<std::int64_t>(v))
      return static_cast<double>(std::get<std::int64_t>(v));
    return std::get<double>(v);
  }
  bool getb(const std::string& key) const { return std::get<bool>(params.at(key)); }
  std::vector<double> get_real_list(const std::string& key) const {
    const ParamValue& v = params.at(key);
    if (std::holds_alternative<std::vector<double>>(v))
      return std::get<std::vector<double>>(v);
    std::vector<double> out;
    for (std::int64_t x : std::get<std::vector<std::int64_t>>(v))
      out.push_back(static_cast<double>(x));
    return out;
  }
};

const std::vector<ExperimentDef>& catalog();

const ExperimentDef* find_experiment(const std::string& name) {
  for (const ExperimentDef& def : catalog())
    if (def.name == name) return &def;
  return nullptr;
}

std::string param_value_repr(const ParamValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(x);
        if constexpr (std::is_same_v<T, double>) return format_double(x);
        if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
        if constexpr (std::is_same_v<T, std::string>) return "\"" + x + "\"";
        if constexpr (std::is_same_v<T, std::vector<std::int64_t>>) {
          std::string s = "[";
          for (std::size_t i = 0; i < x.size(); ++i)
            s += (i ? "," : "") + std::to_string(x[i]);
          return s + "]";
        }
        if constexpr (std::is_same_v<T, std::vector<double>>) {
          std::string s = "[";
          for (std::size_t i = 0; i < x.size(); ++i)
            s += (i ? "," : "") + format_double(x[i]);
          return s + "]";
        }
      },
      v);
}

ordered_json param_value_to_json(const ParamValue& v) {
  return std::visit([](const auto& x) { return ordered_json(x); }, v);
}

// Checks one provided value against its spec; on success stores the
// (possibly coerced) value into `out`.
bool check_param(const ParamSpec& spec, const ParamValue& given, ParamValue& out,
                 std::string& error) {
  const auto range_ok = [&](double x) { return x >= spec.lo && x <= spec.hi; };
  const auto range_msg = [&](double x) {
    std::ostringstream os;
    os << "value " << format_double(x) << " for '" << spec.key
       << "' outside [" << format_double(spec.lo) << ", "
       << format_double(spec.hi) << "]";
    return os.str();
  };
  switch (spec.kind) {
    case Kind::Int: {
      if (!std::holds_alternative<std::int64_t>(given)) {
        error = "'" + spec.key + "' must be an integer";
        return false;
      }
      const auto x = std::get<std::int64_t>(given);
      if (!range_ok(static_cast<double>(x))) { error = range_msg(static_cast<double>(x)); return false; }
      out = x;
      return true;
    }
    case Kind::Real: {
      double x = 0.0;
      if (std::holds_alternative<std::int64_t>(given))
        x = static_cast<double>(std::get<std::int64_t>(given));
      else if (std::holds_alternative<double>(given))
        x = std::get<double>(given);
      else {
        error = "'" + spec.key + "' must be a number";
        return false;
      }
      if (!std::isfinite(x)) { error = "'" + spec.key + "' must be finite"; return false; }
      if (!range_ok(x)) { error = range_msg(x); return false; }
      out = x;
      return true;
    }
    case Kind::Bool: {
      if (!std::holds_alternative<bool>(given)) {
        error = "'" + spec.key + "' must be a boolean";
        return false;
      }
      out = given;
      return true;
    }
    case Kind::IntList: {
      if (!std::holds_alternative<std::vector<std::int64_t>>(given)) {
        error = "'" + spec.key + "' must be a list of integers";
        return false;
      }
      for (std::int64_t x : std::get<std::vector<std::int64_t>>(given))
        if (!range_ok(static_cast<double>(x))) { error = range_msg(static_cast<double>(x)); return false; }
      out = given;
      return true;
    }
    case Kind::RealList: {
      std::vector<double> xs;
      if (std::holds_alternative<std::vector<double>>(given))
        xs = std::get<std::vector<double>>(given);
      else if (std::holds_alternative<std::vector<std::int64_t>>(given)) {
        for (std::int64_t x : std::get<std::vector<std::int64_t>>(given))
          xs.push_back(static_cast<double>(x));
      } else {
        error = "'" + spec.key + "' must be a list of numbers";
        return false;
      }
      for (double x : xs) {
        if (!std::isfinite(x)) { error = "'" + spec.key + "' must hold finite numbers"; return false; }
        if (!range_ok(x)) { error = range_msg(x); return false; }
      }
      out = xs;
      return true;
    }
  }
  error = "unhandled parameter kind";
  return false;
}

int resolve_workers(const ExperimentConfig& config) {
  if (config.workers > 0) return config.workers;
  if (const char* env = std::getenv("DUALCS_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Defaults overlaid with whatever the config provides. Invalid provided
// values keep their default here; validate_config reports them.
std::map<std::string, ParamValue> resolve_params(const ExperimentDef& def,
                                                 const ExperimentConfig& config) {
  std::map<std::string, ParamValue> out;
  for (const ParamSpec& spec : def.params) {
    out[spec.key] = spec.def;
    const auto it = config.params.find(spec.key);
    if (it != config.params.end()) {
      ParamValue coerced;
      std::string error;
      if (check_param(spec, it->second, coerced, error)) out[spec.key] = coerced;
    }
  }
  return out;
}

RunInput make_input(const ExperimentConfig& config, const ExperimentDef& def,
                    std::ostream& log) {
  RunInput in;
  in.config = &config;
  in.def = &def;
  in.params = resolve_params(def, config);
  in.trials = config.trials > 0 ? config.trials : def.default_trials;
  in.workers = resolve_workers(config);
  in.log = &log;
  return in;
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_json_file(const fs::path& path, const ordered_json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += "\n";
  }
  return out;
}

std::string cell(double v) { return format_double(v); }
std::string cell(int v) { return std::to_string(v); }
std::string cell(std::int64_t v) { return std::to_string(v); }

std::string jsonl_from(const analysis::TrialBatch& batch, int index_offset = 0) {
  std::string out;
  for (const analysis::TrialRecord& rec : batch.trials) {
    analysis::TrialRecord shifted = rec;
    shifted.index += index_offset;
    out += analysis::trial_to_json(shifted);
    out += "\n";
  }
  return out;
}

// Mean and standard error of the mean.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  int count = 0;
};

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe out;
  out.count = static_cast<int>(xs.size());
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    const double var = ss / static_cast<double>(xs.size() - 1);
    out.se = std::sqrt(var / static_cast<double>(xs.size()));
  }
  return out;
}

double proportion_se(double p, int n) {
  return n > 0 ? std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n)) : 0.0;
}

std::string jnum(double v) { return nlohmann::json(v).dump(); }
std::string jint(std::int64_t v) { return nlohmann::json(v).dump(); }
std::string jstr(const std::string& s) { return nlohmann::json(s).dump(); }
std::string jbool(bool b) { return b ? "true" : "false"; }

double extra_number(const analysis::TrialRecord& rec, const std::string& key) {
  for (const auto& [k, raw] : rec.extras)
    if (k == key) return nlohmann::json::parse(raw).get<double>();
  throw std::runtime_error("trial record lacks extra '" + key + "'");
}

bool extra_flag(const analysis::TrialRecord& rec, const std::string& key) {
  for (const auto& [k, raw] : rec.extras)
    if (k == key) return nlohmann::json::parse(raw).get<bool>();
  throw std::runtime_error("trial record lacks extra '" + key + "'");
}

// Aggregate over one reconstruction arm of a batch.
struct ArmAgg {
  std::vector<double> fidelity;
  int exact = 0;
  int failed = 0;

  void add(double fid, bool is_exact) {
    fidelity.push_back(fid);
    if (is_exact) ++exact;
  }
  MeanSe fid_stats() const { return mean_se(fidelity); }
  double p_exact() const {
    return fidelity.empty() ? 0.0 : static_cast<double>(exact) / static_cast<double>(fidelity.size());
  }
};

void write_histogram(const fs::path& path, const std::vector<double>& values, int bins) {
  std::vector<std::vector<std::string>> rows;
  std::vector<int> counts(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    int b = static_cast<int>(std::floor((v + 1.0) / 2.0 * bins));
    b = std::clamp(b, 0, bins - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  for (int b = 0; b < bins; ++b) {
    const double lo = -1.0 + 2.0 * b / bins;
    const double hi = -1.0 + 2.0 * (b + 1) / bins;
    rows.push_back({cell(lo), cell(hi), cell(counts[static_cast<std::size_t>(b)])});
  }
  write_text_file(path, csv_table({"bin_low", "bin_high", "count"}, rows));
}

// ---------------------------------------------------------------------------
// Shared trial bodies
// ---------------------------------------------------------------------------

// One paired single/dual reconstruction trial on a fresh sparse image,
// optionally with additive pixel noise mapped from a target SNR.
analysis::TrialRecord paired_cs_trial(std::uint64_t seed, int n, int s, int m_single,
                                      int m_k, int m_x, double snr,
                                      double accept_sigma_factor) {
  signals::SparseSpec sig;
  sig.n = n;
  sig.s = s;
  sig.seed = rng::child_seed(seed, 1);
  const Image truth = signals::gen_sparse_image(sig);
  const std::uint64_t plan_seed = rng::child_seed(seed, 2);

  double sigma = 0.0;
  Image target = truth;
  if (snr > 0.0) {
    sigma = signals::sigma_for_snr(truth, snr);
    signals::NoiseSpec noise;
    noise.sigma = sigma;
    noise.seed = rng::child_seed(seed, 3);
    target = signals::add_noise(truth, noise);
  }

  const auto [recon_single, res_single] = pipeline::run_single_cs(target, m_single, plan_seed);

  pipeline::DualPlanSpec spec;
  spec.m_k = m_k;
  spec.m_x = m_x;
  spec.seed = plan_seed;
  if (sigma > 0.0) spec.accept_threshold = accept_sigma_factor * sigma;
  const auto [recon_dual, trace] = pipeline::run_dual_cs(target, spec);

  const double fid_single = analysis::fidelity(truth, recon_single);
  const bool exact_single = analysis::exact_recovery(truth, recon_single);

  analysis::TrialRecord rec;
  rec.params = {n, s, m_k, m_x, sigma};
  rec.fidelity = analysis::fidelity(truth, recon_dual);
  rec.exact = analysis::exact_recovery(truth, recon_dual);
  rec.alpha_x = trace.alpha_x;
  rec.extras.emplace_back("m_single", jint(m_single));
  rec.extras.emplace_back("fidelity_single", jnum(fid_single));
  rec.extras.emplace_back("exact_single", jbool(exact_single));
  rec.extras.emplace_back("status_single", jstr(lp::to_string(res_single.status)));
  rec.extras.emplace_back("status_intermediate", jstr(lp::to_string(trace.intermediate_status)));
  rec.extras.emplace_back("status_final", jstr(lp::to_string(trace.final_status)));
  if (snr > 0.0) rec.extras.emplace_back("snr", jnum(snr));
  return rec;
}

void accumulate_arms(const analysis::TrialBatch& batch, ArmAgg& single, ArmAgg& dual) {
  for (const analysis::TrialRecord& rec : batch.trials) {
    if (rec.failed) {
      ++single.failed;
      ++dual.failed;
      continue;
    }
    dual.add(rec.fidelity, rec.exact);
    single.add(extra_number(rec, "fidelity_single"), extra_flag(rec, "exact_single"));
  }
}

// ---------------------------------------------------------------------------
// fig1_histograms
// ---------------------------------------------------------------------------

void run_fig1(const RunInput& in) {
  const int n = static_cast<int>(in.geti("n"));
  const int s = static_cast<int>(in.geti("s"));
  const int m_single = static_cast<int>(in.geti("m_single"));
  const int m_k = static_cast<int>(in.geti("m_k"));
  const int m_x = static_cast<int>(in.geti("m_x"));
  const int bins = static_cast<int>(in.geti("histogram_bins"));

  const auto fn = [&](std::uint64_t seed, int) {
    return paired_cs_trial(seed, n, s, m_single, m_k, m_x, 0.0, 0.0);
  };
  *in.log << "[" << in.def->name << "] running " << in.trials << " paired trials\n";
  const analysis::TrialBatch batch =
      analysis::run_batch(in.def->name, in.trials, in.config->master_seed, fn, in.workers);
  write_text_file(in.dir / "trials.jsonl", jsonl_from(batch));

  ArmAgg single, dual;
  accumulate_arms(batch, single, dual);
  write_histogram(in.dir / "histogram_single.csv", single.fidelity, bins);
  write_histogram(in.dir / "histogram_dual.csv", dual.fidelity, bins);

  const auto row = [&](const std::string& arm, int arm_m_k, int arm_m_x, const ArmAgg& agg) {
    const MeanSe f = agg.fid_stats();
    const double p = agg.p_exact();
    return std::vector<std::string>{arm,
                                    cell(n),
                                    cell(s),
                                    cell(arm_m_k + arm_m_x),
                                    cell(arm_m_k),
                                    cell(arm_m_x),
                                    cell(f.count),
                                    cell(agg.failed),
                                    cell(f.mean),
                                    cell(f.se),
                                    cell(p),
                                    cell(proportion_se(p, f.count))};
  };
  write_text_file(
      in.dir / "results.csv",
      csv_table({"arm", "n", "s", "m", "m_k", "m_x", "trials", "failed", "mean_fidelity",
                 "fidelity_stderr", "p_exact", "p_exact_stderr"},
                {row("single", m_single, 0, single), row("dual", m_k, m_x, dual)}));
}

void validate_fig1(const RunInput& in, Diagnostics& diag) {
  const auto n = in.geti("n");
  if (in.geti("s") > n) diag.errors.push_back("s exceeds n");
  if (in.geti("m_single") > n) diag.errors.push_back("m_single exceeds n");
  if (in.geti("m_k") + in.geti("m_x") > n) diag.errors.push_back("m_k + m_x exceeds n");
}

// ---------------------------------------------------------------------------
// fig2_walkthrough
// ---------------------------------------------------------------------------

void run_fig2(const RunInput& in) {
  const int n = static_cast<int>(in.geti("n"));
  const int s = static_cast<int>(in.geti("s"));
  const int m_single = static_cast<int>(in.geti("m_single"));
  const int m_k = static_cast<int>(in.geti("m_k"));
  const int m_x = static_cast<int>(in.geti("m_x"));

  const std::uint64_t seed = rng::child_seed(in.config->master_seed, 0);
  signals::SparseSpec sig;
  sig.n = n;
  sig.s = s;
  sig.seed = rng::child_seed(seed, 1);
  const Image truth = signals::gen_sparse_image(sig);
  const std::uint64_t plan_seed = rng::child_seed(seed, 2);

  const auto [recon_single, res_single] = pipeline::run_single_cs(truth, m_single, plan_seed);
  pipeline::DualPlanSpec spec;
  spec.m_k = m_k;
  spec.m_x = m_x;
  spec.seed = plan_seed;
  const auto [recon_dual, trace] = pipeline::run_dual_cs(truth, spec);

  write_image_csv(truth, (in.dir / "truth.csv").string());
  write_image_csv(trace.intermediate, (in.dir / "intermediate.csv").string());
  write_image_csv(recon_dual, (in.dir / "reconstruction_dual.csv").string());
  write_image_csv(recon_single, (in.dir / "reconstruction_single.csv").string());
  write_text_file(in.dir / "trace.json", pipeline::trace_to_json(trace) + "\n");

  const double fid_single = analysis::fidelity(truth, recon_single);
  const double fid_dual = analysis::fidelity(truth, recon_dual);
  const bool exact_single = analysis::exact_recovery(truth, recon_single);
  const bool exact_dual = analysis::exact_recovery(truth, recon_dual);

  analysis::TrialRecord rec;
  rec.index = 0;
  rec.seed = seed;
  rec.params = {n, s, m_k, m_x, 0.0};
  rec.fidelity = fid_dual;
  rec.exact = exact_dual;
  rec.alpha_x = trace.alpha_x;
  rec.extras.emplace_back("m_single", jint(m_single));
  rec.extras.emplace_back("fidelity_single", jnum(fid_single));
  rec.extras.emplace_back("exact_single", jbool(exact_single));
  rec.extras.emplace_back("status_single", jstr(lp::to_string(res_single.status)));
  rec.extras.emplace_back("status_intermediate", jstr(lp::to_string(trace.intermediate_status)));
  rec.extras.emplace_back("status_final", jstr(lp::to_string(trace.final_status)));
  write_text_file(in.dir / "trials.jsonl", analysis::trial_to_json(rec) + "\n");

  write_text_file(
      in.dir / "results.csv",
      csv_table({"arm", "n", "s", "m", "m_k", "m_x", "fidelity", "exact", "t", "s_T", "alpha_x"},
                {{"single", cell(n), cell(s), cell(m_single), cell(m_single), cell(0),
                  cell(fid_single), exact_single ? "1" : "0", "", "", ""},
                 {"dual", cell(n), cell(s), cell(m_k + m_x), cell(m_k), cell(m_x),
                  cell(fid_dual), exact_dual ? "1" : "0", cell(trace.t), cell(trace.s_T),
                  cell(trace.alpha_x)}}));
}

void validate_fig2(const RunInput& in, Diagnostics& diag) {
  validate_fig1(in, diag);
  if (in.trials != 1)
    diag.notices.push_back("fig2_walkthrough always runs exactly one trial; trials ignored");
}

// ---------------------------------------------------------------------------
// fig3_noise_sweep
// ---------------------------------------------------------------------------

void run_fig3(const RunInput& in) {
  const int n = static_cast<int>(in.geti("n"));
  const int s = static_cast<int>(in.geti("s"));
  const int m_single = static_cast<int>(in.geti("m_single"));
  const int m_k = static_cast<int>(in.geti("m_k"));
  const int m_x = static_cast<int>(in.geti("m_x"));
  const double factor = in.getd("accept_sigma_factor");
  const std::vector<double> snr_grid = in.get_real_list("snr_grid");

  std::string jsonl;
  std::vector<std::vector<std::string>> rows;
  for (std::size_t g = 0; g < snr_grid.size(); ++g) {
    const double snr = snr_grid[g];
    *in.log << "[" << in.def->name << "] snr " << snr << " (" << (g + 1) << "/"
            << snr_grid.size() << ")\n";
    const std::uint64_t point_master =
        rng::child_seed(in.config->master_seed, static_cast<std::uint64_t>(g));
    const auto fn = [&](std::uint64_t seed, int) {
      return paired_cs_trial(seed, n, s, m_single, m_k, m_x, snr, factor);
    };
    const analysis::TrialBatch batch =
        analysis::run_batch(in.def->name, in.trials, point_master, fn, in.workers);
    jsonl += jsonl_from(batch, static_cast<int>(g) * in.trials);

    ArmAgg single, dual;
    accumulate_arms(batch, single, dual);
    const auto row = [&](const std::string& arm, const ArmAgg& agg) {
      const MeanSe f = agg.fid_stats();
      const double p = agg.p_exact();
      return std::vector<std::string>{cell(snr),     arm,          cell(f.count),
                                      cell(agg.failed), cell(f.mean), cell(f.se),
                                      cell(p),       cell(proportion_se(p, f.count))};
    };
    rows.push_back(row("single", single));
    rows.push_back(row("dual", dual));
  }
  write_text_file(in.dir / "trials.jsonl", jsonl);
  write_text_file(in.dir / "results.csv",
                  csv_table({"snr", "arm", "trials", "failed", "mean_fidelity",
                             "fidelity_stderr", "p_exact", "p_exact_stderr"},
                            rows));
}

void validate_fig3(const RunInput& in, Diagnostics& diag) {
  validate_fig1(in, diag);
  if (in.geti("s") < 1) diag.errors.push_back("fig3 needs s >= 1 (SNR is relative to peaks)");
}

// ---------------------------------------------------------------------------
// fig4_edges
// ---------------------------------------------------------------------------

void run_fig4(const RunInput& in) {
  const int size = static_cast<int>(in.geti("size"));
  const int m_k = static_cast<int>(in.geti("m_k"));
  const int m_fd = static_cast<int>(in.geti("m_fd"));
  const double g0 = in.getd("g0");
  const int n = size * size;
  const int m_total = m_k + m_fd;

  const Image truth = signals::gen_shepp_logan(size);
  const edges::EdgeMap truth_edges = edges::extract_edges(truth, g0);
  const int s_edges = truth_edges.edge_count();

  struct FirstRun {
    Image dual_img, single_img;
    edges::EdgeMap dual_map, single_map;
  };
  std::mutex first_mu;
  std::optional<FirstRun> first;

  const auto fn = [&](std::uint64_t seed, int idx) {
    const std::uint64_t plan_seed = rng::child_seed(seed, 2);
    edges::EdgeBudget budget;
    budget.m_k = m_k;
    budget.m_fd = m_fd;
    auto [dual_img, dual_map, trace] = edges::run_dual_edge(truth, budget, g0, plan_seed);
    auto [single_img, single_map, single_status] =
        edges::run_single_edge(truth, m_total, g0, plan_seed);
    const edges::EdgeScores sc_dual = edges::edge_scores(dual_map, truth_edges);
    const edges::EdgeScores sc_single = edges::edge_scores(single_map, truth_edges);

    analysis::TrialRecord rec;
    rec.params = {n, s_edges, m_k, m_fd, 0.0};
    rec.fidelity = analysis::fidelity(truth, dual_img);
    rec.correlation = sc_dual.correlation;
    rec.exact = analysis::exact_recovery(truth, dual_img);
    rec.alpha_x = trace.alpha_x;
    rec.extras.emplace_back("m_single", jint(m_total));
    rec.extras.emplace_back("image_fidelity_single", jnum(analysis::fidelity(truth, single_img)));
    rec.extras.emplace_back("edge_correlation_single", jnum(sc_single.correlation));
    rec.extras.emplace_back("edge_correlation_dual", jnum(sc_dual.correlation));
    rec.extras.emplace_back("tp_dual", jint(sc_dual.true_positive));
    rec.extras.emplace_back("fp_dual", jint(sc_dual.false_positive));
    rec.extras.emplace_back("tp_single", jint(sc_single.true_positive));
    rec.extras.emplace_back("fp_single", jint(sc_single.false_positive));
    rec.extras.emplace_back("status_single", jstr(lp::to_string(single_status)));
    rec.extras.emplace_back("status_dual_prelim", jstr(lp::to_string(trace.intermediate_status)));
    rec.extras.emplace_back("status_dual_final", jstr(lp::to_string(trace.final_status)));
    if (idx == 0) {
      std::lock_guard<std::mutex> lock(first_mu);
      first = FirstRun{dual_img, single_img, dual_map, single_map};
    }
    return rec;
  };

  *in.log << "[" << in.def->name << "] " << in.trials << " seeds on a " << size << "x" << size
          << " phantom (m_k=" << m_k << ", m_fd=" << m_fd << ")\n";
  const analysis::TrialBatch batch =
      analysis::run_batch(in.def->name, in.trials, in.config->master_seed, fn, in.workers);
  write_text_file(in.dir / "trials.jsonl", jsonl_from(batch));

  // Aggregates per arm.
  std::vector<double> fid_d, fid_s, corr_d, corr_s, tp_d, fp_d, tp_s, fp_s;
  int failed = 0;
  for (const analysis::TrialRecord& rec : batch.trials) {
    if (rec.failed) {
      ++failed;
      continue;
    }
    fid_d.push_back(rec.fidelity);
    corr_d.push_back(extra_number(rec, "edge_correlation_dual"));
    fid_s.push_back(extra_number(rec, "image_fidelity_single"));
    corr_s.push_back(extra_number(rec, "edge_correlation_single"));
    tp_d.push_back(extra_number(rec, "tp_dual"));
    fp_d.push_back(extra_number(rec, "fp_dual"));
    tp_s.push_back(extra_number(rec, "tp_single"));
    fp_s.push_back(extra_number(rec, "fp_single"));
  }
  const auto row = [&](const std::string& arm, int arm_m_k, int arm_m_fd,
                       const std::vector<double>& fid, const std::vector<double>& corr,
                       const std::vector<double>& tp, const std::vector<double>& fp) {
    const MeanSe f = mean_se(fid);
    const MeanSe c = mean_se(corr);
    return std::vector<std::string>{arm,
                                    cell(size),
                                    cell(arm_m_k),
                                    cell(arm_m_fd),
                                    cell(m_total),
                                    cell(f.count),
                                    cell(failed),
                                    cell(f.mean),
                                    cell(f.se),
                                    cell(c.mean),
                                    cell(c.se),
                                    cell(mean_se(tp).mean),
                                    cell(mean_se(fp).mean)};
  };
  write_text_file(in.dir / "results.csv",
                  csv_table({"arm", "size", "m_k", "m_fd", "m", "trials", "failed",
                             "mean_image_fidelity", "image_fidelity_stderr",
                             "mean_edge_correlation", "edge_correlation_stderr",
                             "mean_true_positive", "mean_false_positive"},
                            {row("single", m_total, 0, fid_s, corr_s, tp_s, fp_s),
                             row("dual", m_k, m_fd, fid_d, corr_d, tp_d, fp_d)}));

  write_image_csv(truth, (in.dir / "truth.csv").string());
  const auto dump_map = [&](const edges::EdgeMap& map, const std::string& stem) {
    write_image_csv(edges::edge_grid_image(map, 1),
                           (in.dir / (stem + "_horizontal.csv")).string());
    write_image_csv(edges::edge_grid_image(map, 0),
                           (in.dir / (stem + "_vertical.csv")).string());
  };
  dump_map(truth_edges, "edges_truth");
  if (first) {
    write_image_csv(first->dual_img, (in.dir / "reconstruction_dual.csv").string());
    write_image_csv(first->single_img, (in.dir / "reconstruction_single.csv").string());
    dump_map(first->dual_map, "edges_dual");
    dump_map(first->single_map, "edges_single");
  }

  ordered_json summary;
  summary["size"] = size;
  summary["g0"] = g0;
  summary["truth_edge_count"] = s_edges;
  summary["trials"] = static_cast<int>(fid_d.size());
  summary["failed"] = failed;
  summary["mean_image_fidelity_dual"] = mean_se(fid_d).mean;
  summary["mean_image_fidelity_single"] = mean_se(fid_s).mean;
  summary["mean_edge_correlation_dual"] = mean_se(corr_d).mean;
  summary["mean_edge_correlation_single"] = mean_se(corr_s).mean;
  summary["mean_true_positive_dual"] = mean_se(tp_d).mean;
  summary["mean_false_positive_dual"] = mean_se(fp_d).mean;
  summary["mean_true_positive_single"] = mean_se(tp_s).mean;
  summary["mean_false_positive_single"] = mean_se(fp_s).mean;
  write_json_file(in.dir / "summary.json", summary);
}

void validate_fig4(const RunInput& in, Diagnostics& diag) {
  const auto size = in.geti("size");
  const auto n = size * size;
  if (in.geti("m_k") > n) diag.errors.push_back("m_k exceeds pixel count");
  if (in.geti("m_fd") > 2 * n) diag.errors.push_back("m_fd exceeds pair count (2*size^2)");
}

// ---------------------------------------------------------------------------
// phase_transition
// ---------------------------------------------------------------------------

std::vector<int> m_k_grid_from(const RunInput& in) {
  std::vector<int> grid;
  const auto lo = in.geti("m_k_min");
  const auto hi = in.geti("m_k_max");
  const auto step = in.geti("m_k_step");
  for (auto m = lo; m <= hi; m += step) grid.push_back(static_cast<int>(m));
  return grid;
}

analysis::PhaseOptions phase_options_from(const RunInput& in) {
  analysis::PhaseOptions opt;
  opt.trials_per_point = in.trials;
  opt.target = in.getd("target");
  opt.post_select_found = static_cast<int>(in.geti("post_select_found"));
  opt.max_raw_factor = static_cast<int>(in.geti("max_raw_factor"));
  opt.early_stop = in.getb("early_stop");
  opt.futility_stop = in.getb("futility_stop");
  opt.workers = in.workers;
  return opt;
}

void write_phase_outputs(const RunInput& in, const analysis::PhaseCurve& curve, int n) {
  std::vector<std::vector<std::string>> rows;
  std::string jsonl;
  for (std::size_t i = 0; i < curve.curve.size(); ++i) {
    const analysis::PhaseGridEntry& e = curve.curve[i];
    rows.push_back({cell(e.m_k), cell(e.p_exact), cell(e.std_err), cell(e.trials),
                    cell(e.raw_trials)});
    ordered_json line;
    line["index"] = static_cast<int>(i);
    line["seed"] = rng::child_seed(in.config->master_seed, static_cast<std::uint64_t>(i));
    line["m_k"] = e.m_k;
    line["p_exact"] = e.p_exact;
    line["std_err"] = e.std_err;
    line["trials"] = e.trials;
    line["raw_trials"] = e.raw_trials;
    jsonl += line.dump() + "\n";
  }
  write_text_file(in.dir / "results.csv",
                  csv_table({"m_k", "p_exact", "std_err", "trials", "raw_trials"}, rows));
  write_text_file(in.dir / "trials.jsonl", jsonl);

  ordered_json pt;
  pt["n"] = n;
  pt["s"] = curve.point.s;
  pt["m_x"] = curve.point.m_x;
  pt["alpha_m_x"] = curve.point.alpha_m_x;
  pt["m_k_star"] = curve.point.m_k_star;
  pt["probability_target"] = curve.point.probability_target;
  pt["reached"] = curve.reached;
  write_json_file(in.dir / "phase_point.json", pt);
}

void run_phase(const RunInput& in) {
  const int n = static_cast<int>(in.geti("n"));
  const int s = static_cast<int>(in.geti("s"));
  const int m_x = static_cast<int>(in.geti("m_x"));
  const std::vector<int> grid = m_k_grid_from(in);
  *in.log << "[" << in.def->name << "] n=" << n << " s=" << s << " m_x=" << m_x << " over "
          << grid.size() << " grid points, " << in.trials << " trials each\n";
  const analysis::PhaseCurve curve =
      analysis::phase_transition(n, s, m_x, grid, in.config->master_seed, phase_options_from(in));
  write_phase_outputs(in, curve, n);
}

void validate_phase(const RunInput& in, Diagnostics& diag) {
  const auto n = in.geti("n");
  if (in.geti("s") > n) diag.errors.push_back("s exceeds n");
  if (in.geti("m_k_min") > in.geti("m_k_max"))
    diag.errors.push_back("m_k_min exceeds m_k_max");
  if (in.geti("m_k_max") + in.geti("m_x") > n)
    diag.errors.push_back("m_k_max + m_x exceeds n");
  const auto ps = in.geti("post_select_found");
  if (ps >= 0 && ps > std::min(in.geti("s"), in.geti("m_x")))
    diag.errors.push_back("post_select_found exceeds min(s, m_x)");
  if (in.trials < 1) diag.errors.push_back("trials must be positive");
}

// ---------------------------------------------------------------------------
// scaling_fit
// ---------------------------------------------------------------------------

// Finds the smallest m_k with P[exact] >= target by scanning DOWN from
// m_k_max: grid points above the transition are cheap (high post-selection
// acceptance), and the scan stops at the first sub-target point, so the
// deep sub-transition region — where post-selection rejects almost every
// draw — is visited at most once.
struct DescendingScan {
  bool reached = false;
  int m_k_star = -1;
  double alpha_m_x = 0.0;
  std::vector<analysis::PhaseGridEntry> visited;  // ascending m_k
};

DescendingScan descending_m_k_scan(int n, int s, int m_x, const std::vector<int>& grid,
                                   std::uint64_t curve_master,
                                   const analysis::PhaseOptions& base_opt) {
  DescendingScan out;
  analysis::PhaseOptions opt = base_opt;
  opt.early_stop = false;
  for (std::size_t pos = grid.size(); pos-- > 0;) {
    const int m_k = grid[pos];
    const std::uint64_t point_master =
        rng::child_seed(curve_master, static_cast<std::uint64_t>(pos));
    const analysis::PhaseCurve one =
        analysis::phase_transition(n, s, m_x, {m_k}, point_master, opt);
    out.visited.insert(out.visited.begin(), one.curve.begin(), one.curve.end());
    if (one.reached) {
      out.reached = true;
      out.m_k_star = m_k;
      out.alpha_m_x = one.point.alpha_m_x;
    } else {
      break;  // first point below target ends the scan
    }
  }
  return out;
}

void run_scaling(const RunInput& in) {
  const int n = static_cast<int>(in.geti("n"));
  const int s_min = static_cast<int>(in.geti("s_min"));
  const int s_max = static_cast<int>(in.geti("s_max"));
  const int q_min = static_cast<int>(in.geti("q_min"));
  const int q_max = static_cast<int>(in.geti("q_max"));
  const std::vector<int> grid = m_k_grid_from(in);

  analysis::PhaseOptions opt;
  opt.trials_per_point = in.trials;
  opt.target = in.getd("target");
  opt.max_raw_factor = static_cast<int>(in.geti("max_raw_factor"));
  opt.futility_stop = true;
  opt.workers = in.workers;

  std::vector<analysis::PhasePoint> points;
  std::vector<std::vector<std::string>> rows;
  std::string jsonl;
  int counter = 0;
  for (int s = s_min; s <= s_max; ++s) {
    for (int q = q_min; q <= q_max; ++q) {
      const std::uint64_t curve_master =
          rng::child_seed(in.config->master_seed, static_cast<std::uint64_t>(counter));
      analysis::PhaseOptions point_opt = opt;
      point_opt.post_select_found = q > 0 ? q : -1;
      const DescendingScan scan = descending_m_k_scan(n, s, q, grid, curve_master, point_opt);
      *in.log << "[" << in.def->name << "] s=" << s << " alpha_m_x=" << q << " -> m_k_star="
              << scan.m_k_star << (scan.reached ? "" : " (unreached)") << "\n";

      analysis::PhasePoint pt;
      pt.s = s;
      pt.m_x = q;
      pt.alpha_m_x = static_cast<double>(q);
      pt.m_k_star = scan.m_k_star;
      pt.probability_target = opt.target;
      if (scan.reached) points.push_back(pt);

      rows.push_back({cell(s), cell(q), cell(static_cast<double>(q)), cell(scan.m_k_star),
                      scan.reached ? "1" : "0"});
      ordered_json line;
      line["index"] = counter;
      line["seed"] = curve_master;
      line["s"] = s;
      line["m_x"] = q;
      line["alpha_m_x"] = static_cast<double>(q);
      line["m_k_star"] = scan.m_k_star;
      line["reached"] = scan.reached;
      jsonl += line.dump() + "\n";
      ++counter;
    }
  }
  write_text_file(in.dir / "results.csv",
                  csv_table({"s", "m_x", "alpha_m_x", "m_k_star", "reached"}, rows));
  write_text_file(in.dir / "trials.jsonl", jsonl);

  ordered_json fit;
  fit["n"] = n;
  fit["points_used"] = static_cast<int>(points.size());
  fit["points_total"] = counter;
  if (points.size() >= 4) {
    const analysis::ScalingFit sf = analysis::fit_scaling(points, n);
    fit["fitted"] = true;
    fit["c"] = sf.c;
    fit["r_squared"] = sf.r_squared;
  } else {
    fit["fitted"] = false;
    fit["reason"] = "fewer than 4 grid points reached the probability target";
    *in.log << "[" << in.def->name << "] fit skipped: only " << points.size()
            << " reached points\n";
  }
  write_json_file(in.dir / "fit.json", fit);
}

void validate_scaling(const RunInput& in, Diagnostics& diag) {
  const auto n = in.geti("n");
  if (in.geti("s_min") > in.geti("s_max")) diag.errors.push_back("s_min exceeds s_max");
  if (in.geti("q_min") > in.geti("q_max")) diag.errors.push_back("q_min exceeds q_max");
  if (in.geti("q_max") > in.geti("s_min"))
    diag.errors.push_back("q_max exceeds s_min (post-selection needs alpha_m_x <= s)");
  if (in.geti("m_k_min") > in.geti("m_k_max"))
    diag.errors.push_back("m_k_min exceeds m_k_max");
  if (in.geti("m_k_max") + in.geti("q_max") > n)
    diag.errors.push_back("m_k_max + m_x exceeds n");
  if (in.geti("s_max") > n) diag.errors.push_back("s_max exceeds n");
}

// ---------------------------------------------------------------------------
// nsp_check
// ---------------------------------------------------------------------------

void run_nsp(const RunInput& in) {
  const int q = static_cast<int>(in.geti("q"));
  const int k_rows = static_cast<int>(in.geti("k_rows"));
  const int t = static_cast<int>(in.geti("t"));
  const int L = static_cast<int>(in.geti("L"));
  const int signals_per_system = static_cast<int>(in.geti("signals"));
  const int max_attempts = static_cast<int>(in.geti("max_attempts"));
  const int wanted = in.trials;

  std::vector<std::vector<std::string>> rows;
  std::string jsonl;
  int found = 0;
  int attempt = 0;
  int total_counterexamples = 0;
  for (; attempt < max_attempts && found < wanted; ++attempt) {
    const std::uint64_t seed =
        rng::child_seed(in.config->master_seed, static_cast<std::uint64_t>(attempt));
    const sampling::SamplingPlan plan =
        sampling::random_plan(sampling::Space::KSpace, q, k_rows, rng::child_seed(seed, 2));
    const sampling::DenseOperator op = sampling::build_operator(plan);
    const auto [a_real, b_zero] = solver::to_real_system(
        op.entries, Eigen::VectorXcd::Zero(op.entries.rows()));
    static_cast<void>(b_zero);

    const double gamma = analysis::tnsp_gamma(a_real, t, L);
    if (!(gamma < 1.0)) continue;  // rejects infinities too

    const analysis::RecoveryReport report = analysis::verify_exact_recovery_theorem(
        a_real, t, L, signals_per_system, rng::child_seed(seed, 1));
    total_counterexamples += static_cast<int>(report.counterexamples.size());

    rows.push_back({cell(found), cell(attempt), cell(static_cast<int>(a_real.rows())),
                    cell(q), cell(t), cell(L), cell(gamma), cell(report.trials),
                    cell(report.exact),
                    cell(static_cast<int>(report.counterexamples.size()))});
    ordered_json line;
    line["index"] = found;
    line["attempt"] = attempt;
    line["seed"] = seed;
    line["rows"] = static_cast<int>(a_real.rows());
    line["cols"] = q;
    line["t"] = t;
    line["L"] = L;
    line["gamma"] = gamma;
    line["guaranteed"] = report.guaranteed;
    line["signals"] = report.trials;
    line["exact"] = report.exact;
    line["counterexamples"] = report.counterexamples;
    jsonl += line.dump() + "\n";
    ++found;
    *in.log << "[" << in.def->name << "] system " << found << "/" << wanted
            << " gamma=" << gamma << " exact " << report.exact << "/" << report.trials << "\n";
  }
  write_text_file(in.dir / "results.csv",
                  csv_table({"system", "attempt", "rows", "cols", "t", "L", "gamma",
                             "signals", "exact", "counterexamples"},
                            rows));
  write_text_file(in.dir / "trials.jsonl", jsonl);

  ordered_json summary;
  summary["requested_systems"] = wanted;
  summary["found_systems"] = found;
  summary["attempts"] = attempt;
  summary["total_counterexamples"] = total_counterexamples;
  write_json_file(in.dir / "summary.json", summary);

  if (found < wanted) {
    std::ostringstream os;
    os << "only " << found << " of " << wanted << " systems reached gamma < 1 within "
       << max_attempts << " attempts";
    throw std::runtime_error(os.str());
  }
}

void validate_nsp(const RunInput& in, Diagnostics& diag) {
  const auto q = in.geti("q");
  if (in.geti("k_rows") > q) diag.errors.push_back("k_rows exceeds q");
  if (in.geti("t") > q) diag.errors.push_back("t exceeds q");
  if (in.geti("L") > in.geti("t")) diag.errors.push_back("L exceeds t");
}

// ---------------------------------------------------------------------------
// si_fig5_1d_edges
// ---------------------------------------------------------------------------

// Inverts the sparsity bound in its m_k argument by bisection (the bound is
// strictly increasing in m_k on (m_x, n]). Clamps to the domain ends when
// the target sparsity falls outside the attainable range.
double invert_s_bound(double target_s, double m_x, double n, double c0, double alpha_x) {
  double lo = m_x + 1e-9;
  double hi = n;
  if (analysis::s_bound(hi, m_x, n, c0, alpha_x) <= target_s) return hi;
  if (analysis::s_bound(lo, m_x, n, c0, alpha_x) >= target_s) return lo;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (analysis::s_bound(mid, m_x, n, c0, alpha_x) < target_s)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

void run_si_fig5(const RunInput& in) {
  const int n = static_cast<int>(in.geti("n"));
  const int m_k = static_cast<int>(in.geti("m_k"));
  const int m_fd = static_cast<int>(in.geti("m_fd"));
  const int m_single = static_cast<int>(in.geti("m_single"));
  const double g0 = in.getd("g0");

  const std::uint64_t head_master = rng::child_seed(in.config->master_seed, 1);
  const std::uint64_t sweep_master = rng::child_seed(in.config->master_seed, 2);

  // Head-to-head: 2-step signals, dual (m_k, m_fd) vs single m_single.
  const auto fn = [&](std::uint64_t seed, int) {
    const Image truth = signals::gen_step_signal(n, 2, rng::child_seed(seed, 1));
    const std::uint64_t plan_seed = rng::child_seed(seed, 2);
    edges::EdgeBudget budget;
    budget.m_k = m_k;
    budget.m_fd = m_fd;
    auto [dual_img, dual_map, trace] = edges::run_dual_edge(truth, budget, g0, plan_seed);
    auto [single_img, single_map, single_status] =
        edges::run_single_edge(truth, m_single, g0, plan_seed);
    const edges::EdgeMap truth_edges = edges::extract_edges(truth, g0);
    const edges::EdgeScores sc_dual = edges::edge_scores(dual_map, truth_edges);
    const edges::EdgeScores sc_single = edges::edge_scores(single_map, truth_edges);
    const double fid_single = analysis::fidelity(truth, single_img);

    analysis::TrialRecord rec;
    rec.params = {n, 2, m_k, m_fd, 0.0};
    rec.fidelity = analysis::fidelity(truth, dual_img);
    rec.exact = rec.fidelity >= 1.0 - 1e-6;
    rec.correlation = sc_dual.correlation;
    rec.alpha_x = trace.alpha_x;
    rec.extras.emplace_back("m_single", jint(m_single));
    rec.extras.emplace_back("fidelity_single", jnum(fid_single));
    rec.extras.emplace_back("exact_single", jbool(fid_single >= 1.0 - 1e-6));
    rec.extras.emplace_back("edge_correlation_single", jnum(sc_single.correlation));
    rec.extras.emplace_back("edge_correlation_dual", jnum(sc_dual.correlation));
    rec.extras.emplace_back("edges_found_dual", jint(sc_dual.true_positive));
    rec.extras.emplace_back("status_single", jstr(lp::to_string(single_status)));
    rec.extras.emplace_back("status_dual_final", jstr(lp::to_string(trace.final_status)));
    return rec;
  };
  *in.log << "[" << in.def->name << "] head-to-head over " << in.trials << " seeds\n";
  const analysis::TrialBatch batch =
      analysis::run_batch(in.def->name, in.trials, head_master, fn, in.workers);
  std::string jsonl = jsonl_from(batch);

  ArmAgg single, dual;
  accumulate_arms(batch, single, dual);
  const auto arm_row = [&](const std::string& arm, int arm_m_k, int arm_m_fd, const ArmAgg& agg) {
    const MeanSe f = agg.fid_stats();
    const double p = agg.p_exact();
    return std::vector<std::string>{arm,
                                    cell(n),
                                    cell(arm_m_k + arm_m_fd),
                                    cell(arm_m_k),
                                    cell(arm_m_fd),
                                    cell(f.count),
                                    cell(agg.failed),
                                    cell(f.mean),
                                    cell(f.se),
                                    cell(p),
                                    cell(proportion_se(p, f.count))};
  };
  write_text_file(in.dir / "results.csv",
                  csv_table({"arm", "n", "m", "m_k", "m_fd", "trials", "failed",
                             "mean_fidelity", "fidelity_stderr", "p_exact", "p_exact_stderr"},
                            {arm_row("single", m_single, 0, single),
                             arm_row("dual", m_k, m_fd, dual)}));

  // Turning-point sweep: smallest m_k with mean edge correlation >= target,
  // per step count s, at fixed m_fd; then a one-parameter fit of the
  // sparsity bound through the turning points.
  if (in.getb("run_sweep")) {
    const int s_min = static_cast<int>(in.geti("s_min"));
    const int s_max = static_cast<int>(in.geti("s_max"));
    const int sweep_m_fd = static_cast<int>(in.geti("sweep_m_fd"));
    const int sweep_seeds = static_cast<int>(in.geti("sweep_seeds"));
    const int mk_lo = static_cast<int>(in.geti("sweep_m_k_min"));
    const int mk_hi = static_cast<int>(in.geti("sweep_m_k_max"));
    const double target = in.getd("sweep_target");

    struct Turning {
      int s = 0;
      bool reached = false;
      int m_k_star = -1;
      double correlation = 0.0;
      double alpha_x = 0.0;
    };
    std::vector<Turning> turnings;
    for (int s = s_min; s <= s_max; ++s) {
      const std::uint64_t s_master =
          rng::child_seed(sweep_master, static_cast<std::uint64_t>(s));
      Turning tp;
      tp.s = s;
      for (int mk = mk_lo; mk <= mk_hi; ++mk) {
        const std::uint64_t point_master =
            rng::child_seed(s_master, static_cast<std::uint64_t>(mk));
        const auto sweep_fn = [&](std::uint64_t seed, int) {
          const Image truth = signals::gen_step_signal(n, s, rng::child_seed(seed, 1));
          edges::EdgeBudget budget;
          budget.m_k = mk;
          budget.m_fd = sweep_m_fd;
          auto [img, map, trace] =
              edges::run_dual_edge(truth, budget, g0, rng::child_seed(seed, 2));
          static_cast<void>(img);
          const edges::EdgeScores sc = edges::edge_scores(map, edges::extract_edges(truth, g0));
          analysis::TrialRecord rec;
          rec.params = {n, s, mk, sweep_m_fd, 0.0};
          rec.correlation = sc.correlation;
          rec.alpha_x = trace.alpha_x;
          return rec;
        };
        const analysis::TrialBatch point =
            analysis::run_batch(in.def->name, sweep_seeds, point_master, sweep_fn, in.workers);
        double corr_sum = 0.0;  // failures count as zero correlation
        double alpha_sum = 0.0;
        int ok = 0;
        int point_failed = 0;
        for (const analysis::TrialRecord& rec : point.trials) {
          if (rec.failed) {
            ++point_failed;
            continue;
          }
          corr_sum += rec.correlation.value_or(0.0);
          alpha_sum += rec.alpha_x;
          ++ok;
        }
        const double mean_corr = corr_sum / static_cast<double>(sweep_seeds);
        ordered_json line;
        line["sweep"] = true;
        line["s"] = s;
        line["m_k"] = mk;
        line["m_fd"] = sweep_m_fd;
        line["seed"] = point_master;
        line["trials"] = sweep_seeds;
        line["failed"] = point_failed;
        line["mean_edge_correlation"] = mean_corr;
        jsonl += line.dump() + "\n";
        if (mean_corr >= target) {
          tp.reached = true;
          tp.m_k_star = mk;
          tp.correlation = mean_corr;
          tp.alpha_x = ok > 0 ? alpha_sum / static_cast<double>(ok) : 0.0;
          break;
        }
      }
      *in.log << "[" << in.def->name << "] sweep s=" << s << " -> m_k_star=" << tp.m_k_star
              << (tp.reached ? "" : " (unreached)") << "\n";
      turnings.push_back(tp);
    }

    std::vector<std::vector<std::string>> trows;
    for (const Turning& tp : turnings)
      trows.push_back({cell(tp.s), tp.reached ? "1" : "0", cell(tp.m_k_star),
                       cell(tp.correlation), cell(tp.alpha_x)});
    write_text_file(
        in.dir / "turning_points.csv",
        csv_table({"s", "reached", "m_k_star", "mean_edge_correlation", "mean_alpha_x"}, trows));

    // One-parameter fit: s = c0 * u(m_k*) + alpha_x * m_fd with
    // u(m_k) = (m_k - m_fd)/(1 + ln((n - m_fd)/(m_k - m_fd))); alpha_x is
    // the mean realized value at the turning points, not a fit parameter.
    ordered_json fit;
    fit["n"] = n;
    fit["m_x"] = sweep_m_fd;
    std::vector<const Turning*> usable;
    for (const Turning& tp : turnings)
      if (tp.reached && tp.m_k_star > sweep_m_fd) usable.push_back(&tp);
    if (usable.size() >= 2) {
      double alpha_sum = 0.0;
      for (const Turning* tp : usable) alpha_sum += tp->alpha_x;
      const double alpha_x = alpha_sum / static_cast<double>(usable.size());
      double num = 0.0, den = 0.0;
      for (const Turning* tp : usable) {
        const double u = analysis::s_bound(tp->m_k_star, sweep_m_fd, n, 1.0, 0.0);
        num += u * (tp->s - alpha_x * sweep_m_fd);
        den += u * u;
      }
      const double c0 = num / den;
      double ss = 0.0;
      int mk_min_star = usable.front()->m_k_star, mk_max_star = usable.front()->m_k_star;
      ordered_json pts = ordered_json::array();
      for (const Turning* tp : usable) {
        const double predicted = invert_s_bound(tp->s, sweep_m_fd, n, c0, alpha_x);
        ss += (predicted - tp->m_k_star) * (predicted - tp->m_k_star);
        mk_min_star = std::min(mk_min_star, tp->m_k_star);
        mk_max_star = std::max(mk_max_star, tp->m_k_star);
        ordered_json p;
        p["s"] = tp->s;
        p["m_k_star"] = tp->m_k_star;
        p["predicted_m_k"] = predicted;
        pts.push_back(p);
      }
      const double rms = std::sqrt(ss / static_cast<double>(usable.size()));
      const int range = mk_max_star - mk_min_star;
      fit["fitted"] = true;
      fit["c0"] = c0;
      fit["alpha_x"] = alpha_x;
      fit["rms_residual_m_k"] = rms;
      fit["m_k_star_range"] = range;
      fit["relative_rms"] = range > 0 ? rms / static_cast<double>(range)
                                      : std::numeric_limits<double>::quiet_NaN();
      fit["points"] = pts;
    } else {
      fit["fitted"] = false;
      fit["reason"] = "fewer than 2 turning points reached the correlation target";
    }
    write_json_file(in.dir / "fit.json", fit);
  }

  write_text_file(in.dir / "trials.jsonl", jsonl);
}

void validate_si_fig5(const RunInput& in, Diagnostics& diag) {
  const auto n = in.geti("n");
  if (in.geti("m_k") > n) diag.errors.push_back("m_k exceeds n");
  if (in.geti("m_fd") > n) diag.errors.push_back("m_fd exceeds n");
  if (in.geti("m_single") > n) diag.errors.push_back("m_single exceeds n");
  if (in.geti("s_min") > in.geti("s_max")) diag.errors.push_back("s_min exceeds s_max");
  if (in.geti("sweep_m_k_min") > in.geti("sweep_m_k_max"))
    diag.errors.push_back("sweep_m_k_min exceeds sweep_m_k_max");
  if (in.geti("sweep_m_k_max") > n) diag.errors.push_back("sweep_m_k_max exceeds n");
  if (in.geti("sweep_m_fd") > n) diag.errors.push_back("sweep_m_fd exceeds n");
  if (in.geti("s_max") >= n / 2)
    diag.errors.push_back("s_max too large for distinct circular steps");
}

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

const std::vector<ExperimentDef>& catalog() {
  static const std::vector<ExperimentDef> defs = [] {
    std::vector<ExperimentDef> v;

    v.push_back(ExperimentDef{
        "fig1_histograms",
        "Paired single/dual reconstruction fidelity histograms on random sparse images",
        1000,
        {
            {"n", Kind::Int, std::int64_t{64}, 8, 4096, "signal length"},
            {"s", Kind::Int, std::int64_t{6}, 0, 4096, "non-zero count"},
            {"m_single", Kind::Int, std::int64_t{9}, 1, 4096, "single-arm k-space samples"},
            {"m_k", Kind::Int, std::int64_t{6}, 1, 4096, "dual-arm k-space samples"},
            {"m_x", Kind::Int, std::int64_t{3}, 0, 4096, "dual-arm direct pixel samples"},
            {"histogram_bins", Kind::Int, std::int64_t{100}, 2, 10000,
             "fidelity bins over [-1, 1]"},
        },
        &run_fig1,
        &validate_fig1});

    v.push_back(ExperimentDef{
        "fig2_walkthrough",
        "One seeded four-step dual reconstruction with every stage exported",
        1,
        {
            {"n", Kind::Int, std::int64_t{64}, 8, 4096, "signal length"},
            {"s", Kind::Int, std::int64_t{6}, 0, 4096, "non-zero count"},
            {"m_single", Kind::Int, std::int64_t{9}, 1, 4096, "single-arm k-space samples"},
            {"m_k", Kind::Int, std::int64_t{6}, 1, 4096, "dual-arm k-space samples"},
            {"m_x", Kind::Int, std::int64_t{3}, 0, 4096, "dual-arm direct pixel samples"},
        },
        &run_fig2,
        &validate_fig2});

    v.push_back(ExperimentDef{
        "fig3_noise_sweep",
        "Mean fidelity of both arms versus SNR under additive pixel noise",
        200,
        {
            {"n", Kind::Int, std::int64_t{64}, 8, 4096, "signal length"},
            {"s", Kind::Int, std::int64_t{6}, 1, 4096, "non-zero count"},
            {"m_single", Kind::Int, std::int64_t{18}, 1, 4096, "single-arm k-space samples"},
            {"m_k", Kind::Int, std::int64_t{12}, 1, 4096, "dual-arm k-space samples"},
            {"m_x", Kind::Int, std::int64_t{6}, 0, 4096, "dual-arm direct pixel samples"},
            {"snr_grid", Kind::RealList, std::vector<double>{1, 2, 5, 10, 20, 50}, 1e-6, 1e9,
             "signal-to-noise ratios to sweep"},
            {"accept_sigma_factor", Kind::Real, 2.0, 0.0, 1e6,
             "direct-sample accept threshold in units of sigma"},
        },
        &run_fig3,
        &validate_fig3});

    v.push_back(ExperimentDef{
        "fig4_edges",
        "2-D phantom edge detection: dual (k-space + measured differences) vs single",
        30,
        {
            {"size", Kind::Int, std::int64_t{64}, 16, 512, "phantom side length"},
            {"m_k", Kind::Int, std::int64_t{82}, 1, 262144, "k-space samples"},
            {"m_fd", Kind::Int, std::int64_t{31}, 0, 524288, "measured difference pairs"},
            {"g0", Kind::Real, 0.26, 1e-9, 1e9, "gradient magnitude threshold"},
        },
        &run_fig4,
        &validate_fig4});

    v.push_back(ExperimentDef{
        "phase_transition",
        "Exact-recovery probability versus m_k with optional post-selection",
        200,
        {
            {"n", Kind::Int, std::int64_t{64}, 8, 4096, "signal length"},
            {"s", Kind::Int, std::int64_t{3}, 0, 4096, "non-zero count"},
            {"m_x", Kind::Int, std::int64_t{0}, 0, 4096, "direct pixel samples"},
            {"m_k_min", Kind::Int, std::int64_t{1}, 1, 4096, "grid start"},
            {"m_k_max", Kind::Int, std::int64_t{48}, 1, 4096, "grid end (inclusive)"},
            {"m_k_step", Kind::Int, std::int64_t{1}, 1, 4096, "grid step"},
            {"target", Kind::Real, 0.8, 1e-9, 1.0 - 1e-9, "probability target"},
            {"post_select_found", Kind::Int, std::int64_t{-1}, -1, 4096,
             "keep only trials whose dual run found exactly this many true peaks (-1 = off)"},
            {"max_raw_factor", Kind::Int, std::int64_t{20}, 1, 1000,
             "raw draw cap = factor * trials"},
            {"early_stop", Kind::Bool, false, 0, 0, "stop the grid scan at the first crossing"},
            {"futility_stop", Kind::Bool, true, 0, 0,
             "abandon hopeless grid points after 50 accepted trials"},
        },
        &run_phase,
        &validate_phase});

    v.push_back(ExperimentDef{
        "scaling_fit",
        "m_k_star over an (s, alpha_m_x) grid with a straight-line scaling fit",
        200,
        {
            {"n", Kind::Int, std::int64_t{64}, 8, 4096, "signal length"},
            {"s_min", Kind::Int, std::int64_t{3}, 0, 4096, "smallest sparsity"},
            {"s_max", Kind::Int, std::int64_t{8}, 0, 4096, "largest sparsity"},
            {"q_min", Kind::Int, std::int64_t{0}, 0, 4096, "smallest alpha_m_x"},
            {"q_max", Kind::Int, std::int64_t{3}, 0, 4096, "largest alpha_m_x"},
            {"m_k_min", Kind::Int, std::int64_t{2}, 1, 4096, "scan floor"},
            {"m_k_max", Kind::Int, std::int64_t{40}, 1, 4096, "scan ceiling"},
            {"m_k_step", Kind::Int, std::int64_t{1}, 1, 4096, "scan step"},
            {"target", Kind::Real, 0.8, 1e-9, 1.0 - 1e-9, "probability target"},
            {"max_raw_factor", Kind::Int, std::int64_t{20}, 1, 1000,
             "raw draw cap = factor * trials"},
        },
        &run_scaling,
        &validate_scaling});

    v.push_back(ExperimentDef{
        "nsp_check",
        "Random small systems with tnsp gamma < 1; recovery theorem verified on each",
        20,
        {
            {"q", Kind::Int, std::int64_t{10}, 2, 12, "columns of the system"},
            {"k_rows", Kind::Int, std::int64_t{6}, 1, 12, "k-space samples before real split"},
            {"t", Kind::Int, std::int64_t{6}, 1, 12, "unknown-set size"},
            {"L", Kind::Int, std::int64_t{2}, 1, 3, "sparsity order"},
            {"signals", Kind::Int, std::int64_t{50}, 1, 100000, "planted signals per system"},
            {"max_attempts", Kind::Int, std::int64_t{200}, 1, 100000,
             "draw budget for qualifying systems"},
        },
        &run_nsp,
        &validate_nsp});

    v.push_back(ExperimentDef{
        "si_fig5_1d_edges",
        "1-D step-signal edge program: head-to-head budgets plus turning-point scaling fit",
        100,
        {
            {"n", Kind::Int, std::int64_t{64}, 8, 4096, "signal length"},
            {"m_k", Kind::Int, std::int64_t{11}, 1, 4096, "dual-arm k-space samples"},
            {"m_fd", Kind::Int, std::int64_t{3}, 0, 4096, "dual-arm measured difference pairs"},
            {"m_single", Kind::Int, std::int64_t{14}, 1, 4096, "single-arm k-space samples"},
            {"g0", Kind::Real, 0.2, 1e-9, 1e9, "gradient magnitude threshold"},
            {"run_sweep", Kind::Bool, true, 0, 0, "also run the turning-point sweep"},
            {"s_min", Kind::Int, std::int64_t{4}, 2, 4096, "smallest step count in the sweep"},
            {"s_max", Kind::Int, std::int64_t{10}, 2, 4096, "largest step count in the sweep"},
            {"sweep_m_fd", Kind::Int, std::int64_t{5}, 0, 4096, "measured pairs in the sweep"},
            {"sweep_seeds", Kind::Int, std::int64_t{50}, 1, 100000, "seeds per sweep point"},
            {"sweep_m_k_min", Kind::Int, std::int64_t{4}, 1, 4096, "sweep scan floor"},
            {"sweep_m_k_max", Kind::Int, std::int64_t{48}, 1, 4096, "sweep scan ceiling"},
            {"sweep_target", Kind::Real, 0.8, 1e-9, 1.0, "edge-correlation crossing level"},
        },
        &run_si_fig5,
        &validate_si_fig5});

    return v;
  }();
  return defs;
}

ParamValue json_to_param(const ordered_json& v, const std::string& key) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_unsigned()) return static_cast<std::int64_t>(v.get<std::uint64_t>());
  if (v.is_number_float()) return v.get<double>();
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    bool all_int = true;
    for (const auto& e : v) {
      if (e.is_number_integer() || e.is_number_unsigned()) continue;
      all_int = false;
      if (!e.is_number_float())
        throw std::runtime_error("config key '" + key + "': arrays must hold numbers");
    }
    if (all_int) {
      std::vector<std::int64_t> out;
      for (const auto& e : v) out.push_back(e.get<std::int64_t>());
      return out;
    }
    std::vector<double> out;
    for (const auto& e : v) out.push_back(e.get<double>());
    return out;
  }
  throw std::runtime_error("config key '" + key + "': unsupported value type");
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API
// ---------------------------------------------------------------------------

std::vector<std::string> experiment_names() {
  std::vector<std::string> names;
  for (const ExperimentDef& def : catalog()) names.push_back(def.name);
  return names;
}

bool is_experiment(const std::string& name) { return find_experiment(name) != nullptr; }

std::string describe_experiment(const std::string& name) {
  const ExperimentDef* def = find_experiment(name);
  if (!def) throw std::invalid_argument("unknown experiment '" + name + "'");
  std::ostringstream os;
  os << def->name << "\n  " << def->summary << "\n  default trials: " << def->default_trials
     << "\n";
  for (const ParamSpec& p : def->params) {
    os << "  --" << p.key << " (" << kind_name(p.kind) << ", default "
       << param_value_repr(p.def);
    if (p.kind == Kind::Int || p.kind == Kind::Real)
      os << ", range [" << format_double(p.lo) << ", " << format_double(p.hi)
         << "]";
    os << ") " << p.help << "\n";
  }
  return os.str();
}

ExperimentConfig config_from_json_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("config must be a JSON object");

  ExperimentConfig config;
  for (const auto& [key, value] : j.items()) {
    if (key == "experiment") {
      if (!value.is_string()) throw std::runtime_error("'experiment' must be a string");
      config.experiment = value.get<std::string>();
    } else if (key == "master_seed") {
      if (!value.is_number_integer() && !value.is_number_unsigned())
        throw std::runtime_error("'master_seed' must be an integer");
      if (value.is_number_integer() && value.get<std::int64_t>() < 0)
        throw std::runtime_error("'master_seed' must be non-negative");
      config.master_seed = value.get<std::uint64_t>();
      config.master_seed_given = true;
    } else if (key == "output_dir") {
      if (!value.is_string()) throw std::runtime_error("'output_dir' must be a string");
      config.output_dir = value.get<std::string>();
    } else if (key == "trials") {
      if (!value.is_number_integer() && !value.is_number_unsigned())
        throw std::runtime_error("'trials' must be an integer");
      config.trials = value.get<int>();
    } else if (key == "workers") {
      if (!value.is_number_integer() && !value.is_number_unsigned())
        throw std::runtime_error("'workers' must be an integer");
      config.workers = value.get<int>();
    } else if (key == "params") {
      if (!value.is_object()) throw std::runtime_error("'params' must be an object");
      for (const auto& [pkey, pval] : value.items())
        config.params[pkey] = json_to_param(pval, pkey);
    } else {
      config.params[key] = json_to_param(value, key);
    }
  }
  return config;
}

void apply_override(ExperimentConfig& config, const std::string& key,
                    const std::string& value) {
  std::string k = key;
  std::replace(k.begin(), k.end(), '-', '_');
  try {
    if (k == "experiment") {
      config.experiment = value;
    } else if (k == "master_seed") {
      std::size_t pos = 0;
      config.master_seed = std::stoull(value, &pos);
      if (pos != value.size()) throw std::invalid_argument("trailing characters");
      config.master_seed_given = true;
    } else if (k == "output_dir") {
      config.output_dir = value;
    } else if (k == "trials") {
      std::size_t pos = 0;
      config.trials = std::stoi(value, &pos);
      if (pos != value.size()) throw std::invalid_argument("trailing characters");
    } else if (k == "workers") {
      std::size_t pos = 0;
      config.workers = std::stoi(value, &pos);
      if (pos != value.size()) throw std::invalid_argument("trailing characters");
    } else {
      const ordered_json parsed = ordered_json::parse(value, nullptr, false);
      if (!parsed.is_discarded() && !parsed.is_object())
        config.params[k] = json_to_param(parsed, k);
      else
        config.params[k] = value;  // keep verbatim; schema validation reports misuse
    }
  } catch (const std::invalid_argument&) {
    throw std::runtime_error("override --" + key + " " + value + ": not a valid value");
  } catch (const std::out_of_range&) {
    throw std::runtime_error("override --" + key + " " + value + ": out of range");
  }
}

std::string config_to_json_text(const ExperimentConfig& config) {
  const ExperimentDef* def = find_experiment(config.experiment);
  if (!def) throw std::runtime_error("unknown experiment '" + config.experiment + "'");
  ordered_json j;
  j["experiment"] = config.experiment;
  j["master_seed"] = config.master_seed;
  j["output_dir"] = config.output_dir;
  j["trials"] = config.trials > 0 ? config.trials : def->default_trials;
  j["workers"] = resolve_workers(config);
  ordered_json params;
  const auto effective = resolve_params(*def, config);
  for (const ParamSpec& spec : def->params)
    params[spec.key] = param_value_to_json(effective.at(spec.key));
  j["params"] = params;
  return j.dump(2);
}

Diagnostics validate_config(const ExperimentConfig& config) {
  Diagnostics diag;
  const ExperimentDef* def = find_experiment(config.experiment);
  if (!def) {
    diag.errors.push_back(config.experiment.empty()
                              ? "no experiment named; pick one of list-experiments"
                              : "unknown experiment '" + config.experiment + "'");
    return diag;
  }
  if (!config.master_seed_given)
    diag.notices.push_back("master_seed not given; defaulting to 0");
  if (config.output_dir.empty()) diag.errors.push_back("output_dir must not be empty");
  if (config.trials < 0) diag.errors.push_back("trials must be positive");
  if (config.workers < 0) diag.errors.push_back("workers must be positive");

  for (const auto& [key, value] : config.params) {
    const ParamSpec* spec = nullptr;
    for (const ParamSpec& p : def->params)
      if (p.key == key) spec = &p;
    if (!spec) {
      diag.errors.push_back("unknown parameter '" + key + "' for " + def->name);
      continue;
    }
    ParamValue coerced;
    std::string error;
    if (!check_param(*spec, value, coerced, error)) diag.errors.push_back(error);
  }

  if (diag.errors.empty() && def->extra_validate) {
    std::ostringstream sink;
    RunInput in = make_input(config, *def, sink);
    def->extra_validate(in, diag);
  }
  return diag;
}

int run_experiment(const ExperimentConfig& config, std::ostream& log) {
  const Diagnostics diag = validate_config(config);
  for (const std::string& n : diag.notices) log << "notice: " << n << "\n";
  for (const std::string& e : diag.errors) log << "config error: " << e << "\n";
  if (!diag.ok()) return 2;

  const ExperimentDef& def = *find_experiment(config.experiment);
  RunInput in = make_input(config, def, log);
  in.dir = fs::path(config.output_dir) / config.experiment / std::to_string(config.master_seed);

  const auto start = std::chrono::steady_clock::now();
  try {
    fs::create_directories(in.dir);
    def.run(in);

    ordered_json manifest;
    manifest["config"] = ordered_json::parse(config_to_json_text(config));
    manifest["version"] = DUALCS_VERSION_STRING;
    manifest["wall_ms"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    write_json_file(in.dir / "manifest.json", manifest);
  } catch (const std::exception& e) {
    log << "runtime failure: " << e.what() << "\n";
    return 3;
  }
  log << "[" << def.name << "] wrote " << in.dir.string() << "\n";
  return 0;
}

}  // namespace dualcs::experiments
