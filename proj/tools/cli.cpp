#include "cli.hpp"

#include "survcbps/baselines.hpp"
#include "survcbps/errors.hpp"
#include "survcbps/pipeline.hpp"
#include "survcbps/serialize.hpp"
#include "survcbps/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

namespace survcbps::cli {

namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;

struct FitFlags {
  std::string data;
  std::string tau = "auto";
  std::string tau_grid = "auto";
  double level = 0.95;
  std::string out;
  std::string seed = "42";
  double clip = kDefaultScoreClip;
  double km_floor = kDefaultKmFloor;
  std::string method = "proposed";
  int bootstrap = 200;
  std::string y_col = "y";
  std::string delta_col = "delta";
  std::string d_col = "d";
  std::vector<std::string> x_cols;
};

struct SimulateFlags {
  std::string config;
  int workers = 1;
  std::string out_dir = ".";
  std::vector<std::string> overrides;  // key=value
};

struct ReportFlags {
  std::string in;
};

int exit_code_for(const Error& e) {
  if (dynamic_cast<const DataError*>(&e)) return kDataError;
  if (dynamic_cast<const ConvergenceError*>(&e)) return kConvergenceError;
  if (dynamic_cast<const DegenerateError*>(&e)) return kDegenerateData;
  return kFailure;
}

std::string category_for(int code) {
  switch (code) {
    case kDataError: return "data_error";
    case kConvergenceError: return "convergence_error";
    case kDegenerateData: return "degenerate_data";
    default: return "error";
  }
}

void report_error(std::ostream& err, int code, const std::string& message) {
  err << json{{"error", category_for(code)}, {"message", message}}.dump() << '\n';
}

std::uint64_t resolve_seed(const std::string& text) {
  if (text == "random") return (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();
  std::uint64_t seed = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw DataError("--seed must be an integer or 'random'");
  return seed;
}

void emit(const json& doc, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << doc.dump(2) << '\n';
    return;
  }
  std::ofstream file(path);
  if (!file) throw DataError("cannot write '" + path + "'");
  file << doc.dump(2) << '\n';
}

int cmd_fit(const FitFlags& flags, std::ostream& out) {
  const std::uint64_t seed = resolve_seed(flags.seed);
  CsvSchema schema{flags.y_col, flags.delta_col, flags.d_col, flags.x_cols};
  const Dataset data = parse_csv(flags.data, schema);
  const CensorModels k = fit_censoring_models(data, flags.km_floor);

  json doc = {{"schema_version", kSchemaVersion},
              {"command", "fit"},
              {"method", flags.method},
              {"seed", seed},
              {"data", to_json(summarize(data))}};

  const auto kind = parse_estimator(flags.method);
  if (!kind) throw DataError("unknown --method '" + flags.method + "'");

  if (*kind != EstimatorKind::proposed) {
    BaselineSpec spec{*kind, {}};
    spec.options.bootstrap = flags.bootstrap;
    spec.options.seed = seed;
    spec.options.level = flags.level;
    spec.options.score_clip = flags.clip;
    spec.options.km_floor = flags.km_floor;
    doc["result"] = to_json(run_baseline(spec, data, k));
    emit(doc, flags.out, out);
    return kOk;
  }

  ProposedOptions opts;
  opts.ate.level = flags.level;
  opts.ate.score_clip = flags.clip;
  if (flags.tau != "auto") {
    double tau = 0.0;
    auto [ptr, ec] = std::from_chars(flags.tau.data(), flags.tau.data() + flags.tau.size(), tau);
    if (ec != std::errc() || ptr != flags.tau.data() + flags.tau.size() || !(tau > 0.0))
      throw DataError("--tau must be a positive number");
    opts.tau = tau;
  } else if (flags.tau_grid != "auto") {
    std::stringstream ss(flags.tau_grid);
    std::string item;
    while (std::getline(ss, item, ',')) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || ptr != item.data() + item.size() || !(v > 0.0))
        throw DataError("--tau-grid must be 'auto' or a comma-separated list of positive numbers");
      opts.grid.push_back(v);
    }
  }

  ProposedFit partial;
  try {
    const ProposedFit fit = fit_proposed(data, k, opts, &partial);
    doc["result"] = to_json(fit.result);
    doc["active_covariates"] = fit_diagnostics(fit.fit, data)["active_covariates"];
    doc["diagnostics"] = fit_diagnostics(fit.fit, data);
    json path = json::array();
    for (const auto& e : fit.path)
      path.push_back({{"tau", e.tau}, {"bic", e.bic}, {"df", e.df}, {"converged", e.converged}, {"failed", e.failed}});
    doc["diagnostics"]["tau_path"] = path;
  } catch (const ConvergenceError& e) {
    if (partial.fit.beta_hat.size() > 0) doc["diagnostics"] = fit_diagnostics(partial.fit, data);
    doc["error"] = {{"category", category_for(kConvergenceError)}, {"message", e.what()}};
    emit(doc, flags.out, out);
    throw;
  }
  emit(doc, flags.out, out);
  return kOk;
}

int cmd_simulate(const SimulateFlags& flags, std::ostream& out) {
  SimConfig config = flags.config.empty() ? SimConfig{} : load_sim_config(flags.config);
  for (const auto& entry : flags.overrides) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) throw DataError("--set expects key=value, got '" + entry + "'");
    apply_config_entry(config, entry.substr(0, eq), entry.substr(eq + 1));
  }
  config.validate();
  if (flags.workers < 1) throw DataError("--workers must be at least 1");

  const SimReport report = run_study(config, flags.workers);
  const std::filesystem::path dir(flags.out_dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / "report.csv");
    if (!csv) throw DataError("cannot write report.csv in '" + dir.string() + "'");
    write_report_csv(report, csv);
  }
  const json dump = report_to_json(report);
  {
    std::ofstream js(dir / "report.json");
    if (!js) throw DataError("cannot write report.json in '" + dir.string() + "'");
    js << dump.dump(2) << '\n';
  }
  out << render_report(dump);
  if (report.excessive_failures) throw ConvergenceError("more than 5% of replications failed for some estimator");
  return kOk;
}

int cmd_report(const ReportFlags& flags, std::ostream& out) {
  std::ifstream in(flags.in);
  if (!in) throw DataError("cannot open '" + flags.in + "'");
  json dump;
  try {
    dump = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report dump: ") + e.what());
  }
  try {
    out << render_report(dump);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report dump: ") + e.what());
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Censoring-adjusted ATE estimation with penalized empirical-likelihood CBPS", "survcbps"};
  app.require_subcommand(1);

  FitFlags fit;
  auto* fit_cmd = app.add_subcommand("fit", "Estimate the ATE on a CSV dataset");
  fit_cmd->add_option("--data", fit.data, "Input CSV (columns y, delta, d, x1..xp)")->required();
  fit_cmd->add_option("--tau", fit.tau, "Fixed tuning level, or 'auto' to select by BIC");
  fit_cmd->add_option("--tau-grid", fit.tau_grid, "'auto' or comma-separated tuning levels");
  fit_cmd->add_option("--level", fit.level, "Confidence level")->check(CLI::Range(0.5, 0.9999));
  fit_cmd->add_option("--out", fit.out, "Write the result document here instead of stdout");
  fit_cmd->add_option("--seed", fit.seed, "Integer seed, or 'random'");
  fit_cmd->add_option("--clip", fit.clip, "Propensity clip epsilon")->check(CLI::Range(1e-6, 0.49));
  fit_cmd->add_option("--km-floor", fit.km_floor, "Lower clamp for censoring survival")->check(CLI::Range(1e-6, 1.0));
  fit_cmd->add_option("--method", fit.method, "proposed | naive_ipw | cbps_unpenalized | aipw");
  fit_cmd->add_option("--bootstrap", fit.bootstrap, "Bootstrap resamples for baseline methods")->check(CLI::Range(2, 100000));
  fit_cmd->add_option("--y-col", fit.y_col, "Observed-time column");
  fit_cmd->add_option("--delta-col", fit.delta_col, "Event-indicator column");
  fit_cmd->add_option("--d-col", fit.d_col, "Treatment column");
  fit_cmd->add_option("--x-cols", fit.x_cols, "Covariate columns (default x1..xp)")->delimiter(',');

  SimulateFlags sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a Monte Carlo comparison of estimators");
  sim_cmd->add_option("--config", sim.config, "Flat key = value configuration file");
  sim_cmd->add_option("--workers", sim.workers, "Concurrent replications");
  sim_cmd->add_option("--out-dir", sim.out_dir, "Directory for report.csv and report.json");
  sim_cmd->add_option("--set", sim.overrides, "Override a config key (key=value); repeatable");
  struct Inline {
    const char* flag;
    const char* key;
    std::string value;
  };
  std::vector<Inline> inline_flags{{"--n", "n", {}},
                                   {"--p", "p", {}},
                                   {"--replications", "replications", {}},
                                   {"--seed", "seed", {}},
                                   {"--covariance", "covariance", {}},
                                   {"--estimators", "estimators", {}},
                                   {"--censor-rate", "censor_rate", {}},
                                   {"--beta-nonzero", "beta_nonzero", {}},
                                   {"--bootstrap", "bootstrap", {}}};
  for (auto& f : inline_flags) sim_cmd->add_option(f.flag, f.value, std::string("Config key '") + f.key + "'");
  bool record_timing = false;
  sim_cmd->add_flag("--record-timing", record_timing, "Record per-estimator runtimes (non-deterministic)");

  ReportFlags rep;
  auto* report_cmd = app.add_subcommand("report", "Re-render a stored simulation dump");
  report_cmd->add_option("--in", rep.in, "report.json produced by simulate")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n' << app.help();
    return kDataError;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit, out);
    if (*sim_cmd) {
      std::string seed_text;
      for (auto& f : inline_flags) {
        if (f.value.empty()) continue;
        std::string value = f.value;
        if (std::string(f.key) == "seed") value = std::to_string(resolve_seed(value));
        sim.overrides.push_back(std::string(f.key) + "=" + value);
      }
      if (record_timing) sim.overrides.push_back("record_timing=true");
      return cmd_simulate(sim, out);
    }
    if (*report_cmd) return cmd_report(rep, out);
  } catch (const Error& e) {
    const int code = exit_code_for(e);
    report_error(err, code, e.what());
    return code;
  } catch (const std::filesystem::filesystem_error& e) {
    report_error(err, kDataError, e.what());
    return kDataError;
  } catch (const std::exception& e) {
    report_error(err, kFailure, e.what());
    return kFailure;
  }
  return kFailure;
}

}  // namespace survcbps::cli
