#include "survcbps/sim.hpp"

#include "survcbps/errors.hpp"
#include "survcbps/pipeline.hpp"
#include "survcbps/rng.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace survcbps {

namespace {

constexpr std::uint64_t kPilotStream = 0x9110;
constexpr std::uint64_t kTruthStream = 0x7A7E;
constexpr std::uint64_t kDataStream = 0xDA7A;
constexpr std::uint64_t kReplicationStream = 0x4E9;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw DataError("config: invalid value '" + value + "' for key '" + key + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw DataError("config: invalid boolean '" + value + "' for key '" + key + "'");
}

std::vector<EstimatorKind> parse_estimator_list(const std::string& value) {
  std::vector<EstimatorKind> kinds;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    auto kind = parse_estimator(item);
    if (!kind) throw DataError("config: unknown estimator '" + item + "'");
    kinds.push_back(*kind);
  }
  return kinds;
}

// Sorted, de-duplicated copy in enum order.
std::vector<EstimatorKind> canonical(std::vector<EstimatorKind> kinds) {
  std::sort(kinds.begin(), kinds.end());
  kinds.erase(std::unique(kinds.begin(), kinds.end()), kinds.end());
  return kinds;
}

std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 10);
  return std::string(buf, ptr);
}

struct Draw {
  Eigen::VectorXd x;
  int d = 0;
  double t0 = 0.0;
  double t1 = 0.0;
  double propensity = 0.0;
};

class Generator {
 public:
  explicit Generator(const SimConfig& config)
      : config_(config), beta_(config.beta()), gamma_(config.gamma()) {
    Eigen::LLT<Eigen::MatrixXd> llt(config.covariance_matrix());
    if (llt.info() != Eigen::Success) throw DataError("covariance matrix is not positive definite");
    chol_ = llt.matrixL();
  }

  Draw draw(std::mt19937_64& rng) const {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform;
    std::exponential_distribution<double> exponential(1.0);
    Eigen::VectorXd z(config_.p);
    for (Eigen::Index j = 0; j < config_.p; ++j) z[j] = normal(rng);
    Draw out;
    out.x = chol_ * z;
    out.propensity = logistic(out.x.dot(beta_));
    out.d = uniform(rng) < out.propensity ? 1 : 0;
    const double inv_shape = 1.0 / config_.shape;
    out.t0 = config_.lambda0 * std::pow(exponential(rng), inv_shape);
    out.t1 = config_.lambda0 * std::exp(out.x.dot(gamma_)) * std::pow(exponential(rng), inv_shape);
    return out;
  }

 private:
  const SimConfig& config_;
  Eigen::VectorXd beta_;
  Eigen::VectorXd gamma_;
  Eigen::MatrixXd chol_;
};

}  // namespace

void SimConfig::validate() const {
  if (n < 20) throw DataError("config: n must be at least 20");
  if (p < 1) throw DataError("config: p must be at least 1");
  if (!(censor_rate_target >= 0.0 && censor_rate_target < 1.0))
    throw DataError("config: censor_rate must lie in [0, 1)");
  if (replications < 1) throw DataError("config: replications must be at least 1");
  if (beta_nonzero < 0 || beta_nonzero > p) throw DataError("config: beta_nonzero must lie in [0, p]");
  if (gamma_nonzero < 0 || gamma_nonzero > p) throw DataError("config: gamma_nonzero must lie in [0, p]");
  if (!(lambda0 > 0.0)) throw DataError("config: lambda0 must be positive");
  if (!(shape > 0.0)) throw DataError("config: shape must be positive");
  if (!(ar_rho > -1.0 && ar_rho < 1.0)) throw DataError("config: ar_rho must lie in (-1, 1)");
  if (estimators.empty()) throw DataError("config: no estimators requested");
  if (bootstrap < 2) throw DataError("config: bootstrap must be at least 2");
  if (!(level > 0.0 && level < 1.0)) throw DataError("config: level must lie in (0, 1)");
}

Eigen::VectorXd SimConfig::beta() const {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  for (int j = 0; j < beta_nonzero && j < p; ++j) b[j] = (j % 2 == 0 ? 1.0 : -1.0) * beta_magnitude;
  return b;
}

Eigen::VectorXd SimConfig::gamma() const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
  for (int j = 0; j < gamma_nonzero && j < p; ++j) g[j] = gamma_magnitude;
  return g;
}

Eigen::MatrixXd SimConfig::covariance_matrix() const {
  if (covariance == CovarianceKind::identity) return Eigen::MatrixXd::Identity(p, p);
  Eigen::MatrixXd s(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) s(i, j) = std::pow(ar_rho, static_cast<double>(std::abs(i - j)));
  return s;
}

void apply_config_entry(SimConfig& c, const std::string& key, const std::string& value) {
  if (key == "n") c.n = parse_number<Eigen::Index>(key, value);
  else if (key == "p") c.p = parse_number<Eigen::Index>(key, value);
  else if (key == "covariance") {
    if (value == "identity") c.covariance = CovarianceKind::identity;
    else if (value == "ar") c.covariance = CovarianceKind::ar;
    else throw DataError("config: covariance must be 'identity' or 'ar'");
  } else if (key == "ar_rho") c.ar_rho = parse_number<double>(key, value);
  else if (key == "beta_nonzero") c.beta_nonzero = parse_number<int>(key, value);
  else if (key == "beta_magnitude") c.beta_magnitude = parse_number<double>(key, value);
  else if (key == "gamma_nonzero") c.gamma_nonzero = parse_number<int>(key, value);
  else if (key == "gamma_magnitude") c.gamma_magnitude = parse_number<double>(key, value);
  else if (key == "lambda0") c.lambda0 = parse_number<double>(key, value);
  else if (key == "shape") c.shape = parse_number<double>(key, value);
  else if (key == "censor_rate") c.censor_rate_target = parse_number<double>(key, value);
  else if (key == "replications") c.replications = parse_number<int>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "estimators") c.estimators = parse_estimator_list(value);
  else if (key == "bootstrap") c.bootstrap = parse_number<int>(key, value);
  else if (key == "level") c.level = parse_number<double>(key, value);
  else if (key == "record_timing") c.record_timing = parse_bool(key, value);
  else throw DataError("config: unknown key '" + key + "'");
}

SimConfig parse_sim_config(std::istream& in) {
  SimConfig c;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("config line " + std::to_string(line_no) + ": expected key = value");
    apply_config_entry(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  c.validate();
  return c;
}

SimConfig load_sim_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path.string() + "'");
  return parse_sim_config(in);
}

nlohmann::json to_json(const SimConfig& c) {
  nlohmann::json est = nlohmann::json::array();
  for (auto k : canonical(c.estimators)) est.push_back(std::string(estimator_name(k)));
  return {{"n", c.n},
          {"p", c.p},
          {"covariance", c.covariance == CovarianceKind::identity ? "identity" : "ar"},
          {"ar_rho", c.ar_rho},
          {"beta_nonzero", c.beta_nonzero},
          {"beta_magnitude", c.beta_magnitude},
          {"gamma_nonzero", c.gamma_nonzero},
          {"gamma_magnitude", c.gamma_magnitude},
          {"lambda0", c.lambda0},
          {"shape", c.shape},
          {"censor_rate", c.censor_rate_target},
          {"replications", c.replications},
          {"seed", c.seed},
          {"estimators", est},
          {"bootstrap", c.bootstrap},
          {"level", c.level},
          {"record_timing", c.record_timing}};
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "estimators") {
      c.estimators.clear();
      for (const auto& e : value) {
        auto kind = parse_estimator(e.get<std::string>());
        if (!kind) throw DataError("config: unknown estimator in dump");
        c.estimators.push_back(*kind);
      }
    } else if (value.is_string()) {
      apply_config_entry(c, key, value.get<std::string>());
    } else if (value.is_boolean()) {
      c.record_timing = value.get<bool>();
    } else {
      apply_config_entry(c, key, value.dump());
    }
  }
  return c;
}

double calibrate_censoring_rate(const SimConfig& config, int pilot_draws) {
  config.validate();
  if (config.censor_rate_target <= 0.0) return 0.0;
  const Generator gen(config);
  auto rng = make_stream(config.seed, {kPilotStream});
  std::vector<double> times(static_cast<std::size_t>(pilot_draws));
  for (auto& t : times) {
    const Draw d = gen.draw(rng);
    t = d.d == 1 ? d.t1 : d.t0;
  }
  // Expected censored share for exponential censoring: mean_i (1 - exp(-rate T_i)).
  auto share = [&](double rate) {
    double s = 0.0;
    for (double t : times) s += -std::expm1(-rate * t);
    return s / static_cast<double>(times.size());
  };
  double lo = 0.0, hi = 1.0;
  while (share(hi) < config.censor_rate_target) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (share(mid) < config.censor_rate_target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

GeneratedData generate_dataset(const SimConfig& config, std::uint64_t rep_seed) {
  return generate_dataset(config, rep_seed, calibrate_censoring_rate(config));
}

GeneratedData generate_dataset(const SimConfig& config, std::uint64_t rep_seed, double censoring_rate) {
  config.validate();
  const Generator gen(config);
  auto rng = make_stream(rep_seed, {kDataStream});
  std::exponential_distribution<double> censor_dist(censoring_rate > 0.0 ? censoring_rate : 1.0);
  const Eigen::Index n = config.n;
  Eigen::VectorXd y(n);
  Eigen::VectorXi delta(n), d(n);
  Eigen::MatrixXd x(n, config.p);
  SimTruth truth{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Draw draw = gen.draw(rng);
    const double c = censoring_rate > 0.0 ? censor_dist(rng) : std::numeric_limits<double>::infinity();
    const double t = draw.d == 1 ? draw.t1 : draw.t0;
    x.row(i) = draw.x.transpose();
    d[i] = draw.d;
    y[i] = std::min(t, c);
    delta[i] = t <= c ? 1 : 0;
    truth.t0[i] = draw.t0;
    truth.t1[i] = draw.t1;
    truth.censor[i] = c;
    truth.propensity[i] = draw.propensity;
  }
  return GeneratedData{Dataset(std::move(y), std::move(delta), std::move(d), std::move(x)), std::move(truth)};
}

TrueAte true_ate(const SimConfig& config, int draws) {
  config.validate();
  const Eigen::VectorXd gamma = config.gamma();
  // X'gamma ~ N(0, gamma' Sigma gamma).
  const double sd = std::sqrt(gamma.dot(config.covariance_matrix() * gamma));
  const double mean_factor = config.lambda0 * std::tgamma(1.0 + 1.0 / config.shape);
  auto rng = make_stream(config.seed, {kTruthStream});
  std::normal_distribution<double> normal;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double diff = mean_factor * (std::exp(sd * normal(rng)) - 1.0);
    sum += diff;
    sumsq += diff * diff;
  }
  const double nd = static_cast<double>(draws);
  TrueAte out;
  out.ate = sum / nd;
  out.se = std::sqrt(std::max(sumsq / nd - out.ate * out.ate, 0.0) / nd);
  out.mean0 = mean_factor;
  out.mean1 = mean_factor + out.ate;
  return out;
}

std::uint64_t replication_seed(std::uint64_t seed, int rep) noexcept {
  return splitmix64(splitmix64(seed ^ kReplicationStream) + static_cast<std::uint64_t>(rep));
}

ReplicationRecord run_replication(const SimConfig& config, int rep, double censoring_rate) {
  const std::uint64_t seed = replication_seed(config.seed, rep);
  const GeneratedData gen = generate_dataset(config, seed, censoring_rate);
  const Dataset& data = gen.data;
  ReplicationRecord record;
  record.rep = rep;
  record.censoring_fraction = summarize(data).censoring_rate;

  std::optional<CensorModels> km;
  std::string km_error;
  try {
    data.require_estimable();
    km = fit_censoring_models(data);
  } catch (const Error& e) {
    km_error = e.what();
  }

  for (EstimatorKind kind : canonical(config.estimators)) {
    EstimateRecord est;
    const auto start = std::chrono::steady_clock::now();
    try {
      if (!km) throw DegenerateError(km_error);
      ATEResult r;
      if (kind == EstimatorKind::proposed) {
        ProposedOptions opts;
        opts.ate.level = config.level;
        ProposedFit fit = fit_proposed(data, *km, opts);
        r = fit.result;
        est.tau = fit.fit.tau;
        est.beta_hat.assign(fit.fit.beta_hat.data(), fit.fit.beta_hat.data() + fit.fit.beta_hat.size());
        est.active_set = fit.fit.active_set;
      } else {
        BaselineSpec spec{kind, {}};
        spec.options.bootstrap = config.bootstrap;
        spec.options.level = config.level;
        spec.options.seed = splitmix64(seed ^ (0xE57ULL + static_cast<std::uint64_t>(kind)));
        r = run_baseline(spec, data, *km);
      }
      est.ok = std::isfinite(r.ate) && std::isfinite(r.se);
      est.ate = r.ate;
      est.se = r.se;
      est.ci_low = r.ci_low;
      est.ci_high = r.ci_high;
      if (!est.ok) est.error = "non-finite estimate";
    } catch (const Error& e) {
      est.ok = false;
      est.error = e.what();
    }
    est.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    record.estimates.emplace_back(kind, std::move(est));
  }
  return record;
}

std::vector<EstimatorRow> aggregate(const std::vector<ReplicationRecord>& reps, std::vector<EstimatorKind> kinds,
                                    double truth, bool record_timing) {
  std::vector<EstimatorRow> rows;
  for (EstimatorKind kind : canonical(std::move(kinds))) {
    EstimatorRow row;
    row.kind = kind;
    double sum_err = 0.0, sum_sq = 0.0, sum_est = 0.0, sum_est_sq = 0.0, sum_se = 0.0, runtime = 0.0;
    int covered = 0;
    for (const auto& rep : reps) {
      for (const auto& [k, est] : rep.estimates) {
        if (k != kind) continue;
        if (!est.ok) {
          ++row.n_fail;
          continue;
        }
        ++row.n_ok;
        const double err = est.ate - truth;
        sum_err += err;
        sum_sq += err * err;
        sum_est += est.ate;
        sum_est_sq += est.ate * est.ate;
        sum_se += est.se;
        runtime += est.runtime_ms;
        if (est.ci_low <= truth && truth <= est.ci_high) ++covered;
      }
    }
    if (row.n_ok > 0) {
      const double m = row.n_ok;
      row.bias = sum_err / m;
      row.rmse = std::sqrt(sum_sq / m);
      row.coverage_pct = 100.0 * covered / m;
      row.mean_se = sum_se / m;
      const double mean = sum_est / m;
      row.sd_estimate = row.n_ok > 1 ? std::sqrt(std::max(sum_est_sq - m * mean * mean, 0.0) / (m - 1.0)) : 0.0;
      row.mean_runtime_ms = record_timing ? runtime / m : 0.0;
    } else {
      row.bias = row.rmse = row.coverage_pct = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  return rows;
}

SimReport run_study(const SimConfig& config, int workers) {
  config.validate();
  SimReport report;
  report.config = config;
  report.config.estimators = canonical(config.estimators);
  const TrueAte truth = true_ate(config);
  report.true_ate = truth.ate;
  report.true_ate_se = truth.se;
  report.censoring_rate_parameter = calibrate_censoring_rate(config);

  const int reps = config.replications;
  report.replications.resize(static_cast<std::size_t>(reps));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int rep = next++; rep < reps; rep = next++)
      report.replications[static_cast<std::size_t>(rep)] = run_replication(config, rep, report.censoring_rate_parameter);
  };
  const int threads = std::clamp(workers, 1, reps);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  }

  report.rows = aggregate(report.replications, report.config.estimators, report.true_ate, config.record_timing);
  for (const auto& row : report.rows)
    if (row.n_fail > 0.05 * reps) report.excessive_failures = true;
  return report;
}

std::string display_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::proposed: return "Proposed Method";
    case EstimatorKind::naive_ipw: return "IPW";
    case EstimatorKind::cbps_unpenalized: return "CBPS (unpenalized)";
    case EstimatorKind::aipw: return "AIPW";
  }
  return "unknown";
}

void write_report_csv(const SimReport& report, std::ostream& out) {
  out << "estimator,bias,rmse,coverage_pct,n_fail,mean_runtime_ms\n";
  for (const auto& row : report.rows) {
    out << estimator_name(row.kind) << ',' << format_double(row.bias) << ',' << format_double(row.rmse) << ','
        << format_double(row.coverage_pct) << ',' << row.n_fail << ','
        << (report.config.record_timing ? format_double(row.mean_runtime_ms) : std::string("NA")) << '\n';
  }
}

nlohmann::json report_to_json(const SimReport& report) {
  using nlohmann::json;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"estimator", std::string(estimator_name(r.kind))},
                    {"bias", num(r.bias)},
                    {"rmse", num(r.rmse)},
                    {"coverage_pct", num(r.coverage_pct)},
                    {"mean_se", num(r.mean_se)},
                    {"sd_estimate", num(r.sd_estimate)},
                    {"n_ok", r.n_ok},
                    {"n_fail", r.n_fail},
                    {"mean_runtime_ms", report.config.record_timing ? num(r.mean_runtime_ms) : json(nullptr)}});
  }
  json reps = json::array();
  for (const auto& rep : report.replications) {
    json estimates = json::object();
    for (const auto& [kind, e] : rep.estimates) {
      json entry = {{"ok", e.ok}};
      if (e.ok) {
        entry["ate"] = e.ate;
        entry["se"] = e.se;
        entry["ci_low"] = e.ci_low;
        entry["ci_high"] = e.ci_high;
      } else {
        entry["error"] = e.error;
      }
      if (report.config.record_timing) entry["runtime_ms"] = e.runtime_ms;
      if (e.tau) {
        entry["tau"] = *e.tau;
        entry["beta_hat"] = e.beta_hat;
        entry["active_set"] = e.active_set;
      }
      estimates[std::string(estimator_name(kind))] = std::move(entry);
    }
    reps.push_back({{"rep", rep.rep}, {"censoring_fraction", rep.censoring_fraction}, {"estimates", estimates}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"config", to_json(report.config)},
          {"true_ate", report.true_ate},
          {"true_ate_se", report.true_ate_se},
          {"censoring_rate_parameter", report.censoring_rate_parameter},
          {"excessive_failures", report.excessive_failures},
          {"rows", rows},
          {"replications", reps}};
}

std::string render_report(const nlohmann::json& dump) {
  if (!dump.is_object() || !dump.contains("schema_version")) throw DataError("report: missing schema_version");
  const auto& version = dump.at("schema_version");
  if (!version.is_number_integer() || version.get<int>() != kReportSchemaVersion)
    throw DataError("report: unsupported schema version " + version.dump());
  if (!dump.contains("replications") || !dump.at("replications").is_array() || dump.at("replications").empty())
    throw DataError("report: the replication list is empty");
  if (!dump.contains("rows") || !dump.at("rows").is_array()) throw DataError("report: missing estimator rows");

  auto fixed = [](const nlohmann::json& v, int digits) {
    if (!v.is_number()) return std::string("NA");
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v.get<double>();
    return s.str();
  };
  std::ostringstream out;
  const auto& config = dump.at("config");
  out << "Comparison of ATE estimators (" << dump.at("replications").size() << " replications, n = "
      << config.at("n").dump() << ", p = " << config.at("p").dump() << ")\n";
  out << "True ATE: " << fixed(dump.at("true_ate"), 4) << " (MC se " << fixed(dump.at("true_ate_se"), 4) << ")\n";
  out << std::left << std::setw(22) << "Method" << std::right << std::setw(10) << "Bias" << std::setw(10) << "RMSE"
      << std::setw(14) << "Coverage (%)" << std::setw(8) << "Fail" << '\n';
  for (const auto& row : dump.at("rows")) {
    const auto kind = parse_estimator(row.at("estimator").get<std::string>());
    if (!kind) throw DataError("report: unknown estimator " + row.at("estimator").dump());
    out << std::left << std::setw(22) << display_name(*kind) << std::right << std::setw(10)
        << fixed(row.at("bias"), 4) << std::setw(10) << fixed(row.at("rmse"), 4) << std::setw(14)
        << fixed(row.at("coverage_pct"), 1) << std::setw(8) << row.at("n_fail").dump() << '\n';
  }
  return out.str();
}

}  // namespace survcbps
