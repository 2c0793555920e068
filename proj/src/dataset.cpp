#include "survcbps/dataset.hpp"

#include "survcbps/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace survcbps {

namespace {

std::vector<std::string> default_names(Eigen::Index p) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

bool is_binary(int v) { return v == 0 || v == 1; }

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(b, e - b + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string_view view(line);
  std::size_t start = 0;
  while (true) {
    auto comma = view.find(',', start);
    cells.push_back(trim(view.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                            : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
  if (cell.empty()) throw ParseError(row, column, "missing value");
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw ParseError(row, column, "non-numeric value '" + cell + "'");
  if (!std::isfinite(value)) throw ParseError(row, column, "non-finite value '" + cell + "'");
  return value;
}

int parse_flag(const std::string& cell, std::size_t row, const std::string& column) {
  double v = parse_cell(cell, row, column);
  if (v != 0.0 && v != 1.0) throw ParseError(row, column, "expected 0 or 1, got '" + cell + "'");
  return static_cast<int>(v);
}

}  // namespace

Dataset::Dataset(Eigen::VectorXd y, Eigen::VectorXi delta, Eigen::VectorXi d, Eigen::MatrixXd x,
                 std::vector<std::string> covariate_names)
    : y_(std::move(y)), delta_(std::move(delta)), d_(std::move(d)), x_(std::move(x)),
      names_(std::move(covariate_names)) {
  const Eigen::Index n = y_.size();
  if (delta_.size() != n || d_.size() != n || x_.rows() != n)
    throw DataError("dataset columns have inconsistent lengths");
  if (names_.empty()) names_ = default_names(x_.cols());
  if (static_cast<Eigen::Index>(names_.size()) != x_.cols())
    throw DataError("covariate name count does not match covariate dimension");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(y_[i]) || y_[i] < 0.0)
      throw DataError("record " + std::to_string(i + 1) + ": y must be finite and nonnegative");
    if (!is_binary(delta_[i])) throw DataError("record " + std::to_string(i + 1) + ": delta must be 0 or 1");
    if (!is_binary(d_[i])) throw DataError("record " + std::to_string(i + 1) + ": d must be 0 or 1");
  }
  if (!x_.allFinite()) throw DataError("covariates must be finite");
}

Dataset Dataset::from_records(std::span<const ObservedRecord> records,
                              std::vector<std::string> covariate_names) {
  const auto n = static_cast<Eigen::Index>(records.size());
  const Eigen::Index p = records.empty() ? static_cast<Eigen::Index>(covariate_names.size())
                                         : records.front().x.size();
  Eigen::VectorXd y(n);
  Eigen::VectorXi delta(n), d(n);
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    if (r.x.size() != p) throw DataError("record " + std::to_string(i + 1) + " has the wrong covariate dimension");
    y[i] = r.y;
    delta[i] = r.delta;
    d[i] = r.d;
    x.row(i) = r.x.transpose();
  }
  return Dataset(std::move(y), std::move(delta), std::move(d), std::move(x), std::move(covariate_names));
}

ObservedRecord Dataset::record(Eigen::Index i) const {
  return ObservedRecord{y_[i], delta_[i], d_[i], x_.row(i).transpose()};
}

Eigen::Index Dataset::arm_size(Arm arm) const {
  return (d_.array() == arm_value(arm)).count();
}

Eigen::Index Dataset::arm_events(Arm arm) const {
  return ((d_.array() == arm_value(arm)) && (delta_.array() == 1)).count();
}

void Dataset::require_estimable() const {
  if (n() < 2) throw DegenerateError("at least two records are required");
  if (arm_events(Arm::treated) == 0) throw DegenerateError("treated arm has no observed events");
  if (arm_events(Arm::control) == 0) throw DegenerateError("control arm has no observed events");
}

Dataset Dataset::select_rows(std::span<const Eigen::Index> rows) const {
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd y(m);
  Eigen::VectorXi delta(m), d(m);
  Eigen::MatrixXd x(m, p());
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index i = rows[static_cast<std::size_t>(k)];
    y[k] = y_[i];
    delta[k] = delta_[i];
    d[k] = d_[i];
    x.row(k) = x_.row(i);
  }
  return Dataset(std::move(y), std::move(delta), std::move(d), std::move(x), names_);
}

Dataset Dataset::with_covariates(Eigen::MatrixXd x) const {
  if (x.rows() != n() || x.cols() != p()) throw DataError("replacement covariates have the wrong shape");
  return Dataset(y_, delta_, d_, std::move(x), names_);
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.y_.size() == b.y_.size() && a.x_.cols() == b.x_.cols() && a.y_ == b.y_ &&
         a.delta_ == b.delta_ && a.d_ == b.d_ && a.x_ == b.x_ && a.names_ == b.names_;
}

Dataset parse_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_csv(in, schema);
}

Dataset parse_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty CSV input (no header row)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_line(line);

  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!index.emplace(header[c], c).second) throw SchemaError("duplicate column '" + header[c] + "'");
  }
  auto column = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw SchemaError("missing column '" + name + "'");
    return it->second;
  };

  const std::size_t y_col = column(schema.y);
  const std::size_t delta_col = column(schema.delta);
  const std::size_t d_col = column(schema.d);

  std::vector<std::string> x_names = schema.x;
  if (x_names.empty()) {
    for (std::size_t j = 1;; ++j) {
      std::string name = "x" + std::to_string(j);
      if (!index.contains(name)) break;
      x_names.push_back(std::move(name));
    }
    for (const auto& h : header) {
      if (h.size() > 1 && h[0] == 'x' &&
          std::all_of(h.begin() + 1, h.end(), [](unsigned char ch) { return std::isdigit(ch); }) &&
          std::find(x_names.begin(), x_names.end(), h) == x_names.end())
        throw SchemaError("covariate column '" + h + "' is not part of a contiguous x1..xp run");
    }
  }
  std::vector<std::size_t> x_cols;
  x_cols.reserve(x_names.size());
  for (const auto& name : x_names) x_cols.push_back(column(name));

  std::vector<double> ys;
  std::vector<int> deltas, ds;
  std::vector<double> xs;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    auto cells = split_line(line);
    if (cells.size() != header.size())
      throw ParseError(row, "*", "expected " + std::to_string(header.size()) + " cells, found " +
                                     std::to_string(cells.size()));
    double y = parse_cell(cells[y_col], row, schema.y);
    if (y < 0.0) throw ParseError(row, schema.y, "negative observed time");
    ys.push_back(y);
    deltas.push_back(parse_flag(cells[delta_col], row, schema.delta));
    ds.push_back(parse_flag(cells[d_col], row, schema.d));
    for (std::size_t j = 0; j < x_cols.size(); ++j) xs.push_back(parse_cell(cells[x_cols[j]], row, x_names[j]));
  }

  const auto n = static_cast<Eigen::Index>(ys.size());
  const auto p = static_cast<Eigen::Index>(x_cols.size());
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = xs[static_cast<std::size_t>(i * p + j)];

  Dataset data(Eigen::Map<Eigen::VectorXd>(ys.data(), n), Eigen::Map<Eigen::VectorXi>(deltas.data(), n),
               Eigen::Map<Eigen::VectorXi>(ds.data(), n), std::move(x), std::move(x_names));
  data.require_estimable();
  return data;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_csv(data, out);
}

void write_csv(const Dataset& data, std::ostream& out) {
  auto fmt = [](double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
  };
  out << "y,delta,d";
  for (const auto& name : data.covariate_names()) out << ',' << name;
  out << '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    out << fmt(data.y()[i]) << ',' << data.delta()[i] << ',' << data.d()[i];
    for (Eigen::Index j = 0; j < data.p(); ++j) out << ',' << fmt(data.x()(i, j));
    out << '\n';
  }
}

DatasetSummary summarize(const Dataset& data) {
  DatasetSummary s;
  s.n = data.n();
  s.p = data.p();
  if (s.n == 0) return s;
  const auto nd = static_cast<double>(s.n);
  const auto treated = data.arm_size(Arm::treated);
  const auto control = s.n - treated;
  const auto censored = (data.delta().array() == 0).count();
  const auto censored_treated = treated - data.arm_events(Arm::treated);
  const auto censored_control = control - data.arm_events(Arm::control);
  s.treated_fraction = static_cast<double>(treated) / nd;
  s.censoring_rate = static_cast<double>(censored) / nd;
  s.censoring_rate_treated = treated > 0 ? static_cast<double>(censored_treated) / static_cast<double>(treated) : 0.0;
  s.censoring_rate_control = control > 0 ? static_cast<double>(censored_control) / static_cast<double>(control) : 0.0;
  return s;
}

}  // namespace survcbps
