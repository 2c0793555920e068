#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace survcbps {

enum class Arm : int { control = 0, treated = 1 };

inline constexpr int arm_value(Arm arm) noexcept { return static_cast<int>(arm); }

// One subject: observed time min(T, C), event flag, treatment, covariates.
struct ObservedRecord {
  double y = 0.0;
  int delta = 0;
  int d = 0;
  Eigen::VectorXd x;
};

// Column-major storage of n right-censored observations with p covariates.
// The constructor enforces the per-record invariants; estimability of the full
// pipeline (n >= 2, an observed event in each arm) is checked separately by
// require_estimable() so that small fixtures can still be built.
class Dataset {
 public:
  Dataset(Eigen::VectorXd y, Eigen::VectorXi delta, Eigen::VectorXi d, Eigen::MatrixXd x,
          std::vector<std::string> covariate_names = {});

  static Dataset from_records(std::span<const ObservedRecord> records,
                              std::vector<std::string> covariate_names = {});

  Eigen::Index n() const noexcept { return y_.size(); }
  Eigen::Index p() const noexcept { return x_.cols(); }

  const Eigen::VectorXd& y() const noexcept { return y_; }
  const Eigen::VectorXi& delta() const noexcept { return delta_; }
  const Eigen::VectorXi& d() const noexcept { return d_; }
  const Eigen::MatrixXd& x() const noexcept { return x_; }
  const std::vector<std::string>& covariate_names() const noexcept { return names_; }

  ObservedRecord record(Eigen::Index i) const;

  // Number of rows in `arm`, and of those with an observed event.
  Eigen::Index arm_size(Arm arm) const;
  Eigen::Index arm_events(Arm arm) const;

  // Throws DegenerateError unless n >= 2 and both arms contain an event.
  void require_estimable() const;

  // Rows in the given order (duplicates allowed, e.g. bootstrap resamples).
  Dataset select_rows(std::span<const Eigen::Index> rows) const;

  // Same outcomes with a replaced covariate matrix of identical shape.
  Dataset with_covariates(Eigen::MatrixXd x) const;

  friend bool operator==(const Dataset& a, const Dataset& b);

 private:
  Eigen::VectorXd y_;
  Eigen::VectorXi delta_;
  Eigen::VectorXi d_;
  Eigen::MatrixXd x_;
  std::vector<std::string> names_;
};

// Column mapping for CSV input. An empty `x` selects every column named
// x1, x2, ..., xp (which must be contiguous from x1).
struct CsvSchema {
  std::string y = "y";
  std::string delta = "delta";
  std::string d = "d";
  std::vector<std::string> x;
};

Dataset parse_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
Dataset parse_csv(std::istream& in, const CsvSchema& schema = {});

// Writes y, delta, d followed by the covariate columns, using the dataset's
// covariate names (x1..xp when unnamed). Values use the shortest round-trip
// representation so that parse_csv(write_csv(data)) == data.
void write_csv(const Dataset& data, const std::filesystem::path& path);
void write_csv(const Dataset& data, std::ostream& out);

struct DatasetSummary {
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  double treated_fraction = 0.0;
  double censoring_rate = 0.0;
  double censoring_rate_treated = 0.0;
  double censoring_rate_control = 0.0;
};

DatasetSummary summarize(const Dataset& data);

}  // namespace survcbps
