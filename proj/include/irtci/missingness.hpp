#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "irtci/data.hpp"

namespace irtci {

enum class Mechanism { MCAR, MAR };
enum class Direction { Top, Bottom };

std::string_view to_string(Mechanism mechanism);
std::string_view to_string(Direction direction);
Mechanism parse_mechanism(std::string_view text);
Direction parse_direction(std::string_view text);

struct MissingnessSpec {
  Mechanism mechanism = Mechanism::MCAR;
  std::string target;
  double fraction = 0.1;
  std::string conditional;  ///< MAR only
  Direction direction = Direction::Top;
  std::uint64_t seed = 1;  ///< MCAR only

  void validate() const;
};

struct Injection {
  CategoricalDataset data;
  std::vector<Eigen::Index> rows;  ///< rows whose target cell was removed, ascending
  std::optional<std::string> warning;
};

/// floor(fraction * N), guarded against representation error.
Eigen::Index injection_count(double fraction, Eigen::Index rows);

/// Removes floor(fraction * N) target cells at rows drawn uniformly without
/// replacement from a generator seeded with `seed`.
Injection inject_mcar(const CategoricalDataset& data, std::string_view target, double fraction, std::uint64_t seed);

/// Sorts rows by the conditional column (descending for Top, ties in original
/// order) and removes the target cell of the first floor(fraction * N) rows.
Injection inject_mar(const CategoricalDataset& data, std::string_view target, std::string_view conditional,
                     double fraction, Direction direction = Direction::Top);

Injection inject(const CategoricalDataset& data, const MissingnessSpec& spec);

struct LittleTestResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  int pattern_count = 0;
  bool ridge_used = false;
};

struct LittleOptions {
  double tolerance = 1e-6;
  int max_iterations = 200;
};

/// Maximum-likelihood mean and covariance of multivariate-normal data with
/// NaN holes, by EM.
struct NormalMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  int iterations = 0;
};
NormalMoments normal_em(const Eigen::MatrixXd& data, const LittleOptions& options = {});

/// Little's chi-square test of MCAR on a numeric view (NaN = missing).
LittleTestResult littles_test(const Eigen::MatrixXd& data, const LittleOptions& options = {});

/// Upper tail of the chi-square distribution.
double chi_square_survival(double statistic, double df);

}  // namespace irtci
