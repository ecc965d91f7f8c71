#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irtci/data.hpp"
#include "irtci/estimation.hpp"
#include "irtci/eval.hpp"
#include "irtci/missingness.hpp"

namespace irtci {

struct BenchConfig {
  std::string target;
  std::string conditional;  ///< required when MAR is among the mechanisms
  std::vector<Mechanism> mechanisms{Mechanism::MAR, Mechanism::MCAR};
  std::vector<double> fractions{0.05, 0.10, 0.30, 0.50};
  Direction direction = Direction::Top;
  std::uint64_t seed = 1;
  FitConfig fit;
  /// When false, only injection and Little's test run.
  bool impute = true;
};

struct BenchRow {
  Mechanism mechanism = Mechanism::MCAR;
  double fraction = 0.0;
  std::uint64_t seed = 0;  ///< injection seed (MCAR)
  Eigen::Index missing = 0;
  LittleTestResult little;
  std::optional<ImputationReport> irt;
  std::optional<ImputationReport> baseline;
  bool converged = false;
  int iterations = 0;
  std::optional<std::string> warning;
};

struct BenchReport {
  BenchConfig config;
  std::vector<BenchRow> rows;
};

/// Injection seed for row `index` of a bench run.
std::uint64_t bench_row_seed(std::uint64_t seed, std::size_t index);

/// Numeric view used for Little's test: every feature column.
Eigen::MatrixXd little_view(const CategoricalDataset& data);

/// For each mechanism x fraction: inject into the target, run Little's test,
/// fit, impute and score the imputed target cells against the complete data.
BenchReport run_bench(const CategoricalDataset& complete, const BenchConfig& config);

std::string format_bench_report(const BenchReport& report);

}  // namespace irtci
