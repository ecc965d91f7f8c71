#include <algorithm>
#include <cstdio>

#include "irtci/bench.hpp"
#include "irtci/impute.hpp"

namespace irtci {

std::uint64_t bench_row_seed(std::uint64_t seed, std::size_t index) {
  return seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(index) + 1;
}

Eigen::MatrixXd little_view(const CategoricalDataset& data) {
  const auto features = data.columns_with_role(ColumnRole::Feature);
  return data.numeric_view(features);
}

BenchReport run_bench(const CategoricalDataset& complete, const BenchConfig& config) {
  const auto target = complete.index_of(config.target);
  const auto& target_schema = complete.schema(target);
  if (!target_schema.is_categorical() || target_schema.role != ColumnRole::Feature) {
    throw Error(ErrorCode::InvalidArgument, "bench target must be a categorical feature column");
  }
  if (complete.missing_count(target) > 0) {
    throw Error(ErrorCode::AlreadyMissing, "bench needs a complete target column");
  }
  if (config.fractions.empty() || config.mechanisms.empty()) {
    throw Error(ErrorCode::InvalidArgument, "bench needs at least one fraction and one mechanism");
  }

  BenchReport report;
  report.config = config;
  std::size_t index = 0;
  for (const auto mechanism : config.mechanisms) {
    for (const double fraction : config.fractions) {
      BenchRow row;
      row.mechanism = mechanism;
      row.fraction = fraction;
      row.seed = bench_row_seed(config.seed, index++);
      MissingnessSpec spec;
      spec.mechanism = mechanism;
      spec.target = config.target;
      spec.fraction = fraction;
      spec.conditional = config.conditional;
      spec.direction = config.direction;
      spec.seed = row.seed;
      auto injected = inject(complete, spec);
      row.missing = static_cast<Eigen::Index>(injected.rows.size());
      row.warning = injected.warning;
      row.little = littles_test(little_view(injected.data));

      if (config.impute) {
        const FittedModel model = fit(injected.data, config.fit);
        row.converged = model.converged;
        row.iterations = model.iterations;
        const ImputedDataset imputed = impute_dataset(injected.data, model);
        row.irt = score(complete, imputed, config.target);
        const Eigen::Index cols[] = {target};
        row.baseline = score(complete, majority_impute(injected.data, cols), config.target);
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

namespace {

std::string fixed(double value, int digits) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*f", digits, value);
  return buffer;
}

}  // namespace

std::string format_bench_report(const BenchReport& report) {
  const auto& config = report.config;
  std::string out = "# irtci bench\n";
  out += "target: " + config.target + "\n";
  if (!config.conditional.empty()) {
    out += "conditional: " + config.conditional + " (" + std::string(to_string(config.direction)) + ")\n";
  }
  out += "seed: " + std::to_string(config.seed) + "\n";
  out += "fit: grid " + std::to_string(config.fit.grid_size) + " on [" + format_double(config.fit.grid_lo) + ", " +
         format_double(config.fit.grid_hi) + "], max_iter " + std::to_string(config.fit.max_iterations) + ", tol " +
         format_double(config.fit.tolerance) + ", seed " + std::to_string(config.fit.seed) + "\n";
  out += "\n## missingness and Little's test\n";
  out += "mechanism,percent_missing,instances_missing,little_stat,df,p_value,patterns\n";
  for (const auto& row : report.rows) {
    out += std::string(to_string(row.mechanism)) + ',' + fixed(100.0 * row.fraction, 0) + ',' +
           std::to_string(row.missing) + ',' + fixed(row.little.statistic, 3) + ',' + std::to_string(row.little.df) +
           ',' + fixed(row.little.p_value, 3) + ',' + std::to_string(row.little.pattern_count) + '\n';
  }
  const bool any_imputation = std::any_of(report.rows.begin(), report.rows.end(), [](const BenchRow& r) { return r.irt.has_value(); });
  if (any_imputation) {
    out += "\n## imputed-cell F1\n";
    out += "mechanism,percent_missing,cells,f1,micro_f1,macro_f1,baseline_f1,baseline_macro_f1,converged,iterations\n";
    for (const auto& row : report.rows) {
      if (!row.irt) continue;
      out += std::string(to_string(row.mechanism)) + ',' + fixed(100.0 * row.fraction, 0) + ',' +
             std::to_string(row.irt->cell_count) + ',' + fixed(row.irt->summary_f1(), 4) + ',' +
             fixed(row.irt->micro_f1, 4) + ',' + fixed(row.irt->macro_f1, 4) + ',' +
             fixed(row.baseline->summary_f1(), 4) + ',' + fixed(row.baseline->macro_f1, 4) + ',' +
             (row.converged ? "yes" : "no") + ',' + std::to_string(row.iterations) + '\n';
    }
  }
  for (const auto& row : report.rows) {
    if (row.warning) out += "warning: " + *row.warning + "\n";
  }
  return out;
}

}  // namespace irtci
