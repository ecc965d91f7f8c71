#pragma once

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

#include "irtci/data.hpp"
#include "irtci/impute.hpp"

namespace irtci {

struct CategoryScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Eigen::Index support = 0;  ///< true count among scored cells
};

/// Scores over imputed cells of one column. F1 with precision + recall = 0
/// is 0. Macro averages only categories present in the truth.
struct ImputationReport {
  std::string column;
  std::vector<std::string> labels;
  Eigen::MatrixXi confusion;  ///< rows: truth, cols: imputed
  std::vector<CategoryScore> per_category;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  Eigen::Index cell_count = 0;
  std::vector<int> absent_categories;  ///< excluded from the macro mean

  /// Positive-class F1 for binary columns, macro-F1 otherwise.
  double summary_f1() const;
};

ImputationReport score_codes(std::span<const int> truth, std::span<const int> imputed, int categories);

/// Report for one column over the masked cells of that column.
ImputationReport score(const CategoricalDataset& truth, const ImputedDataset& imputed, std::string_view column);

/// One report per column that has masked cells, in column order.
std::vector<ImputationReport> score(const CategoricalDataset& truth, const ImputedDataset& imputed);

/// Baseline that fills every masked cell with the most frequent observed
/// category of its column (lowest code on ties).
ImputedDataset majority_impute(const CategoricalDataset& incomplete, std::span<const Eigen::Index> columns);

std::string format_report(const ImputationReport& report);
std::string format_report_csv(const ImputationReport& report);

}  // namespace irtci
