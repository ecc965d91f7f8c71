#include <sstream>

#include "irtci/eval.hpp"

namespace irtci {

double ImputationReport::summary_f1() const {
  if (per_category.size() == 2) return per_category[1].f1;
  return macro_f1;
}

ImputationReport score_codes(std::span<const int> truth, std::span<const int> imputed, int categories) {
  if (truth.size() != imputed.size()) throw Error(ErrorCode::InvalidArgument, "truth and imputed lengths differ");
  if (categories < 2) throw Error(ErrorCode::InvalidArgument, "need at least two categories");
  ImputationReport report;
  report.confusion = Eigen::MatrixXi::Zero(categories, categories);
  for (std::size_t n = 0; n < truth.size(); ++n) {
    if (truth[n] == kMissing) throw Error(ErrorCode::MissingTruth, "truth is missing at an imputed cell");
    if (truth[n] < 0 || truth[n] >= categories || imputed[n] < 0 || imputed[n] >= categories) {
      throw Error(ErrorCode::CodeOutOfRange, "code outside the column's categories");
    }
    ++report.confusion(truth[n], imputed[n]);
  }
  report.cell_count = static_cast<Eigen::Index>(truth.size());

  double macro_sum = 0.0;
  int present = 0;
  for (int k = 0; k < categories; ++k) {
    CategoryScore s;
    const double tp = report.confusion(k, k);
    const double predicted = report.confusion.col(k).sum();
    s.support = report.confusion.row(k).sum();
    s.precision = predicted > 0.0 ? tp / predicted : 0.0;
    s.recall = s.support > 0 ? tp / static_cast<double>(s.support) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    if (s.support > 0) {
      macro_sum += s.f1;
      ++present;
    } else {
      report.absent_categories.push_back(k);
    }
    report.per_category.push_back(s);
  }
  report.macro_f1 = present > 0 ? macro_sum / present : 0.0;
  report.micro_f1 =
      report.cell_count > 0 ? static_cast<double>(report.confusion.trace()) / static_cast<double>(report.cell_count) : 0.0;
  return report;
}

ImputationReport score(const CategoricalDataset& truth, const ImputedDataset& imputed, std::string_view column) {
  const auto& completed = imputed.completed;
  if (truth.schemas() != completed.schemas() || truth.rows() != completed.rows()) {
    throw Error(ErrorCode::SchemaMismatch, "truth and imputed datasets do not share a schema");
  }
  const auto col = truth.index_of(column);
  const auto& schema = truth.schema(col);
  if (!schema.is_categorical()) throw Error(ErrorCode::SchemaMismatch, "column " + schema.name + " is not categorical");
  std::vector<int> t;
  std::vector<int> p;
  for (const auto& cell : imputed.mask) {
    if (cell.col != col) continue;
    t.push_back(truth.code(cell.row, cell.col));
    p.push_back(completed.code(cell.row, cell.col));
  }
  auto report = score_codes(t, p, *schema.arity);
  report.column = schema.name;
  report.labels = schema.labels;
  return report;
}

std::vector<ImputationReport> score(const CategoricalDataset& truth, const ImputedDataset& imputed) {
  std::vector<bool> touched(static_cast<std::size_t>(truth.cols()), false);
  for (const auto& cell : imputed.mask) touched[static_cast<std::size_t>(cell.col)] = true;
  std::vector<ImputationReport> reports;
  for (Eigen::Index c = 0; c < truth.cols(); ++c) {
    if (touched[static_cast<std::size_t>(c)]) reports.push_back(score(truth, imputed, truth.schema(c).name));
  }
  return reports;
}

ImputedDataset majority_impute(const CategoricalDataset& incomplete, std::span<const Eigen::Index> columns) {
  ImputedDataset out;
  out.completed = incomplete;
  std::vector<int> fill(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const auto& schema = incomplete.schema(columns[j]);
    if (!schema.is_categorical()) throw Error(ErrorCode::SchemaMismatch, "column " + schema.name + " is not categorical");
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(*schema.arity);
    for (Eigen::Index r = 0; r < incomplete.rows(); ++r) {
      if (!incomplete.is_missing(r, columns[j])) ++counts[incomplete.code(r, columns[j])];
    }
    int best = 0;
    for (int k = 1; k < counts.size(); ++k) {
      if (counts[k] > counts[best]) best = k;
    }
    fill[j] = best;
  }
  for (Eigen::Index r = 0; r < incomplete.rows(); ++r) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (!incomplete.is_missing(r, columns[j])) continue;
      out.completed.set_code(r, columns[j], fill[j]);
      out.mask.push_back({r, columns[j]});
      Eigen::VectorXd indicator = Eigen::VectorXd::Zero(*incomplete.schema(columns[j]).arity);
      indicator[fill[j]] = 1.0;
      out.probabilities.push_back(std::move(indicator));
    }
  }
  return out;
}

std::string format_report(const ImputationReport& report) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "column: " << report.column << '\n';
  out << "imputed cells: " << report.cell_count << '\n';
  out << "category  support  precision  recall  f1\n";
  for (std::size_t k = 0; k < report.per_category.size(); ++k) {
    const auto& s = report.per_category[k];
    const std::string label = k < report.labels.size() ? report.labels[k] : std::to_string(k);
    out << label << "  " << s.support << "  " << s.precision << "  " << s.recall << "  " << s.f1 << '\n';
  }
  out << "micro_f1: " << report.micro_f1 << '\n';
  out << "macro_f1: " << report.macro_f1 << '\n';
  out << "summary_f1 (" << (report.per_category.size() == 2 ? "positive class" : "macro") << "): " << report.summary_f1()
      << '\n';
  if (!report.absent_categories.empty()) {
    out << "absent from truth (excluded from macro):";
    for (int k : report.absent_categories) {
      out << ' ' << (static_cast<std::size_t>(k) < report.labels.size() ? report.labels[static_cast<std::size_t>(k)]
                                                                         : std::to_string(k));
    }
    out << '\n';
  }
  out << "confusion (rows truth, columns imputed):\n" << report.confusion << '\n';
  return out.str();
}

std::string format_report_csv(const ImputationReport& report) {
  std::string out = "column,category,support,precision,recall,f1\n";
  for (std::size_t k = 0; k < report.per_category.size(); ++k) {
    const auto& s = report.per_category[k];
    const std::string label = k < report.labels.size() ? report.labels[k] : std::to_string(k);
    out += csv_escape(report.column) + ',' + csv_escape(label) + ',' + std::to_string(s.support) + ',' +
           format_double(s.precision) + ',' + format_double(s.recall) + ',' + format_double(s.f1) + '\n';
  }
  out += csv_escape(report.column) + ",__micro__," + std::to_string(report.cell_count) + ",,," +
         format_double(report.micro_f1) + '\n';
  out += csv_escape(report.column) + ",__macro__," + std::to_string(report.cell_count) + ",,," +
         format_double(report.macro_f1) + '\n';
  return out;
}

}  // namespace irtci
