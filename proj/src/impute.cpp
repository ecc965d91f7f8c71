#include <algorithm>
#include <fstream>

#include "irtci/impute.hpp"

namespace irtci {

int impute_binary_cell(double p1) { return p1 < 0.5 ? 0 : 1; }

CellImputation impute_cell(double theta, const ItemModel& item) {
  CellImputation out;
  out.probabilities = category_probabilities(theta, item.parameters);
  if (std::holds_alternative<Binary2PL>(item.parameters)) {
    out.code = impute_binary_cell(out.probabilities[1]);
  } else {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < out.probabilities.size(); ++k) {
      if (out.probabilities[k] > out.probabilities[best]) best = k;
    }
    out.code = static_cast<int>(best);
  }
  return out;
}

ImputedDataset impute_dataset(const CategoricalDataset& data, const FittedModel& model) {
  // Bind items to columns; discretized continuous features join the pattern
  // through their stored cut points.
  const CategoricalDataset prepared = apply_discretization(data, model.discretizations);
  const CodeMatrix responses = response_matrix(prepared, model.items);

  std::vector<Eigen::Index> columns;
  std::vector<bool> imputable;
  for (const auto& item : model.items) {
    const auto col = prepared.index_of(item.feature);
    columns.push_back(col);
    imputable.push_back(data.schema(col).is_categorical());
  }

  ImputedDataset out;
  out.completed = data;
  out.theta.reserve(static_cast<std::size_t>(data.rows()));
  std::vector<int> pattern(model.items.size());
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    bool any_missing = false;
    bool any_observed = false;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      pattern[i] = responses(r, static_cast<Eigen::Index>(i));
      if (pattern[i] == kMissing) {
        any_missing = any_missing || imputable[i];
      } else {
        any_observed = true;
      }
    }
    const ThetaEstimate theta = any_observed ? eap_score(pattern, model) : ThetaEstimate{0.0, 1.0};
    out.theta.push_back(theta);
    if (!any_missing) continue;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      if (pattern[i] != kMissing || !imputable[i]) continue;
      auto cell = impute_cell(theta.eap_mean, model.items[i]);
      out.completed.set_code(r, columns[i], cell.code);
      out.mask.push_back({r, columns[i]});
      out.probabilities.push_back(std::move(cell.probabilities));
    }
  }
  // row-major order, columns ascending within a row
  std::vector<std::size_t> order(out.mask.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) {
    const auto& a = out.mask[lhs];
    const auto& b = out.mask[rhs];
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<CellIndex> mask;
  std::vector<Eigen::VectorXd> probabilities;
  for (auto k : order) {
    mask.push_back(out.mask[k]);
    probabilities.push_back(std::move(out.probabilities[k]));
  }
  out.mask = std::move(mask);
  out.probabilities = std::move(probabilities);
  return out;
}

std::string format_probability_sidecar(const ImputedDataset& imputed) {
  Eigen::Index width = 0;
  for (const auto& p : imputed.probabilities) width = std::max(width, p.size());
  std::string out = "case,column,imputed";
  for (Eigen::Index k = 0; k < width; ++k) out += ",p_" + std::to_string(k);
  out += '\n';
  for (std::size_t n = 0; n < imputed.mask.size(); ++n) {
    const auto [row, col] = imputed.mask[n];
    const auto& schema = imputed.completed.schema(col);
    out += std::to_string(row) + ',' + csv_escape(schema.name) + ',' +
           csv_escape(schema.labels[static_cast<std::size_t>(imputed.completed.code(row, col))]);
    const auto& p = imputed.probabilities[n];
    for (Eigen::Index k = 0; k < width; ++k) out += ',' + (k < p.size() ? format_double(p[k]) : std::string());
    out += '\n';
  }
  return out;
}

void write_probability_sidecar(const ImputedDataset& imputed, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << format_probability_sidecar(imputed);
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace irtci
