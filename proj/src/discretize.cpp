#include <algorithm>
#include <cmath>
#include <limits>

#include "irtci/data.hpp"

namespace irtci {

int DiscretizationMap::apply(double value) const {
  if (std::isnan(value)) return kMissing;
  return static_cast<int>(std::upper_bound(cut_points.begin(), cut_points.end(), value) - cut_points.begin());
}

double quantile_type7(std::span<const double> sorted, double probability) {
  if (sorted.empty()) throw Error(ErrorCode::InvalidArgument, "quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * probability;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Discretized discretize(std::span<const double> values, int bins, BinStrategy strategy, std::string column) {
  if (bins < 2) throw Error(ErrorCode::InvalidArgument, "discretize needs at least 2 bins");
  if (strategy != BinStrategy::Quantile) throw Error(ErrorCode::InvalidArgument, "unsupported bin strategy");

  std::vector<double> sorted;
  sorted.reserve(values.size());
  for (double v : values) {
    if (std::isnan(v)) continue;
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite value in column " + column);
    sorted.push_back(v);
  }
  std::sort(sorted.begin(), sorted.end());
  std::size_t distinct_count = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i == 0 || sorted[i] != sorted[i - 1]) ++distinct_count;
  }
  if (distinct_count < static_cast<std::size_t>(bins)) {
    throw Error(ErrorCode::DegenerateColumn, "column " + column + " has " + std::to_string(distinct_count) +
                                                 " distinct values, fewer than " + std::to_string(bins) + " bins");
  }

  Discretized out;
  out.map.column = std::move(column);
  out.map.bin_count = bins;
  for (int k = 1; k < bins; ++k) {
    const double cut = quantile_type7(sorted, static_cast<double>(k) / bins);
    if (!out.map.cut_points.empty() && !(cut > out.map.cut_points.back())) {
      throw Error(ErrorCode::DegenerateColumn,
                  "column " + out.map.column + " has tied quantiles; cut points are not strictly increasing");
    }
    out.map.cut_points.push_back(cut);
  }
  out.codes.reserve(values.size());
  for (double v : values) out.codes.push_back(out.map.apply(v));
  return out;
}

CategoricalDataset apply_discretization(const CategoricalDataset& data, std::span<const DiscretizationMap> maps) {
  std::vector<ColumnSchema> schemas = data.schemas();
  CodeMatrix codes = data.codes();
  Eigen::MatrixXd values = data.values();
  for (const auto& map : maps) {
    const auto col = data.index_of(map.column);
    auto& schema = schemas[static_cast<std::size_t>(col)];
    if (schema.kind != ColumnKind::Continuous) {
      throw Error(ErrorCode::SchemaMismatch, "column " + map.column + " is not continuous");
    }
    schema.kind = ColumnKind::Ordinal;
    schema.arity = map.bin_count;
    schema.labels.clear();
    for (int k = 0; k < map.bin_count; ++k) schema.labels.push_back("q" + std::to_string(k + 1));
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
      codes(r, col) = data.is_missing(r, col) ? kMissing : map.apply(data.value(r, col));
      values(r, col) = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return CategoricalDataset(std::move(schemas), std::move(codes), std::move(values));
}

std::vector<DiscretizationMap> fit_discretization(const CategoricalDataset& data, int bins) {
  std::vector<DiscretizationMap> maps;
  for (auto col : data.columns_with_role(ColumnRole::Feature)) {
    if (data.schema(col).kind != ColumnKind::Continuous) continue;
    const Eigen::VectorXd column = data.numeric_column(col);
    maps.push_back(discretize(std::span<const double>(column.data(), static_cast<std::size_t>(column.size())), bins,
                              BinStrategy::Quantile, data.schema(col).name)
                       .map);
  }
  return maps;
}

}  // namespace irtci
