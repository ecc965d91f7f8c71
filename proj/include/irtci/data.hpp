#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "irtci/error.hpp"

namespace irtci {

inline constexpr int kMissing = -1;

enum class ColumnKind { Binary, Ordinal, Nominal, Continuous };
enum class ColumnRole { Feature, Id, Excluded };

std::string_view to_string(ColumnKind kind);
std::string_view to_string(ColumnRole role);
ColumnKind parse_column_kind(std::string_view text);
ColumnRole parse_column_role(std::string_view text);

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::Nominal;
  /// Number of categories; absent for continuous columns and for nominal
  /// columns whose labels are discovered while loading.
  std::optional<int> arity;
  /// Ordered category labels; label k is written for code k.
  std::vector<std::string> labels;
  ColumnRole role = ColumnRole::Feature;

  bool is_categorical() const { return kind != ColumnKind::Continuous; }
  friend bool operator==(const ColumnSchema&, const ColumnSchema&) = default;
};

/// Throws InvalidSchema when the column violates the arity/label rules.
void validate(const ColumnSchema& schema);

using CodeMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

/// Rectangular case x column table. Categorical columns live in `codes`
/// (kMissing marks a missing cell); continuous columns keep their raw
/// values in `values` (NaN when missing) and hold 0 / kMissing in `codes`
/// so that the missing mask is uniform across kinds.
class CategoricalDataset {
 public:
  CategoricalDataset() = default;
  CategoricalDataset(std::vector<ColumnSchema> schemas, CodeMatrix codes,
                     Eigen::MatrixXd values = {});

  Eigen::Index rows() const { return codes_.rows(); }
  Eigen::Index cols() const { return codes_.cols(); }

  const std::vector<ColumnSchema>& schemas() const { return schemas_; }
  const ColumnSchema& schema(Eigen::Index col) const { return schemas_.at(static_cast<std::size_t>(col)); }
  const CodeMatrix& codes() const { return codes_; }
  const Eigen::MatrixXd& values() const { return values_; }

  int code(Eigen::Index row, Eigen::Index col) const { return codes_(row, col); }
  double value(Eigen::Index row, Eigen::Index col) const { return values_(row, col); }
  bool is_missing(Eigen::Index row, Eigen::Index col) const { return codes_(row, col) == kMissing; }

  /// Column index for `name`, or nullopt.
  std::optional<Eigen::Index> find(std::string_view name) const;
  /// Column index for `name`; throws UnknownColumn.
  Eigen::Index index_of(std::string_view name) const;

  Eigen::Index missing_count(Eigen::Index col) const;
  Eigen::Index missing_count() const;

  void set_missing(Eigen::Index row, Eigen::Index col);
  void set_code(Eigen::Index row, Eigen::Index col, int code);

  /// Column-wise numeric view: codes as doubles for categorical columns, raw
  /// values for continuous ones, NaN for missing cells.
  Eigen::MatrixXd numeric_view(std::span<const Eigen::Index> columns) const;
  Eigen::VectorXd numeric_column(Eigen::Index col) const;

  std::vector<Eigen::Index> columns_with_role(ColumnRole role) const;

  /// Drops one column (used to build outcome-free views).
  CategoricalDataset without_column(Eigen::Index col) const;
  /// Rows reordered: result row r is input row order[r].
  CategoricalDataset permute_rows(std::span<const Eigen::Index> order) const;

  friend bool operator==(const CategoricalDataset& lhs, const CategoricalDataset& rhs);

 private:
  void check_invariants() const;

  std::vector<ColumnSchema> schemas_;
  CodeMatrix codes_;
  Eigen::MatrixXd values_;
};

struct CsvOptions {
  /// Extra token treated as missing on input and written for missing cells
  /// on output. The empty field and "-1" are always accepted on input.
  std::string missing_token;
};

/// Reads a schema description: one column per line,
///   column <name> kind=<binary|ordinal|nominal|continuous> [arity=M]
///          [labels=l0|l1|...] [role=feature|id|excluded]
/// Names containing spaces may be double-quoted. '#' starts a comment.
std::vector<ColumnSchema> parse_schema(std::string_view text);
std::vector<ColumnSchema> load_schema(const std::filesystem::path& path);
std::string format_schema(std::span<const ColumnSchema> schemas);
void save_schema(std::span<const ColumnSchema> schemas, const std::filesystem::path& path);

CategoricalDataset parse_csv(std::string_view text, std::span<const ColumnSchema> schema,
                             const CsvOptions& options = {});
CategoricalDataset load_csv(const std::filesystem::path& path, std::span<const ColumnSchema> schema,
                            const CsvOptions& options = {});
std::string format_csv(const CategoricalDataset& data, const CsvOptions& options = {});
void emit_csv(const CategoricalDataset& data, const std::filesystem::path& path,
              const CsvOptions& options = {});

/// Low-level RFC-4180 record reader (quotes, doubled quotes, CRLF).
std::vector<std::vector<std::string>> read_csv_records(std::string_view text);
std::string csv_escape(std::string_view field);

/// Shortest round-trip decimal text of a double.
std::string format_double(double value);
std::optional<double> parse_double(std::string_view text);

// ---------------------------------------------------------------------------
// Discretization

enum class BinStrategy { Quantile };

struct DiscretizationMap {
  std::string column;
  std::vector<double> cut_points;
  int bin_count = 0;

  /// Bin of `value`: number of cut points <= value. NaN maps to kMissing.
  int apply(double value) const;
  friend bool operator==(const DiscretizationMap&, const DiscretizationMap&) = default;
};

struct Discretized {
  DiscretizationMap map;
  std::vector<int> codes;
};

/// Type-7 (linear interpolation) empirical quantiles of the finite values.
double quantile_type7(std::span<const double> sorted, double probability);

/// Quantile binning; NaN entries pass through as kMissing.
Discretized discretize(std::span<const double> values, int bins,
                       BinStrategy strategy = BinStrategy::Quantile,
                       std::string column = {});

/// Replaces every continuous feature column with an ordinal column produced
/// by `maps` (matched by column name). Columns without a map are left alone.
CategoricalDataset apply_discretization(const CategoricalDataset& data,
                                        std::span<const DiscretizationMap> maps);

/// Fits a quantile map for every continuous feature column.
std::vector<DiscretizationMap> fit_discretization(const CategoricalDataset& data, int bins = 4);

}  // namespace irtci
