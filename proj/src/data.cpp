#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include "irtci/data.hpp"

namespace irtci {

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Binary: return "binary";
    case ColumnKind::Ordinal: return "ordinal";
    case ColumnKind::Nominal: return "nominal";
    case ColumnKind::Continuous: return "continuous";
  }
  return "?";
}

std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::Feature: return "feature";
    case ColumnRole::Id: return "id";
    case ColumnRole::Excluded: return "excluded";
  }
  return "?";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "binary") return ColumnKind::Binary;
  if (text == "ordinal") return ColumnKind::Ordinal;
  if (text == "nominal") return ColumnKind::Nominal;
  if (text == "continuous") return ColumnKind::Continuous;
  throw Error(ErrorCode::InvalidSchema, "unknown column kind '" + std::string(text) + "'");
}

ColumnRole parse_column_role(std::string_view text) {
  if (text == "feature") return ColumnRole::Feature;
  if (text == "id") return ColumnRole::Id;
  if (text == "excluded") return ColumnRole::Excluded;
  throw Error(ErrorCode::InvalidSchema, "unknown column role '" + std::string(text) + "'");
}

void validate(const ColumnSchema& schema) {
  const std::string where = "column '" + schema.name + "': ";
  if (schema.name.empty()) throw Error(ErrorCode::InvalidSchema, "column with empty name");
  switch (schema.kind) {
    case ColumnKind::Continuous:
      if (schema.arity || !schema.labels.empty()) {
        throw Error(ErrorCode::InvalidSchema, where + "continuous columns take no arity or labels");
      }
      return;
    case ColumnKind::Binary:
      if (schema.arity != 2) throw Error(ErrorCode::InvalidSchema, where + "binary columns have arity 2");
      break;
    case ColumnKind::Ordinal:
      if (!schema.arity) throw Error(ErrorCode::InvalidSchema, where + "ordinal columns need arity or labels");
      break;
    case ColumnKind::Nominal:
      break;
  }
  if (schema.arity && *schema.arity < 2) throw Error(ErrorCode::InvalidSchema, where + "arity must be >= 2");
  if (schema.arity && schema.labels.size() != static_cast<std::size_t>(*schema.arity)) {
    throw Error(ErrorCode::InvalidSchema, where + "label count differs from arity");
  }
  std::set<std::string_view> seen;
  for (const auto& label : schema.labels) {
    if (!seen.insert(label).second) throw Error(ErrorCode::InvalidSchema, where + "duplicate label '" + label + "'");
  }
}

// ---------------------------------------------------------------------------

CategoricalDataset::CategoricalDataset(std::vector<ColumnSchema> schemas, CodeMatrix codes,
                                       Eigen::MatrixXd values)
    : schemas_(std::move(schemas)), codes_(std::move(codes)), values_(std::move(values)) {
  if (values_.size() == 0) {
    values_ = Eigen::MatrixXd::Constant(codes_.rows(), codes_.cols(), std::numeric_limits<double>::quiet_NaN());
  }
  check_invariants();
}

void CategoricalDataset::check_invariants() const {
  if (schemas_.empty() || static_cast<Eigen::Index>(schemas_.size()) != codes_.cols()) {
    throw Error(ErrorCode::SchemaMismatch, "dataset needs one schema per column and at least one column");
  }
  if (values_.rows() != codes_.rows() || values_.cols() != codes_.cols()) {
    throw Error(ErrorCode::SchemaMismatch, "value matrix shape differs from code matrix");
  }
  for (Eigen::Index c = 0; c < codes_.cols(); ++c) {
    const auto& schema = schemas_[static_cast<std::size_t>(c)];
    validate(schema);
    for (Eigen::Index r = 0; r < codes_.rows(); ++r) {
      const int code = codes_(r, c);
      if (code == kMissing) continue;
      if (schema.kind == ColumnKind::Continuous) {
        if (code != 0 || !std::isfinite(values_(r, c))) {
          throw Error(ErrorCode::CodeOutOfRange, "continuous cell (" + std::to_string(r) + ", " + schema.name +
                                                     ") must hold code 0 and a finite value");
        }
      } else if (code < 0 || !schema.arity || code >= *schema.arity) {
        throw Error(ErrorCode::CodeOutOfRange, "code " + std::to_string(code) + " out of range in column " +
                                                   schema.name + " row " + std::to_string(r));
      }
    }
  }
}

std::optional<Eigen::Index> CategoricalDataset::find(std::string_view name) const {
  for (std::size_t c = 0; c < schemas_.size(); ++c) {
    if (schemas_[c].name == name) return static_cast<Eigen::Index>(c);
  }
  return std::nullopt;
}

Eigen::Index CategoricalDataset::index_of(std::string_view name) const {
  if (auto found = find(name)) return *found;
  throw Error(ErrorCode::UnknownColumn, "unknown column '" + std::string(name) + "'");
}

Eigen::Index CategoricalDataset::missing_count(Eigen::Index col) const {
  return (codes_.col(col).array() == kMissing).count();
}

Eigen::Index CategoricalDataset::missing_count() const { return (codes_.array() == kMissing).count(); }

void CategoricalDataset::set_missing(Eigen::Index row, Eigen::Index col) {
  codes_(row, col) = kMissing;
  values_(row, col) = std::numeric_limits<double>::quiet_NaN();
}

void CategoricalDataset::set_code(Eigen::Index row, Eigen::Index col, int code) {
  const auto& schema = this->schema(col);
  if (!schema.is_categorical() || !schema.arity || code < 0 || code >= *schema.arity) {
    throw Error(ErrorCode::CodeOutOfRange, "cannot store code " + std::to_string(code) + " in column " + schema.name);
  }
  codes_(row, col) = code;
}

Eigen::VectorXd CategoricalDataset::numeric_column(Eigen::Index col) const {
  Eigen::VectorXd out(rows());
  const bool continuous = schema(col).kind == ColumnKind::Continuous;
  for (Eigen::Index r = 0; r < rows(); ++r) {
    if (codes_(r, col) == kMissing) {
      out[r] = std::numeric_limits<double>::quiet_NaN();
    } else {
      out[r] = continuous ? values_(r, col) : static_cast<double>(codes_(r, col));
    }
  }
  return out;
}

Eigen::MatrixXd CategoricalDataset::numeric_view(std::span<const Eigen::Index> columns) const {
  Eigen::MatrixXd out(rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = numeric_column(columns[j]);
  return out;
}

std::vector<Eigen::Index> CategoricalDataset::columns_with_role(ColumnRole role) const {
  std::vector<Eigen::Index> out;
  for (std::size_t c = 0; c < schemas_.size(); ++c) {
    if (schemas_[c].role == role) out.push_back(static_cast<Eigen::Index>(c));
  }
  return out;
}

CategoricalDataset CategoricalDataset::without_column(Eigen::Index col) const {
  std::vector<ColumnSchema> schemas = schemas_;
  schemas.erase(schemas.begin() + col);
  CodeMatrix codes(rows(), cols() - 1);
  Eigen::MatrixXd values(rows(), cols() - 1);
  codes << codes_.leftCols(col), codes_.rightCols(cols() - col - 1);
  values << values_.leftCols(col), values_.rightCols(cols() - col - 1);
  return CategoricalDataset(std::move(schemas), std::move(codes), std::move(values));
}

CategoricalDataset CategoricalDataset::permute_rows(std::span<const Eigen::Index> order) const {
  if (static_cast<Eigen::Index>(order.size()) != rows()) {
    throw Error(ErrorCode::InvalidArgument, "row permutation has wrong length");
  }
  CodeMatrix codes(rows(), cols());
  Eigen::MatrixXd values(rows(), cols());
  for (Eigen::Index r = 0; r < rows(); ++r) {
    codes.row(r) = codes_.row(order[static_cast<std::size_t>(r)]);
    values.row(r) = values_.row(order[static_cast<std::size_t>(r)]);
  }
  return CategoricalDataset(schemas_, std::move(codes), std::move(values));
}

bool operator==(const CategoricalDataset& lhs, const CategoricalDataset& rhs) {
  if (lhs.schemas_ != rhs.schemas_ || lhs.codes_.rows() != rhs.codes_.rows() ||
      lhs.codes_.cols() != rhs.codes_.cols() || lhs.codes_ != rhs.codes_) {
    return false;
  }
  for (Eigen::Index c = 0; c < lhs.cols(); ++c) {
    if (lhs.schema(c).kind != ColumnKind::Continuous) continue;
    for (Eigen::Index r = 0; r < lhs.rows(); ++r) {
      if (lhs.codes_(r, c) == kMissing) continue;
      if (lhs.values_(r, c) != rhs.values_(r, c)) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// CSV ingestion / emission

namespace {

std::string_view trim(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  return text;
}

bool is_missing_token(std::string_view field, const CsvOptions& options) {
  const auto t = trim(field);
  return t.empty() || t == "-1" || (!options.missing_token.empty() && t == options.missing_token);
}

}  // namespace

CategoricalDataset parse_csv(std::string_view text, std::span<const ColumnSchema> schema,
                             const CsvOptions& options) {
  auto records = read_csv_records(text);
  if (records.empty()) throw Error(ErrorCode::EmptyFile, "CSV input is empty");

  const auto& header = records.front();
  std::vector<ColumnSchema> schemas;
  schemas.reserve(header.size());
  for (const auto& raw_name : header) {
    const auto name = trim(raw_name);
    auto it = std::find_if(schema.begin(), schema.end(), [&](const ColumnSchema& s) { return s.name == name; });
    if (it == schema.end()) throw Error(ErrorCode::UnknownColumn, "column '" + std::string(name) + "' is not in the schema");
    for (const auto& existing : schemas) {
      if (existing.name == name) throw Error(ErrorCode::MalformedRow, "duplicate header column '" + std::string(name) + "'");
    }
    schemas.push_back(*it);
  }
  for (const auto& s : schema) {
    if (std::none_of(schemas.begin(), schemas.end(), [&](const ColumnSchema& c) { return c.name == s.name; })) {
      throw Error(ErrorCode::MissingColumn, "schema column '" + s.name + "' is absent from the CSV header");
    }
  }

  const auto n_rows = static_cast<Eigen::Index>(records.size() - 1);
  const auto n_cols = static_cast<Eigen::Index>(schemas.size());
  CodeMatrix codes(n_rows, n_cols);
  Eigen::MatrixXd values = Eigen::MatrixXd::Constant(n_rows, n_cols, std::numeric_limits<double>::quiet_NaN());

  std::vector<std::unordered_map<std::string, int>> lookup(schemas.size());
  std::vector<bool> discover(schemas.size(), false);
  for (std::size_t c = 0; c < schemas.size(); ++c) {
    auto& s = schemas[c];
    discover[c] = s.is_categorical() && s.labels.empty();
    for (std::size_t k = 0; k < s.labels.size(); ++k) lookup[c].emplace(s.labels[k], static_cast<int>(k));
  }

  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const auto& record = records[static_cast<std::size_t>(r) + 1];
    if (static_cast<Eigen::Index>(record.size()) != n_cols) {
      throw Error(ErrorCode::MalformedRow, "row " + std::to_string(r + 1) + " has " + std::to_string(record.size()) +
                                               " fields, expected " + std::to_string(n_cols));
    }
    for (Eigen::Index c = 0; c < n_cols; ++c) {
      const auto cs = static_cast<std::size_t>(c);
      const auto& field = record[cs];
      if (is_missing_token(field, options)) {
        codes(r, c) = kMissing;
        continue;
      }
      auto& s = schemas[cs];
      if (s.kind == ColumnKind::Continuous) {
        const auto value = parse_double(field);
        if (!value || !std::isfinite(*value)) {
          throw Error(ErrorCode::MalformedRow, "row " + std::to_string(r + 1) + ": '" + field +
                                                   "' is not numeric in continuous column " + s.name);
        }
        codes(r, c) = 0;
        values(r, c) = *value;
        continue;
      }
      const std::string label(trim(field));
      auto it = lookup[cs].find(label);
      if (it == lookup[cs].end()) {
        if (!discover[cs]) {
          throw Error(ErrorCode::UnknownLabel, "row " + std::to_string(r + 1) + ": label '" + label +
                                                   "' is not declared for column " + s.name);
        }
        it = lookup[cs].emplace(label, static_cast<int>(s.labels.size())).first;
        s.labels.push_back(label);
      }
      codes(r, c) = it->second;
    }
  }
  for (std::size_t c = 0; c < schemas.size(); ++c) {
    if (!discover[c]) continue;
    auto& s = schemas[c];
    if (s.labels.size() < 2) {
      throw Error(ErrorCode::InvalidSchema, "column '" + s.name + "' has fewer than two distinct labels");
    }
    s.arity = static_cast<int>(s.labels.size());
  }
  return CategoricalDataset(std::move(schemas), std::move(codes), std::move(values));
}

CategoricalDataset load_csv(const std::filesystem::path& path, std::span<const ColumnSchema> schema,
                            const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), schema, options);
}

std::string format_csv(const CategoricalDataset& data, const CsvOptions& options) {
  std::string out;
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    if (c) out += ',';
    out += csv_escape(data.schema(c).name);
  }
  out += '\n';
  const std::string missing = csv_escape(options.missing_token);
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      if (c) out += ',';
      const auto& s = data.schema(c);
      if (data.is_missing(r, c)) {
        out += missing;
      } else if (s.kind == ColumnKind::Continuous) {
        out += format_double(data.value(r, c));
      } else {
        out += csv_escape(s.labels[static_cast<std::size_t>(data.code(r, c))]);
      }
    }
    out += '\n';
  }
  return out;
}

void emit_csv(const CategoricalDataset& data, const std::filesystem::path& path, const CsvOptions& options) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << format_csv(data, options);
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace irtci
