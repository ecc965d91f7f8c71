#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "irtci/data.hpp"

namespace irtci {

std::vector<std::vector<std::string>> read_csv_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // a blank line is not a record
    if (!(record.size() == 1 && record.front().empty())) records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field.push_back(ch);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(ch);
        field_started = true;
    }
  }
  if (in_quotes) throw Error(ErrorCode::MalformedRow, "unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double value) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  if (ec != std::errc{}) throw Error(ErrorCode::NumericalFailure, "cannot format value");
  return std::string(buffer, end);
}

std::optional<double> parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

// ---------------------------------------------------------------------------
// Schema files

namespace {

std::vector<std::string> tokenize_schema_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> tokens;
  std::string current;
  bool in_quotes = false;
  bool have_token = false;
  for (char ch : line) {
    if (in_quotes) {
      if (ch == '"') {
        in_quotes = false;
      } else {
        current.push_back(ch);
      }
    } else if (ch == '"') {
      in_quotes = true;
      have_token = true;
    } else if (ch == '#') {
      break;
    } else if (ch == ' ' || ch == '\t' || ch == '\r') {
      if (have_token) tokens.push_back(std::move(current));
      current.clear();
      have_token = false;
    } else {
      current.push_back(ch);
      have_token = true;
    }
  }
  if (in_quotes) {
    throw Error(ErrorCode::InvalidSchema,
                "schema line " + std::to_string(line_no) + ": unterminated quote");
  }
  if (have_token) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> split_labels(std::string_view text) {
  std::vector<std::string> labels;
  std::size_t start = 0;
  while (true) {
    const auto bar = text.find('|', start);
    labels.emplace_back(text.substr(start, bar - start));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return labels;
}

bool needs_quotes(std::string_view text) {
  return text.empty() || text.find_first_of(" \t#\"=|") != std::string_view::npos;
}

std::string quote_token(std::string_view text) {
  if (!needs_quotes(text)) return std::string(text);
  if (text.find('"') != std::string_view::npos) {
    throw Error(ErrorCode::InvalidSchema, "schema text cannot contain '\"': " + std::string(text));
  }
  return "\"" + std::string(text) + "\"";
}

}  // namespace

std::vector<ColumnSchema> parse_schema(std::string_view text) {
  std::vector<ColumnSchema> schemas;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto newline = text.find('\n', start);
    const std::string_view line = text.substr(start, newline - start);
    ++line_no;
    const auto tokens = tokenize_schema_line(line, line_no);
    if (!tokens.empty()) {
      const std::string where = "schema line " + std::to_string(line_no) + ": ";
      if (tokens[0] != "column" || tokens.size() < 2) {
        throw Error(ErrorCode::InvalidSchema, where + "expected 'column <name> key=value...'");
      }
      ColumnSchema column;
      column.name = tokens[1];
      bool have_kind = false;
      for (std::size_t t = 2; t < tokens.size(); ++t) {
        const auto eq = tokens[t].find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::InvalidSchema, where + "bad token '" + tokens[t] + "'");
        const std::string key = tokens[t].substr(0, eq);
        const std::string value = tokens[t].substr(eq + 1);
        if (key == "kind") {
          column.kind = parse_column_kind(value);
          have_kind = true;
        } else if (key == "arity") {
          int arity = 0;
          auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), arity);
          if (ec != std::errc{} || ptr != value.data() + value.size()) {
            throw Error(ErrorCode::InvalidSchema, where + "bad arity '" + value + "'");
          }
          column.arity = arity;
        } else if (key == "labels") {
          column.labels = split_labels(value);
        } else if (key == "role") {
          column.role = parse_column_role(value);
        } else {
          throw Error(ErrorCode::InvalidSchema, where + "unknown key '" + key + "'");
        }
      }
      if (!have_kind) throw Error(ErrorCode::InvalidSchema, where + "missing kind");
      if (column.kind == ColumnKind::Binary && column.labels.empty() && !column.arity) column.arity = 2;
      if (!column.labels.empty() && !column.arity) column.arity = static_cast<int>(column.labels.size());
      if (column.labels.empty() && column.arity &&
          (column.kind == ColumnKind::Binary || column.kind == ColumnKind::Ordinal ||
           column.kind == ColumnKind::Nominal)) {
        for (int k = 0; k < *column.arity; ++k) column.labels.push_back(std::to_string(k));
      }
      validate(column);
      for (const auto& other : schemas) {
        if (other.name == column.name) throw Error(ErrorCode::InvalidSchema, where + "duplicate column " + column.name);
      }
      schemas.push_back(std::move(column));
    }
    if (newline == std::string_view::npos) break;
    start = newline + 1;
  }
  if (schemas.empty()) throw Error(ErrorCode::InvalidSchema, "schema declares no columns");
  return schemas;
}

std::vector<ColumnSchema> load_schema(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open schema " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_schema(buffer.str());
}

std::string format_schema(std::span<const ColumnSchema> schemas) {
  std::string out;
  for (const auto& column : schemas) {
    out += "column " + quote_token(column.name) + " kind=" + std::string(to_string(column.kind));
    if (column.arity) out += " arity=" + std::to_string(*column.arity);
    if (!column.labels.empty()) {
      std::string joined;
      for (std::size_t k = 0; k < column.labels.size(); ++k) {
        if (column.labels[k].find_first_of("\"|\r\n") != std::string::npos || column.labels[k].empty()) {
          throw Error(ErrorCode::InvalidSchema, "label not representable in schema file: '" + column.labels[k] + "'");
        }
        if (k) joined += '|';
        joined += column.labels[k];
      }
      const bool quote = joined.find_first_of(" \t#=") != std::string::npos;
      out += quote ? " labels=\"" + joined + "\"" : " labels=" + joined;
    }
    out += " role=" + std::string(to_string(column.role)) + "\n";
  }
  return out;
}

void save_schema(std::span<const ColumnSchema> schemas, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write schema " + path.string());
  out << format_schema(schemas);
  if (!out) throw Error(ErrorCode::Io, "failed writing schema " + path.string());
}

}  // namespace irtci
