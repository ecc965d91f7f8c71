#include <fstream>
#include <sstream>

#include "irtci/estimation.hpp"

namespace irtci {

namespace {

constexpr std::string_view kMagic = "irtci-model";
constexpr int kVersion = 1;

std::string quote(std::string_view text) {
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"' || ch == '\\') out.push_back('\\');
    if (ch == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

/// Whitespace-separated tokens; a token starting with '"' runs to the closing quote.
std::vector<std::string> tokens_of(std::string_view line, std::size_t line_no) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == ' ' || line[i] == '\t' || line[i] == '\r') {
      ++i;
      continue;
    }
    std::string token;
    if (line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < line.size()) {
        char ch = line[i++];
        if (ch == '\\' && i < line.size()) {
          ch = line[i++];
          token.push_back(ch == 'n' ? '\n' : ch);
        } else if (ch == '"') {
          closed = true;
          break;
        } else {
          token.push_back(ch);
        }
      }
      if (!closed) throw Error(ErrorCode::ModelFormat, "model line " + std::to_string(line_no) + ": unterminated string");
    } else {
      while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') token.push_back(line[i++]);
    }
    out.push_back(std::move(token));
  }
  return out;
}

class LineReader {
 public:
  LineReader(std::vector<std::string> tokens, std::size_t line_no) : tokens_(std::move(tokens)), line_no_(line_no) {}

  const std::string& word() { return next(); }

  double number() {
    const auto& text = next();
    const auto value = parse_double(text);
    if (!value) fail("expected a number, got '" + text + "'");
    return *value;
  }

  int integer() {
    const double value = number();
    if (value != static_cast<double>(static_cast<int>(value))) fail("expected an integer");
    return static_cast<int>(value);
  }

  Eigen::VectorXd vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index k = 0; k < n; ++k) v[k] = number();
    return v;
  }

  void finish() const {
    if (pos_ != tokens_.size()) fail("trailing tokens");
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw Error(ErrorCode::ModelFormat, "model line " + std::to_string(line_no_) + ": " + message);
  }

 private:
  const std::string& next() {
    if (pos_ >= tokens_.size()) fail("unexpected end of line");
    return tokens_[pos_++];
  }

  std::vector<std::string> tokens_;
  std::size_t line_no_;
  std::size_t pos_ = 0;
};

std::string join(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index k = 0; k < v.size(); ++k) out += " " + format_double(v[k]);
  return out;
}

}  // namespace

std::string format_model(const FittedModel& model) {
  std::ostringstream out;
  out << kMagic << ' ' << kVersion << '\n';
  out << "grid " << model.grid.size() << ' ' << format_double(model.grid.nodes[0]) << ' '
      << format_double(model.grid.nodes[model.grid.size() - 1]) << '\n';
  out << "converged " << (model.converged ? 1 : 0) << '\n';
  out << "iterations " << model.iterations << '\n';
  out << "loglik " << format_double(model.log_likelihood) << '\n';
  out << "change " << format_double(model.final_change) << '\n';
  out << "trace " << model.trace.size();
  for (double v : model.trace) out << ' ' << format_double(v);
  out << '\n';
  for (const auto& map : model.discretizations) {
    out << "discretize " << quote(map.column) << ' ' << map.bin_count;
    for (double cut : map.cut_points) out << ' ' << format_double(cut);
    out << '\n';
  }
  for (const auto& item : model.items) {
    out << "item " << to_string(family_of(item.parameters)) << ' ' << quote(item.feature) << ' ' << item.categories();
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, Binary2PL>) {
            out << ' ' << format_double(p.a) << ' ' << format_double(p.b);
          } else if constexpr (std::is_same_v<T, GradedItem>) {
            out << ' ' << format_double(p.a) << join(p.boundaries);
          } else {
            out << join(p.slopes) << join(p.intercepts);
          }
        },
        item.parameters);
    out << '\n';
  }
  for (const auto& clamp : model.clamps) {
    out << "clamp " << quote(clamp.feature) << ' ' << clamp.iteration << ' ' << quote(clamp.parameter) << '\n';
  }
  out << "end\n";
  return out.str();
}

FittedModel parse_model(std::string_view text) {
  FittedModel model;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool header = false;
  bool ended = false;
  bool have_grid = false;
  while (start < text.size() && !ended) {
    const auto newline = text.find('\n', start);
    const auto line = text.substr(start, newline == std::string_view::npos ? text.size() - start : newline - start);
    start = newline == std::string_view::npos ? text.size() : newline + 1;
    ++line_no;
    auto tokens = tokens_of(line, line_no);
    if (tokens.empty()) continue;
    LineReader in(std::move(tokens), line_no);
    const std::string key = in.word();
    if (!header) {
      if (key != kMagic) in.fail("not an irtci model file");
      if (in.integer() != kVersion) in.fail("unsupported model file version");
      header = true;
    } else if (key == "grid") {
      const int size = in.integer();
      const double lo = in.number();
      const double hi = in.number();
      model.grid = build_grid(size, lo, hi);
      have_grid = true;
    } else if (key == "converged") {
      model.converged = in.integer() != 0;
    } else if (key == "iterations") {
      model.iterations = in.integer();
    } else if (key == "loglik") {
      model.log_likelihood = in.number();
    } else if (key == "change") {
      model.final_change = in.number();
    } else if (key == "trace") {
      const int n = in.integer();
      for (int k = 0; k < n; ++k) model.trace.push_back(in.number());
    } else if (key == "discretize") {
      DiscretizationMap map;
      map.column = in.word();
      map.bin_count = in.integer();
      if (map.bin_count < 2) in.fail("discretization needs >= 2 bins");
      for (int k = 0; k + 1 < map.bin_count; ++k) map.cut_points.push_back(in.number());
      model.discretizations.push_back(std::move(map));
    } else if (key == "item") {
      const std::string family = in.word();
      ItemModel item;
      item.feature = in.word();
      const int m = in.integer();
      if (m < 2) in.fail("item needs >= 2 categories");
      if (family == "2pl") {
        if (m != 2) in.fail("2pl item must have 2 categories");
        Binary2PL p;
        p.a = in.number();
        p.b = in.number();
        item.parameters = p;
      } else if (family == "grm") {
        GradedItem p;
        p.a = in.number();
        p.boundaries = in.vector(m - 1);
        item.parameters = std::move(p);
      } else if (family == "nrm") {
        NominalItem p;
        p.slopes = in.vector(m);
        p.intercepts = in.vector(m);
        item.parameters = std::move(p);
      } else {
        in.fail("unknown item family '" + family + "'");
      }
      try {
        validate(item.parameters);
      } catch (const Error& e) {
        in.fail(e.what());
      }
      model.items.push_back(std::move(item));
    } else if (key == "clamp") {
      ClampEvent event;
      event.feature = in.word();
      event.iteration = in.integer();
      event.parameter = in.word();
      model.clamps.push_back(std::move(event));
    } else if (key == "end") {
      ended = true;
    } else {
      in.fail("unknown record '" + key + "'");
    }
    in.finish();
  }
  if (!header) throw Error(ErrorCode::ModelFormat, "empty model file");
  if (!ended) throw Error(ErrorCode::ModelFormat, "model file is truncated (no 'end')");
  if (!have_grid) throw Error(ErrorCode::ModelFormat, "model file has no grid");
  if (model.items.empty()) throw Error(ErrorCode::ModelFormat, "model file has no items");
  return model;
}

void save_model(const FittedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write model " + path.string());
  out << format_model(model);
  if (!out) throw Error(ErrorCode::Io, "failed writing model " + path.string());
}

FittedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open model " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_model(buffer.str());
}

std::string format_diagnostics(const FittedModel& model) {
  std::ostringstream out;
  out << "status: " << (model.converged ? "converged" : "not converged") << '\n';
  out << "iterations: " << model.iterations << '\n';
  out << "final log-likelihood: " << format_double(model.log_likelihood) << '\n';
  out << "final max parameter change: " << format_double(model.final_change) << '\n';
  out << "grid: " << model.grid.size() << " nodes on [" << format_double(model.grid.nodes[0]) << ", "
      << format_double(model.grid.nodes[model.grid.size() - 1]) << "]\n";
  if (!model.trace.empty()) {
    out << "log-likelihood first/last: " << format_double(model.trace.front()) << " / "
        << format_double(model.trace.back()) << '\n';
  }
  for (const auto& map : model.discretizations) {
    out << "discretized " << map.column << " into " << map.bin_count << " bins at";
    for (double cut : map.cut_points) out << ' ' << format_double(cut);
    out << '\n';
  }
  out << "items:\n";
  for (const auto& item : model.items) {
    out << "  " << item.feature << " [" << to_string(family_of(item.parameters)) << "]";
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, Binary2PL>) {
            out << " a=" << format_double(p.a) << " b=" << format_double(p.b);
          } else if constexpr (std::is_same_v<T, GradedItem>) {
            out << " a=" << format_double(p.a) << " b=" << join(p.boundaries);
          } else {
            out << " a=" << join(p.slopes) << " c=" << join(p.intercepts);
          }
        },
        item.parameters);
    out << '\n';
  }
  out << "clamping events: " << model.clamps.size() << '\n';
  for (const auto& clamp : model.clamps) {
    out << "  iteration " << clamp.iteration << ' ' << clamp.feature << ' ' << clamp.parameter << '\n';
  }
  return out.str();
}

}  // namespace irtci
