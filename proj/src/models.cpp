#include <cmath>

#include "irtci/models.hpp"

namespace irtci {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_code(int code, int categories) {
  if (code < 0 || code >= categories) {
    throw Error(ErrorCode::CodeOutOfRange,
                "code " + std::to_string(code) + " outside [0, " + std::to_string(categories) + ")");
  }
}

}  // namespace

std::string_view to_string(ItemFamily family) {
  switch (family) {
    case ItemFamily::TwoPL: return "2pl";
    case ItemFamily::Graded: return "grm";
    case ItemFamily::Nominal: return "nrm";
  }
  return "?";
}

ItemFamily family_of(const ItemParameters& parameters) {
  return std::visit(overloaded{[](const Binary2PL&) { return ItemFamily::TwoPL; },
                               [](const GradedItem&) { return ItemFamily::Graded; },
                               [](const NominalItem&) { return ItemFamily::Nominal; }},
                    parameters);
}

int category_count(const ItemParameters& parameters) {
  return std::visit(overloaded{[](const Binary2PL&) { return 2; },
                               [](const GradedItem& g) { return g.categories(); },
                               [](const NominalItem& n) { return n.categories(); }},
                    parameters);
}

int ItemModel::categories() const { return category_count(parameters); }

ItemFamily family_for(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Binary: return ItemFamily::TwoPL;
    case ColumnKind::Ordinal: return ItemFamily::Graded;
    case ColumnKind::Nominal: return ItemFamily::Nominal;
    case ColumnKind::Continuous: break;
  }
  throw Error(ErrorCode::SchemaMismatch, "continuous columns have no item model; discretize first");
}

void validate(const Binary2PL& item) {
  if (!(item.a > 0.0) || !std::isfinite(item.a) || !std::isfinite(item.b)) {
    throw Error(ErrorCode::InvalidArgument, "2PL item needs finite a > 0 and finite b");
  }
}

void validate(const GradedItem& item) {
  if (!(item.a > 0.0) || !std::isfinite(item.a)) throw Error(ErrorCode::InvalidArgument, "GRM item needs finite a > 0");
  if (item.boundaries.size() < 1) throw Error(ErrorCode::InvalidArgument, "GRM item needs at least 2 categories");
  for (Eigen::Index k = 0; k < item.boundaries.size(); ++k) {
    if (!std::isfinite(item.boundaries[k])) throw Error(ErrorCode::InvalidArgument, "GRM boundary not finite");
    if (k > 0 && !(item.boundaries[k] > item.boundaries[k - 1])) {
      throw Error(ErrorCode::InvalidArgument, "GRM boundaries must be strictly increasing");
    }
  }
}

void validate(const NominalItem& item) {
  if (item.slopes.size() < 2 || item.slopes.size() != item.intercepts.size()) {
    throw Error(ErrorCode::InvalidArgument, "NRM item needs matching slope/intercept vectors of length >= 2");
  }
  if (item.slopes[0] != 0.0 || item.intercepts[0] != 0.0) {
    throw Error(ErrorCode::InvalidArgument, "NRM item must anchor category 0 at a = c = 0");
  }
  if (!item.slopes.allFinite() || !item.intercepts.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "NRM parameters must be finite");
  }
}

void validate(const ItemParameters& item) {
  std::visit([](const auto& concrete) { validate(concrete); }, item);
}

void validate_binding(const ItemModel& item, const ColumnSchema& column) {
  validate(item.parameters);
  if (item.feature != column.name) {
    throw Error(ErrorCode::SchemaMismatch, "item bound to '" + item.feature + "' used for column '" + column.name + "'");
  }
  if (family_of(item.parameters) != family_for(column.kind)) {
    throw Error(ErrorCode::SchemaMismatch, "item family " + std::string(to_string(family_of(item.parameters))) +
                                               " does not match " + std::string(to_string(column.kind)) +
                                               " column " + column.name);
  }
  if (!column.arity || *column.arity != item.categories()) {
    throw Error(ErrorCode::SchemaMismatch, "item for column " + column.name + " has " +
                                               std::to_string(item.categories()) + " categories, schema disagrees");
  }
}

// ---------------------------------------------------------------------------

double prob_2pl(double theta, const Binary2PL& item) { return logistic(item.a * (theta - item.b)); }

double prob_grm_boundary(double theta, double a, double b_k) { return logistic(a * (theta - b_k)); }

Eigen::VectorXd prob_grm_categories(double theta, const GradedItem& item) {
  const int m = item.categories();
  const Eigen::VectorXd x = item.a * (theta - item.boundaries.array());
  Eigen::VectorXd p(m);
  p[0] = logistic(-x[0]);
  p[m - 1] = logistic(x[m - 2]);
  for (int k = 1; k < m - 1; ++k) {
    p[k] = logistic(x[k - 1]) * logistic(-x[k]) * -std::expm1(x[k] - x[k - 1]);
  }
  return p;
}

Eigen::VectorXd prob_nrm_categories(double theta, const NominalItem& item) {
  return softmax((item.slopes * theta + item.intercepts).eval());
}

Eigen::VectorXd category_probabilities(double theta, const ItemParameters& item) {
  return std::visit(overloaded{[&](const Binary2PL& i) {
                                 const double p = prob_2pl(theta, i);
                                 Eigen::VectorXd out(2);
                                 out << logistic(-i.a * (theta - i.b)), p;
                                 return out;
                               },
                               [&](const GradedItem& i) { return prob_grm_categories(theta, i); },
                               [&](const NominalItem& i) { return prob_nrm_categories(theta, i); }},
                    item);
}

Eigen::VectorXd log_category_probabilities(double theta, const ItemParameters& item) {
  return std::visit(overloaded{[&](const Binary2PL& i) {
                                 const double x = i.a * (theta - i.b);
                                 Eigen::VectorXd out(2);
                                 out << log_logistic(-x), log_logistic(x);
                                 return out;
                               },
                               [&](const GradedItem& i) {
                                 const int m = i.categories();
                                 const Eigen::VectorXd x = i.a * (theta - i.boundaries.array());
                                 Eigen::VectorXd out(m);
                                 out[0] = log_logistic(-x[0]);
                                 out[m - 1] = log_logistic(x[m - 2]);
                                 for (int k = 1; k < m - 1; ++k) out[k] = log_logistic_difference(x[k - 1], x[k]);
                                 return out;
                               },
                               [&](const NominalItem& i) {
                                 const Eigen::VectorXd z = i.slopes * theta + i.intercepts;
                                 return Eigen::VectorXd(z.array() - log_sum_exp(z));
                               }},
                    item);
}

double log_category_probability(double theta, const ItemParameters& item, int code) {
  check_code(code, category_count(item));
  return std::visit(overloaded{[&](const Binary2PL& i) {
                                 const double x = i.a * (theta - i.b);
                                 return code == 1 ? log_logistic(x) : log_logistic(-x);
                               },
                               [&](const GradedItem& i) {
                                 const int m = i.categories();
                                 auto x = [&](int k) { return i.a * (theta - i.boundaries[k - 1]); };
                                 if (code == 0) return log_logistic(-x(1));
                                 if (code == m - 1) return log_logistic(x(m - 1));
                                 return log_logistic_difference(x(code), x(code + 1));
                               },
                               [&](const NominalItem& i) {
                                 const Eigen::VectorXd z = i.slopes * theta + i.intercepts;
                                 return z[code] - log_sum_exp(z);
                               }},
                    item);
}

double expected_category(double theta, const ItemParameters& item) {
  const Eigen::VectorXd p = category_probabilities(theta, item);
  return (p.array() * Eigen::VectorXd::LinSpaced(p.size(), 0.0, static_cast<double>(p.size() - 1)).array()).sum();
}

// ---------------------------------------------------------------------------

Eigen::Index parameter_count(const ItemParameters& item) {
  return std::visit(overloaded{[](const Binary2PL&) -> Eigen::Index { return 2; },
                               [](const GradedItem& g) -> Eigen::Index { return g.boundaries.size() + 1; },
                               [](const NominalItem& n) -> Eigen::Index { return 2 * (n.slopes.size() - 1); }},
                    item);
}

Eigen::VectorXd pack(const ItemParameters& item) {
  return std::visit(overloaded{[](const Binary2PL& i) {
                                 Eigen::VectorXd v(2);
                                 v << i.a, i.b;
                                 return v;
                               },
                               [](const GradedItem& i) {
                                 Eigen::VectorXd v(i.boundaries.size() + 1);
                                 v << i.a, i.boundaries;
                                 return v;
                               },
                               [](const NominalItem& i) {
                                 const auto free = i.slopes.size() - 1;
                                 Eigen::VectorXd v(2 * free);
                                 v << i.slopes.tail(free), i.intercepts.tail(free);
                                 return v;
                               }},
                    item);
}

ItemParameters unpack(const ItemParameters& shape, const Eigen::VectorXd& v) {
  if (v.size() != parameter_count(shape)) throw Error(ErrorCode::InvalidArgument, "packed parameter length mismatch");
  return std::visit(overloaded{[&](const Binary2PL&) -> ItemParameters { return Binary2PL{v[0], v[1]}; },
                               [&](const GradedItem& g) -> ItemParameters {
                                 return GradedItem{v[0], v.tail(g.boundaries.size())};
                               },
                               [&](const NominalItem& n) -> ItemParameters {
                                 const auto free = n.slopes.size() - 1;
                                 NominalItem out;
                                 out.slopes.resize(free + 1);
                                 out.intercepts.resize(free + 1);
                                 out.slopes << 0.0, v.head(free);
                                 out.intercepts << 0.0, v.tail(free);
                                 return out;
                               }},
                    shape);
}

double log_probability_gradient(double theta, const ItemParameters& item, int code, Eigen::Ref<Eigen::VectorXd> grad) {
  check_code(code, category_count(item));
  grad.setZero();
  return std::visit(
      overloaded{[&](const Binary2PL& i) {
                   const double x = i.a * (theta - i.b);
                   const double residual = static_cast<double>(code) - logistic(x);
                   grad[0] = residual * (theta - i.b);
                   grad[1] = -residual * i.a;
                   return residual * i.a;
                 },
                 [&](const GradedItem& i) {
                   const int m = i.categories();
                   // d log P / d x_k for the (at most two) boundaries bracketing `code`
                   auto x = [&](int k) { return i.a * (theta - i.boundaries[k - 1]); };
                   double d_lower = 0.0;  // boundary `code`
                   double d_upper = 0.0;  // boundary `code + 1`
                   if (code == 0) {
                     d_upper = -logistic(x(1));
                   } else if (code == m - 1) {
                     d_lower = logistic(-x(m - 1));
                   } else {
                     const double lo = x(code);
                     const double hi = x(code + 1);
                     const double r = 1.0 / std::expm1(lo - hi);
                     d_lower = logistic(-lo) + r;
                     d_upper = -logistic(hi) - r;
                   }
                   double d_theta = 0.0;
                   if (code >= 1) {
                     grad[0] += d_lower * (theta - i.boundaries[code - 1]);
                     grad[code] = -d_lower * i.a;
                     d_theta += d_lower * i.a;
                   }
                   if (code + 1 <= m - 1) {
                     grad[0] += d_upper * (theta - i.boundaries[code]);
                     grad[code + 1] = -d_upper * i.a;
                     d_theta += d_upper * i.a;
                   }
                   return d_theta;
                 },
                 [&](const NominalItem& i) {
                   const auto free = i.slopes.size() - 1;
                   Eigen::VectorXd residual = -prob_nrm_categories(theta, i);
                   residual[code] += 1.0;
                   grad.head(free) = residual.tail(free) * theta;
                   grad.tail(free) = residual.tail(free);
                   return residual.dot(i.slopes);
                 }},
      item);
}

// ---------------------------------------------------------------------------

double pattern_loglik(std::span<const int> pattern, std::span<const ItemModel> items, double theta) {
  if (pattern.size() != items.size()) throw Error(ErrorCode::InvalidArgument, "pattern length differs from item count");
  double total = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (pattern[i] == kMissing) continue;
    total += log_category_probability(theta, items[i].parameters, pattern[i]);
  }
  return total;
}

PatternScore pattern_score(std::span<const int> pattern, std::span<const ItemModel> items, double theta) {
  if (pattern.size() != items.size()) throw Error(ErrorCode::InvalidArgument, "pattern length differs from item count");
  PatternScore score;
  score.items.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(parameter_count(items[i].parameters));
    if (pattern[i] != kMissing) score.theta += log_probability_gradient(theta, items[i].parameters, pattern[i], grad);
    score.items.push_back(std::move(grad));
  }
  return score;
}

}  // namespace irtci
