#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <Eigen/Cholesky>
#include <boost/math/distributions/normal.hpp>

#include "irtci/estimation.hpp"
#include "irtci/random.hpp"

namespace irtci {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kSlopeMin = 1e-3;
constexpr double kSlopeMax = 50.0;
constexpr double kLocationBound = 50.0;
constexpr double kLogGapMin = -20.0;
constexpr double kLogGapMax = 4.605170185988092;  // log(100)
constexpr double kEmptyCategoryFloor = 1e-10;
constexpr int kMaxHalvings = 40;

}  // namespace

void FitConfig::validate() const {
  if (grid_size < 11) throw Error(ErrorCode::InvalidArgument, "grid size must be >= 11");
  if (!(grid_lo < grid_hi)) throw Error(ErrorCode::InvalidArgument, "grid range must satisfy lo < hi");
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "EM needs at least one iteration");
  if (!(tolerance > 0.0) || !(newton.tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerances must be > 0");
  if (newton.max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "Newton needs at least one iteration");
  if (continuous_bins < 2) throw Error(ErrorCode::InvalidArgument, "continuous features need >= 2 bins");
}

std::vector<std::string> FittedModel::feature_names() const {
  std::vector<std::string> names;
  names.reserve(items.size());
  for (const auto& item : items) names.push_back(item.feature);
  return names;
}

QuadratureGrid build_grid(int size, double lo, double hi) {
  if (size < 11) throw Error(ErrorCode::InvalidArgument, "grid size must be >= 11");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw Error(ErrorCode::InvalidArgument, "grid range must satisfy lo < hi");
  }
  QuadratureGrid grid;
  grid.nodes.resize(size);
  const double step = (hi - lo) / (size - 1);
  for (int k = 0; k < size; ++k) grid.nodes[k] = lo + k * step;
  grid.nodes[size - 1] = hi;
  // symmetric ranges get exactly symmetric nodes
  if (lo == -hi) {
    for (int k = 0; k < size / 2; ++k) grid.nodes[size - 1 - k] = -grid.nodes[k];
    if (size % 2 == 1) grid.nodes[size / 2] = 0.0;
  }
  grid.weights = (-0.5 * grid.nodes.array().square()).exp();
  grid.weights /= grid.weights.sum();
  return grid;
}

CodeMatrix response_matrix(const CategoricalDataset& data, std::span<const ItemModel> items) {
  CodeMatrix out(data.rows(), static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto col = data.find(items[i].feature);
    if (!col) throw Error(ErrorCode::SchemaMismatch, "dataset has no column '" + items[i].feature + "'");
    validate_binding(items[i], data.schema(*col));
    out.col(static_cast<Eigen::Index>(i)) = data.codes().col(*col);
  }
  return out;
}

Eigen::MatrixXd log_probability_table(const ItemParameters& item, const QuadratureGrid& grid) {
  Eigen::MatrixXd table(grid.size(), category_count(item));
  for (Eigen::Index q = 0; q < grid.size(); ++q) table.row(q) = log_category_probabilities(grid.nodes[q], item).transpose();
  return table;
}

namespace {

std::vector<Eigen::MatrixXd> log_tables(std::span<const ItemModel> items, const QuadratureGrid& grid) {
  std::vector<Eigen::MatrixXd> tables;
  tables.reserve(items.size());
  for (const auto& item : items) tables.push_back(log_probability_table(item.parameters, grid));
  return tables;
}

void check_codes(const CodeMatrix& responses, std::span<const ItemModel> items) {
  if (responses.cols() != static_cast<Eigen::Index>(items.size())) {
    throw Error(ErrorCode::InvalidArgument, "response matrix has wrong number of columns");
  }
  for (Eigen::Index i = 0; i < responses.cols(); ++i) {
    const int m = items[static_cast<std::size_t>(i)].categories();
    for (Eigen::Index r = 0; r < responses.rows(); ++r) {
      const int code = responses(r, i);
      if (code != kMissing && (code < 0 || code >= m)) {
        throw Error(ErrorCode::CodeOutOfRange, "code " + std::to_string(code) + " out of range for item " +
                                                   items[static_cast<std::size_t>(i)].feature);
      }
    }
  }
}

/// Unnormalized log posterior of one row over the grid.
void row_log_posterior(const CodeMatrix& responses, Eigen::Index row, const std::vector<Eigen::MatrixXd>& tables,
                       const Eigen::VectorXd& log_weights, Eigen::VectorXd& out) {
  out = log_weights;
  for (Eigen::Index i = 0; i < responses.cols(); ++i) {
    const int code = responses(row, i);
    if (code != kMissing) out += tables[static_cast<std::size_t>(i)].col(code);
  }
}

/// Distinct response rows with multiplicities, in lexicographic order.
struct CompressedResponses {
  CodeMatrix patterns;
  Eigen::VectorXd counts;
};

CompressedResponses compress(const CodeMatrix& responses) {
  std::map<std::vector<int>, double> tally;
  std::vector<int> key(static_cast<std::size_t>(responses.cols()));
  for (Eigen::Index r = 0; r < responses.rows(); ++r) {
    for (Eigen::Index c = 0; c < responses.cols(); ++c) key[static_cast<std::size_t>(c)] = responses(r, c);
    tally[key] += 1.0;
  }
  CompressedResponses out;
  out.patterns.resize(static_cast<Eigen::Index>(tally.size()), responses.cols());
  out.counts.resize(static_cast<Eigen::Index>(tally.size()));
  Eigen::Index r = 0;
  for (const auto& [pattern, count] : tally) {
    for (Eigen::Index c = 0; c < responses.cols(); ++c) out.patterns(r, c) = pattern[static_cast<std::size_t>(c)];
    out.counts[r++] = count;
  }
  return out;
}

ExpectedCounts weighted_e_step(const CodeMatrix& responses, const Eigen::VectorXd& row_weights,
                               std::span<const ItemModel> items, const QuadratureGrid& grid) {
  const auto tables = log_tables(items, grid);
  const Eigen::VectorXd log_w = grid.log_weights();
  ExpectedCounts out;
  out.node_mass = Eigen::VectorXd::Zero(grid.size());
  for (const auto& item : items) out.counts.push_back(Eigen::MatrixXd::Zero(grid.size(), item.categories()));

  Eigen::VectorXd lp(grid.size());
  for (Eigen::Index r = 0; r < responses.rows(); ++r) {
    row_log_posterior(responses, r, tables, log_w, lp);
    const double top = lp.maxCoeff();
    Eigen::VectorXd post = (lp.array() - top).exp();
    const double total = post.sum();
    const double ll = top + std::log(total);
    if (!std::isfinite(ll)) throw Error(ErrorCode::NumericalFailure, "non-finite likelihood in E-step");
    const double weight = row_weights[r];
    out.log_likelihood += weight * ll;
    post *= weight / total;
    out.node_mass += post;
    for (Eigen::Index i = 0; i < responses.cols(); ++i) {
      const int code = responses(r, i);
      if (code != kMissing) out.counts[static_cast<std::size_t>(i)].col(code) += post;
    }
  }
  return out;
}

}  // namespace

Eigen::VectorXd posterior(std::span<const int> pattern, std::span<const ItemModel> items, const QuadratureGrid& grid) {
  if (pattern.size() != items.size()) throw Error(ErrorCode::InvalidArgument, "pattern length differs from item count");
  Eigen::VectorXd lp = grid.log_weights();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (pattern[i] == kMissing) continue;
    for (Eigen::Index q = 0; q < grid.size(); ++q) {
      lp[q] += log_category_probability(grid.nodes[q], items[i].parameters, pattern[i]);
    }
  }
  Eigen::VectorXd post = (lp.array() - lp.maxCoeff()).exp();
  const double total = post.sum();
  if (!std::isfinite(total) || !(total > 0.0)) throw Error(ErrorCode::NumericalFailure, "degenerate posterior");
  return post / total;
}

ExpectedCounts e_step(const CodeMatrix& responses, std::span<const ItemModel> items, const QuadratureGrid& grid) {
  check_codes(responses, items);
  return weighted_e_step(responses, Eigen::VectorXd::Ones(responses.rows()), items, grid);
}

ExpectedCounts e_step(const CategoricalDataset& data, std::span<const ItemModel> items, const QuadratureGrid& grid) {
  return e_step(response_matrix(data, items), items, grid);
}

double marginal_loglik(const CodeMatrix& responses, std::span<const ItemModel> items, const QuadratureGrid& grid) {
  return e_step(responses, items, grid).log_likelihood;
}

double expected_loglik(const ItemParameters& item, const Eigen::MatrixXd& counts, const QuadratureGrid& grid) {
  const Eigen::MatrixXd table = log_probability_table(item, grid);
  double total = 0.0;
  for (Eigen::Index k = 0; k < counts.cols(); ++k) {
    for (Eigen::Index q = 0; q < counts.rows(); ++q) {
      if (counts(q, k) > 0.0) total += counts(q, k) * table(q, k);
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// M-step

namespace {

/// Maps between the unconstrained optimization vector and item parameters.
/// GRM boundaries are b_1 followed by log gaps so that ordering always holds.
struct Parameterization {
  ItemParameters shape;

  Eigen::VectorXd to_free(const ItemParameters& item) const {
    Eigen::VectorXd v = pack(item);
    if (const auto* g = std::get_if<GradedItem>(&item)) {
      for (Eigen::Index k = 1; k < g->boundaries.size(); ++k) {
        v[k + 1] = std::log(g->boundaries[k] - g->boundaries[k - 1]);
      }
    }
    return v;
  }

  ItemParameters from_free(const Eigen::VectorXd& u) const {
    Eigen::VectorXd v = u;
    if (std::holds_alternative<GradedItem>(shape)) {
      for (Eigen::Index k = 2; k < v.size(); ++k) v[k] = v[k - 1] + std::exp(u[k]);
    }
    return unpack(shape, v);
  }

  /// d(packed)/d(free)
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& u) const {
    const auto n = u.size();
    Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n);
    if (std::holds_alternative<GradedItem>(shape)) {
      for (Eigen::Index k = 2; k < n; ++k) {
        j(k, 1) = 1.0;
        for (Eigen::Index g = 2; g <= k; ++g) j(k, g) = std::exp(u[g]);
      }
    }
    return j;
  }

  /// Projects the free vector into the admissible box; records hits.
  void clamp(Eigen::VectorXd& u, std::vector<std::string>* hits) const {
    auto bound = [&](Eigen::Index k, double lo, double hi, const std::string& name) {
      if (u[k] < lo || u[k] > hi) {
        u[k] = std::clamp(u[k], lo, hi);
        if (hits) hits->push_back(name);
      }
    };
    std::visit(overloaded{[&](const Binary2PL&) {
                            bound(0, kSlopeMin, kSlopeMax, "a");
                            bound(1, -kLocationBound, kLocationBound, "b");
                          },
                          [&](const GradedItem&) {
                            bound(0, kSlopeMin, kSlopeMax, "a");
                            bound(1, -kLocationBound, kLocationBound, "b1");
                            for (Eigen::Index k = 2; k < u.size(); ++k) {
                              bound(k, kLogGapMin, kLogGapMax, "log_gap" + std::to_string(k));
                            }
                          },
                          [&](const NominalItem& n) {
                            const auto free = n.slopes.size() - 1;
                            for (Eigen::Index k = 0; k < free; ++k) {
                              bound(k, -kSlopeMax, kSlopeMax, "a" + std::to_string(k + 1));
                              bound(free + k, -kLocationBound, kLocationBound, "c" + std::to_string(k + 1));
                            }
                          }},
               shape);
  }
};

struct Derivatives {
  double value = 0.0;
  Eigen::VectorXd gradient;     ///< w.r.t. packed parameters
  Eigen::MatrixXd information;  ///< expected (Fisher) information, packed parameters
};

Derivatives item_derivatives(const ItemParameters& item, const Eigen::MatrixXd& counts, const QuadratureGrid& grid) {
  const auto n = parameter_count(item);
  const int m = category_count(item);
  Derivatives d;
  d.gradient = Eigen::VectorXd::Zero(n);
  d.information = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd g(n);
  for (Eigen::Index q = 0; q < grid.size(); ++q) {
    const double theta = grid.nodes[q];
    const double mass = counts.row(q).sum();
    if (!(mass > 0.0)) continue;
    const Eigen::VectorXd logp = log_category_probabilities(theta, item);
    for (int k = 0; k < m; ++k) {
      log_probability_gradient(theta, item, k, g);
      const double r = counts(q, k);
      if (r > 0.0) {
        d.value += r * logp[k];
        d.gradient += r * g;
      }
      d.information.noalias() += (mass * std::exp(logp[k])) * g * g.transpose();
    }
  }
  return d;
}

double max_abs_difference(const ItemParameters& lhs, const ItemParameters& rhs) {
  return (pack(lhs) - pack(rhs)).cwiseAbs().maxCoeff();
}

}  // namespace

MStepResult m_step_item(const ItemModel& item, const Eigen::MatrixXd& raw_counts, const QuadratureGrid& grid,
                        const NewtonOptions& options) {
  validate(item.parameters);
  const int m = item.categories();
  if (raw_counts.rows() != grid.size() || raw_counts.cols() != m) {
    throw Error(ErrorCode::InvalidArgument, "expected-count table has wrong shape for item " + item.feature);
  }
  if ((raw_counts.array() < 0.0).any() || !raw_counts.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "expected counts must be finite and nonnegative");
  }
  Eigen::MatrixXd counts = raw_counts;
  const Eigen::VectorXd totals = counts.colwise().sum().transpose();
  if ((totals.array() > 0.0).count() < 2) {
    throw Error(ErrorCode::EmptyCategory, "item " + item.feature + " has fewer than two categories with positive count");
  }
  for (int k = 0; k < m; ++k) {
    if (totals[k] < kEmptyCategoryFloor) counts.col(k).array() += kEmptyCategoryFloor / static_cast<double>(grid.size());
  }

  const Parameterization param{item.parameters};
  MStepResult result;
  result.item = item;
  Eigen::VectorXd u = param.to_free(item.parameters);
  ItemParameters current = item.parameters;
  Derivatives d = item_derivatives(current, counts, grid);
  if (!std::isfinite(d.value) || !d.gradient.allFinite()) {
    throw Error(ErrorCode::NewtonDiverged, "non-finite objective for item " + item.feature);
  }
  result.objective_before = d.value;

  bool done = false;
  for (int iter = 0; iter < options.max_iterations && !done; ++iter) {
    const Eigen::MatrixXd jac = param.jacobian(u);
    const Eigen::VectorXd grad = jac.transpose() * d.gradient;
    Eigen::MatrixXd info = jac.transpose() * d.information * jac;
    const double ridge = 1e-10 * std::max(1.0, info.diagonal().cwiseAbs().maxCoeff());
    info.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Eigen::VectorXd step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite() || step.dot(grad) <= 0.0) step = grad;

    bool improved = false;
    double scale = 1.0;
    std::vector<std::string> hits;
    for (int h = 0; h < kMaxHalvings; ++h, scale *= 0.5) {
      Eigen::VectorXd trial = u + scale * step;
      hits.clear();
      param.clamp(trial, &hits);
      const ItemParameters candidate = param.from_free(trial);
      const double value = expected_loglik(candidate, counts, grid);
      if (std::isfinite(value) && value >= d.value) {
        const double change = max_abs_difference(candidate, current);
        u = trial;
        current = candidate;
        d = item_derivatives(current, counts, grid);
        improved = true;
        result.iterations = iter + 1;
        done = change < options.tolerance;
        break;
      }
    }
    for (auto& name : hits) result.clamped.push_back(std::move(name));
    done = done || !improved;
  }
  std::sort(result.clamped.begin(), result.clamped.end());
  result.clamped.erase(std::unique(result.clamped.begin(), result.clamped.end()), result.clamped.end());
  result.item.parameters = current;
  result.objective_after = d.value;
  return result;
}

// ---------------------------------------------------------------------------
// Initialization and EM driver

std::vector<ItemModel> initial_items(const CategoricalDataset& features, std::uint64_t seed) {
  Rng rng(seed);
  const boost::math::normal standard;
  std::vector<ItemModel> items;
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    const auto& schema = features.schema(c);
    const int m = *schema.arity;
    Eigen::VectorXd share = Eigen::VectorXd::Zero(m);
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
      if (!features.is_missing(r, c)) share[features.code(r, c)] += 1.0;
    }
    if (share.sum() > 0.0) share /= share.sum();
    auto below = [&](int k) {
      return boost::math::quantile(standard, std::clamp(share.head(k).sum(), 1e-4, 1.0 - 1e-4));
    };
    ItemModel item{schema.name, Binary2PL{}};
    switch (family_for(schema.kind)) {
      case ItemFamily::TwoPL:
        item.parameters = Binary2PL{1.0, below(1)};
        break;
      case ItemFamily::Graded: {
        GradedItem g{1.0, Eigen::VectorXd(m - 1)};
        for (int k = 1; k < m; ++k) {
          g.boundaries[k - 1] = below(k);
          if (k > 1 && g.boundaries[k - 1] <= g.boundaries[k - 2] + 1e-3) g.boundaries[k - 1] = g.boundaries[k - 2] + 1e-3;
        }
        item.parameters = std::move(g);
        break;
      }
      case ItemFamily::Nominal: {
        NominalItem n{Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m)};
        for (int k = 1; k < m; ++k) {
          n.slopes[k] = 0.02 * uniform01(rng) - 0.01;
          n.intercepts[k] = 0.02 * uniform01(rng) - 0.01;
        }
        item.parameters = std::move(n);
        break;
      }
    }
    items.push_back(std::move(item));
  }
  return items;
}

FittedModel fit_responses(const CodeMatrix& responses, std::vector<ItemModel> items, const FitConfig& config) {
  config.validate();
  check_codes(responses, items);
  FittedModel model;
  model.grid = build_grid(config.grid_size, config.grid_lo, config.grid_hi);
  const auto compressed = compress(responses);

  for (int iteration = 1; iteration <= config.max_iterations; ++iteration) {
    const auto expected = weighted_e_step(compressed.patterns, compressed.counts, items, model.grid);
    model.trace.push_back(expected.log_likelihood);
    double change = 0.0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      auto step = m_step_item(items[i], expected.counts[i], model.grid, config.newton);
      for (const auto& name : step.clamped) model.clamps.push_back({items[i].feature, iteration, name});
      change = std::max(change, max_abs_difference(step.item.parameters, items[i].parameters));
      items[i] = std::move(step.item);
    }
    model.iterations = iteration;
    model.final_change = change;
    if (change < config.tolerance) {
      model.converged = true;
      break;
    }
  }

  // reflection theta -> -theta leaves an all-nominal model's likelihood unchanged;
  // orient it so that the average slope is positive
  const bool all_nominal = !items.empty() && std::all_of(items.begin(), items.end(), [](const ItemModel& item) {
    return std::holds_alternative<NominalItem>(item.parameters);
  });
  if (all_nominal) {
    double slope_sum = 0.0;
    for (const auto& item : items) slope_sum += std::get<NominalItem>(item.parameters).slopes.sum();
    if (slope_sum < 0.0) {
      for (auto& item : items) std::get<NominalItem>(item.parameters).slopes *= -1.0;
    }
  }

  model.log_likelihood = weighted_e_step(compressed.patterns, compressed.counts, items, model.grid).log_likelihood;
  model.trace.push_back(model.log_likelihood);
  model.items = std::move(items);
  return model;
}

FittedModel fit(const CategoricalDataset& data, const FitConfig& config) {
  config.validate();
  const auto feature_cols = data.columns_with_role(ColumnRole::Feature);
  if (feature_cols.empty()) throw Error(ErrorCode::InsufficientData, "no feature columns to fit");

  const auto maps = fit_discretization(data, config.continuous_bins);
  const CategoricalDataset prepared = apply_discretization(data, maps);

  std::vector<ColumnSchema> schemas;
  CodeMatrix codes(prepared.rows(), static_cast<Eigen::Index>(feature_cols.size()));
  int max_arity = 0;
  for (std::size_t j = 0; j < feature_cols.size(); ++j) {
    const auto col = feature_cols[j];
    schemas.push_back(prepared.schema(col));
    codes.col(static_cast<Eigen::Index>(j)) = prepared.codes().col(col);
    max_arity = std::max(max_arity, *prepared.schema(col).arity);
  }
  if (prepared.rows() < 10 * static_cast<Eigen::Index>(max_arity)) {
    throw Error(ErrorCode::InsufficientData, "need at least " + std::to_string(10 * max_arity) + " cases, have " +
                                                 std::to_string(prepared.rows()));
  }
  const CategoricalDataset features(std::move(schemas), codes);
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    const int m = *features.schema(c).arity;
    std::vector<bool> seen(static_cast<std::size_t>(m), false);
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
      if (!features.is_missing(r, c)) seen[static_cast<std::size_t>(features.code(r, c))] = true;
    }
    for (int k = 0; k < m; ++k) {
      if (!seen[static_cast<std::size_t>(k)]) {
        throw Error(ErrorCode::UnobservedCategory, "column " + features.schema(c).name + " never observes code " +
                                                       std::to_string(k) + " ('" + features.schema(c).labels[k] + "')");
      }
    }
  }

  FittedModel model = fit_responses(features.codes(), initial_items(features, config.seed), config);
  model.discretizations = maps;
  return model;
}

ThetaEstimate eap_score(std::span<const int> pattern, std::span<const ItemModel> items, const QuadratureGrid& grid) {
  const Eigen::VectorXd post = posterior(pattern, items, grid);
  ThetaEstimate estimate;
  estimate.eap_mean = post.dot(grid.nodes);
  estimate.posterior_sd = std::sqrt(post.dot((grid.nodes.array() - estimate.eap_mean).square().matrix()));
  return estimate;
}

ThetaEstimate eap_score(std::span<const int> pattern, const FittedModel& model) {
  return eap_score(pattern, model.items, model.grid);
}

}  // namespace irtci
