#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "irtci/data.hpp"
#include "irtci/models.hpp"

namespace irtci {

/// Equally spaced theta nodes with standard-normal prior weights.
struct QuadratureGrid {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  Eigen::Index size() const { return nodes.size(); }
  Eigen::VectorXd log_weights() const { return weights.array().log(); }
};

QuadratureGrid build_grid(int size = 61, double lo = -6.0, double hi = 6.0);

struct NewtonOptions {
  int max_iterations = 20;
  double tolerance = 1e-8;
};

struct FitConfig {
  int grid_size = 61;
  double grid_lo = -6.0;
  double grid_hi = 6.0;
  int max_iterations = 500;
  /// Stop when the largest absolute parameter change drops below this.
  double tolerance = 1e-4;
  NewtonOptions newton;
  std::uint64_t seed = 20240601;
  /// Quantile bins used for continuous feature columns.
  int continuous_bins = 4;

  void validate() const;
};

struct ClampEvent {
  std::string feature;
  int iteration = 0;
  std::string parameter;
};

struct FittedModel {
  std::vector<ItemModel> items;
  QuadratureGrid grid;
  std::vector<DiscretizationMap> discretizations;
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  std::vector<double> trace;  ///< marginal log-likelihood before each M-step, then the final value
  double final_change = 0.0;
  std::vector<ClampEvent> clamps;

  std::vector<std::string> feature_names() const;
};

struct ThetaEstimate {
  double eap_mean = 0.0;
  double posterior_sd = 0.0;
};

// ---------------------------------------------------------------------------
// Response matrices: one column per item, codes or kMissing.

/// Extracts the columns bound to `items` (by feature name) from `data`.
CodeMatrix response_matrix(const CategoricalDataset& data, std::span<const ItemModel> items);

/// log P(code | theta_q) for every node q, as a (Q x m) table.
Eigen::MatrixXd log_probability_table(const ItemParameters& item, const QuadratureGrid& grid);

struct ExpectedCounts {
  /// counts[i](q, k): posterior mass at node q of cases answering item i with k.
  std::vector<Eigen::MatrixXd> counts;
  Eigen::VectorXd node_mass;  ///< sums to N
  double log_likelihood = 0.0;
};

/// Posterior over grid nodes for a single pattern.
Eigen::VectorXd posterior(std::span<const int> pattern, std::span<const ItemModel> items, const QuadratureGrid& grid);

ExpectedCounts e_step(const CodeMatrix& responses, std::span<const ItemModel> items, const QuadratureGrid& grid);
ExpectedCounts e_step(const CategoricalDataset& data, std::span<const ItemModel> items, const QuadratureGrid& grid);

/// Marginal log-likelihood of the responses under the items.
double marginal_loglik(const CodeMatrix& responses, std::span<const ItemModel> items, const QuadratureGrid& grid);

/// Sum over nodes and categories of counts(q, k) * log P_k(theta_q).
double expected_loglik(const ItemParameters& item, const Eigen::MatrixXd& counts, const QuadratureGrid& grid);

struct MStepResult {
  ItemModel item;
  int iterations = 0;
  double objective_before = 0.0;
  double objective_after = 0.0;
  std::vector<std::string> clamped;  ///< names of parameters that hit a bound
};

/// Fisher-scoring Newton ascent with step halving on the expected
/// complete-data log-likelihood of one item.
MStepResult m_step_item(const ItemModel& item, const Eigen::MatrixXd& counts, const QuadratureGrid& grid,
                        const NewtonOptions& options = {});

/// Starting values from observed category proportions. NRM items get
/// seeded jitter.
std::vector<ItemModel> initial_items(const CategoricalDataset& features, std::uint64_t seed);

/// Marginal maximum likelihood by EM over the grid. Only columns with
/// role=feature are read; continuous features are quantile-discretized first.
FittedModel fit(const CategoricalDataset& data, const FitConfig& config = {});

/// EM from explicit starting items (responses already in item order).
FittedModel fit_responses(const CodeMatrix& responses, std::vector<ItemModel> start, const FitConfig& config);

ThetaEstimate eap_score(std::span<const int> pattern, std::span<const ItemModel> items, const QuadratureGrid& grid);
ThetaEstimate eap_score(std::span<const int> pattern, const FittedModel& model);

// ---------------------------------------------------------------------------
// Model files

/// Versioned text format; doubles are written in shortest round-trip form so
/// that save/load is bit-exact.
std::string format_model(const FittedModel& model);
FittedModel parse_model(std::string_view text);
void save_model(const FittedModel& model, const std::filesystem::path& path);
FittedModel load_model(const std::filesystem::path& path);

/// Human-readable fit diagnostics.
std::string format_diagnostics(const FittedModel& model);

}  // namespace irtci
