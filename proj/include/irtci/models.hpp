#pragma once

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "irtci/data.hpp"

namespace irtci {

// ---------------------------------------------------------------------------
// Scalar kernels. All are overflow-free for any finite argument.

/// 1 / (1 + exp(-x)), sign-split so neither branch overflows.
template <typename Scalar>
Scalar logistic(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

/// log(logistic(x)).
template <typename Scalar>
Scalar log_logistic(Scalar x) {
  using std::exp;
  using std::log1p;
  if (x >= Scalar(0)) return -log1p(exp(-x));
  return x - log1p(exp(x));
}

/// log(logistic(hi) - logistic(lo)) for hi > lo, without cancellation:
/// logistic(hi) - logistic(lo) = logistic(hi) * logistic(-lo) * (1 - exp(lo - hi)).
template <typename Scalar>
Scalar log_logistic_difference(Scalar hi, Scalar lo) {
  using std::expm1;
  using std::log;
  return log_logistic(hi) + log_logistic(-lo) + log(-expm1(lo - hi));
}

/// Softmax with max subtraction.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(const Eigen::MatrixBase<Derived>& z) {
  using Vec = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>;
  Vec e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& z) {
  using std::log;
  const auto top = z.maxCoeff();
  return top + log((z.array() - top).exp().sum());
}

// ---------------------------------------------------------------------------
// Item parameter types (logistic metric, no 1.702 scaling).

struct Binary2PL {
  double a = 1.0;  ///< discrimination
  double b = 0.0;  ///< difficulty
};

/// Samejima graded item. Category k in [0, m) has probability
/// P*_k - P*_{k+1}, with P*_0 = 1, P*_m = 0 and P*_k = logistic(a (theta - b_k)).
struct GradedItem {
  double a = 1.0;
  Eigen::VectorXd boundaries;  ///< b_1 < ... < b_{m-1}

  int categories() const { return static_cast<int>(boundaries.size()) + 1; }
};

/// Bock nominal item, divide-by-total over a_j theta + c_j, anchored so that
/// slopes[0] == intercepts[0] == 0.
struct NominalItem {
  Eigen::VectorXd slopes;
  Eigen::VectorXd intercepts;

  int categories() const { return static_cast<int>(slopes.size()); }
};

using ItemParameters = std::variant<Binary2PL, GradedItem, NominalItem>;

struct ItemModel {
  std::string feature;
  ItemParameters parameters;

  int categories() const;
};

enum class ItemFamily { TwoPL, Graded, Nominal };

std::string_view to_string(ItemFamily family);
ItemFamily family_of(const ItemParameters& parameters);
int category_count(const ItemParameters& parameters);
/// Model family required for a schema kind (binary -> 2PL, ordinal -> GRM,
/// nominal -> NRM). Continuous columns have none.
ItemFamily family_for(ColumnKind kind);

/// Throws InvalidArgument when the invariants of the item do not hold.
void validate(const Binary2PL& item);
void validate(const GradedItem& item);
void validate(const NominalItem& item);
void validate(const ItemParameters& item);
/// Also checks the family against the bound column.
void validate_binding(const ItemModel& item, const ColumnSchema& column);

// ---------------------------------------------------------------------------
// Category response functions

double prob_2pl(double theta, const Binary2PL& item);
double prob_grm_boundary(double theta, double a, double b_k);
Eigen::VectorXd prob_grm_categories(double theta, const GradedItem& item);
Eigen::VectorXd prob_nrm_categories(double theta, const NominalItem& item);

Eigen::VectorXd category_probabilities(double theta, const ItemParameters& item);
Eigen::VectorXd log_category_probabilities(double theta, const ItemParameters& item);
double log_category_probability(double theta, const ItemParameters& item, int code);

/// Expected category index under the item at theta.
double expected_category(double theta, const ItemParameters& item);

// ---------------------------------------------------------------------------
// Free-parameter packing. The vector layout is
//   2PL: (a, b)
//   GRM: (a, b_1, ..., b_{m-1})
//   NRM: (a_1..a_{m-1}, c_1..c_{m-1})   anchors excluded

Eigen::Index parameter_count(const ItemParameters& item);
Eigen::VectorXd pack(const ItemParameters& item);
ItemParameters unpack(const ItemParameters& shape, const Eigen::VectorXd& parameters);

/// Gradient of log P(code | theta) w.r.t. the packed parameters (written to
/// `grad`) and w.r.t. theta (returned).
double log_probability_gradient(double theta, const ItemParameters& item, int code, Eigen::Ref<Eigen::VectorXd> grad);

// ---------------------------------------------------------------------------
// Response patterns

/// Sum over observed cells of log P(code | theta). Missing cells (kMissing)
/// contribute nothing. Throws CodeOutOfRange.
double pattern_loglik(std::span<const int> pattern, std::span<const ItemModel> items, double theta);

struct PatternScore {
  double theta = 0.0;
  std::vector<Eigen::VectorXd> items;  ///< packed-parameter gradients, one per item
};

/// Analytic gradient of pattern_loglik w.r.t. all item parameters and theta.
PatternScore pattern_score(std::span<const int> pattern, std::span<const ItemModel> items, double theta);

}  // namespace irtci
