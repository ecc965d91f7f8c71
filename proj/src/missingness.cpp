#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <Eigen/Cholesky>
#include <boost/math/special_functions/gamma.hpp>

#include "irtci/missingness.hpp"
#include "irtci/random.hpp"

namespace irtci {

std::string_view to_string(Mechanism mechanism) { return mechanism == Mechanism::MCAR ? "MCAR" : "MAR"; }
std::string_view to_string(Direction direction) { return direction == Direction::Top ? "top" : "bottom"; }

Mechanism parse_mechanism(std::string_view text) {
  if (text == "mcar" || text == "MCAR") return Mechanism::MCAR;
  if (text == "mar" || text == "MAR") return Mechanism::MAR;
  throw Error(ErrorCode::InvalidArgument, "unknown mechanism '" + std::string(text) + "' (mcar|mar)");
}

Direction parse_direction(std::string_view text) {
  if (text == "top") return Direction::Top;
  if (text == "bottom") return Direction::Bottom;
  throw Error(ErrorCode::InvalidArgument, "unknown direction '" + std::string(text) + "' (top|bottom)");
}

void MissingnessSpec::validate() const {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error(ErrorCode::InvalidArgument, "fraction must lie in (0, 1)");
  if (target.empty()) throw Error(ErrorCode::InvalidArgument, "missing target column");
  if (mechanism == Mechanism::MAR) {
    if (conditional.empty()) throw Error(ErrorCode::InvalidArgument, "MAR needs a conditional column");
    if (conditional == target) throw Error(ErrorCode::InvalidArgument, "conditional column must differ from target");
  }
}

Eigen::Index injection_count(double fraction, Eigen::Index rows) {
  return static_cast<Eigen::Index>(std::floor(fraction * static_cast<double>(rows) + 1e-9));
}

namespace {

Eigen::Index prepare_target(const CategoricalDataset& data, std::string_view target, double fraction,
                            Eigen::Index& count) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error(ErrorCode::InvalidArgument, "fraction must lie in (0, 1)");
  const auto col = data.index_of(target);
  if (data.missing_count(col) > 0) {
    throw Error(ErrorCode::AlreadyMissing, "target column " + std::string(target) + " already has missing cells");
  }
  count = injection_count(fraction, data.rows());
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "fraction selects zero cells");
  return col;
}

Injection remove_cells(const CategoricalDataset& data, Eigen::Index col, std::vector<Eigen::Index> rows) {
  std::sort(rows.begin(), rows.end());
  Injection out{data, std::move(rows), std::nullopt};
  for (auto r : out.rows) out.data.set_missing(r, col);
  return out;
}

}  // namespace

Injection inject_mcar(const CategoricalDataset& data, std::string_view target, double fraction, std::uint64_t seed) {
  Eigen::Index count = 0;
  const auto col = prepare_target(data, target, fraction, count);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(data.rows()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  // partial Fisher-Yates: the first `count` slots are a uniform sample
  Rng rng(seed);
  for (Eigen::Index k = 0; k < count; ++k) {
    const auto remaining = static_cast<std::uint64_t>(data.rows() - k);
    const auto pick = k + static_cast<Eigen::Index>(uniform_index(rng, remaining));
    std::swap(rows[static_cast<std::size_t>(k)], rows[static_cast<std::size_t>(pick)]);
  }
  rows.resize(static_cast<std::size_t>(count));
  return remove_cells(data, col, std::move(rows));
}

Injection inject_mar(const CategoricalDataset& data, std::string_view target, std::string_view conditional,
                     double fraction, Direction direction) {
  if (target == conditional) throw Error(ErrorCode::InvalidArgument, "conditional column must differ from target");
  Eigen::Index count = 0;
  const auto col = prepare_target(data, target, fraction, count);
  const auto cond = data.index_of(conditional);
  if (data.missing_count(cond) > 0) {
    throw Error(ErrorCode::InvalidArgument, "conditional column " + std::string(conditional) + " has missing cells");
  }
  const Eigen::VectorXd key = data.numeric_column(cond);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return direction == Direction::Top ? key[a] > key[b] : key[a] < key[b];
  });
  order.resize(static_cast<std::size_t>(count));
  Injection out = remove_cells(data, col, std::move(order));
  if (data.rows() > 0 && (key.array() == key[0]).all()) {
    out.warning = "conditional column " + std::string(conditional) + " is constant; MAR selection is arbitrary";
  }
  return out;
}

Injection inject(const CategoricalDataset& data, const MissingnessSpec& spec) {
  spec.validate();
  if (spec.mechanism == Mechanism::MCAR) return inject_mcar(data, spec.target, spec.fraction, spec.seed);
  return inject_mar(data, spec.target, spec.conditional, spec.fraction, spec.direction);
}

// ---------------------------------------------------------------------------
// Little's test

namespace {

struct PatternGroup {
  std::vector<Eigen::Index> observed;
  std::vector<Eigen::Index> missing;
  std::vector<Eigen::Index> rows;
};

std::vector<PatternGroup> group_patterns(const Eigen::MatrixXd& data) {
  std::map<std::vector<bool>, PatternGroup> groups;
  std::vector<bool> key(static_cast<std::size_t>(data.cols()));
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) key[static_cast<std::size_t>(c)] = !std::isnan(data(r, c));
    auto& group = groups[key];
    if (group.rows.empty()) {
      for (Eigen::Index c = 0; c < data.cols(); ++c) {
        (key[static_cast<std::size_t>(c)] ? group.observed : group.missing).push_back(c);
      }
    }
    group.rows.push_back(r);
  }
  std::vector<PatternGroup> out;
  for (auto& [k, group] : groups) out.push_back(std::move(group));
  return out;
}

Eigen::MatrixXd block(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows,
                      const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
    }
  }
  return out;
}

Eigen::VectorXd pick(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[idx[i]];
  return out;
}

struct SingularBlock {};

Eigen::LLT<Eigen::MatrixXd> factor(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw SingularBlock{};
  // Reject numerically singular blocks that LLT accepts. d_i^2 / m_ii is
  // 1 - R^2 of variable i on the preceding ones, so the test is scale-free.
  const Eigen::VectorXd d = llt.matrixLLT().diagonal();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(m(i, i) > 0.0) || !(d[i] * d[i] > 1e-12 * m(i, i))) throw SingularBlock{};
  }
  return llt;
}

NormalMoments normal_em_impl(const Eigen::MatrixXd& data, const std::vector<PatternGroup>& groups,
                             const LittleOptions& options, double ridge) {
  const auto p = data.cols();
  const auto n = static_cast<double>(data.rows());
  NormalMoments moments;
  moments.mean = Eigen::VectorXd::Zero(p);
  moments.covariance = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index c = 0; c < p; ++c) {
    double sum = 0.0;
    double count = 0.0;
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
      if (std::isnan(data(r, c))) continue;
      sum += data(r, c);
      count += 1.0;
    }
    if (count < 1.0) throw Error(ErrorCode::InvalidArgument, "column " + std::to_string(c) + " is entirely missing");
    moments.mean[c] = sum / count;
    double ss = 0.0;
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
      if (!std::isnan(data(r, c))) ss += (data(r, c) - moments.mean[c]) * (data(r, c) - moments.mean[c]);
    }
    moments.covariance(c, c) = ss / count;
  }
  moments.covariance.diagonal().array() += ridge;

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    Eigen::VectorXd t1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd t2 = Eigen::MatrixXd::Zero(p, p);
    for (const auto& g : groups) {
      const auto rows_in_group = static_cast<double>(g.rows.size());
      if (g.observed.empty()) {
        t1 += rows_in_group * moments.mean;
        t2 += rows_in_group * (moments.covariance + moments.mean * moments.mean.transpose());
        continue;
      }
      const Eigen::MatrixXd s_oo = block(moments.covariance, g.observed, g.observed);
      const Eigen::MatrixXd s_mo = block(moments.covariance, g.missing, g.observed);
      const Eigen::VectorXd mu_o = pick(moments.mean, g.observed);
      const Eigen::VectorXd mu_m = pick(moments.mean, g.missing);
      Eigen::MatrixXd regression;
      Eigen::MatrixXd conditional_cov;
      if (!g.missing.empty()) {
        const auto llt = factor(s_oo);
        regression = llt.solve(s_mo.transpose()).transpose();
        conditional_cov = block(moments.covariance, g.missing, g.missing) - regression * s_mo.transpose();
      }
      Eigen::VectorXd x(p);
      for (auto r : g.rows) {
        for (std::size_t j = 0; j < g.observed.size(); ++j) x[g.observed[j]] = data(r, g.observed[j]);
        if (!g.missing.empty()) {
          const Eigen::VectorXd xo = pick(x, g.observed);
          const Eigen::VectorXd xm = mu_m + regression * (xo - mu_o);
          for (std::size_t j = 0; j < g.missing.size(); ++j) x[g.missing[j]] = xm[static_cast<Eigen::Index>(j)];
        }
        t1 += x;
        t2.noalias() += x * x.transpose();
      }
      for (std::size_t i = 0; i < g.missing.size(); ++i) {
        for (std::size_t j = 0; j < g.missing.size(); ++j) {
          t2(g.missing[i], g.missing[j]) +=
              rows_in_group * conditional_cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
      }
    }
    const Eigen::VectorXd mean = t1 / n;
    Eigen::MatrixXd covariance = t2 / n - mean * mean.transpose();
    covariance.diagonal().array() += ridge;
    // Change in standardized units, so the stopping rule (and hence the
    // statistic) does not depend on the measurement scale of any column.
    const Eigen::VectorXd sd = covariance.diagonal().cwiseMax(0.0).cwiseSqrt().cwiseMax(1e-300);
    const Eigen::VectorXd inv_sd = sd.cwiseInverse();
    const double change =
        std::max((mean - moments.mean).cwiseProduct(inv_sd).cwiseAbs().maxCoeff(),
                 (inv_sd.asDiagonal() * (covariance - moments.covariance) * inv_sd.asDiagonal()).cwiseAbs().maxCoeff());
    moments.mean = mean;
    moments.covariance = covariance;
    moments.iterations = iter;
    if (change < options.tolerance) break;
  }
  return moments;
}

LittleTestResult littles_statistic(const Eigen::MatrixXd& data, const std::vector<PatternGroup>& groups,
                                   const NormalMoments& moments) {
  LittleTestResult result;
  result.pattern_count = static_cast<int>(groups.size());
  int observed_total = 0;
  for (const auto& g : groups) {
    if (g.observed.empty()) continue;
    observed_total += static_cast<int>(g.observed.size());
    Eigen::VectorXd ybar = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.observed.size()));
    for (auto r : g.rows) {
      for (std::size_t j = 0; j < g.observed.size(); ++j) ybar[static_cast<Eigen::Index>(j)] += data(r, g.observed[j]);
    }
    ybar /= static_cast<double>(g.rows.size());
    const Eigen::VectorXd diff = ybar - pick(moments.mean, g.observed);
    const auto llt = factor(block(moments.covariance, g.observed, g.observed));
    result.statistic += static_cast<double>(g.rows.size()) * diff.dot(llt.solve(diff));
  }
  result.df = observed_total - static_cast<int>(data.cols());
  return result;
}

struct Standardized {
  Eigen::MatrixXd data;
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
};

/// Centers and scales each column by its observed mean and SD (scale 1 for a
/// constant column). Working in these units keeps the EM free of the
/// cancellation in E[x^2] - E[x]^2 when a column has a large offset.
Standardized standardize(const Eigen::MatrixXd& data) {
  Standardized out{data, Eigen::VectorXd::Zero(data.cols()), Eigen::VectorXd::Ones(data.cols())};
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    double sum = 0.0, count = 0.0;
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
      if (std::isnan(data(r, c))) continue;
      sum += data(r, c);
      count += 1.0;
    }
    if (count < 1.0) throw Error(ErrorCode::InvalidArgument, "column " + std::to_string(c) + " is entirely missing");
    const double mean = sum / count;
    double ss = 0.0;
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
      if (!std::isnan(data(r, c))) ss += (data(r, c) - mean) * (data(r, c) - mean);
    }
    const double sd = std::sqrt(ss / count);
    out.center[c] = mean;
    out.scale[c] = sd > 0.0 ? sd : 1.0;
    out.data.col(c) = ((data.col(c).array() - mean) / out.scale[c]).matrix();
  }
  return out;
}

}  // namespace

NormalMoments normal_em(const Eigen::MatrixXd& data, const LittleOptions& options) {
  const auto z = standardize(data);
  const auto groups = group_patterns(z.data);
  try {
    NormalMoments moments = normal_em_impl(z.data, groups, options, 0.0);
    moments.mean = z.center + z.scale.cwiseProduct(moments.mean);
    moments.covariance = z.scale.asDiagonal() * moments.covariance * z.scale.asDiagonal();
    return moments;
  } catch (const SingularBlock&) {
    throw Error(ErrorCode::SingularCovariance, "singular covariance block in normal EM");
  }
}

double chi_square_survival(double statistic, double df) {
  if (df <= 0.0) return 1.0;
  if (statistic <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * statistic);
}

LittleTestResult littles_test(const Eigen::MatrixXd& data, const LittleOptions& options) {
  if (data.cols() < 2) throw Error(ErrorCode::InvalidArgument, "Little's test needs at least two columns");
  if (data.rows() < 2) throw Error(ErrorCode::InvalidArgument, "Little's test needs at least two rows");
  // The statistic is invariant under per-column affine maps; standardized
  // units make that hold numerically too.
  const Eigen::MatrixXd z = standardize(data).data;
  const auto groups = group_patterns(z);
  if (groups.size() < 2) {
    LittleTestResult vacuous;
    vacuous.pattern_count = static_cast<int>(groups.size());
    return vacuous;
  }

  auto attempt = [&](double ridge) {
    const auto moments = normal_em_impl(z, groups, options, ridge);
    return littles_statistic(z, groups, moments);
  };
  LittleTestResult result;
  try {
    result = attempt(0.0);
  } catch (const SingularBlock&) {
    // One retry with a small diagonal ridge: 1e-8 * trace / p, which is 1e-8
    // in standardized units.
    const double ridge = 1e-8;
    try {
      result = attempt(ridge);
      result.ridge_used = true;
    } catch (const SingularBlock&) {
      throw Error(ErrorCode::SingularCovariance, "observed-covariance block is singular even with ridge");
    }
  }
  result.p_value = chi_square_survival(result.statistic, result.df);
  return result;
}

}  // namespace irtci
