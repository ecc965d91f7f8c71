#pragma once

// Helpers shared by unit and acceptance tests.

#include <Eigen/Core>

#include <cmath>
#include <vector>

#include "irtci/models.hpp"
#include "irtci/random.hpp"

namespace testsupport {

using namespace irtci;

/// Random item of the given family with wide parameter ranges (for
/// probability / gradient checks, not for recovery).
inline ItemParameters random_parameters(ItemFamily family, int categories, Rng& rng) {
  switch (family) {
    case ItemFamily::TwoPL:
      return Binary2PL{uniform(rng, 0.2, 3.0), uniform(rng, -3.0, 3.0)};
    case ItemFamily::Graded: {
      GradedItem g{uniform(rng, 0.2, 3.0), Eigen::VectorXd(categories - 1)};
      double b = uniform(rng, -3.0, -1.0);
      for (int k = 0; k < categories - 1; ++k) {
        g.boundaries[k] = b;
        b += uniform(rng, 0.1, 1.5);
      }
      return g;
    }
    case ItemFamily::Nominal: {
      NominalItem n{Eigen::VectorXd::Zero(categories), Eigen::VectorXd::Zero(categories)};
      for (int k = 1; k < categories; ++k) {
        n.slopes[k] = uniform(rng, -2.5, 2.5);
        n.intercepts[k] = uniform(rng, -3.0, 3.0);
      }
      return n;
    }
  }
  return Binary2PL{};
}

inline double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Largest relative deviation between an analytic and a central-difference
/// gradient, with an absolute floor of 1 so near-zero components do not blow up.
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::max(std::abs(analytic), std::abs(numeric)));
}

}  // namespace testsupport
