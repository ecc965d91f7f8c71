#include <algorithm>
#include <cstdio>

#include "irtci/random.hpp"
#include "irtci/simulate.hpp"

namespace irtci {

std::vector<ItemModel> random_items(ItemFamily family, int count, int categories, std::uint64_t seed,
                                    std::string_view prefix) {
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "need at least one item");
  if (categories < 2 || (family == ItemFamily::TwoPL && categories != 2)) {
    throw Error(ErrorCode::InvalidArgument, "bad category count for family");
  }
  Rng rng(seed);
  std::vector<ItemModel> items;
  for (int i = 0; i < count; ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "%.*s%02d", static_cast<int>(prefix.size()), prefix.data(), i + 1);
    ItemModel item{name, Binary2PL{}};
    switch (family) {
      case ItemFamily::TwoPL:
        item.parameters = Binary2PL{uniform(rng, 0.8, 2.0), uniform(rng, -2.0, 2.0)};
        break;
      case ItemFamily::Graded: {
        GradedItem g{uniform(rng, 0.8, 2.0), Eigen::VectorXd(categories - 1)};
        while (true) {
          for (int k = 0; k < categories - 1; ++k) g.boundaries[k] = uniform(rng, -2.0, 2.0);
          std::sort(g.boundaries.begin(), g.boundaries.end());
          bool spread = true;
          for (int k = 1; k < categories - 1; ++k) spread = spread && g.boundaries[k] - g.boundaries[k - 1] >= 0.25;
          if (spread) break;
        }
        item.parameters = std::move(g);
        break;
      }
      case ItemFamily::Nominal: {
        NominalItem n{Eigen::VectorXd::Zero(categories), Eigen::VectorXd::Zero(categories)};
        for (int k = 1; k < categories; ++k) {
          n.slopes[k] = uniform(rng, 0.8, 2.0);
          n.intercepts[k] = uniform(rng, -2.0, 2.0);
        }
        item.parameters = std::move(n);
        break;
      }
    }
    items.push_back(std::move(item));
  }
  return items;
}

ColumnSchema schema_for(const ItemModel& item) {
  ColumnSchema schema;
  schema.name = item.feature;
  switch (family_of(item.parameters)) {
    case ItemFamily::TwoPL: schema.kind = ColumnKind::Binary; break;
    case ItemFamily::Graded: schema.kind = ColumnKind::Ordinal; break;
    case ItemFamily::Nominal: schema.kind = ColumnKind::Nominal; break;
  }
  schema.arity = item.categories();
  for (int k = 0; k < item.categories(); ++k) schema.labels.push_back(std::to_string(k));
  return schema;
}

SimulatedData simulate(std::span<const ItemModel> items, Eigen::Index cases, std::uint64_t seed, bool with_outcome) {
  Rng rng(seed);
  const auto n_items = static_cast<Eigen::Index>(items.size());
  const Eigen::Index n_cols = n_items + (with_outcome ? 1 : 0);
  CodeMatrix codes(cases, n_cols);
  Eigen::MatrixXd values = Eigen::MatrixXd::Constant(cases, n_cols, std::numeric_limits<double>::quiet_NaN());
  SimulatedData out;
  out.theta.resize(cases);
  for (Eigen::Index r = 0; r < cases; ++r) {
    const double theta = standard_normal(rng);
    out.theta[r] = theta;
    for (Eigen::Index i = 0; i < n_items; ++i) {
      const Eigen::VectorXd p = category_probabilities(theta, items[static_cast<std::size_t>(i)].parameters);
      const double u = uniform01(rng);
      double cumulative = 0.0;
      int code = static_cast<int>(p.size()) - 1;
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        cumulative += p[k];
        if (u < cumulative) {
          code = static_cast<int>(k);
          break;
        }
      }
      codes(r, i) = code;
    }
    if (with_outcome) {
      codes(r, n_items) = 0;
      values(r, n_items) = theta + standard_normal(rng);
    }
  }
  std::vector<ColumnSchema> schemas;
  for (const auto& item : items) schemas.push_back(schema_for(item));
  if (with_outcome) {
    ColumnSchema outcome;
    outcome.name = "outcome";
    outcome.kind = ColumnKind::Continuous;
    outcome.role = ColumnRole::Excluded;
    schemas.push_back(std::move(outcome));
  }
  out.data = CategoricalDataset(std::move(schemas), std::move(codes), std::move(values));
  return out;
}

}  // namespace irtci
