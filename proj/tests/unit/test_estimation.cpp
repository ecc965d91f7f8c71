#include <doctest.h>

#include <cmath>

#include "irtci/estimation.hpp"
#include "irtci/simulate.hpp"

using namespace irtci;

namespace {

double max_parameter_difference(const FittedModel& a, const FittedModel& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    worst = std::max(worst, (pack(a.items[i].parameters) - pack(b.items[i].parameters)).cwiseAbs().maxCoeff());
  }
  return worst;
}

CategoricalDataset small_grm(std::uint64_t seed, Eigen::Index cases = 600) {
  const auto items = random_items(ItemFamily::Graded, 5, 3, seed);
  return simulate(items, cases, seed + 100).data;
}

}  // namespace

TEST_CASE("quadrature grid") {
  const auto grid = build_grid();
  REQUIRE(grid.size() == 61);
  CHECK(grid.nodes[0] == -6.0);
  CHECK(grid.nodes[60] == 6.0);
  CHECK(grid.nodes[30] == 0.0);
  CHECK(grid.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
  for (int q = 0; q < 61; ++q) {
    CHECK(grid.nodes[q] == -grid.nodes[60 - q]);
    CHECK(grid.weights[q] == grid.weights[60 - q]);
  }
  // discrete N(0,1): variance within grid error of 1
  CHECK((grid.weights.array() * grid.nodes.array().square()).sum() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(build_grid(1), Error);
}

TEST_CASE("EM trace is nondecreasing and converges") {
  const auto data = small_grm(1);
  const auto model = fit(data);
  CHECK(model.converged);
  REQUIRE(model.trace.size() >= 2);
  for (std::size_t t = 1; t < model.trace.size(); ++t) CHECK(model.trace[t] >= model.trace[t - 1] - 1e-8);
  CHECK(model.log_likelihood == model.trace.back());
  CHECK(model.final_change < 1e-4);
  for (const auto& item : model.items) CHECK_NOTHROW(validate(item.parameters));
}

TEST_CASE("M-step never lowers the expected log-likelihood") {
  const auto data = small_grm(2);
  const auto grid = build_grid();
  auto items = initial_items(data, 7);
  const auto counts = e_step(data, items, grid);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto result = m_step_item(items[i], counts.counts[i], grid);
    CHECK(result.objective_after >= result.objective_before);
    CHECK(expected_loglik(result.item.parameters, counts.counts[i], grid) == doctest::Approx(result.objective_after));
  }
}

TEST_CASE("expected counts add up to the observed cells") {
  const auto data = small_grm(3, 300);
  const auto grid = build_grid();
  const auto items = initial_items(data, 1);
  const auto counts = e_step(data, items, grid);
  CHECK(counts.node_mass.sum() == doctest::Approx(300.0));
  for (std::size_t i = 0; i < items.size(); ++i) {
    const double observed = static_cast<double>(data.rows() - data.missing_count(static_cast<Eigen::Index>(i)));
    CHECK(counts.counts[i].sum() == doctest::Approx(observed));
  }
  CHECK(counts.log_likelihood == doctest::Approx(marginal_loglik(response_matrix(data, items), items, grid)));
}

TEST_CASE("missing-data neutrality: an all-missing case changes nothing") {
  const auto data = small_grm(4);
  CodeMatrix codes(data.rows() + 1, data.cols());
  codes.topRows(data.rows()) = data.codes();
  codes.row(data.rows()).setConstant(kMissing);
  const CategoricalDataset padded(data.schemas(), codes);
  const auto a = fit(data);
  const auto b = fit(padded);
  CHECK(a.iterations == b.iterations);
  CHECK(max_parameter_difference(a, b) <= 1e-10);
}

TEST_CASE("fit is deterministic and the model file round trips bit-exactly") {
  auto items = random_items(ItemFamily::Nominal, 4, 3, 8);
  const auto data = simulate(items, 800, 9).data;
  const auto a = fit(data);
  const auto b = fit(data);
  CHECK(format_model(a) == format_model(b));
  const auto reloaded = parse_model(format_model(a));
  CHECK(format_model(reloaded) == format_model(a));
  CHECK(max_parameter_difference(a, reloaded) == 0.0);
  CHECK(reloaded.trace == a.trace);
  CHECK_THROWS_AS(parse_model("irtci-model 2\n"), Error);
  CHECK_THROWS_AS(parse_model("garbage"), Error);
}

TEST_CASE("fit reads feature columns only and discretizes continuous features") {
  const auto items = random_items(ItemFamily::TwoPL, 6, 2, 10);
  const auto sim = simulate(items, 500, 11, /*with_outcome=*/true);
  const auto model = fit(sim.data);
  CHECK(model.items.size() == 6);
  for (const auto& name : model.feature_names()) CHECK(name != "outcome");

  // same outcome column turned into a feature: it gets 4 quantile bins
  auto schemas = sim.data.schemas();
  schemas.back().role = ColumnRole::Feature;
  const CategoricalDataset with_feature(schemas, sim.data.codes(), sim.data.values());
  const auto model2 = fit(with_feature);
  REQUIRE(model2.discretizations.size() == 1);
  CHECK(model2.discretizations[0].bin_count == 4);
  CHECK(model2.items.size() == 7);
  CHECK(family_of(model2.items.back().parameters) == ItemFamily::Graded);
}

TEST_CASE("fit data errors") {
  const auto items = random_items(ItemFamily::Graded, 3, 4, 12);
  const auto tiny = simulate(items, 30, 13).data;  // needs >= 10 * 4 rows
  try {
    fit(tiny);
    FAIL("expected InsufficientData");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientData);
  }

  auto data = simulate(items, 400, 14).data;
  CodeMatrix codes = data.codes();
  for (Eigen::Index r = 0; r < codes.rows(); ++r) {
    if (codes(r, 0) == 3) codes(r, 0) = 2;
  }
  try {
    fit(CategoricalDataset(data.schemas(), codes));
    FAIL("expected UnobservedCategory");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnobservedCategory);
  }

  FitConfig bad;
  bad.tolerance = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("EAP: all-missing returns the prior; more correct answers raise theta") {
  std::vector<ItemModel> items;
  for (int i = 0; i < 5; ++i) items.push_back({"i" + std::to_string(i), Binary2PL{1.2, -1.0 + 0.5 * i}});
  const auto grid = build_grid();
  const std::vector<int> none(5, kMissing);
  const auto prior = eap_score(none, items, grid);
  CHECK(std::abs(prior.eap_mean) < 1e-12);
  CHECK(prior.posterior_sd == doctest::Approx(1.0).epsilon(1e-4));

  double previous = -10.0;
  for (int correct = 0; correct <= 5; ++correct) {
    std::vector<int> pattern(5, 0);
    for (int i = 0; i < correct; ++i) pattern[static_cast<std::size_t>(i)] = 1;
    const auto est = eap_score(pattern, items, grid);
    CHECK(est.eap_mean > previous);
    CHECK(est.posterior_sd < 1.0);
    previous = est.eap_mean;
  }
}

TEST_CASE("posterior is a distribution over the grid") {
  const std::vector<ItemModel> items{{"a", GradedItem{1.5, Eigen::Vector2d(-0.5, 0.8)}}};
  const std::vector<int> pattern{2};
  const auto post = posterior(pattern, items, build_grid());
  CHECK(post.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((post.array() >= 0.0).all());
}

TEST_CASE("spec: e-step posterior examples") {
  const std::vector<ItemModel> items{{"a", Binary2PL{1.3, 0.2}}, {"b", GradedItem{0.9, Eigen::Vector2d(-1, 1)}}};
  const auto grid = build_grid();
  const std::vector<int> none{kMissing, kMissing};
  const Eigen::VectorXd post = posterior(none, items, grid);
  CHECK((post - grid.weights).cwiseAbs().maxCoeff() < 1e-15);

  CodeMatrix twins(2, 2);
  twins << 1, 2, 1, 2;
  const auto counts = e_step(twins, items, grid);
  // two identical cases: every count is twice the single-case posterior mass
  const std::vector<int> one{1, 2};
  const Eigen::VectorXd single = posterior(one, items, grid);
  CHECK((counts.counts[0].col(1) - 2.0 * single).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((counts.node_mass - 2.0 * single).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("spec: m-step at the stationary point leaves the item unchanged") {
  const auto grid = build_grid();
  for (const ItemModel& item : {ItemModel{"a", Binary2PL{1.4, -0.3}},
                                ItemModel{"g", GradedItem{0.9, Eigen::Vector3d(-1.0, 0.1, 1.2)}},
                                ItemModel{"n", NominalItem{Eigen::Vector3d(0.0, 0.8, 1.5), Eigen::Vector3d(0.0, 0.3, -0.4)}}}) {
    // counts proportional to the model's own probabilities at each node
    Eigen::MatrixXd counts(grid.size(), item.categories());
    for (Eigen::Index q = 0; q < grid.size(); ++q) {
      counts.row(q) = 1000.0 * grid.weights[q] * category_probabilities(grid.nodes[q], item.parameters).transpose();
    }
    const auto result = m_step_item(item, counts, grid);
    CHECK((pack(result.item.parameters) - pack(item.parameters)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("spec: m-step on a step function moves b to 0 and raises a") {
  const auto grid = build_grid();
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(grid.size(), 2);
  for (Eigen::Index q = 0; q < grid.size(); ++q) {
    const double mass = 1000.0 * grid.weights[q];
    if (grid.nodes[q] < 0.0) counts(q, 0) = mass;
    else if (grid.nodes[q] > 0.0) counts(q, 1) = mass;
    else counts.row(q).setConstant(mass / 2.0);
  }
  const ItemModel start{"s", Binary2PL{1.0, 0.8}};
  const auto result = m_step_item(start, counts, grid);
  const auto& fitted = std::get<Binary2PL>(result.item.parameters);
  CHECK(std::abs(fitted.b) < 0.05);
  CHECK(fitted.a > 5.0);
  CHECK(result.objective_after > result.objective_before);
}

TEST_CASE("spec: 2PL recovery RMSE at N = 2000") {
  const auto items = random_items(ItemFamily::TwoPL, 10, 2, 41);
  const auto model = fit(simulate(items, 2000, 42).data);
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& t = std::get<Binary2PL>(items[i].parameters);
    const auto& f = std::get<Binary2PL>(model.items[i].parameters);
    sa += (t.a - f.a) * (t.a - f.a);
    sb += (t.b - f.b) * (t.b - f.b);
  }
  MESSAGE("rmse a " << std::sqrt(sa / 10) << ", rmse b " << std::sqrt(sb / 10));
  CHECK(std::sqrt(sa / 10) <= 0.15);
  CHECK(std::sqrt(sb / 10) <= 0.10);
}

TEST_CASE("spec: all-highest categories give a positive EAP") {
  const std::vector<ItemModel> items{{"a", Binary2PL{1.0, 0.0}},
                                     {"g", GradedItem{1.2, Eigen::Vector2d(-0.5, 0.5)}},
                                     {"n", NominalItem{Eigen::Vector3d(0.0, 1.0, 2.0), Eigen::Vector3d(0.0, 0.0, 0.0)}}};
  const std::vector<int> top{1, 2, 2};
  CHECK(eap_score(top, items, build_grid()).eap_mean > 0.0);
}
