#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "netsync/abelian.hpp"
#include "netsync/error.hpp"
#include "netsync/generators.hpp"
#include "netsync/random.hpp"

using namespace netsync;
using namespace netsync::abelian;

namespace {

constexpr double kPi = std::numbers::pi;

GroupElement element(std::initializer_list<double> lin, std::initializer_list<double> angles) {
  GroupElement g;
  g.linear.resize(static_cast<Eigen::Index>(lin.size()));
  g.circular.resize(static_cast<Eigen::Index>(angles.size()));
  Eigen::Index i = 0;
  for (double v : lin) g.linear(i++) = v;
  i = 0;
  for (double a : angles) g.circular(i++) = std::polar(1.0, a);
  return g;
}

ProductData random_truth(Rng& rng, std::size_t n, std::size_t d, std::size_t q) {
  auto x = ProductData::zeros(n, d, q);
  for (auto& v : x.linear.reshaped()) v = standard_normal(rng);
  for (auto& z : x.circular.reshaped()) z = std::polar(1.0, 2 * kPi * uniform01(rng));
  return x;
}

}  // namespace

TEST_CASE("group operations") {
  const auto a = element({3.0}, {kPi / 3});
  const auto b = element({1.0}, {kPi / 6});
  const auto diff = difference(a, b);
  CHECK(diff.linear(0) == doctest::Approx(2.0));
  CHECK(std::abs(diff.circular(0) - std::polar(1.0, kPi / 6)) < 1e-15);
  const auto id = GroupElement::identity(1, 1);
  CHECK(distance(compose(a, inverse(a)), id) < 1e-15);
  CHECK(distance(compose(diff, b), a) < 1e-15);
  CHECK(distance(compose(a, b), compose(b, a)) < 1e-15);
  CHECK_THROWS_AS(compose(a, element({1.0, 2.0}, {0.0})), InputError);
  GroupElement bad = a;
  bad.circular(0) = 2.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("edge differences") {
  const auto g = fixtures::triangle();
  auto x = ProductData::zeros(3, 1, 1);
  x.set_row(1, element({2.0}, {0.5}));
  x.set_row(2, element({5.0}, {1.5}));
  const auto w = edge_differences(g, x);
  CHECK(w.rows() == 3);
  CHECK(w.linear(0, 0) == doctest::Approx(2.0));
  CHECK(w.linear(1, 0) == doctest::Approx(3.0));
  CHECK(w.linear(2, 0) == doctest::Approx(5.0));
  CHECK(std::arg(w.circular(1, 0)) == doctest::Approx(1.0));
}

TEST_CASE("reductions to the pure cases") {
  const auto g = fixtures::triangle();
  Rng rng(4);
  // q = 0: Gaussian estimator.
  auto r = ProductData::zeros(3, 2, 0);
  for (auto& v : r.linear.reshaped()) v = standard_normal(rng);
  const auto model = ProductNoiseModel::uniform(3, 2, 0, 0.5, 1.0);
  const auto est = ml_estimate_product(g, r, model);
  const auto inc = build_incidence(g, 0);
  const auto direct = gaussian::ml_estimate(inc, r.linear, gaussian::IidVector{0.5 * Matrix::Identity(2, 2)});
  CHECK((est.x.linear - direct.x).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(est.linear_current_defect.maxCoeff() < 1e-9);

  // d = 0: circle estimator.
  auto rc = ProductData::zeros(3, 0, 1);
  rc.circular(2, 0) = std::polar(1.0, 0.3);
  const auto cmodel = ProductNoiseModel::uniform(3, 0, 1, 1.0, 2.0);
  const auto cest = ml_estimate_product(g, rc, cmodel);
  const auto pure = circle::ml_estimate(g, rc.circular.col(0), circle::VonMisesModel::uniform(3, 2.0));
  for (std::size_t v = 0; v < 3; ++v) {
    CHECK(std::abs(cest.x.circular(static_cast<Eigen::Index>(v), 0) - pure.phases.aligned_to(0)[v]) <
          1e-9);
  }
  CHECK(std::arg(cest.x.circular(1, 0)) == doctest::Approx(0.1).epsilon(1e-8));
  CHECK(cest.circular_critical_defect.maxCoeff() < 1e-9);
}

TEST_CASE("separability") {
  Rng rng(12);
  const Graph g = generators::random_connected(rng, 8, 5);
  const std::size_t m = g.edge_count();
  const auto truth = random_truth(rng, 8, 2, 2);
  auto r = edge_differences(g, truth);
  for (auto& v : r.linear.reshaped()) v += 0.3 * standard_normal(rng);
  for (auto& z : r.circular.reshaped()) z *= circle::von_mises_draw(rng, 4.0);

  ProductNoiseModel model = ProductNoiseModel::uniform(m, 2, 2, 0.09, 4.0);
  model.kappa.col(1).setConstant(9.0);
  const auto joint = ml_estimate_product(g, r, model, 3);
  CHECK(joint.converged);
  CHECK(joint.reference == 3);

  const auto inc = build_incidence(g, 3);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    const auto lin = gaussian::ml_estimate_iid(inc, r.linear.col(ki), 0.09);
    CHECK((joint.x.linear.col(ki) - lin.x.col(0)).cwiseAbs().maxCoeff() < 1e-10);
    const auto circ = circle::ml_estimate(g, r.circular.col(ki), model.circular_noise(k));
    const auto aligned = circ.phases.aligned_to(3);
    for (std::size_t v = 0; v < 8; ++v) {
      CHECK(std::abs(joint.x.circular(static_cast<Eigen::Index>(v), ki) - aligned[v]) < 1e-8);
    }
  }
  // Joint likelihood is the sum of the coordinate likelihoods.
  const auto parts = coordinate_log_likelihoods(g, r, joint.x, model);
  REQUIRE(parts.size() == 4);
  double sum = 0.0;
  for (double p : parts) sum += p;
  CHECK(log_likelihood(g, r, joint.x, model) == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("product Fisher information") {
  const auto g = fixtures::triangle();
  const auto model = ProductNoiseModel::uniform(3, 1, 1, 1.0, 2.0);
  const auto rep = fisher_report_product(g, model);
  CHECK(fixtures::rel_diff(rep.det_direct, 17.528021038684379805) < 1e-12);
  REQUIRE(rep.det_tree_formula.has_value());
  CHECK(fixtures::rel_diff(*rep.det_tree_formula, rep.det_direct) < 1e-9);
  CHECK(fixtures::rel_diff(coordinate_tree_product(g, model), rep.det_direct) < 1e-12);

  // Heterogeneous per-edge parameters.
  ProductNoiseModel mixed = ProductNoiseModel::uniform(3, 2, 1, 1.0, 1.0);
  mixed.variances << 0.5, 2.0, 1.0, 3.0, 4.0, 0.25;
  mixed.kappa << 0.5, 3.0, 20.0;
  const auto mrep = fisher_report_product(g, mixed);
  CHECK(fixtures::rel_diff(mrep.det_direct, coordinate_tree_product(g, mixed)) < 1e-10);
  if (mrep.det_tree_formula) CHECK(fixtures::rel_diff(*mrep.det_tree_formula, mrep.det_direct) < 1e-9);

  const Matrix block = edge_fisher_block(mixed, 1);
  // Row-major fill: edge 1 has variances (1, 3).
  CHECK(block(0, 0) == doctest::Approx(1.0));
  CHECK(block(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(block(2, 2) == doctest::Approx(circle::edge_information(3.0)));
  CHECK(block(0, 1) == 0.0);
}

TEST_CASE("noise model validation") {
  auto model = ProductNoiseModel::uniform(3, 1, 1, 1.0, 1.0);
  CHECK_NOTHROW(model.validate(3));
  CHECK_THROWS_AS(model.validate(4), InputError);
  model.variances(0, 0) = 0.0;
  CHECK_THROWS_AS(model.validate(3), InputError);
  const auto iid = ProductNoiseModel::uniform(3, 1, 0, 2.0, 1.0).linear_noise(0);
  CHECK(std::holds_alternative<gaussian::IidScalar>(iid));
}
