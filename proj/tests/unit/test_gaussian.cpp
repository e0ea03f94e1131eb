#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "netsync/error.hpp"
#include "netsync/gaussian.hpp"
#include "netsync/generators.hpp"
#include "netsync/linalg.hpp"
#include "netsync/random.hpp"

using namespace netsync;
using namespace netsync::gaussian;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

Matrix random_spd(Rng& rng, Eigen::Index size) {
  Matrix a(size, size);
  for (auto& v : a.reshaped()) v = standard_normal(rng);
  return a * a.transpose() + 0.5 * Matrix::Identity(size, size);
}

}  // namespace

TEST_CASE("iid estimates on small graphs") {
  const auto edge = build_incidence(fixtures::single_edge(), 0);
  auto est = ml_estimate_iid(edge, vec({0.7}), 1.0);
  CHECK(est.x(0, 0) == 0.0);
  CHECK(est.x(1, 0) == doctest::Approx(0.7));
  CHECK(max_abs(est.residual) < 1e-12);

  const auto tri = build_incidence(fixtures::triangle(), 0);
  est = ml_estimate_iid(tri, vec({1, 1, 2}), 1.0);
  CHECK(max_abs(est.x.col(0) - vec({0, 1, 2})) < 1e-12);
  CHECK(max_abs(est.residual) < 1e-12);

  est = ml_estimate_iid(tri, vec({1, 1, 1}), 0.3);
  CHECK(max_abs(est.omega.col(0) - vec({2.0 / 3, 2.0 / 3, 4.0 / 3})) < 1e-12);
  CHECK(max_abs(est.x.col(0) - vec({0, 2.0 / 3, 4.0 / 3})) < 1e-12);
  // Current law.
  CHECK(max_abs(tri.incidence * est.residual) < 1e-9);

  const std::vector<std::pair<std::size_t, std::size_t>> split{{0, 1}, {2, 3}};
  CHECK_THROWS_AS(ml_estimate_iid(build_incidence(Graph::from_pairs(4, split), 0), vec({1, 1}), 1.0),
                  InputError);
  CHECK_THROWS_AS(ml_estimate_iid(tri, vec({1, 1, 1}), 0.0), InputError);
}

TEST_CASE("correlated estimates") {
  const auto tri = build_incidence(fixtures::triangle(), 0);
  const Vector r = vec({1, 1, 1});
  const auto iid = ml_estimate_iid(tri, r, 2.0);
  const auto corr = ml_estimate_correlated(tri, r, 2.0 * Matrix::Identity(3, 3));
  CHECK(max_abs(iid.x - corr.x) < 1e-12);

  const Matrix rdiag = vec({1, 1, 4}).asDiagonal();
  const auto w = ml_estimate_correlated(tri, r, rdiag);
  CHECK(max_abs(w.omega.col(0) - vec({5.0 / 6, 5.0 / 6, 5.0 / 3})) < 1e-12);
  // Weighted current law D R^-1 (r - omega) = 0.
  CHECK(max_abs(tri.incidence * rdiag.inverse() * w.residual) < 1e-9);
  CHECK(current_law_defect(tri, w.residual, DiagonalScalar{vec({1, 1, 4})}) < 1e-9);

  Rng rng(3);
  const auto star = build_incidence(generators::star(5), 0);
  const Matrix big = random_spd(rng, 4);
  const Vector rs = vec({0.3, -1.2, 2.0, 0.1});
  CHECK(max_abs(ml_estimate_correlated(star, rs, big).omega.col(0) - rs) < 1e-10);

  Matrix not_spd = Matrix::Identity(3, 3);
  not_spd(2, 2) = -1.0;
  CHECK_THROWS_AS(ml_estimate_correlated(tri, r, not_spd), InputError);
}

TEST_CASE("vector estimates") {
  const auto tri = build_incidence(fixtures::triangle(), 0);
  Matrix r(3, 2);
  r << 1, 0.5, 1, -1, 1, 0.2;

  // Diagonal per-edge covariance decouples.
  Matrix cov = vec({0.5, 2.0}).asDiagonal();
  const auto est = ml_estimate_vector(tri, r, IidVector{cov});
  for (Eigen::Index k = 0; k < 2; ++k) {
    const auto scalar = ml_estimate_iid(tri, r.col(k), cov(k, k));
    CHECK(max_abs(est.x.col(k) - scalar.x.col(0)) < 1e-12);
  }

  // Consistent data.
  Matrix x(3, 2);
  x << 0, 0, 1.5, -2, 0.25, 3;
  const Matrix consistent = tri.incidence.transpose() * x;
  Matrix cross(2, 2);
  cross << 1, 0.5, 0.5, 2;
  const auto rec = ml_estimate_vector(tri, consistent, IidVector{cross});
  CHECK(max_abs(rec.x - x) < 1e-12);
  CHECK(max_abs(rec.residual) < 1e-12);

  // Cross-correlated full covariance against a whitened least-squares solve
  // computed independently (numpy lstsq).
  const std::vector<double> flat{
      1.0, 0.0, 0.0, 0.8660254037844386, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.7071067811865476, 0.0,
      0.0, 0.0, 3.0, 0.0, 0.0, 1.224744871391589, 0.8660254037844386, 0.0, 0.0, 3.0, 0.0, 0.0,
      0.0, 0.7071067811865476, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.224744871391589, 0.0, 0.0, 2.0};
  Matrix full(6, 6);
  for (int i = 0; i < 6; ++i) {
    for (int k = 0; k < 6; ++k) full(i, k) = flat[static_cast<std::size_t>(i * 6 + k)];
  }
  const auto fv = ml_estimate_vector(tri, r, FullVector{full});
  CHECK(fv.x(1, 0) == doctest::Approx(0.93262166500469401).epsilon(1e-12));
  CHECK(fv.x(2, 0) == doctest::Approx(1.5432695873370399).epsilon(1e-12));
  CHECK(fv.x(1, 1) == doctest::Approx(1.0005471388573279).epsilon(1e-12));
  CHECK(fv.x(2, 1) == doctest::Approx(0.049189887872714486).epsilon(1e-12));
  CHECK(current_law_defect(tri, fv.residual, FullVector{full}) < 1e-9);

  CHECK_THROWS_AS(ml_estimate_vector(tri, r, IidVector{Matrix::Identity(3, 3)}), InputError);
}

TEST_CASE("Fisher reports") {
  const auto g = fixtures::triangle();
  const auto tri = build_incidence(g, 0);
  auto rep = fisher_report(g, tri, IidScalar{1.0});
  CHECK(rep.det_direct == doctest::Approx(3.0));
  CHECK(*rep.det_tree_formula == doctest::Approx(3.0));

  const auto k4 = generators::complete(4);
  rep = fisher_report(k4, build_incidence(k4, 0), IidScalar{1.0});
  CHECK(rep.det_direct == doctest::Approx(16.0));

  const Vector s = vec({0.5, 2.0, 3.0});
  rep = fisher_report(g, tri, DiagonalScalar{s});
  const double expected = 1 / (s(0) * s(1)) + 1 / (s(0) * s(2)) + 1 / (s(1) * s(2));
  CHECK(rep.det_direct == doctest::Approx(expected));
  CHECK(*rep.det_tree_formula == doctest::Approx(expected));

  // Covariance sigma^2 L_W^-1 and trace identity for C_omega.
  const double sigma2 = 0.09;
  rep = fisher_report(g, tri, IidScalar{sigma2});
  Matrix lw_inv(2, 2);
  lw_inv << 2, 1, 1, 2;
  lw_inv /= 3.0;
  CHECK(max_abs(rep.estimator_covariance - sigma2 * lw_inv) < 1e-12);
  const Matrix c_omega =
      tri.reduced_incidence.transpose() * rep.estimator_covariance * tri.reduced_incidence;
  CHECK(c_omega.trace() == doctest::Approx(sigma2 * 2.0));

  Matrix cov(2, 2);
  cov << 2, 0.3, 0.3, 1;
  rep = fisher_report(g, tri, IidVector{cov});
  CHECK(fixtures::rel_diff(rep.det_direct, *rep.det_tree_formula) < 1e-9);
  CHECK(rep.det_direct == doctest::Approx(9.0 / std::pow(cov.determinant(), 2)));

  const std::vector<std::pair<std::size_t, std::size_t>> split{{0, 1}, {2, 3}};
  const auto bad = Graph::from_pairs(4, split);
  CHECK_THROWS(fisher_report(bad, build_incidence(bad, 0), IidScalar{1.0}));
}

TEST_CASE("Cauchy-Binet on random graphs") {
  StreamFactory streams(99);
  for (std::uint64_t t = 0; t < 25; ++t) {
    Rng rng = streams.stream({t});
    const std::size_t n = 3 + uniform_index(rng, 4);
    const std::size_t extra = std::min<std::size_t>(uniform_index(rng, 4), n * (n - 1) / 2 - n + 1);
    const Graph g = generators::random_connected(rng, n, extra);
    const auto inc = build_incidence(g, 0);
    const auto m = static_cast<Eigen::Index>(g.edge_count());
    const Matrix r = random_spd(rng, m);
    const auto rep = fisher_report(g, inc, FullScalar{r});
    REQUIRE(rep.det_tree_formula.has_value());
    CHECK(fixtures::rel_diff(rep.det_direct, *rep.det_tree_formula) < 1e-7);

    const Matrix rv = random_spd(rng, 2 * m);
    const auto vrep = fisher_report(g, inc, FullVector{rv});
    if (vrep.det_tree_formula) CHECK(fixtures::rel_diff(vrep.det_direct, *vrep.det_tree_formula) < 1e-7);
  }
}

TEST_CASE("alpha sign") {
  const auto g = fixtures::triangle();
  const std::vector<std::size_t> s{0, 1};
  const std::vector<std::size_t> s2{0, 2};
  const std::vector<std::size_t> not_tree{0};
  for (std::size_t ref = 0; ref < 3; ++ref) {
    const auto inc = build_incidence(g, ref);
    CHECK(alpha_sign(g, inc, s, s) == 1);
    const double direct = linalg::determinant(inc.reduced_columns(s) * inc.reduced_columns(s2).transpose());
    CHECK(alpha_sign(g, inc, s, s2) == static_cast<int>(std::lround(direct)));
    CHECK(std::abs(alpha_sign(g, inc, s, s2)) == 1);
    CHECK(alpha_sign(g, inc, s, s2) == alpha_sign(g, build_incidence(g, 0), s, s2));
  }
  CHECK_THROWS_AS(alpha_sign(g, build_incidence(g, 0), s, not_tree), InputError);

  // Reference independence on random graphs with n <= 6.
  StreamFactory streams(5);
  for (std::uint64_t t = 0; t < 10; ++t) {
    Rng rng = streams.stream({t});
    const Graph h = generators::random_connected(rng, 5, 3);
    const auto trees = enumerate_spanning_trees(h);
    const auto& a = trees.front();
    const auto& b = trees.back();
    const int base = alpha_sign(h, build_incidence(h, 0), a, b);
    for (std::size_t ref = 1; ref < 5; ++ref) CHECK(alpha_sign(h, build_incidence(h, ref), a, b) == base);
  }
}

TEST_CASE("tree coordinates round trip") {
  const auto g = fixtures::triangle();
  const auto inc = build_incidence(g, 0);
  const std::vector<std::size_t> tree{0, 2};
  const Vector x = vec({0.4, -1.1});
  const Vector nu = tree_coordinates(inc, tree, x);
  CHECK(max_abs(offsets_from_tree(inc, tree, nu) - x) < 1e-12);
}

TEST_CASE("mean-zero gauge") {
  const auto tri = build_incidence(fixtures::triangle(), 0);
  const Vector r = vec({1, 1, 1});
  const auto ref = ml_estimate_iid(tri, r, 1.0);
  const Vector shifted = ref.x.col(0).array() - ref.x.col(0).mean();
  for (double mu : {0.1, 1.0, 10.0}) {
    const Vector x = mean_zero_gauge(tri, r, mu);
    CHECK(max_abs(x - shifted) < 1e-9);
    CHECK(std::abs(x.sum()) < 1e-12);
    CHECK(max_abs(tri.incidence.transpose() * x - ref.omega.col(0)) < 1e-9);
  }
  const Vector x0 = vec({-1, 0.25, 0.75});
  CHECK(max_abs(mean_zero_gauge(tri, tri.incidence.transpose() * x0, 1.0) - x0) < 1e-12);
  CHECK_THROWS_AS(mean_zero_gauge(tri, r, 0.0), InputError);
  CHECK(max_abs(to_mean_zero(ref).x.col(0) - shifted) < 1e-12);
}

TEST_CASE("projection properties") {
  StreamFactory streams(17);
  for (std::uint64_t t = 0; t < 20; ++t) {
    Rng rng = streams.stream({t});
    const Graph g = generators::random_connected(rng, 7, 5);
    const auto inc = build_incidence(g, 0);
    const auto m = static_cast<Eigen::Index>(g.edge_count());
    Vector r(m);
    for (auto& v : r) v = standard_normal(rng);
    const auto est = ml_estimate_iid(inc, r, 1.0);
    // Idempotence.
    const auto again = ml_estimate_iid(inc, est.omega.col(0), 1.0);
    CHECK(max_abs(again.omega - est.omega) < 1e-10);
    // Orthogonality against any cocycle.
    Vector y(7);
    for (auto& v : y) v = standard_normal(rng);
    const Vector cocycle = inc.incidence.transpose() * y;
    CHECK(std::abs(est.residual.col(0).dot(est.omega.col(0) - cocycle)) < 1e-9);
    // Edge estimate lies in the cocycle space.
    for (const auto& z : cycle_basis(g).basis) {
      double s = 0.0;
      for (Eigen::Index e = 0; e < m; ++e) s += z[static_cast<std::size_t>(e)] * est.omega(e, 0);
      CHECK(std::abs(s) < 1e-9);
    }
  }
}
