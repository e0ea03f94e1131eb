// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "netsync/abelian.hpp"
#include "netsync/circle.hpp"
#include "netsync/cli.hpp"
#include "netsync/gaussian.hpp"
#include "netsync/generators.hpp"
#include "netsync/graph.hpp"
#include "netsync/io.hpp"
#include "netsync/local_gaussian.hpp"
#include "netsync/random.hpp"
#include "netsync/sim.hpp"

using namespace netsync;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)});
}

std::string fmt(const char* f, double v) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Connected graphs with at most 16 edges: named families plus random ones.
std::vector<Graph> corpus() {
  std::vector<Graph> out;
  for (std::size_t n = 2; n <= 12; ++n) {
    out.push_back(generators::path(n));
    out.push_back(generators::star(n));
  }
  for (std::size_t n = 3; n <= 16; ++n) out.push_back(generators::ring(n));
  for (std::size_t n = 2; n <= 6; ++n) out.push_back(generators::complete(n));
  Rng rng(20240607);
  while (out.size() < 240) {
    const std::size_t n = 2 + uniform_index(rng, 9);  // 2..10
    const std::size_t room = 16 - (n - 1);
    const std::size_t max_pairs = n * (n - 1) / 2 - (n - 1);
    const std::size_t extra = uniform_index(rng, std::min(room, max_pairs) + 1);
    out.push_back(generators::random_connected(rng, n, extra));
  }
  return out;
}

std::size_t extra_limit(std::size_t n, std::size_t want) {
  return std::min(want, n * (n - 1) / 2 - (n - 1));
}

Matrix random_spd(Rng& rng, std::size_t k) {
  Matrix a(k, k);
  for (auto& v : a.reshaped()) v = standard_normal(rng);
  return a * a.transpose() / static_cast<double>(k) + 0.5 * Matrix::Identity(k, k);
}

void criterion1(const std::vector<Graph>& graphs) {
  const auto t0 = Clock::now();
  std::size_t mismatches = 0;
  for (const auto& g : graphs) {
    const double t = spanning_tree_count(g).value;
    const double e = static_cast<double>(enumerate_spanning_trees(g).size());
    if (t != e) ++mismatches;
  }
  const double dt = seconds_since(t0);
  report(1, mismatches == 0 && dt < 10.0,
         std::to_string(graphs.size()) + " graphs, " + std::to_string(mismatches) +
             " mismatches, " + fmt("%.2f s", dt));
}

void criterion2() {
  bool ok = true;
  std::string detail;
  for (std::size_t n = 3; n <= 8; ++n) {
    const double t = spanning_tree_count(generators::complete(n)).value;
    const double expect = std::pow(static_cast<double>(n), static_cast<double>(n - 2));
    ok = ok && t == expect;
    detail += "K" + std::to_string(n) + "=" + fmt("%.0f ", t);
  }
  report(2, ok, detail);
}

void criterion3(const std::vector<Graph>& graphs) {
  Rng rng(3);
  std::map<std::string, std::size_t> checked;
  double worst = 0.0;
  std::size_t missing = 0;
  auto check = [&](const std::string& kind, const FisherReport& rep) {
    if (!rep.det_tree_formula) {
      ++missing;
      return;
    }
    worst = std::max(worst, rel_diff(rep.det_direct, *rep.det_tree_formula));
    ++checked[kind];
  };
  for (const auto& g : graphs) {
    const std::size_t m = g.edge_count();
    const auto inc = build_incidence(g, 0);
    check("iid", gaussian::fisher_report(g, inc, gaussian::IidScalar{0.25 + uniform01(rng)}));
    Vector var(static_cast<Eigen::Index>(m));
    for (auto& v : var) v = 0.2 + 2.0 * uniform01(rng);
    check("diag", gaussian::fisher_report(g, inc, gaussian::DiagonalScalar{var}));
    if (m <= gaussian::kCauchyBinetMaxEdges) {
      check("fullR", gaussian::fisher_report(g, inc, gaussian::FullScalar{random_spd(rng, m)}));
    }
    if (m <= 8) {
      check("vector", gaussian::fisher_report(g, inc, gaussian::IidVector{random_spd(rng, 2)}));
    }
    if (m <= abelian::kMultiTreeMaxEdges) {
      auto model = abelian::ProductNoiseModel::uniform(m, 1, 1, 1.0, 1.0);
      for (auto& v : model.variances.reshaped()) v = 0.2 + 2.0 * uniform01(rng);
      for (auto& v : model.kappa.reshaped()) v = 0.5 + 5.0 * uniform01(rng);
      check("product", abelian::fisher_report_product(g, model));
    }
  }
  bool all_kinds = checked.size() == 5;
  std::string detail;
  for (const auto& [k, c] : checked) detail += k + "=" + std::to_string(c) + " ";
  detail += "skipped=" + std::to_string(missing) + fmt(" max_rel=%.2e", worst);
  report(3, all_kinds && worst < 1e-7, detail);
}

void criterion4() {
  Rng rng(4);
  double recovery = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 2 + uniform_index(rng, 39);
    const Graph g = generators::random_connected(rng, n, extra_limit(n, uniform_index(rng, n + 1)));
    const auto inc = build_incidence(g, 0);
    Vector x(static_cast<Eigen::Index>(n));
    for (auto& v : x) v = 10.0 * standard_normal(rng);
    x.array() -= x(0);
    const Vector r = inc.incidence.transpose() * x;
    const auto est = gaussian::ml_estimate_iid(inc, r, 1.0);
    recovery = std::max(recovery, (est.x.col(0) - x).cwiseAbs().maxCoeff());
  }

  // Triangle Monte Carlo, iid and correlated.
  std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 1}, {1, 2}, {0, 2}};
  const Graph tri = Graph::from_pairs(3, pairs);
  const auto inc = build_incidence(tri, 0);
  const double sigma = 0.3;
  const int trials = 10000;
  Vector truth(3);
  truth << 0.0, 1.0, 3.0;
  const Vector omega = inc.incidence.transpose() * truth;
  Matrix acc = Matrix::Zero(2, 2);
  double kirchhoff = 0.0;
  Matrix corr(3, 3);
  corr << 1.0, 0.3, 0.1, 0.3, 2.0, -0.2, 0.1, -0.2, 1.5;
  corr *= sigma * sigma;
  const Eigen::LLT<Matrix> chol(corr);
  const Matrix lower = chol.matrixL();
  for (int t = 0; t < trials; ++t) {
    Vector noise(3);
    for (auto& v : noise) v = sigma * standard_normal(rng);
    const Vector r = omega + noise;
    const auto est = gaussian::ml_estimate_iid(inc, r, sigma * sigma);
    const Vector err = est.x.col(0).tail(2) - truth.tail(2);
    acc += err * err.transpose();
    kirchhoff = std::max(kirchhoff, (inc.incidence * (r - est.omega.col(0))).cwiseAbs().maxCoeff());

    Vector z(3);
    for (auto& v : z) v = standard_normal(rng);
    const Vector rc = omega + lower * z;
    const auto cest = gaussian::ml_estimate_correlated(inc, rc, corr);
    const Vector weighted = chol.solve(Vector(rc - cest.omega.col(0)));
    kirchhoff = std::max(kirchhoff, (inc.incidence * weighted).cwiseAbs().maxCoeff());
  }
  acc /= trials;
  const Matrix expected = sigma * sigma * inc.reduced_laplacian().inverse();
  const double cov_rel = ((acc - expected).array() / expected.array()).abs().maxCoeff();
  report(4, recovery < 1e-10 && cov_rel < 0.10 && kirchhoff < 1e-9,
         fmt("recovery=%.2e", recovery) + fmt(" cov_rel=%.3f", cov_rel) +
             fmt(" kirchhoff=%.2e", kirchhoff));
}

void criterion5() {
  Rng rng(5);
  double worst = 0.0;
  std::size_t hazards = 0;
  std::size_t failed = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 2 + uniform_index(rng, 49);
    const Graph g = generators::random_connected(rng, n, extra_limit(n, uniform_index(rng, 2 * n + 1)));
    const auto inc = build_incidence(g, 0);
    Matrix r(static_cast<Eigen::Index>(g.edge_count()), 1);
    for (auto& v : r.reshaped()) v = standard_normal(rng);
    const auto direct = gaussian::ml_estimate_iid(inc, r.col(0), 1.0);
    const bool hazard = local::convergence_diagnostics(g).bipartite_hazard;
    hazards += hazard;
    local::JacobiOptions opt;
    opt.tol = 1e-12;
    const auto jac = local::jacobi_run(g, inc, r, opt);
    if (!jac.converged) {
      if (!hazard) ++failed;
      continue;
    }
    worst = std::max(worst, (jac.estimate.omega - direct.omega).cwiseAbs().maxCoeff());
  }
  report(5, failed == 0 && worst < 1e-8,
         fmt("max_err=%.2e", worst) + " unconverged_non_hazard=" + std::to_string(failed) +
             " hazard_graphs=" + std::to_string(hazards));
}

void criterion6() {
  const auto t0 = Clock::now();
  const fs::path path = fs::path(NETSYNC_SOURCE_DIR) / "configs" / "ring5_circle.json";
  const auto config = sim::config_from_json(io::read_json(path), path.parent_path());
  const auto res = sim::run_experiment(config);
  const double dt = seconds_since(t0);

  bool local_ok = true;
  bool like_ok = true;
  bool defect_ok = true;
  bool mono_ok = true;
  std::string detail;
  std::map<std::pair<double, sim::Estimator>, const sim::SummaryRow*> rows;
  for (const auto& s : res.summary) rows[{s.sweep, s.estimator}] = &s;

  std::size_t min_wins = config.trials;
  double max_defect = 0.0;
  for (double k : config.sweep) {
    const auto* g = rows.at({k, sim::Estimator::global_q});
    const auto* l = rows.at({k, sim::Estimator::local_q});
    local_ok = local_ok && std::abs(l->mean_metric - g->mean_metric) <= 0.10 * g->mean_metric;

    // Records are sweep-major, trial, then estimator.
    std::map<std::size_t, double> local_ll;
    std::size_t wins = 0;
    for (const auto& rec : res.records) {
      if (rec.sweep != k) continue;
      if (rec.estimator == sim::Estimator::local_q) local_ll[rec.trial] = rec.log_likelihood;
    }
    for (const auto& rec : res.records) {
      if (rec.sweep != k || rec.estimator != sim::Estimator::hybrid_ml) continue;
      if (rec.log_likelihood >= local_ll.at(rec.trial) - 1e-9) ++wins;
      if (!rec.converged || !(rec.critical_defect < 1e-9)) defect_ok = false;
      max_defect = std::max(max_defect, rec.critical_defect);
    }
    min_wins = std::min(min_wins, wins);
    like_ok = like_ok && wins * 100 >= 99 * config.trials;
  }

  std::size_t inversions = 0;
  for (auto est : config.estimators) {
    for (std::size_t i = 1; i < config.sweep.size(); ++i) {
      const auto* a = rows.at({config.sweep[i - 1], est});
      const auto* b = rows.at({config.sweep[i], est});
      if (b->mean_metric > a->mean_metric) {
        ++inversions;
        const double se = std::hypot(a->stderr_metric, b->stderr_metric);
        if (b->mean_metric - a->mean_metric > 2.0 * se) mono_ok = false;
      }
    }
  }
  detail = std::string("local_vs_global=") + (local_ok ? "ok" : "off") +
           " hybrid_wins_min=" + std::to_string(min_wins) + "/" + std::to_string(config.trials) +
           fmt(" max_defect=%.3e", max_defect) + " inversions=" + std::to_string(inversions) +
           fmt(" runtime=%.1f s", dt);
  report(6, local_ok && like_ok && defect_ok && mono_ok && dt < 120.0, detail);
}

void criterion7() {
  Rng rng(7);
  const std::size_t count = 100000;
  const double tol = 4.0 / std::sqrt(static_cast<double>(count));
  bool ok = true;
  std::string detail;
  for (double kappa : {0.5, 1.0, 2.0, 5.0}) {
    const auto s = circle::von_mises_sample(rng, circle::Complex(1.0, 0.0), kappa, count);
    circle::Complex mean = 0.0;
    for (const auto& z : s) mean += z;
    mean /= static_cast<double>(count);
    const double err = std::abs(std::abs(mean) - circle::bessel_ratio(kappa));
    ok = ok && err < tol;
    detail += fmt("k=%g:", kappa) + fmt("%.1e ", err);
  }
  report(7, ok, detail + fmt("tol=%.1e", tol));
}

void criterion8(const std::vector<Graph>& graphs) {
  Rng rng(8);
  double excess = 0.0;
  double gersh = 0.0;  // max violation of the lower bound
  for (const auto& g : graphs) {
    const std::size_t m = g.edge_count();
    circle::ComplexVector r(static_cast<Eigen::Index>(m));
    for (auto& z : r) z = std::polar(1.0, 2.0 * std::numbers::pi * uniform01(rng));
    circle::VonMisesModel model;
    model.kappa.resize(static_cast<Eigen::Index>(m));
    for (auto& k : model.kappa) k = 0.1 + 10.0 * uniform01(rng);
    for (double beta : {0.0, 0.5 + 3.0 * uniform01(rng)}) {
      const auto aug = circle::build_q_matrix(g, r, model, beta);
      const Vector ev = aug.q_eigenvalues();
      excess = std::max({excess, ev.maxCoeff() - 1.0, -1.0 - ev.minCoeff()});
      if (beta > 0.0) gersh = std::max(gersh, aug.gershgorin_lower_bound() - ev.minCoeff());
    }
  }
  report(8, excess <= 1e-9 && gersh <= 1e-9,
         fmt("outside_unit=%.2e", std::max(0.0, excess)) +
             fmt(" gershgorin_violation=%.2e", std::max(0.0, gersh)));
}

void criterion9() {
  const Graph p = generators::path(5);
  const auto rows = sim::network_design_report(p, sim::all_missing_candidates(p));
  const bool ok = !rows.empty() && rows[0].edge.source == 0 && rows[0].edge.target == 4 &&
                  rows[0].spanning_trees == 5.0 && !rows[0].tied;
  report(9, ok,
         rows.empty() ? "no rows"
                      : "first=(" + p.vertex_id(rows[0].edge.source) + "," +
                            p.vertex_id(rows[0].edge.target) + ")" +
                            fmt(" t=%.0f", rows[0].spanning_trees));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion10() {
  const fs::path cfg = fs::path(NETSYNC_SOURCE_DIR) / "configs" / "random31_circle.json";
  const fs::path base = fs::temp_directory_path() / "netsync_acceptance";
  fs::remove_all(base);
  std::vector<std::string> outputs;
  bool codes_ok = true;
  const std::vector<std::vector<std::string>> runs{
      {"--threads", "1"}, {"--threads", "1"}, {"--threads", "4"}, {"--threads", "3"}};
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const fs::path out = base / std::to_string(i);
    std::vector<std::string> args{"netsync", "simulate", cfg.string(), "--out", out.string(),
                                  "--trials", "20",     "--seed",     "777"};
    args.insert(args.end(), runs[i].begin(), runs[i].end());
    std::ostringstream o;
    std::ostringstream e;
    codes_ok = codes_ok && cli::run(args, o, e) == cli::kOk;
    std::string all;
    for (const char* f : {"trials.csv", "summary.csv", "reference.csv"}) all += slurp(out / f) + '\x1f';
    outputs.push_back(all);
  }
  bool same = true;
  for (const auto& s : outputs) same = same && s == outputs.front();
  report(10, codes_ok && same && outputs.front().size() > 100,
         std::to_string(runs.size()) + " runs (threads 1,1,4,3) " +
             (same ? "byte-identical" : "differ"));
}

}  // namespace

int main() {
  const auto graphs = corpus();
  criterion1(graphs);
  criterion2();
  criterion3(graphs);
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8(graphs);
  criterion9();
  criterion10();
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
