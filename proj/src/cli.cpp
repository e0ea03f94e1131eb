#include "netsync/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "netsync/abelian.hpp"
#include "netsync/circle.hpp"
#include "netsync/error.hpp"
#include "netsync/gaussian.hpp"
#include "netsync/generators.hpp"
#include "netsync/io.hpp"
#include "netsync/linalg.hpp"
#include "netsync/local_gaussian.hpp"
#include "netsync/sim.hpp"

namespace netsync::cli {

namespace {

namespace fs = std::filesystem;
using io::Json;
using io::format_number;
using circle::Complex;

/// Raised for a completed run whose iteration did not converge.
struct NotConverged {
  std::string message;
};

std::string yes_no(bool b) { return b ? "true" : "false"; }

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
  std::string graph;
};

void cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  const Graph g = io::read_graph(a.graph);
  const auto n = g.vertex_count();
  const auto m = g.edge_count();
  const auto k = g.component_count();
  const auto t = spanning_tree_count(g);
  out << "vertices: " << n << '\n';
  out << "edges: " << m << '\n';
  out << "connected: " << yes_no(g.connected()) << '\n';
  out << "components: " << k << '\n';
  out << "betti_number: " << (m + k - n) << '\n';
  out << "spanning_trees: " << format_number(t.value) << '\n';
  double det_lw = 0.0;
  if (g.connected()) {
    const auto inc = build_incidence(g, 0);
    det_lw = linalg::determinant(inc.reduced_laplacian());
  }
  out << "det_reduced_laplacian: " << format_number(det_lw) << '\n';
  bool isolated = n == 0;
  for (std::size_t v = 0; v < n; ++v) isolated = isolated || g.degree(v) == 0;
  if (isolated) {
    out << "spectral_radius: n/a\nmin_eigenvalue: n/a\nbipartite_hazard: n/a\n";
    return;
  }
  const auto diag = local::convergence_diagnostics(g);
  out << "spectral_radius: " << format_number(diag.spectral_radius) << '\n';
  out << "min_eigenvalue: " << format_number(diag.min_eigenvalue) << '\n';
  out << "bipartite_hazard: " << yes_no(diag.bipartite_hazard) << '\n';
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
  std::string graph;
  std::string measurements;
  std::string space;
  std::string method = "direct";
  std::string ref;
  std::string gauge = "reference";
  std::optional<double> variance;
  std::optional<double> kappa;
  double tol = 1e-9;
  std::size_t max_iter = 0;
  std::optional<double> damping;
  std::optional<double> beta;
  double threshold = 1e-9;
  std::string out;
};

io::NoiseSpec default_noise(const Graph& g, io::Space space, std::size_t d, std::size_t q,
                            const EstimateArgs& a) {
  const auto m = g.edge_count();
  const double var = a.variance.value_or(1.0);
  const double kap = a.kappa.value_or(1.0);
  switch (space) {
    case io::Space::real:
      return gaussian::NoiseModel{gaussian::IidScalar{var}};
    case io::Space::real_d:
      return gaussian::NoiseModel{
          gaussian::IidVector{var * Matrix::Identity(static_cast<Eigen::Index>(d),
                                                     static_cast<Eigen::Index>(d))}};
    case io::Space::circle:
      return circle::VonMisesModel::uniform(m, kap);
    case io::Space::product:
      return abelian::ProductNoiseModel::uniform(m, d, q, var, kap);
  }
  throw InputError("unknown space");
}

bool uniform_scalar_noise(const gaussian::NoiseModel& noise) {
  if (std::holds_alternative<gaussian::IidScalar>(noise)) return true;
  if (const auto* diag = std::get_if<gaussian::DiagonalScalar>(&noise)) {
    return (diag->variances.array() == diag->variances(0)).all();
  }
  if (const auto* iv = std::get_if<gaussian::IidVector>(&noise)) {
    const Matrix& c = iv->covariance;
    return c.isApprox(c(0, 0) * Matrix::Identity(c.rows(), c.cols()), 0.0);
  }
  return false;
}

int cmd_estimate(const EstimateArgs& a, std::ostream& out) {
  const Graph g = io::read_graph(a.graph);
  io::MeasurementSet set = io::read_measurements(a.measurements, g);
  if (!a.space.empty() && io::parse_space(a.space) != set.space) {
    throw InputError("--space " + a.space + " does not match the measurement file space '" +
                     io::to_string(set.space) + "'");
  }
  if (!g.connected()) throw InputError("estimation requires a connected graph");
  if (a.gauge != "reference" && a.gauge != "mean_zero") {
    throw InputError("--gauge must be reference or mean_zero");
  }
  const std::size_t ref = a.ref.empty() ? 0 : g.vertex_index(a.ref);
  const auto d = set.linear_dimension();
  const auto q = set.circular_dimension();
  const auto space = set.space;
  const bool linear_space = space == io::Space::real || space == io::Space::real_d;

  const auto& method = a.method;
  const bool method_ok = linear_space ? (method == "direct" || method == "jacobi")
                         : space == io::Space::circle ? (method == "eigen" || method == "hybrid")
                                                      : (method == "direct" || method == "hybrid");
  if (!method_ok) {
    throw InputError("method '" + method + "' is not available for space '" +
                     io::to_string(space) + "'");
  }

  io::NoiseSpec noise =
      (set.noise && !a.variance && !a.kappa) ? *set.noise : default_noise(g, space, d, q, a);

  Json diag;
  abelian::ProductData x = abelian::ProductData::zeros(g.vertex_count(), d, q);
  bool converged = true;
  std::string failure;

  if (linear_space) {
    const auto& gn = std::get<gaussian::NoiseModel>(noise);
    gaussian::validate(gn, g.edge_count(), d);
    const auto inc = build_incidence(g, ref);
    gaussian::EstimateResult est;
    if (method == "direct") {
      est = gaussian::ml_estimate(inc, set.edges.linear, gn);
    } else {
      if (!uniform_scalar_noise(gn)) {
        throw InputError("jacobi needs iid noise; use --method direct for weighted noise");
      }
      local::JacobiOptions opt;
      opt.tol = a.tol;
      opt.max_iter = a.max_iter;
      opt.damping = a.damping;
      const auto res = local::jacobi_run(g, inc, set.edges.linear, opt);
      est = res.estimate;
      converged = res.converged;
      diag["iterations"] = res.iterations;
      diag["final_increment"] = res.final_delta;
      diag["damping"] = res.damping;
      if (!converged) failure = "Jacobi iteration did not reach tol";
    }
    if (a.gauge == "mean_zero") est = gaussian::to_mean_zero(est);
    x.linear = est.x;
    diag["residual_norm"] = est.residual.norm();
    diag["kirchhoff_defect"] = gaussian::current_law_defect(inc, est.residual, gn);
  } else if (space == io::Space::circle) {
    const auto& model = std::get<circle::VonMisesModel>(noise);
    const circle::ComplexVector r = set.edges.circular.col(0);
    const auto diagnostics = local::convergence_diagnostics(g);
    const double beta = a.beta.value_or(diagnostics.bipartite_hazard ? model.kappa.mean() : 0.0);
    circle::PhaseAssignment phases;
    if (method == "eigen") {
      const auto res = circle::global_eigen_estimate(g, r, model, circle::EigenMatrix::q, beta);
      phases = res.phases;
      diag["eigenvalue"] = res.eigenvalue;
      diag["eigengap"] = res.eigengap;
      diag["ambiguous"] = res.ambiguous;
    } else {
      circle::HybridOptions opt;
      opt.threshold = a.threshold;
      opt.beta = beta;
      if (a.max_iter > 0) opt.max_iter = a.max_iter;
      const auto res = circle::ml_estimate(g, r, model, opt);
      phases = res.phases;
      converged = res.converged;
      diag["iterations"] = res.iterations;
      diag["anti_aligned_events"] = res.anti_aligned_events;
      if (!converged) failure = "hybrid iteration did not reach the defect threshold";
    }
    diag["beta"] = beta;
    phases = phases.aligned_to(ref);
    const auto report = circle::critical_point_report(g, r, model, phases);
    diag["critical_point_defect"] = report.max_defect;
    diag["log_likelihood"] = circle::log_likelihood(g, r, phases, model);
    if (a.gauge == "mean_zero") {
      const Complex s = phases.values().sum();
      if (std::abs(s) > 0.0) phases = phases.rotated(std::conj(s) / std::abs(s));
    }
    x.circular.col(0) = phases.values();
    const auto omega = circle::edge_estimate(g, phases);
    double res_norm = 0.0;
    for (Eigen::Index e = 0; e < r.size(); ++e) {
      res_norm += std::norm(std::arg(r(e) * std::conj(omega(e))));
    }
    diag["residual_norm"] = std::sqrt(res_norm);
  } else {
    const auto& model = std::get<abelian::ProductNoiseModel>(noise);
    circle::HybridOptions opt;
    opt.threshold = a.threshold;
    if (a.beta) opt.beta = *a.beta;
    if (a.max_iter > 0) opt.max_iter = a.max_iter;
    const auto res = abelian::ml_estimate_product(g, set.edges, model, ref, opt);
    x = res.x;
    converged = res.converged;
    diag["kirchhoff_defect"] = std::vector<double>(res.linear_current_defect.begin(),
                                                   res.linear_current_defect.end());
    diag["critical_point_defect"] = std::vector<double>(res.circular_critical_defect.begin(),
                                                        res.circular_critical_defect.end());
    diag["residual_norm"] = res.linear_residual.norm();
    diag["log_likelihood"] = abelian::log_likelihood(g, set.edges, x, model);
    if (a.gauge == "mean_zero") {
      for (Eigen::Index j = 0; j < x.linear.cols(); ++j) {
        x.linear.col(j).array() -= x.linear.col(j).mean();
      }
      for (Eigen::Index j = 0; j < x.circular.cols(); ++j) {
        const Complex s = x.circular.col(j).sum();
        if (std::abs(s) > 0.0) x.circular.col(j) *= std::conj(s) / std::abs(s);
      }
    }
    if (!converged) failure = "hybrid iteration did not reach the defect threshold";
  }
  diag["converged"] = converged;

  if (set.truth) {
    const auto& truth = *set.truth;
    for (Eigen::Index j = 0; j < x.linear.cols(); ++j) {
      double sum = 0.0;
      const auto r = static_cast<Eigen::Index>(ref);
      for (Eigen::Index v = 0; v < x.linear.rows(); ++v) {
        if (v == r) continue;
        const double err = (x.linear(v, j) - x.linear(r, j)) - (truth.linear(v, j) - truth.linear(r, j));
        sum += err * err;
      }
      diag["squared_error"].push_back(sum / static_cast<double>(x.linear.rows() - 1));
    }
    for (Eigen::Index j = 0; j < x.circular.cols(); ++j) {
      diag["circular_error"].push_back(circle::circular_error(
          circle::PhaseAssignment(x.circular.col(j)), circle::PhaseAssignment(truth.circular.col(j)),
          ref));
    }
  }

  Json result;
  result["space"] = io::to_string(space);
  result["method"] = method;
  result["gauge"] = a.gauge;
  result["reference"] = g.vertex_id(ref);
  Json vertices = Json::object();
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    vertices[g.vertex_id(v)] = io::element_to_json(space, x.row(v));
  }
  result["vertices"] = vertices;
  const auto omega = abelian::edge_differences(g, x);
  Json edges = Json::object();
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    edges[g.edge(e).id] = io::element_to_json(space, omega.row(e));
  }
  result["edges"] = edges;
  result["diagnostics"] = diag;

  if (!a.out.empty()) io::write_json(a.out, result);

  // Human-readable report, 12 significant digits.
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    out << g.vertex_id(v) << ':';
    for (Eigen::Index j = 0; j < x.linear.cols(); ++j) {
      out << ' ' << format_number(x.linear(static_cast<Eigen::Index>(v), j));
    }
    for (Eigen::Index j = 0; j < x.circular.cols(); ++j) {
      out << ' ' << format_number(circle::wrap_angle(std::arg(x.circular(static_cast<Eigen::Index>(v), j))));
    }
    out << '\n';
  }
  for (auto it = diag.begin(); it != diag.end(); ++it) {
    out << it.key() << ": ";
    const auto print = [&](const Json& value) {
      if (value.is_number_float()) {
        out << format_number(value.get<double>());
      } else {
        out << value.dump();
      }
    };
    if (it->is_array()) {
      for (std::size_t i = 0; i < it->size(); ++i) {
        if (i) out << ' ';
        print((*it)[i]);
      }
    } else {
      print(*it);
    }
    out << '\n';
  }
  if (a.out.empty()) out << result.dump(2) << '\n';
  if (!converged) throw NotConverged{failure};
  return kOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> trials;
};

std::uint64_t parse_seed(const std::string& text, const std::string& source) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used, 10);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InputError(source + " is not a 64-bit unsigned integer: '" + text + "'");
  }
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const fs::path config_path = a.config;
  auto config = sim::config_from_json(io::read_json(config_path), config_path.parent_path());
  if (a.seed) {
    config.seed = *a.seed;
  } else if (const char* env = std::getenv(kSeedVariable); env != nullptr && *env != '\0') {
    config.seed = parse_seed(env, kSeedVariable);
  }
  if (a.threads) config.threads = *a.threads;
  if (a.trials) config.trials = *a.trials;
  config.validate();

  const fs::path dir = a.out_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir.string() + "'");

  const auto result = sim::run_experiment(config);
  const auto summary = sim::summary_csv(result);
  io::write_text_atomic(dir / "trials.csv", sim::trials_csv(result));
  io::write_text_atomic(dir / "summary.csv", summary);
  io::write_text_atomic(dir / "reference.csv", sim::reference_csv(result));
  out << summary;
  return kOk;
}

// ---------------------------------------------------------------------------
// design

struct DesignArgs {
  std::string graph;
  std::string candidates = "all-missing";
  double variance = 1.0;
  std::string out;
};

std::vector<sim::DesignCandidate> read_candidates(const Graph& g, const std::string& path) {
  const Json j = io::read_json(path);
  const Json& list = j.is_object() && j.contains("candidates") ? j.at("candidates") : j;
  if (!list.is_array()) throw InputError("candidate file must hold an array of edges");
  std::vector<sim::DesignCandidate> out;
  for (const auto& c : list) {
    if (!c.is_object() || !c.contains("source") || !c.contains("target") ||
        !c.at("source").is_string() || !c.at("target").is_string()) {
      throw InputError("each candidate needs string \"source\" and \"target\"");
    }
    out.push_back({g.vertex_index(c.at("source").get<std::string>()),
                   g.vertex_index(c.at("target").get<std::string>())});
  }
  return out;
}

int cmd_design(const DesignArgs& a, std::ostream& out) {
  const Graph g = io::read_graph(a.graph);
  const auto candidates =
      a.candidates == "all-missing" ? sim::all_missing_candidates(g) : read_candidates(g, a.candidates);
  const auto rows = sim::network_design_report(g, candidates, a.variance);
  std::ostringstream csv;
  csv << "rank,source,target,spanning_trees,det_fisher,tied\n";
  for (const auto& r : rows) {
    csv << r.rank << ',' << g.vertex_id(r.edge.source) << ',' << g.vertex_id(r.edge.target) << ','
        << format_number(r.spanning_trees) << ',' << format_number(r.det_fisher) << ','
        << yes_no(r.tied) << '\n';
  }
  if (!a.out.empty()) io::write_text_atomic(a.out, csv.str());
  out << csv.str();
  return kOk;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateGraphArgs {
  std::string topology = "ring";
  std::size_t n = 5;
  std::size_t extra = 0;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_generate_graph(const GenerateGraphArgs& a, std::ostream& out) {
  Json source = {{"generator", a.topology}, {"n", a.n}, {"extra_edges", a.extra}, {"seed", a.seed}};
  const Graph g = sim::graph_from_source(source);
  if (a.out.empty()) {
    out << io::graph_to_json(g).dump(2) << '\n';
  } else {
    io::write_graph(a.out, g);
  }
  return kOk;
}

struct GenerateMeasurementArgs {
  std::string graph;
  std::string space = "circle";
  double variance = 1.0;
  double kappa = 1.0;
  std::size_t dimension = 2;
  std::size_t linear = 1;
  std::size_t circular = 1;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_generate_measurements(const GenerateMeasurementArgs& a, std::ostream& out) {
  const Graph g = io::read_graph(a.graph);
  const auto space = io::parse_space(a.space);
  std::size_t d = 0;
  std::size_t q = 0;
  switch (space) {
    case io::Space::real: d = 1; break;
    case io::Space::real_d: d = a.dimension; break;
    case io::Space::circle: q = 1; break;
    case io::Space::product: d = a.linear; q = a.circular; break;
  }
  if (d + q == 0) throw InputError("space has no coordinates");
  const auto m = g.edge_count();
  io::MeasurementSet set;
  set.space = space;
  switch (space) {
    case io::Space::real:
      set.noise = gaussian::NoiseModel{gaussian::IidScalar{a.variance}};
      break;
    case io::Space::real_d:
      set.noise = gaussian::NoiseModel{gaussian::IidVector{
          a.variance * Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d))}};
      break;
    case io::Space::circle:
      set.noise = circle::VonMisesModel::uniform(m, a.kappa);
      break;
    case io::Space::product:
      set.noise = abelian::ProductNoiseModel::uniform(m, d, q, a.variance, a.kappa);
      break;
  }
  const StreamFactory streams(a.seed);
  Rng truth_rng = streams.stream({0});
  set.truth = sim::sample_truth(truth_rng, g.vertex_count(), d, q);
  set.edges = sim::generate_measurements(streams.child({1}), g, *set.truth, *set.noise);
  if (a.out.empty()) {
    out << io::measurements_to_json(g, set).dump(2) << '\n';
  } else {
    io::write_measurements(a.out, g, set);
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Maximum-likelihood synchronization on graphs", "netsync"};
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* c_analyze = app.add_subcommand("analyze", "Graph report: connectivity, spanning trees, spectra");
  c_analyze->add_option("graph", analyze.graph, "Graph JSON file")->required();

  EstimateArgs est;
  auto* c_est = app.add_subcommand("estimate", "Estimate vertex values from edge measurements");
  c_est->add_option("graph", est.graph, "Graph JSON file")->required();
  c_est->add_option("measurements", est.measurements, "Measurement JSON file")->required();
  c_est->add_option("--space", est.space, "real, real_d, circle or product (default: from file)");
  c_est->add_option("--method", est.method, "direct, jacobi, eigen or hybrid")
      ->check(CLI::IsMember({"direct", "jacobi", "eigen", "hybrid"}));
  c_est->add_option("--ref", est.ref, "Reference vertex id (default: first vertex)");
  c_est->add_option("--gauge", est.gauge, "reference or mean_zero");
  c_est->add_option("--variance", est.variance, "iid Gaussian variance (overrides the file)");
  c_est->add_option("--kappa", est.kappa, "uniform von Mises concentration (overrides the file)");
  c_est->add_option("--tol", est.tol, "Jacobi increment tolerance");
  c_est->add_option("--max-iter", est.max_iter, "Iteration cap (0: default)");
  c_est->add_option("--damping", est.damping, "Jacobi damping in (0, 1]");
  c_est->add_option("--beta", est.beta, "Diagonal regularization for the circle iteration");
  c_est->add_option("--threshold", est.threshold, "Hybrid critical-point defect threshold");
  c_est->add_option("--out", est.out, "Estimate JSON output file");

  SimulateArgs simulate;
  auto* c_sim = app.add_subcommand("simulate", "Run a Monte Carlo experiment from a config file");
  c_sim->add_option("config", simulate.config, "Experiment config JSON")->required();
  c_sim->add_option("--out", simulate.out_dir, "Output directory for CSV files");
  c_sim->add_option("--seed", simulate.seed, "Master seed (overrides config and NETSYNC_SEED)");
  c_sim->add_option("--threads", simulate.threads, "Worker threads");
  c_sim->add_option("--trials", simulate.trials, "Trials per sweep value");

  DesignArgs design;
  auto* c_design = app.add_subcommand("design", "Rank candidate edges by spanning-tree count");
  c_design->add_option("graph", design.graph, "Base graph JSON file")->required();
  c_design->add_option("--candidates", design.candidates, "all-missing or a candidate JSON file");
  c_design->add_option("--variance", design.variance, "Edge noise variance for det F");
  c_design->add_option("--out", design.out, "CSV output file");

  auto* c_gen = app.add_subcommand("generate", "Write generated graphs or measurements");
  c_gen->require_subcommand(1);
  GenerateGraphArgs gen_graph;
  auto* c_gg = c_gen->add_subcommand("graph", "Generate a graph file");
  c_gg->add_option("--topology", gen_graph.topology, "ring, path, complete, star or random");
  c_gg->add_option("--n", gen_graph.n, "Vertex count");
  c_gg->add_option("--extra", gen_graph.extra, "Extra edges for random graphs");
  c_gg->add_option("--seed", gen_graph.seed, "Seed for random graphs");
  c_gg->add_option("--out", gen_graph.out, "Graph JSON output file");
  GenerateMeasurementArgs gen_meas;
  auto* c_gm = c_gen->add_subcommand("measurements", "Generate truth and noisy measurements");
  c_gm->add_option("graph", gen_meas.graph, "Graph JSON file")->required();
  c_gm->add_option("--space", gen_meas.space, "real, real_d, circle or product");
  c_gm->add_option("--variance", gen_meas.variance, "Gaussian variance");
  c_gm->add_option("--kappa", gen_meas.kappa, "von Mises concentration");
  c_gm->add_option("--dimension", gen_meas.dimension, "d for real_d");
  c_gm->add_option("--linear", gen_meas.linear, "Linear coordinates for product");
  c_gm->add_option("--circular", gen_meas.circular, "Circular coordinates for product");
  c_gm->add_option("--seed", gen_meas.seed, "Seed");
  c_gm->add_option("--out", gen_meas.out, "Measurement JSON output file");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*c_analyze) {
      cmd_analyze(analyze, out);
      return kOk;
    }
    if (*c_est) return cmd_estimate(est, out);
    if (*c_sim) return cmd_simulate(simulate, out);
    if (*c_design) return cmd_design(design, out);
    if (*c_gg) return cmd_generate_graph(gen_graph, out);
    if (*c_gm) return cmd_generate_measurements(gen_meas, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const NotConverged& e) {
    err << "not converged: " << e.message << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

}  // namespace netsync::cli
