#include "netsync/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "netsync/generators.hpp"
#include "netsync/linalg.hpp"

namespace netsync::sim {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

using circle::Complex;

Complex rotation(Complex r, int sign) { return sign > 0 ? r : std::conj(r); }

}  // namespace

// ---------------------------------------------------------------------------

JacobiNode::JacobiNode(std::vector<double> x0, EdgeBook<std::vector<double>> measurements,
                       double damping, double tol)
    : x_(std::move(x0)),
      increment_(x_.size(), std::numeric_limits<double>::infinity()),
      r_(std::move(measurements)),
      damping_(damping),
      tol_(tol) {}

void JacobiNode::receive(std::span<const Envelope<Message>> inbox) {
  // Edge increments of the previous round: own increment against each
  // neighbour's, as carried in this round's messages.
  bool calm = !inbox.empty();
  for (const auto& env : inbox) {
    for (std::size_t j = 0; j < x_.size(); ++j) {
      if (!(std::abs(increment_[j] - env.payload->increment[j]) < tol_)) calm = false;
    }
  }
  settled_ = calm;

  std::vector<local::LinearNeighbor> neighbors;
  neighbors.reserve(inbox.size());
  for (const auto& env : inbox) {
    neighbors.push_back({env.payload->x, r_.at(env.edge), env.sign});
  }
  std::vector<double> next(x_.size());
  local::jacobi_vertex_update(neighbors, x_, damping_, next);
  for (std::size_t j = 0; j < x_.size(); ++j) increment_[j] = next[j] - x_[j];
  x_ = std::move(next);
}

PowerNode::PowerNode(double a0, Complex x0, EdgeBook<Complex> measurements,
                     EdgeBook<double> kappa, double beta, double tol)
    : a_(a0),
      x_(x0),
      r_(std::move(measurements)),
      kappa_(std::move(kappa)),
      normalizer_(beta),
      beta_(beta),
      tol_(tol) {
  for (const auto& [e, k] : kappa_.entries()) normalizer_ += k;
}

void PowerNode::receive(std::span<const Envelope<Message>> inbox) {
  std::vector<circle::PhaseNeighbor> neighbors;
  neighbors.reserve(inbox.size());
  for (const auto& env : inbox) {
    neighbors.push_back({env.payload->a * env.payload->x, rotation(r_.at(env.edge), env.sign),
                         kappa_.at(env.edge)});
  }
  const Complex y = circle::power_vertex_update(neighbors, a_ * x_, normalizer_, beta_);
  const double mag = std::abs(y);
  a_ = mag;
  if (!(mag >= circle::kAmplitudeFloor)) {
    underflow_ = true;
    settled_ = false;
    return;
  }
  const Complex next = y / mag;
  settled_ = std::abs(next - x_) < tol_;
  x_ = next;
}

HybridNode::HybridNode(PowerNode power, double threshold, std::size_t switch_rounds)
    : power_(std::move(power)),
      threshold_(threshold),
      switch_rounds_(switch_rounds),
      rho_(power_.normalizer_ - power_.beta_) {}

void HybridNode::receive(std::span<const Envelope<Message>> inbox) {
  ++rounds_;
  if (!hybrid_) {
    power_.receive(inbox);
    if (rounds_ >= switch_rounds_) hybrid_ = true;
    return;
  }
  std::vector<circle::HybridNeighbor> neighbors;
  neighbors.reserve(inbox.size());
  for (const auto& env : inbox) {
    neighbors.push_back({env.payload->a, env.payload->x, rotation(power_.r_.at(env.edge), env.sign),
                         power_.kappa_.at(env.edge)});
  }
  const auto upd = circle::hybrid_vertex_update(neighbors, power_.a_, power_.x_, rho_,
                                                power_.beta_, threshold_);
  power_.a_ = upd.a;
  power_.x_ = upd.x;
  if (upd.amplitude_out_of_range) power_.underflow_ = true;
  rho_ = upd.rho;
  held_ = upd.held;
  if (upd.anti_aligned) ++anti_aligned_;
}

std::vector<JacobiNode> make_jacobi_nodes(const Graph& graph, const Matrix& r, double damping,
                                          double tol) {
  if (static_cast<std::size_t>(r.rows()) != graph.edge_count()) {
    throw InputError("measurement matrix must have one row per edge");
  }
  const auto d = static_cast<std::size_t>(r.cols());
  std::vector<JacobiNode> nodes;
  for (std::size_t v = 0; v < graph.vertex_count(); ++v) {
    EdgeBook<std::vector<double>> book;
    for (const auto& inc : graph.incidences(v)) {
      std::vector<double> row(d);
      for (std::size_t j = 0; j < d; ++j) {
        row[j] = r(static_cast<Eigen::Index>(inc.edge), static_cast<Eigen::Index>(j));
      }
      book.add(inc.edge, std::move(row));
    }
    nodes.emplace_back(std::vector<double>(d, 0.0), std::move(book), damping, tol);
  }
  return nodes;
}

std::vector<PowerNode> make_power_nodes(const Graph& graph, const circle::ComplexVector& r,
                                        const circle::VonMisesModel& model,
                                        const circle::AmplitudePhaseState& start, double beta,
                                        double tol) {
  model.validate(graph.edge_count());
  if (static_cast<std::size_t>(r.size()) != graph.edge_count()) {
    throw InputError("measurement count does not match edge count");
  }
  std::vector<PowerNode> nodes;
  for (std::size_t v = 0; v < graph.vertex_count(); ++v) {
    EdgeBook<Complex> rb;
    EdgeBook<double> kb;
    for (const auto& inc : graph.incidences(v)) {
      rb.add(inc.edge, r(static_cast<Eigen::Index>(inc.edge)));
      kb.add(inc.edge, model.kappa(static_cast<Eigen::Index>(inc.edge)));
    }
    const auto vi = static_cast<Eigen::Index>(v);
    nodes.emplace_back(start.a(vi), start.x(vi), std::move(rb), std::move(kb), beta, tol);
  }
  return nodes;
}

// ---------------------------------------------------------------------------

abelian::ProductData sample_truth(Rng& rng, std::size_t vertices, std::size_t d, std::size_t q) {
  auto out = abelian::ProductData::zeros(vertices, d, q);
  for (std::size_t v = 0; v < vertices; ++v) {
    const auto vi = static_cast<Eigen::Index>(v);
    for (std::size_t j = 0; j < d; ++j) out.linear(vi, static_cast<Eigen::Index>(j)) = 10.0 * uniform01(rng);
    for (std::size_t j = 0; j < q; ++j) {
      out.circular(vi, static_cast<Eigen::Index>(j)) =
          std::polar(1.0, 2.0 * std::numbers::pi * uniform01(rng));
    }
  }
  return out;
}

abelian::ProductData generate_measurements(const StreamFactory& streams, const Graph& graph,
                                           const abelian::ProductData& truth,
                                           const io::NoiseSpec& noise) {
  if (truth.rows() != graph.vertex_count()) {
    throw InputError("truth needs one value per vertex");
  }
  const auto m = graph.edge_count();
  const auto mi = static_cast<Eigen::Index>(m);
  const auto d = truth.linear_dimension();
  const auto q = truth.circular_dimension();
  abelian::ProductData eps = abelian::ProductData::zeros(m, d, q);

  const auto normals = [](Rng& rng, Eigen::Index count) {
    Vector z(count);
    for (auto& v : z) v = standard_normal(rng);
    return z;
  };

  std::visit(
      Overloaded{
          [&](const gaussian::NoiseModel& g) {
            if (q != 0) throw InputError("Gaussian noise needs a purely linear space");
            gaussian::validate(g, m, d);
            std::visit(
                Overloaded{
                    [&](const gaussian::IidScalar& v) {
                      for (Eigen::Index e = 0; e < mi; ++e) {
                        Rng rng = streams.stream({static_cast<std::uint64_t>(e)});
                        eps.linear(e, 0) = std::sqrt(v.variance) * standard_normal(rng);
                      }
                    },
                    [&](const gaussian::DiagonalScalar& v) {
                      for (Eigen::Index e = 0; e < mi; ++e) {
                        Rng rng = streams.stream({static_cast<std::uint64_t>(e)});
                        eps.linear(e, 0) = std::sqrt(v.variances(e)) * standard_normal(rng);
                      }
                    },
                    [&](const gaussian::FullScalar& v) {
                      Rng rng = streams.stream({m});
                      const Matrix l = v.covariance.llt().matrixL();
                      eps.linear.col(0) = l * normals(rng, mi);
                    },
                    [&](const gaussian::IidVector& v) {
                      const Matrix l = v.covariance.llt().matrixL();
                      for (Eigen::Index e = 0; e < mi; ++e) {
                        Rng rng = streams.stream({static_cast<std::uint64_t>(e)});
                        eps.linear.row(e) =
                            (l * normals(rng, static_cast<Eigen::Index>(d))).transpose();
                      }
                    },
                    [&](const gaussian::FullVector& v) {
                      Rng rng = streams.stream({m});
                      const Matrix l = v.covariance.llt().matrixL();
                      const Vector flat = l * normals(rng, mi * static_cast<Eigen::Index>(d));
                      eps.linear = flat.reshaped(mi, static_cast<Eigen::Index>(d));
                    },
                },
                g);
          },
          [&](const circle::VonMisesModel& v) {
            if (d != 0 || q != 1) throw InputError("von Mises noise needs the circle space");
            v.validate(m);
            for (Eigen::Index e = 0; e < mi; ++e) {
              Rng rng = streams.stream({static_cast<std::uint64_t>(e)});
              eps.circular(e, 0) = circle::von_mises_draw(rng, v.kappa(e));
            }
          },
          [&](const abelian::ProductNoiseModel& p) {
            p.validate(m);
            if (p.linear_dimension() != d || p.circular_dimension() != q) {
              throw InputError("product noise model does not match the truth dimensions");
            }
            for (Eigen::Index e = 0; e < mi; ++e) {
              Rng rng = streams.stream({static_cast<std::uint64_t>(e)});
              for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) {
                eps.linear(e, j) = std::sqrt(p.variances(e, j)) * standard_normal(rng);
              }
              for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(q); ++j) {
                eps.circular(e, j) = circle::von_mises_draw(rng, p.kappa(e, j));
              }
            }
          },
      },
      noise);

  const abelian::ProductData omega = abelian::edge_differences(graph, truth);
  abelian::ProductData r = abelian::ProductData::zeros(m, d, q);
  for (std::size_t e = 0; e < m; ++e) r.set_row(e, abelian::compose(omega.row(e), eps.row(e)));
  return r;
}

abelian::ProductData generate_measurements(Rng& rng, const Graph& graph,
                                           const abelian::ProductData& truth,
                                           const io::NoiseSpec& noise) {
  return generate_measurements(StreamFactory(rng()), graph, truth, noise);
}

// ---------------------------------------------------------------------------

std::string to_string(Estimator estimator) {
  switch (estimator) {
    case Estimator::global_q: return "global_Q";
    case Estimator::global_a: return "global_A";
    case Estimator::local_q: return "local_Q";
    case Estimator::hybrid_ml: return "hybrid_ML";
    case Estimator::jacobi: return "jacobi";
    case Estimator::direct_ml: return "direct_ML";
  }
  return "direct_ML";
}

Estimator parse_estimator(const std::string& name) {
  for (auto e : {Estimator::global_q, Estimator::global_a, Estimator::local_q,
                 Estimator::hybrid_ml, Estimator::jacobi, Estimator::direct_ml}) {
    if (to_string(e) == name) return e;
  }
  throw InputError("unknown estimator '" + name +
                   "' (expected global_Q, global_A, local_Q, hybrid_ML, jacobi or direct_ML)");
}

void SimConfig::validate() const {
  if (trials < 1) throw InputError("trials must be at least 1");
  if (sweep.empty()) throw InputError("sweep list is empty");
  for (double s : sweep) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InputError("sweep values must be positive");
  }
  if (estimators.empty()) throw InputError("estimator list is empty");
  if (!graph.connected()) throw InputError("simulation graph must be connected");
  if (reference >= graph.vertex_count()) throw InputError("reference vertex out of range");
  if (!(tol > 0.0)) throw InputError("tol must be positive");
  if (max_rounds < 1) throw InputError("max_rounds must be at least 1");
  if (threads < 1) throw InputError("threads must be at least 1");
  if (beta && !(*beta >= 0.0)) throw InputError("beta must be non-negative");
  if (!(hybrid_threshold > 0.0)) throw InputError("hybrid_threshold must be positive");
  const bool linear_only = space == io::Space::real || space == io::Space::real_d;
  if (linear_only && circular_dimension != 0) throw InputError("real spaces have no circle part");
  if (linear_dimension + circular_dimension == 0) throw InputError("space has no coordinates");
  for (auto e : estimators) {
    const bool ok = linear_only ? (e == Estimator::jacobi || e == Estimator::direct_ml)
                                : e != Estimator::jacobi;
    if (!ok) {
      throw InputError("estimator " + to_string(e) + " does not apply to space " +
                       io::to_string(space));
    }
  }
}

Graph graph_from_source(const io::Json& source, const std::filesystem::path& base_dir) {
  if (!source.is_object()) throw InputError("graph source must be an object");
  if (source.contains("file")) {
    std::filesystem::path p = source.at("file").get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return io::read_graph(p);
  }
  if (!source.contains("generator")) throw InputError("graph source needs \"file\" or \"generator\"");
  const auto kind = source.at("generator").get<std::string>();
  const auto n = source.value("n", std::size_t{0});
  if (n < 2) throw InputError("generated graphs need n >= 2");
  if (kind == "ring") return generators::ring(n);
  if (kind == "path") return generators::path(n);
  if (kind == "complete") return generators::complete(n);
  if (kind == "star") return generators::star(n);
  if (kind == "random") {
    Rng rng = StreamFactory(source.value("seed", std::uint64_t{1})).stream({0});
    return generators::random_connected(rng, n, source.value("extra_edges", std::size_t{0}));
  }
  throw InputError("unknown generator '" + kind + "'");
}

SimConfig config_from_json(const io::Json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  try {
    SimConfig c;
    if (!j.contains("graph")) throw InputError("config needs a graph source");
    c.graph_source = j.at("graph");
    c.graph = graph_from_source(c.graph_source, base_dir);
    c.space = io::parse_space(j.value("space", std::string("circle")));
    switch (c.space) {
      case io::Space::real:
        c.linear_dimension = 1;
        c.circular_dimension = 0;
        break;
      case io::Space::real_d:
        c.linear_dimension = j.value("dimension", std::size_t{2});
        c.circular_dimension = 0;
        break;
      case io::Space::circle:
        c.linear_dimension = 0;
        c.circular_dimension = 1;
        break;
      case io::Space::product:
        c.linear_dimension = j.value("linear_dimension", std::size_t{1});
        c.circular_dimension = j.value("circular_dimension", std::size_t{1});
        break;
    }
    c.sweep = j.at("sweep").get<std::vector<double>>();
    for (const auto& name : j.at("estimators").get<std::vector<std::string>>()) {
      c.estimators.push_back(parse_estimator(name));
    }
    c.trials = j.value("trials", c.trials);
    if (j.contains("seed")) {
      const auto& s = j.at("seed");
      if (s.is_string()) {
        c.seed = std::stoull(s.get<std::string>());
      } else if (s.is_number_unsigned() || (s.is_number_integer() && s.get<long long>() >= 0)) {
        c.seed = s.get<std::uint64_t>();
      } else {
        throw InputError("seed must be a non-negative integer");
      }
    }
    c.tol = j.value("tol", c.tol);
    c.max_rounds = j.value("max_rounds", c.max_rounds);
    if (j.contains("beta") && !j.at("beta").is_null()) {
      const io::Json& b = j.at("beta");
      if (b.is_string() && b.get<std::string>() == "auto") {
        c.beta_auto = true;
      } else if (b.is_number()) {
        c.beta = b.get<double>();
      } else {
        throw InputError("beta must be a number or \"auto\"");
      }
    }
    c.hybrid_threshold = j.value("hybrid_threshold", c.hybrid_threshold);
    c.switch_rounds = j.value("switch_rounds", c.switch_rounds);
    if (j.contains("reference")) c.reference = c.graph.vertex_index(j.at("reference").get<std::string>());
    c.threads = j.value("threads", c.threads);
    c.validate();
    return c;
  } catch (const io::Json::exception& e) {
    throw InputError(std::string("malformed config: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw InputError("malformed config: seed is not an integer");
  } catch (const std::out_of_range&) {
    throw InputError("malformed config: seed out of range");
  }
}

abelian::ProductNoiseModel sweep_noise(const SimConfig& config, double value) {
  const auto m = config.graph.edge_count();
  switch (config.space) {
    case io::Space::real:
    case io::Space::real_d:
      return abelian::ProductNoiseModel::uniform(m, config.linear_dimension, 0, value * value, 1.0);
    case io::Space::circle:
      return abelian::ProductNoiseModel::uniform(m, 0, 1, 1.0, value);
    case io::Space::product:
      return abelian::ProductNoiseModel::uniform(m, config.linear_dimension,
                                                 config.circular_dimension, 1.0 / value, value);
  }
  return {};
}

double effective_beta(const SimConfig& config, double value) {
  if (config.beta) return *config.beta;
  if (config.beta_auto) return value;
  if (config.space == io::Space::real || config.space == io::Space::real_d) return 0.0;
  return config.graph.bipartite() ? value : 0.0;
}

// ---------------------------------------------------------------------------

namespace {

struct CoordinateRun {
  std::size_t rounds = 0;
  std::size_t messages = 0;
  bool converged = true;
};

struct TrialContext {
  const SimConfig* config;
  const Graph* graph;
  const abelian::ProductNoiseModel* noise;
  const abelian::ProductData* truth;
  const abelian::ProductData* r;
  const std::vector<circle::AmplitudePhaseState>* starts;
  double beta;
  double damping;
};

bool is_local(Estimator e) {
  return e == Estimator::local_q || e == Estimator::hybrid_ml || e == Estimator::jacobi;
}

CoordinateRun estimate_linear(const TrialContext& ctx, Estimator est, Matrix& x) {
  const auto& graph = *ctx.graph;
  const auto d = ctx.noise->linear_dimension();
  CoordinateRun run;
  if (is_local(est)) {
    RoundHarness<JacobiNode> harness(
        graph, make_jacobi_nodes(graph, ctx.r->linear, ctx.damping, ctx.config->tol));
    run.converged = harness.run(ctx.config->max_rounds);
    run.rounds = harness.rounds();
    run.messages = harness.messages();
    for (std::size_t v = 0; v < graph.vertex_count(); ++v) {
      const auto& value = harness.nodes()[v].value();
      for (std::size_t j = 0; j < d; ++j) {
        x(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(j)) = value[j];
      }
    }
    return run;
  }
  const auto inc = build_incidence(graph, ctx.config->reference);
  for (std::size_t j = 0; j < d; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    const Matrix rj = ctx.r->linear.col(c);
    x.col(c) = gaussian::ml_estimate(inc, rj, ctx.noise->linear_noise(j)).x.col(0);
  }
  return run;
}

CoordinateRun estimate_circular(const TrialContext& ctx, Estimator est, std::size_t j,
                                circle::ComplexVector& x) {
  const auto& graph = *ctx.graph;
  const auto c = static_cast<Eigen::Index>(j);
  const circle::ComplexVector rj = ctx.r->circular.col(c);
  const auto model = ctx.noise->circular_noise(j);
  const auto& start = (*ctx.starts)[j];
  const auto& cfg = *ctx.config;
  CoordinateRun run;
  switch (est) {
    case Estimator::global_q:
    case Estimator::global_a: {
      const auto which = est == Estimator::global_q ? circle::EigenMatrix::q : circle::EigenMatrix::a;
      const auto res = circle::global_eigen_estimate(graph, rj, model, which, ctx.beta);
      x = res.phases.values();
      run.converged = !res.ambiguous;
      return run;
    }
    case Estimator::direct_ml: {
      circle::HybridOptions opt;
      opt.threshold = cfg.hybrid_threshold;
      opt.beta = ctx.beta;
      const auto res = circle::ml_estimate(graph, rj, model, opt);
      x = res.phases.values();
      run.converged = res.converged;
      return run;
    }
    case Estimator::local_q: {
      RoundHarness<PowerNode> harness(graph,
                                      make_power_nodes(graph, rj, model, start, ctx.beta, cfg.tol));
      run.converged = harness.run(cfg.max_rounds);
      run.rounds = harness.rounds();
      run.messages = harness.messages();
      for (std::size_t v = 0; v < graph.vertex_count(); ++v) {
        const auto& node = harness.nodes()[v];
        x(static_cast<Eigen::Index>(v)) = node.phase();
        if (node.underflow()) run.converged = false;
      }
      return run;
    }
    case Estimator::hybrid_ml: {
      std::vector<HybridNode> nodes;
      for (auto& p : make_power_nodes(graph, rj, model, start, ctx.beta, cfg.tol)) {
        nodes.emplace_back(std::move(p), cfg.hybrid_threshold, cfg.switch_rounds);
      }
      RoundHarness<HybridNode> harness(graph, std::move(nodes));
      run.converged = harness.run(cfg.max_rounds);
      run.rounds = harness.rounds();
      run.messages = harness.messages();
      for (std::size_t v = 0; v < graph.vertex_count(); ++v) {
        const auto& node = harness.nodes()[v];
        x(static_cast<Eigen::Index>(v)) = node.phase();
        if (node.amplitude_fault()) run.converged = false;
      }
      return run;
    }
    case Estimator::jacobi:
      break;
  }
  throw InputError("jacobi does not apply to circular coordinates");
}

double coordinate_metric_linear(const Matrix& est, const Matrix& truth, Eigen::Index col,
                                std::size_t ref) {
  const auto n = est.rows();
  const auto r = static_cast<Eigen::Index>(ref);
  double sum = 0.0;
  for (Eigen::Index v = 0; v < n; ++v) {
    if (v == r) continue;
    const double err = (est(v, col) - est(r, col)) - (truth(v, col) - truth(r, col));
    sum += err * err;
  }
  return sum / static_cast<double>(n - 1);
}

TrialRecord run_trial(const TrialContext& ctx, Estimator est, double sweep, std::size_t trial) {
  TrialRecord rec;
  rec.sweep = sweep;
  rec.estimator = est;
  rec.trial = trial;
  const auto& graph = *ctx.graph;
  const auto n = graph.vertex_count();
  const auto d = ctx.noise->linear_dimension();
  const auto q = ctx.noise->circular_dimension();
  auto x = abelian::ProductData::zeros(n, d, q);
  try {
    if (d > 0) {
      const auto run = estimate_linear(ctx, est, x.linear);
      rec.rounds = std::max(rec.rounds, run.rounds);
      rec.messages += run.messages;
      rec.converged = rec.converged && run.converged;
    }
    for (std::size_t j = 0; j < q; ++j) {
      circle::ComplexVector xc(static_cast<Eigen::Index>(n));
      const auto run = estimate_circular(ctx, est, j, xc);
      x.circular.col(static_cast<Eigen::Index>(j)) = xc;
      rec.rounds = std::max(rec.rounds, run.rounds);
      rec.messages += run.messages;
      rec.converged = rec.converged && run.converged;
    }
  } catch (const NumericalError&) {
    rec.converged = false;
    rec.metric = std::numeric_limits<double>::quiet_NaN();
    rec.log_likelihood = std::numeric_limits<double>::quiet_NaN();
    return rec;
  }

  double metric = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    metric += coordinate_metric_linear(x.linear, ctx.truth->linear, static_cast<Eigen::Index>(j),
                                       ctx.config->reference);
  }
  for (std::size_t j = 0; j < q; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    const circle::PhaseAssignment phases(x.circular.col(c));
    metric += circle::circular_error(phases, circle::PhaseAssignment(ctx.truth->circular.col(c)),
                                     ctx.config->reference);
    rec.critical_defect = std::max(
        rec.critical_defect,
        circle::critical_point_report(graph, ctx.r->circular.col(c), ctx.noise->circular_noise(j), phases)
            .max_defect);
  }
  rec.metric = metric / static_cast<double>(d + q);
  rec.log_likelihood = abelian::log_likelihood(graph, *ctx.r, x, *ctx.noise);
  return rec;
}

}  // namespace

ExperimentResult run_experiment(const SimConfig& config) {
  config.validate();
  const auto& graph = config.graph;
  const auto n = graph.vertex_count();
  const auto ns = config.sweep.size();
  const auto nt = config.trials;
  const auto ne = config.estimators.size();
  const auto d = config.linear_dimension;
  const auto q = config.circular_dimension;
  const double damping = graph.bipartite() ? 0.5 : 1.0;

  std::vector<abelian::ProductNoiseModel> noises;
  for (double s : config.sweep) noises.push_back(sweep_noise(config, s));

  ExperimentResult result;
  result.records.resize(ns * nt * ne);
  const StreamFactory master(config.seed);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    while (true) {
      const std::size_t item = next.fetch_add(1);
      if (item >= ns * nt) return;
      try {
        const std::size_t i = item / nt;
        const std::size_t t = item % nt;
        const StreamFactory streams = master.child({i, t});
        Rng truth_rng = streams.stream({0});
        const auto truth = sample_truth(truth_rng, n, d, q);
        const auto r = generate_measurements(streams.child({1}), graph, truth, noises[i]);
        std::vector<circle::AmplitudePhaseState> starts;
        for (std::size_t j = 0; j < q; ++j) {
          Rng init = streams.stream({2, j});
          starts.push_back(circle::initial_power_state(n, init));
        }
        const TrialContext ctx{&config, &graph, &noises[i], &truth, &r, &starts,
                               effective_beta(config, config.sweep[i]), damping};
        for (std::size_t k = 0; k < ne; ++k) {
          result.records[item * ne + k] = run_trial(ctx, config.estimators[k], config.sweep[i], t);
        }
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(ns * nt);
        return;
      }
    }
  };
  const std::size_t threads = std::min(config.threads, ns * nt);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t k = 0; k < ne; ++k) {
      SummaryRow row;
      row.sweep = config.sweep[i];
      row.estimator = config.estimators[k];
      double sum = 0.0;
      double sum_sq = 0.0;
      std::size_t finite = 0;
      double rounds = 0.0;
      double messages = 0.0;
      double converged = 0.0;
      for (std::size_t t = 0; t < nt; ++t) {
        const auto& rec = result.records[(i * nt + t) * ne + k];
        if (std::isfinite(rec.metric)) {
          sum += rec.metric;
          sum_sq += rec.metric * rec.metric;
          ++finite;
        }
        rounds += static_cast<double>(rec.rounds);
        messages += static_cast<double>(rec.messages);
        converged += rec.converged ? 1.0 : 0.0;
      }
      row.trials = nt;
      row.mean_metric = finite > 0 ? sum / static_cast<double>(finite)
                                   : std::numeric_limits<double>::quiet_NaN();
      if (finite > 1) {
        const double f = static_cast<double>(finite);
        const double var = std::max(0.0, (sum_sq - f * row.mean_metric * row.mean_metric) / (f - 1.0));
        row.stderr_metric = std::sqrt(var / f);
      }
      row.mean_rounds = rounds / static_cast<double>(nt);
      row.mean_messages = messages / static_cast<double>(nt);
      row.converged_fraction = converged / static_cast<double>(nt);
      result.summary.push_back(row);
    }
    result.reference.push_back(
        {config.sweep[i],
         abelian::fisher_report_product(graph, noises[i], config.reference).trace_inverse()});
  }
  return result;
}

std::string trials_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "sweep,estimator,trial,metric,rounds,converged,messages\n";
  for (const auto& r : result.records) {
    out << io::format_number(r.sweep) << ',' << to_string(r.estimator) << ',' << r.trial << ','
        << io::format_number(r.metric) << ',' << r.rounds << ',' << (r.converged ? 1 : 0) << ','
        << r.messages << '\n';
  }
  return out.str();
}

std::string summary_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "sweep,estimator,trials,mean_metric,stderr_metric,mean_rounds,converged_fraction,"
         "mean_messages\n";
  for (const auto& r : result.summary) {
    out << io::format_number(r.sweep) << ',' << to_string(r.estimator) << ',' << r.trials << ','
        << io::format_number(r.mean_metric) << ',' << io::format_number(r.stderr_metric) << ','
        << io::format_number(r.mean_rounds) << ',' << io::format_number(r.converged_fraction)
        << ',' << io::format_number(r.mean_messages) << '\n';
  }
  return out.str();
}

std::string reference_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "sweep,trace_inv_fisher\n";
  for (const auto& r : result.reference) {
    out << io::format_number(r.sweep) << ',' << io::format_number(r.trace_inv_fisher) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

std::vector<DesignCandidate> all_missing_candidates(const Graph& graph) {
  const auto n = graph.vertex_count();
  std::vector<std::vector<bool>> linked(n, std::vector<bool>(n, false));
  for (const auto& e : graph.edges()) {
    linked[e.source][e.target] = true;
    linked[e.target][e.source] = true;
  }
  std::vector<DesignCandidate> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!linked[i][j]) out.push_back({i, j});
    }
  }
  return out;
}

std::vector<DesignRow> network_design_report(const Graph& graph,
                                             const std::vector<DesignCandidate>& candidates,
                                             double variance) {
  if (!graph.connected()) throw InputError("design needs a connected base graph");
  if (!(variance > 0.0) || !std::isfinite(variance)) throw InputError("variance must be positive");
  const auto n = graph.vertex_count();
  std::vector<DesignRow> rows;
  for (const auto& c : candidates) {
    if (c.source >= n || c.target >= n) throw InputError("candidate edge names an unknown vertex");
    if (c.source == c.target) throw InputError("candidate edge is a self-loop");
    const Graph g = graph.with_edge(c.source, c.target);
    DesignRow row;
    row.edge = c;
    row.spanning_trees = spanning_tree_count(g).value;
    const std::vector<double> w(g.edge_count(), 1.0 / variance);
    row.det_fisher = weighted_tree_sum(g, w);
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const DesignRow& a, const DesignRow& b) {
    return a.spanning_trees > b.spanning_trees;
  });
  const auto same = [](double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].rank = (i > 0 && same(rows[i].spanning_trees, rows[i - 1].spanning_trees))
                       ? rows[i - 1].rank
                       : i + 1;
    rows[i].tied = (i > 0 && same(rows[i].spanning_trees, rows[i - 1].spanning_trees)) ||
                   (i + 1 < rows.size() && same(rows[i].spanning_trees, rows[i + 1].spanning_trees));
  }
  return rows;
}

}  // namespace netsync::sim
