#pragma once

// Synchronous round-based message passing and Monte Carlo experiments.
//
// In every round each node broadcasts one message to each neighbour (one per
// incident edge, so 2m messages per round) and then updates from the
// messages it received. Nodes see nothing but their own state, their own
// incident measurements and their inbox.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "netsync/abelian.hpp"
#include "netsync/circle.hpp"
#include "netsync/error.hpp"
#include "netsync/io.hpp"
#include "netsync/local_gaussian.hpp"
#include "netsync/random.hpp"

namespace netsync::sim {

template <class Payload>
struct Envelope {
  std::size_t edge;
  std::size_t sender;
  int sign;  // D(receiver, edge)
  const Payload* payload;
};

/// Drives a vector of nodes through synchronous rounds. `Node` provides
/// `Message emit() const`, `void receive(std::span<const Envelope<Message>>)`
/// and `bool settled() const`.
template <class Node>
class RoundHarness {
 public:
  using Message = typename Node::Message;

  RoundHarness(const Graph& graph, std::vector<Node> nodes,
               local::AccessObserver* observer = nullptr)
      : graph_(&graph), nodes_(std::move(nodes)), observer_(observer) {
    if (nodes_.size() != graph.vertex_count()) {
      throw InputError("harness needs one node per vertex");
    }
  }

  /// One round; returns the number of messages delivered.
  std::size_t step() {
    outgoing_.clear();
    outgoing_.reserve(nodes_.size());
    for (const auto& node : nodes_) outgoing_.push_back(node.emit());
    std::size_t delivered = 0;
    std::vector<Envelope<Message>> inbox;
    for (std::size_t v = 0; v < nodes_.size(); ++v) {
      inbox.clear();
      for (const auto& inc : graph_->incidences(v)) {
        if (observer_) observer_->on_read(v, inc.neighbor);
        inbox.push_back({inc.edge, inc.neighbor, inc.sign, &outgoing_[inc.neighbor]});
      }
      delivered += inbox.size();
      nodes_[v].receive(std::span<const Envelope<Message>>(inbox));
    }
    ++rounds_;
    messages_ += delivered;
    return delivered;
  }

  bool all_settled() const {
    for (const auto& node : nodes_) {
      if (!node.settled()) return false;
    }
    return true;
  }

  /// Runs until every node is settled or `max_rounds` rounds have passed.
  bool run(std::size_t max_rounds) {
    while (rounds_ < max_rounds) {
      step();
      if (all_settled()) return true;
    }
    return all_settled();
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t rounds() const { return rounds_; }
  std::size_t messages() const { return messages_; }

 private:
  const Graph* graph_;
  std::vector<Node> nodes_;
  local::AccessObserver* observer_;
  std::vector<Message> outgoing_;
  std::size_t rounds_ = 0;
  std::size_t messages_ = 0;
};

/// Incident measurements known to one vertex, by edge index.
template <class Value>
class EdgeBook {
 public:
  void add(std::size_t edge, Value value) { entries_.emplace_back(edge, std::move(value)); }
  const std::vector<std::pair<std::size_t, Value>>& entries() const { return entries_; }
  const Value& at(std::size_t edge) const {
    for (const auto& [e, v] : entries_) {
      if (e == edge) return v;
    }
    throw InputError("node has no measurement for this edge");
  }

 private:
  std::vector<std::pair<std::size_t, Value>> entries_;
};

/// Jacobi on R^d. Settled once every incident edge-space increment is below
/// tol.
class JacobiNode {
 public:
  struct Message {
    std::vector<double> x;
    std::vector<double> increment;
  };

  JacobiNode(std::vector<double> x0, EdgeBook<std::vector<double>> measurements, double damping,
             double tol);

  Message emit() const { return {x_, increment_}; }
  void receive(std::span<const Envelope<Message>> inbox);
  bool settled() const { return settled_; }
  const std::vector<double>& value() const { return x_; }

 private:
  std::vector<double> x_;
  std::vector<double> increment_;
  EdgeBook<std::vector<double>> r_;
  double damping_;
  double tol_;
  bool settled_ = false;
};

/// Local power iteration of Q on the circle. Settled once the node's phase
/// moved less than tol in the last round.
class PowerNode {
 public:
  struct Message {
    double a;
    circle::Complex x;
  };

  PowerNode(double a0, circle::Complex x0, EdgeBook<circle::Complex> measurements,
            EdgeBook<double> kappa, double beta, double tol);

  Message emit() const { return {a_, x_}; }
  void receive(std::span<const Envelope<Message>> inbox);
  bool settled() const { return settled_; }
  circle::Complex phase() const { return x_; }
  double amplitude() const { return a_; }
  bool underflow() const { return underflow_; }

 private:
  double a_;
  circle::Complex x_;
  EdgeBook<circle::Complex> r_;
  EdgeBook<double> kappa_;
  double normalizer_;
  double beta_;
  double tol_;
  bool settled_ = false;
  bool underflow_ = false;
  friend class HybridNode;
};

/// Power iteration for `switch_rounds` rounds, then the hybrid ML update.
/// Settled once held.
class HybridNode {
 public:
  using Message = PowerNode::Message;

  HybridNode(PowerNode power, double threshold, std::size_t switch_rounds);

  Message emit() const { return power_.emit(); }
  void receive(std::span<const Envelope<Message>> inbox);
  bool settled() const { return hybrid_ && held_; }
  circle::Complex phase() const { return power_.x_; }
  double amplitude() const { return power_.a_; }
  bool amplitude_fault() const { return power_.underflow_; }
  bool hybrid_mode() const { return hybrid_; }
  std::size_t anti_aligned_events() const { return anti_aligned_; }

 private:
  PowerNode power_;
  double threshold_;
  std::size_t switch_rounds_;
  std::size_t rounds_ = 0;
  double rho_;
  bool hybrid_ = false;
  bool held_ = false;
  std::size_t anti_aligned_ = 0;
};

std::vector<JacobiNode> make_jacobi_nodes(const Graph& graph, const Matrix& r, double damping,
                                          double tol);
std::vector<PowerNode> make_power_nodes(const Graph& graph, const circle::ComplexVector& r,
                                        const circle::VonMisesModel& model,
                                        const circle::AmplitudePhaseState& start, double beta,
                                        double tol);

// ---------------------------------------------------------------------------

/// r_e = difference(truth_t(e), truth_s(e)) composed with noise. Independent
/// models draw edge e from stream {e}; a joint covariance uses stream {m}.
/// Gaussian models apply to the linear part and von Mises models to the
/// circular part of `truth`.
abelian::ProductData generate_measurements(const StreamFactory& streams, const Graph& graph,
                                           const abelian::ProductData& truth,
                                           const io::NoiseSpec& noise);
abelian::ProductData generate_measurements(Rng& rng, const Graph& graph,
                                           const abelian::ProductData& truth,
                                           const io::NoiseSpec& noise);

/// Uniform reals in [0, 10) and uniform phases.
abelian::ProductData sample_truth(Rng& rng, std::size_t vertices, std::size_t d, std::size_t q);

enum class Estimator { global_q, global_a, local_q, hybrid_ml, jacobi, direct_ml };

std::string to_string(Estimator estimator);
Estimator parse_estimator(const std::string& name);

struct SimConfig {
  Graph graph;
  io::Json graph_source;  // as given in the config file
  io::Space space = io::Space::circle;
  std::size_t linear_dimension = 0;
  std::size_t circular_dimension = 1;
  /// sigma for real spaces, kappa for circle and product (where the linear
  /// variance is 1 / kappa).
  std::vector<double> sweep;
  std::vector<Estimator> estimators;
  std::size_t trials = 100;
  std::uint64_t seed = 1;
  double tol = 1e-10;
  std::size_t max_rounds = 5000;
  /// Unset: the mean concentration when the graph is bipartite, else 0.
  std::optional<double> beta;
  /// "beta": "auto" in the file: the concentration at every sweep value.
  bool beta_auto = false;
  double hybrid_threshold = 1e-9;
  /// Power rounds before the hybrid estimator switches over.
  std::size_t switch_rounds = 50;
  std::size_t reference = 0;
  std::size_t threads = 1;

  /// Throws InputError on an invalid combination.
  void validate() const;
};

/// Parses a config; relative graph file paths resolve against `base_dir`.
SimConfig config_from_json(const io::Json& j, const std::filesystem::path& base_dir = {});

/// Graph from {"generator": ring|path|complete|star|random, "n":..,
/// "extra_edges":.., "seed":..} or {"file": path}.
Graph graph_from_source(const io::Json& source, const std::filesystem::path& base_dir = {});

struct TrialRecord {
  double sweep = 0.0;
  Estimator estimator = Estimator::direct_ml;
  std::size_t trial = 0;
  double metric = 0.0;
  std::size_t rounds = 0;
  bool converged = true;
  std::size_t messages = 0;
  double log_likelihood = 0.0;
  /// Largest critical-point defect over the circular coordinates.
  double critical_defect = 0.0;
};

struct SummaryRow {
  double sweep = 0.0;
  Estimator estimator = Estimator::direct_ml;
  std::size_t trials = 0;
  double mean_metric = 0.0;
  double stderr_metric = 0.0;
  double mean_rounds = 0.0;
  double converged_fraction = 0.0;
  double mean_messages = 0.0;
};

struct ReferenceRow {
  double sweep = 0.0;
  double trace_inv_fisher = 0.0;
};

struct ExperimentResult {
  std::vector<TrialRecord> records;  // sweep-major, then trial, then estimator
  std::vector<SummaryRow> summary;
  std::vector<ReferenceRow> reference;
};

/// Noise model for one sweep value, in product form for every space.
abelian::ProductNoiseModel sweep_noise(const SimConfig& config, double value);
/// beta used for the circular estimators at one sweep value.
double effective_beta(const SimConfig& config, double value);

ExperimentResult run_experiment(const SimConfig& config);

std::string trials_csv(const ExperimentResult& result);
std::string summary_csv(const ExperimentResult& result);
std::string reference_csv(const ExperimentResult& result);

// ---------------------------------------------------------------------------

struct DesignCandidate {
  std::size_t source;
  std::size_t target;
};

struct DesignRow {
  DesignCandidate edge;
  double spanning_trees = 0.0;
  double det_fisher = 0.0;
  std::size_t rank = 0;  // 1-based, equal for ties
  bool tied = false;
};

/// Every unordered vertex pair without an edge, as (i, j) with i < j.
std::vector<DesignCandidate> all_missing_candidates(const Graph& graph);

/// Adds each candidate in turn and ranks by the new spanning-tree count
/// (descending). det F is for iid noise of the given variance.
std::vector<DesignRow> network_design_report(const Graph& graph,
                                             const std::vector<DesignCandidate>& candidates,
                                             double variance = 1.0);

}  // namespace netsync::sim
