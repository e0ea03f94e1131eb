#include "netsync/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "netsync/error.hpp"

namespace netsync::io {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw InputError(what + " must be a number");
  return j.get<double>();
}

const Json& field(const Json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) {
    throw InputError(what + " is missing \"" + key + "\"");
  }
  return j.at(key);
}

Vector number_array(const Json& j, const std::string& what) {
  if (!j.is_array()) throw InputError(what + " must be an array");
  Vector out(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) out(static_cast<Eigen::Index>(i)) = number(j[i], what);
  return out;
}

Json vector_json(const Eigen::Ref<const Vector>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(x);
  return out;
}

Matrix square_from_row_major(const Json& j, const std::string& what) {
  const Vector flat = number_array(j, what);
  const auto size = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(flat.size()))));
  if (size * size != flat.size() || size == 0) throw InputError(what + " must be a square matrix");
  Matrix out(size, size);
  for (Eigen::Index i = 0; i < size; ++i) {
    for (Eigen::Index k = 0; k < size; ++k) out(i, k) = flat(i * size + k);
  }
  return out;
}

Json row_major_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) out.push_back(m(i, k));
  }
  return out;
}

// Per-edge table of `width` numbers: a number (all entries), a width-array
// (shared by all edges), or an object keyed by edge id.
Matrix edge_table(const Graph& graph, const Json& j, std::size_t width, const std::string& what) {
  const auto m = static_cast<Eigen::Index>(graph.edge_count());
  const auto w = static_cast<Eigen::Index>(width);
  if (j.is_number()) return Matrix::Constant(m, w, j.get<double>());
  if (j.is_array()) {
    const Vector v = number_array(j, what);
    if (v.size() == w) return v.transpose().replicate(m, 1);
    if (w == 1 && v.size() == m) return v;
    throw InputError(what + " has the wrong length");
  }
  if (!j.is_object()) throw InputError(what + " must be a number, array or edge-keyed object");
  Matrix out(m, w);
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    const auto& id = graph.edge(e).id;
    if (!j.contains(id)) throw InputError(what + " is missing edge '" + id + "'");
    const Json& entry = j.at(id);
    if (entry.is_number() && w == 1) {
      out(static_cast<Eigen::Index>(e), 0) = entry.get<double>();
    } else {
      const Vector v = number_array(entry, what);
      if (v.size() != w) throw InputError(what + " for edge '" + id + "' has the wrong length");
      out.row(static_cast<Eigen::Index>(e)) = v.transpose();
    }
  }
  if (j.size() != graph.edge_count()) throw InputError(what + " names unknown edges");
  return out;
}

Json edge_table_json(const Graph& graph, const Matrix& table, bool scalar) {
  Json out = Json::object();
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    const auto r = static_cast<Eigen::Index>(e);
    out[graph.edge(e).id] = scalar ? Json(table(r, 0)) : vector_json(table.row(r).transpose());
  }
  return out;
}

std::size_t infer_linear_dimension(const Json& value) {
  return value.is_array() ? value.size() : 1;
}

}  // namespace

std::string to_string(Space space) {
  switch (space) {
    case Space::real: return "real";
    case Space::real_d: return "real_d";
    case Space::circle: return "circle";
    case Space::product: return "product";
  }
  return "real";
}

Space parse_space(const std::string& name) {
  if (name == "real") return Space::real;
  if (name == "real_d") return Space::real_d;
  if (name == "circle") return Space::circle;
  if (name == "product") return Space::product;
  throw InputError("unknown space '" + name + "' (expected real, real_d, circle or product)");
}

// ---------------------------------------------------------------------------

Json graph_to_json(const Graph& graph) {
  Json edges = Json::array();
  for (const auto& e : graph.edges()) {
    edges.push_back({{"id", e.id},
                     {"source", graph.vertex_id(e.source)},
                     {"target", graph.vertex_id(e.target)}});
  }
  return {{"vertices", graph.vertex_ids()}, {"edges", edges}};
}

Graph graph_from_json(const Json& j) {
  const Json& vertices = field(j, "vertices", "graph");
  const Json& edges = field(j, "edges", "graph");
  if (!vertices.is_array() || !edges.is_array()) {
    throw InputError("graph vertices and edges must be arrays");
  }
  std::vector<std::string> names;
  for (const auto& v : vertices) {
    if (!v.is_string()) throw InputError("vertex ids must be strings");
    names.push_back(v.get<std::string>());
  }
  std::vector<Graph::EdgeSpec> specs;
  for (const auto& e : edges) {
    const auto str = [&](const char* key) {
      const Json& f = field(e, key, "edge");
      if (!f.is_string()) throw InputError(std::string("edge ") + key + " must be a string");
      return f.get<std::string>();
    };
    specs.push_back({str("id"), str("source"), str("target")});
  }
  return Graph(std::move(names), specs);
}

// ---------------------------------------------------------------------------

Json element_to_json(Space space, const abelian::GroupElement& g) {
  switch (space) {
    case Space::real: return g.linear(0);
    case Space::real_d: return vector_json(g.linear);
    case Space::circle: return circle::wrap_angle(std::arg(g.circular(0)));
    case Space::product: {
      Json circ = Json::array();
      for (const auto& z : g.circular) circ.push_back(circle::wrap_angle(std::arg(z)));
      return {{"linear", vector_json(g.linear)}, {"circular", circ}};
    }
  }
  return nullptr;
}

abelian::GroupElement element_from_json(Space space, const Json& j, std::size_t d,
                                        std::size_t q) {
  abelian::GroupElement g = abelian::GroupElement::identity(d, q);
  const auto angle = [](const Json& a) {
    const double t = number(a, "phase");
    if (!std::isfinite(t)) throw InputError("phase must be finite");
    return std::polar(1.0, t);
  };
  switch (space) {
    case Space::real:
      if (j.is_array() && j.size() == 1) {
        g.linear(0) = number(j[0], "value");
      } else {
        g.linear(0) = number(j, "value");
      }
      break;
    case Space::real_d:
      g.linear = number_array(j, "value");
      if (static_cast<std::size_t>(g.linear.size()) != d) {
        throw InputError("vector value has the wrong dimension");
      }
      break;
    case Space::circle:
      g.circular(0) = angle(j);
      break;
    case Space::product: {
      g.linear = j.contains("linear") ? number_array(j.at("linear"), "linear part") : Vector();
      const Json circ = j.contains("circular") ? j.at("circular") : Json::array();
      if (!circ.is_array()) throw InputError("circular part must be an array");
      if (static_cast<std::size_t>(g.linear.size()) != d || circ.size() != q) {
        throw InputError("group element has the wrong dimensions");
      }
      for (std::size_t i = 0; i < q; ++i) g.circular(static_cast<Eigen::Index>(i)) = angle(circ[i]);
      break;
    }
  }
  for (double v : g.linear) {
    if (!std::isfinite(v)) throw InputError("values must be finite");
  }
  return g;
}

// ---------------------------------------------------------------------------

Json noise_to_json(const Graph& graph, const NoiseSpec& noise) {
  return std::visit(
      Overloaded{
          [&](const gaussian::NoiseModel& g) -> Json {
            return std::visit(
                Overloaded{
                    [](const gaussian::IidScalar& v) -> Json {
                      return {{"variant", "iid"}, {"variance", v.variance}};
                    },
                    [&](const gaussian::DiagonalScalar& v) -> Json {
                      return {{"variant", "diagonal"},
                              {"variances", edge_table_json(graph, v.variances, true)}};
                    },
                    [](const gaussian::FullScalar& v) -> Json {
                      return {{"variant", "full"}, {"covariance", row_major_json(v.covariance)}};
                    },
                    [](const gaussian::IidVector& v) -> Json {
                      return {{"variant", "iid_vector"},
                              {"covariance", row_major_json(v.covariance)}};
                    },
                    [](const gaussian::FullVector& v) -> Json {
                      return {{"variant", "full_vector"},
                              {"covariance", row_major_json(v.covariance)}};
                    },
                },
                g);
          },
          [&](const circle::VonMisesModel& v) -> Json {
            return {{"variant", "von_mises"}, {"kappa", edge_table_json(graph, v.kappa, true)}};
          },
          [&](const abelian::ProductNoiseModel& p) -> Json {
            return {{"variant", "product"},
                    {"variances", edge_table_json(graph, p.variances, false)},
                    {"kappa", edge_table_json(graph, p.kappa, false)}};
          },
      },
      noise);
}

NoiseSpec noise_from_json(const Graph& graph, Space space, std::size_t d, std::size_t q,
                          const Json& j) {
  const Json& tag = field(j, "variant", "noise");
  if (!tag.is_string()) throw InputError("noise variant must be a string");
  const auto variant = tag.get<std::string>();
  const auto m = graph.edge_count();
  const bool scalar_space = space == Space::real;
  const auto require_space = [&](bool ok) {
    if (!ok) {
      throw InputError("noise variant '" + variant + "' does not apply to space '" +
                       to_string(space) + "'");
    }
  };

  if (variant == "iid") {
    require_space(scalar_space);
    gaussian::NoiseModel n = gaussian::IidScalar{number(field(j, "variance", "noise"), "variance")};
    gaussian::validate(n, m, 1);
    return n;
  }
  if (variant == "diagonal") {
    require_space(scalar_space);
    gaussian::NoiseModel n =
        gaussian::DiagonalScalar{edge_table(graph, field(j, "variances", "noise"), 1, "variances")};
    gaussian::validate(n, m, 1);
    return n;
  }
  if (variant == "full") {
    require_space(scalar_space);
    gaussian::NoiseModel n =
        gaussian::FullScalar{square_from_row_major(field(j, "covariance", "noise"), "covariance")};
    gaussian::validate(n, m, 1);
    return n;
  }
  if (variant == "iid_vector") {
    require_space(space == Space::real_d || scalar_space);
    gaussian::NoiseModel n =
        gaussian::IidVector{square_from_row_major(field(j, "covariance", "noise"), "covariance")};
    gaussian::validate(n, m, d);
    return n;
  }
  if (variant == "full_vector") {
    require_space(space == Space::real_d || scalar_space);
    gaussian::NoiseModel n =
        gaussian::FullVector{square_from_row_major(field(j, "covariance", "noise"), "covariance")};
    gaussian::validate(n, m, d);
    return n;
  }
  if (variant == "von_mises") {
    require_space(space == Space::circle);
    circle::VonMisesModel model{edge_table(graph, field(j, "kappa", "noise"), 1, "kappa")};
    model.validate(m);
    return model;
  }
  if (variant == "product") {
    require_space(space == Space::product);
    abelian::ProductNoiseModel model;
    model.variances = d > 0 ? edge_table(graph, field(j, "variances", "noise"), d, "variances")
                            : Matrix(static_cast<Eigen::Index>(m), 0);
    model.kappa = q > 0 ? edge_table(graph, field(j, "kappa", "noise"), q, "kappa")
                        : Matrix(static_cast<Eigen::Index>(m), 0);
    model.validate(m);
    return model;
  }
  throw InputError("unknown noise variant '" + variant + "'");
}

// ---------------------------------------------------------------------------

Json measurements_to_json(const Graph& graph, const MeasurementSet& set) {
  Json j;
  j["space"] = to_string(set.space);
  Json edges = Json::object();
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    edges[graph.edge(e).id] = element_to_json(set.space, set.edges.row(e));
  }
  j["edges"] = edges;
  if (set.noise) j["noise"] = noise_to_json(graph, *set.noise);
  if (set.truth) {
    Json truth = Json::object();
    for (std::size_t v = 0; v < graph.vertex_count(); ++v) {
      truth[graph.vertex_id(v)] = element_to_json(set.space, set.truth->row(v));
    }
    j["truth"] = truth;
  }
  return j;
}

MeasurementSet measurements_from_json(const Graph& graph, const Json& j) {
  if (!j.is_object()) throw InputError("measurement file must be a JSON object");
  MeasurementSet set;
  if (j.contains("space")) {
    if (!j.at("space").is_string()) throw InputError("space must be a string");
    set.space = parse_space(j.at("space").get<std::string>());
  }
  const Json& edges = field(j, "edges", "measurement file");
  if (!edges.is_object()) throw InputError("measurement edges must be an edge-keyed object");
  if (edges.size() != graph.edge_count()) {
    throw InputError("measurement file must give exactly one value per graph edge");
  }
  if (graph.edge_count() == 0) throw InputError("graph has no edges");

  // Dimensions come from the first edge.
  const Json& first = field(edges, graph.edge(0).id.c_str(), "measurement edges");
  std::size_t d = 0;
  std::size_t q = 0;
  switch (set.space) {
    case Space::real: d = 1; break;
    case Space::real_d: d = infer_linear_dimension(first); break;
    case Space::circle: q = 1; break;
    case Space::product:
      d = first.contains("linear") ? first.at("linear").size() : 0;
      q = first.contains("circular") ? first.at("circular").size() : 0;
      if (d + q == 0) throw InputError("product elements need a linear or circular part");
      break;
  }
  set.edges = abelian::ProductData::zeros(graph.edge_count(), d, q);
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    const auto& id = graph.edge(e).id;
    if (!edges.contains(id)) throw InputError("no measurement for edge '" + id + "'");
    set.edges.set_row(e, element_from_json(set.space, edges.at(id), d, q));
  }
  if (j.contains("noise")) set.noise = noise_from_json(graph, set.space, d, q, j.at("noise"));
  if (j.contains("truth")) {
    const Json& truth = j.at("truth");
    if (!truth.is_object() || truth.size() != graph.vertex_count()) {
      throw InputError("truth must give one value per vertex");
    }
    set.truth = abelian::ProductData::zeros(graph.vertex_count(), d, q);
    for (std::size_t v = 0; v < graph.vertex_count(); ++v) {
      const auto& id = graph.vertex_id(v);
      if (!truth.contains(id)) throw InputError("no truth value for vertex '" + id + "'");
      set.truth->set_row(v, element_from_json(set.space, truth.at(id), d, q));
    }
  }
  return set;
}

// ---------------------------------------------------------------------------

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw InputError("cannot parse '" + path.string() + "': " + e.what());
  }
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out << text;
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw InputError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw InputError("cannot move output into '" + path.string() + "'");
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

Graph read_graph(const std::filesystem::path& path) {
  const Json j = read_json(path);
  try {
    return graph_from_json(j);
  } catch (const Json::exception& e) {
    throw InputError("malformed graph file '" + path.string() + "': " + e.what());
  }
}

void write_graph(const std::filesystem::path& path, const Graph& graph) {
  write_json(path, graph_to_json(graph));
}

MeasurementSet read_measurements(const std::filesystem::path& path, const Graph& graph) {
  const Json j = read_json(path);
  try {
    return measurements_from_json(graph, j);
  } catch (const Json::exception& e) {
    throw InputError("malformed measurement file '" + path.string() + "': " + e.what());
  }
}

void write_measurements(const std::filesystem::path& path, const Graph& graph,
                        const MeasurementSet& set) {
  write_json(path, measurements_to_json(graph, set));
}

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

}  // namespace netsync::io
