#pragma once

// JSON file formats.
//
//   graph:        {"vertices":["v1",...],
//                  "edges":[{"id":"e1","source":"v1","target":"v2"},...]}
//   measurements: {"space":"real"|"real_d"|"circle"|"product",
//                  "edges":{"e1":<value>,...},
//                  "noise":{"variant":...},      (optional)
//                  "truth":{"v1":<value>,...}}   (optional)
//
// A value is a number for real, a d-array for real_d, radians for circle and
// {"linear":[...],"circular":[radians,...]} for product. Covariances are
// dense row-major arrays.

#include <filesystem>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "netsync/abelian.hpp"
#include "netsync/circle.hpp"
#include "netsync/gaussian.hpp"
#include "netsync/graph.hpp"

namespace netsync::io {

using Json = nlohmann::json;

enum class Space { real, real_d, circle, product };

std::string to_string(Space space);
/// Throws InputError on an unknown name.
Space parse_space(const std::string& name);

using NoiseSpec = std::variant<gaussian::NoiseModel, circle::VonMisesModel,
                               abelian::ProductNoiseModel>;

/// Edge data and optional noise and truth for one graph. Every space is held
/// in product form: real is d = 1, q = 0 and circle is d = 0, q = 1.
struct MeasurementSet {
  Space space = Space::real;
  abelian::ProductData edges;                 // m rows
  std::optional<NoiseSpec> noise;
  std::optional<abelian::ProductData> truth;  // n rows

  std::size_t linear_dimension() const { return edges.linear_dimension(); }
  std::size_t circular_dimension() const { return edges.circular_dimension(); }
};

Json graph_to_json(const Graph& graph);
/// Throws InputError on malformed input.
Graph graph_from_json(const Json& j);

Json element_to_json(Space space, const abelian::GroupElement& g);
abelian::GroupElement element_from_json(Space space, const Json& j, std::size_t d, std::size_t q);

Json noise_to_json(const Graph& graph, const NoiseSpec& noise);
NoiseSpec noise_from_json(const Graph& graph, Space space, std::size_t d, std::size_t q,
                          const Json& j);

Json measurements_to_json(const Graph& graph, const MeasurementSet& set);
MeasurementSet measurements_from_json(const Graph& graph, const Json& j);

/// Reads and parses a JSON file; parse failures become InputError.
Json read_json(const std::filesystem::path& path);
/// Writes through a temporary file renamed into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const Json& j);

Graph read_graph(const std::filesystem::path& path);
void write_graph(const std::filesystem::path& path, const Graph& graph);
MeasurementSet read_measurements(const std::filesystem::path& path, const Graph& graph);
void write_measurements(const std::filesystem::path& path, const Graph& graph,
                        const MeasurementSet& set);

/// Number formatted with 12 significant digits.
std::string format_number(double value);

}  // namespace netsync::io
