#pragma once

#include <cstddef>

#include "netsync/graph.hpp"
#include "netsync/random.hpp"

namespace netsync::generators {

/// v1 -> v2 -> ... -> vn.
Graph path(std::size_t n);
/// Path plus the closing edge vn -> v1.
Graph ring(std::size_t n);
/// Every pair i < j as an edge vi -> vj.
Graph complete(std::size_t n);
/// Centre v1 joined to v2..vn.
Graph star(std::size_t n);

/// Uniform random labelled spanning tree (Pruefer code) plus `extra_edges`
/// distinct non-tree vertex pairs chosen uniformly. Edge orientations are
/// random. Throws InputError if more extra edges are requested than missing
/// pairs exist.
Graph random_connected(Rng& rng, std::size_t n, std::size_t extra_edges);

}  // namespace netsync::generators
