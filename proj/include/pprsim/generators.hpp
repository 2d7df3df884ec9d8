#pragma once

#include <cstdint>

#include "pprsim/graph.hpp"

namespace pprsim::generators {

/// Ring lattice over n nodes where each node links to k/2 neighbors on either
/// side, with each lattice edge rewired to a uniform random endpoint with
/// probability beta. k must be even and < n.
OverlayGraph watts_strogatz(std::size_t n, std::size_t k, double beta, std::uint64_t seed);

/// Uniform random spanning tree (random attachment) plus each remaining pair
/// independently with probability extra_edge_prob. Always connected.
OverlayGraph random_connected(std::size_t n, double extra_edge_prob, std::uint64_t seed);

OverlayGraph path(std::size_t n);
OverlayGraph ring(std::size_t n);
/// Node 0 is the center.
OverlayGraph star(std::size_t leaves);

}  // namespace pprsim::generators
