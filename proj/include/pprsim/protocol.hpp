#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pprsim/diffusion.hpp"
#include "pprsim/embeddings.hpp"
#include "pprsim/graph.hpp"

namespace pprsim {

using QueryId = std::uint64_t;
using Rng = std::mt19937_64;

class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct ResultEntry {
  DocId doc;
  NodeId holder;
  double score;
  bool operator==(const ResultEntry&) const = default;
};

/// A query travelling node to node. Deliberately carries no visited set: the
/// only path information is the reverse path needed to route the response.
struct QueryMessage {
  QueryId query_id = 0;
  std::vector<double> embedding;
  /// Remaining node-to-node transmissions.
  std::size_t ttl = 0;
  std::size_t k = 1;
  std::size_t walks = 1;
  /// Best k documents seen so far, ranked by (score desc, doc asc).
  std::vector<ResultEntry> results;
  /// Nodes that forwarded this message, origin first.
  std::vector<NodeId> reverse_path;

  bool contains(DocId doc) const;
};

/// Response travelling back along the reverse path.
struct ResponseMessage {
  QueryId query_id = 0;
  std::vector<ResultEntry> results;
  /// Remaining return route; the next recipient is back().
  std::vector<NodeId> reverse_path;
};

/// Read access to what a node knows about its neighbors' diffused embeddings.
struct NeighborView {
  const NeighborTable* table = nullptr;
  NodeId self = 0;
  std::span<const NodeId> neighbors;

  /// dot(query, latest known embedding of v); 0 when v is unknown.
  double score(NodeId v, std::span<const double> query) const;
};

struct NodeState {
  NodeId id = 0;
  std::span<const NodeId> neighbors;
  std::vector<DocumentRef> local_docs;
  std::span<const double> personalization;
  std::span<const double> diffused;
  const NeighborTable* neighbor_table = nullptr;
  /// Per query: neighbors this node has received the query from or sent it to.
  std::map<QueryId, std::set<NodeId>> traffic_memory;

  NeighborView view() const { return {neighbor_table, id, neighbors}; }
};

struct ForwardDecision {
  enum class Kind { Forward, Backtrack };
  Kind kind = Kind::Backtrack;
  std::vector<NodeId> next_hops;

  bool forwards() const { return kind == Kind::Forward; }
};

/// Merges the node's local top-k into q.results, keeping the global top-k.
/// Documents already present are not duplicated.
void evaluate_local(const NodeState& state, QueryMessage& q);

/// Unvisited neighbors except the arrival; else all neighbors except the
/// arrival; else (degree-1 node) the arrival itself.
std::vector<NodeId> candidate_next_hops(const NodeState& state, const QueryMessage& q,
                                        std::optional<NodeId> arrival);

/// The `walks` candidates whose known embedding best matches the query.
/// Ties are broken uniformly at random.
std::vector<NodeId> select_next_hops(std::span<const NodeId> candidates, const NeighborView& view,
                                     std::span<const double> query, std::size_t walks, Rng& rng);

/// Full per-node handling of an incoming query. arrival is empty at the
/// origin, which does not consume TTL; every other node decrements it on
/// arrival and backtracks once it reaches zero. Fan-out beyond one next hop
/// happens only at the origin.
ForwardDecision handle_query(NodeState& state, QueryMessage& q, std::optional<NodeId> arrival,
                             Rng& rng);

/// Builds the response a node sends when it backtracks, and drops its traffic
/// memory for the query.
ResponseMessage make_response(NodeState& state, const QueryMessage& q);

/// Handles a response passing through state. Returns the next node on the
/// return path, or nullopt when state is the origin and the response is
/// delivered.
std::optional<NodeId> handle_response(NodeState& state, ResponseMessage& r);

/// Trace encodings: one JSON object per message.
std::string to_json(const QueryMessage& q, bool with_embedding = false);
std::string to_json(const ResponseMessage& r);

}  // namespace pprsim
