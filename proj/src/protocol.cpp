#include "pprsim/protocol.hpp"

#include <algorithm>

#include "json.hpp"

namespace pprsim {

bool QueryMessage::contains(DocId doc) const {
  return std::any_of(results.begin(), results.end(),
                     [doc](const ResultEntry& r) { return r.doc == doc; });
}

double NeighborView::score(NodeId v, std::span<const double> query) const {
  if (table == nullptr) return 0.0;
  auto it = std::lower_bound(neighbors.begin(), neighbors.end(), v);
  if (it == neighbors.end() || *it != v) return 0.0;
  const auto slot = static_cast<std::size_t>(it - neighbors.begin());
  if (!table->known(self, slot)) return 0.0;
  return pprsim::score(query, table->latest(self, slot));
}

void evaluate_local(const NodeState& state, QueryMessage& q) {
  if (state.local_docs.empty()) return;
  auto local = top_k(q.embedding, state.local_docs, q.k);
  auto ranked = [](const ResultEntry& a, const ResultEntry& b) {
    return ranks_before({a.doc, a.score}, {b.doc, b.score});
  };
  for (const auto& hit : local) {
    if (q.contains(hit.id)) continue;
    q.results.push_back({hit.id, state.id, hit.score});
  }
  std::sort(q.results.begin(), q.results.end(), ranked);
  if (q.results.size() > q.k) q.results.resize(q.k);
}

std::vector<NodeId> candidate_next_hops(const NodeState& state, const QueryMessage& q,
                                        std::optional<NodeId> arrival) {
  const std::set<NodeId>* visited = nullptr;
  if (auto it = state.traffic_memory.find(q.query_id); it != state.traffic_memory.end()) {
    visited = &it->second;
  }
  std::vector<NodeId> out;
  for (NodeId v : state.neighbors) {
    if (arrival && v == *arrival) continue;
    if (visited && visited->count(v) != 0) continue;
    out.push_back(v);
  }
  if (!out.empty()) return out;
  for (NodeId v : state.neighbors) {
    if (!(arrival && v == *arrival)) out.push_back(v);
  }
  if (out.empty() && arrival) out.push_back(*arrival);
  return out;
}

std::vector<NodeId> select_next_hops(std::span<const NodeId> candidates, const NeighborView& view,
                                     std::span<const double> query, std::size_t walks, Rng& rng) {
  if (candidates.empty()) throw std::invalid_argument("select_next_hops: no candidates");
  if (walks == 0) throw std::invalid_argument("select_next_hops: walks must be >= 1");

  struct Scored {
    NodeId node;
    double score;
  };
  std::vector<Scored> scored;
  scored.reserve(candidates.size());
  for (NodeId v : candidates) scored.push_back({v, view.score(v, query)});
  // Shuffle then stable-sort: equal scores end up in uniformly random order.
  std::shuffle(scored.begin(), scored.end(), rng);
  std::stable_sort(scored.begin(), scored.end(),
                   [](const Scored& a, const Scored& b) { return a.score > b.score; });

  const std::size_t keep = std::min(walks, scored.size());
  std::vector<NodeId> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(scored[i].node);
  return out;
}

ForwardDecision handle_query(NodeState& state, QueryMessage& q, std::optional<NodeId> arrival,
                             Rng& rng) {
  if (arrival) {
    if (!std::binary_search(state.neighbors.begin(), state.neighbors.end(), *arrival)) {
      throw ProtocolError("node " + std::to_string(state.id) + " received query " +
                          std::to_string(q.query_id) + " from non-neighbor " +
                          std::to_string(*arrival));
    }
    if (q.reverse_path.empty() || q.reverse_path.back() != *arrival) {
      throw ProtocolError("query " + std::to_string(q.query_id) +
                          ": reverse path does not end at the sending node");
    }
    if (q.ttl == 0) {
      throw ProtocolError("query " + std::to_string(q.query_id) + " arrived with expired TTL");
    }
    state.traffic_memory[q.query_id].insert(*arrival);
  } else if (!q.reverse_path.empty()) {
    throw ProtocolError("query " + std::to_string(q.query_id) +
                        ": origin received a message with a non-empty reverse path");
  }

  evaluate_local(state, q);
  if (arrival) --q.ttl;
  if (q.ttl == 0) return {ForwardDecision::Kind::Backtrack, {}};

  auto candidates = candidate_next_hops(state, q, arrival);
  if (candidates.empty()) return {ForwardDecision::Kind::Backtrack, {}};

  const std::size_t fan_out = arrival ? 1 : q.walks;
  auto next = select_next_hops(candidates, state.view(), q.embedding, fan_out, rng);
  auto& memory = state.traffic_memory[q.query_id];
  memory.insert(next.begin(), next.end());
  q.reverse_path.push_back(state.id);
  return {ForwardDecision::Kind::Forward, std::move(next)};
}

ResponseMessage make_response(NodeState& state, const QueryMessage& q) {
  state.traffic_memory.erase(q.query_id);
  return {q.query_id, q.results, q.reverse_path};
}

std::optional<NodeId> handle_response(NodeState& state, ResponseMessage& r) {
  if (r.reverse_path.empty() || r.reverse_path.back() != state.id) {
    throw ProtocolError("response for query " + std::to_string(r.query_id) +
                        " delivered to node " + std::to_string(state.id) +
                        " which is not next on its reverse path");
  }
  r.reverse_path.pop_back();
  state.traffic_memory.erase(r.query_id);
  if (r.reverse_path.empty()) return std::nullopt;
  NodeId next = r.reverse_path.back();
  if (!std::binary_search(state.neighbors.begin(), state.neighbors.end(), next)) {
    throw ProtocolError("response for query " + std::to_string(r.query_id) +
                        ": reverse path hop " + std::to_string(state.id) + " -> " +
                        std::to_string(next) + " is not an edge");
  }
  return next;
}

namespace {

nlohmann::json results_json(const std::vector<ResultEntry>& results) {
  auto arr = nlohmann::json::array();
  for (const auto& r : results) arr.push_back({{"doc", r.doc}, {"holder", r.holder}, {"score", r.score}});
  return arr;
}

}  // namespace

std::string to_json(const QueryMessage& q, bool with_embedding) {
  nlohmann::json j = {{"query_id", q.query_id},
                      {"ttl", q.ttl},
                      {"k", q.k},
                      {"walks", q.walks},
                      {"results", results_json(q.results)},
                      {"reverse_path", q.reverse_path}};
  if (with_embedding) j["embedding"] = q.embedding;
  return j.dump();
}

std::string to_json(const ResponseMessage& r) {
  nlohmann::json j = {{"query_id", r.query_id},
                      {"results", results_json(r.results)},
                      {"reverse_path", r.reverse_path}};
  return j.dump();
}

}  // namespace pprsim
