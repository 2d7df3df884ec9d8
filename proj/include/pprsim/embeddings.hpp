#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "pprsim/kernels.hpp"
#include "pprsim/matrix.hpp"

namespace pprsim {

using DocId = std::uint32_t;

/// Token vocabulary with one L2-normalized vector per token.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  /// Vectors are normalized in place; a zero vector is rejected.
  EmbeddingStore(std::vector<std::string> tokens, RowMatrix vectors);

  std::size_t size() const { return tokens_.size(); }
  std::size_t dim() const { return vectors_.cols(); }

  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  std::span<const double> vector(std::size_t i) const { return vectors_.row(i); }
  std::optional<std::size_t> find(const std::string& token) const;

  const RowMatrix& vectors() const { return vectors_; }

 private:
  std::vector<std::string> tokens_;
  RowMatrix vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Reads word2vec/GloVe text vectors: "token f1 ... fD" per line, with an
/// optional leading "count dim" header. limit keeps only the first N tokens.
EmbeddingStore load_vectors(const std::filesystem::path& path,
                            std::optional<std::size_t> limit = std::nullopt);
EmbeddingStore read_vectors(std::istream& in, const std::string& source,
                            std::optional<std::size_t> limit = std::nullopt);

/// Deterministic unit-sphere-uniform vocabulary with tokens "w0", "w1", ...
EmbeddingStore synthesize_store(std::size_t vocab_size, std::size_t dim, std::uint64_t seed);

/// Dot product. Equals cosine similarity on normalized inputs.
double score(std::span<const double> query, std::span<const double> doc);

/// Scales v to unit L2 norm. Returns false (leaving v untouched) for a zero vector.
bool normalize(std::span<double> v);

struct DocumentRef {
  DocId id;
  std::span<const double> embedding;
};

struct ScoredDoc {
  DocId id;
  double score;
  bool operator==(const ScoredDoc&) const = default;
};

/// Strict ranking used everywhere a result list is ordered: score descending,
/// then doc id ascending.
inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

/// Exact top-k by score; returns min(k, docs.size()) entries.
std::vector<ScoredDoc> top_k(std::span<const double> query, std::span<const DocumentRef> docs,
                             std::size_t k);

class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& what, std::size_t found)
      : std::runtime_error(what), found_(found) {}
  std::size_t found() const { return found_; }

 private:
  std::size_t found_;
};

/// Query/gold pairs plus the irrelevant pool, all as indices into a shared store.
struct RetrievalDataset {
  std::shared_ptr<const EmbeddingStore> store;
  std::vector<std::size_t> queries;
  std::vector<std::size_t> gold;
  std::vector<double> pair_similarity;
  std::vector<std::size_t> irrelevant_pool;

  std::size_t pair_count() const { return queries.size(); }
  std::span<const double> query_vector(std::size_t pair) const {
    return store->vector(queries.at(pair));
  }
  std::span<const double> gold_vector(std::size_t pair) const {
    return store->vector(gold.at(pair));
  }
};

/// Samples query tokens uniformly (without replacement), pairs each with its
/// exact nearest neighbor among tokens that are neither itself nor an accepted
/// query, and keeps the pair when similarity > threshold. Tokens that end up
/// neither query nor gold form the irrelevant pool.
RetrievalDataset generate_dataset(std::shared_ptr<const EmbeddingStore> store,
                                  std::size_t num_queries, double threshold, std::uint64_t seed,
                                  Execution exec = Execution::Parallel);

}  // namespace pprsim
