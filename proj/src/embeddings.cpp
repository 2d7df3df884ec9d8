#include "pprsim/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace pprsim {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (i < line.size()) {
    while (i < line.size() && space(line[i])) ++i;
    std::size_t start = i;
    while (i < line.size() && !space(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& value) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

}  // namespace

EmbeddingStore::EmbeddingStore(std::vector<std::string> tokens, RowMatrix vectors)
    : tokens_(std::move(tokens)), vectors_(std::move(vectors)) {
  if (tokens_.size() != vectors_.rows()) {
    throw std::invalid_argument("EmbeddingStore: token count does not match vector count");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) {
      throw std::invalid_argument("EmbeddingStore: duplicate token '" + tokens_[i] + "'");
    }
    auto v = vectors_.row(i);
    if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
      throw std::invalid_argument("EmbeddingStore: non-finite component for '" + tokens_[i] + "'");
    }
    if (!normalize(v)) {
      throw std::invalid_argument("EmbeddingStore: zero vector for '" + tokens_[i] + "'");
    }
  }
}

std::optional<std::size_t> EmbeddingStore::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingStore read_vectors(std::istream& in, const std::string& source,
                            std::optional<std::size_t> limit) {
  std::vector<std::string> tokens;
  std::vector<double> values;
  std::size_t dim = 0;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (first) {
      first = false;
      std::size_t count = 0;
      std::size_t header_dim = 0;
      if (fields.size() == 2 && parse_number(fields[0], count) &&
          parse_number(fields[1], header_dim)) {
        dim = header_dim;
        continue;
      }
    }
    if (limit && tokens.size() >= *limit) break;
    const std::size_t width = fields.size() - 1;
    if (width == 0) {
      throw std::runtime_error(source + ":" + std::to_string(lineno) + ": token '" +
                               std::string(fields[0]) + "' has no vector components");
    }
    if (dim == 0) dim = width;
    if (width != dim) {
      throw std::runtime_error(source + ":" + std::to_string(lineno) + ": token '" +
                               std::string(fields[0]) + "' has " + std::to_string(width) +
                               " components, expected " + std::to_string(dim));
    }
    for (std::size_t i = 1; i < fields.size(); ++i) {
      double x = 0.0;
      if (!parse_number(fields[i], x)) {
        throw std::runtime_error(source + ":" + std::to_string(lineno) + ": token '" +
                                 std::string(fields[0]) + "' has unparsable component '" +
                                 std::string(fields[i]) + "'");
      }
      values.push_back(x);
    }
    tokens.emplace_back(fields[0]);
  }
  if (tokens.empty()) throw std::runtime_error(source + ": no vectors found");

  RowMatrix m(tokens.size(), dim);
  m.data() = std::move(values);
  return EmbeddingStore(std::move(tokens), std::move(m));
}

EmbeddingStore load_vectors(const std::filesystem::path& path, std::optional<std::size_t> limit) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vector file " + path.string());
  return read_vectors(in, path.string(), limit);
}

EmbeddingStore synthesize_store(std::size_t vocab_size, std::size_t dim, std::uint64_t seed) {
  if (vocab_size < 1 || dim < 2) {
    throw std::invalid_argument("synthesize_store: need vocab_size >= 1 and dim >= 2");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  RowMatrix m(vocab_size, dim);
  std::vector<std::string> tokens(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    tokens[i] = "w" + std::to_string(i);
    auto row = m.row(i);
    do {
      for (auto& x : row) x = gauss(rng);
    } while (!normalize(row));
  }
  return EmbeddingStore(std::move(tokens), std::move(m));
}

double score(std::span<const double> query, std::span<const double> doc) {
  if (query.size() != doc.size()) {
    throw std::invalid_argument("score: dimension mismatch (" + std::to_string(query.size()) +
                                " vs " + std::to_string(doc.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < query.size(); ++i) s += query[i] * doc[i];
  return s;
}

bool normalize(std::span<double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq == 0.0) return false;
  const double inv = 1.0 / std::sqrt(sq);
  for (auto& x : v) x *= inv;
  return true;
}

std::vector<ScoredDoc> top_k(std::span<const double> query, std::span<const DocumentRef> docs,
                             std::size_t k) {
  if (k == 0) throw std::invalid_argument("top_k: k must be >= 1");
  std::vector<ScoredDoc> scored;
  scored.reserve(docs.size());
  for (const auto& d : docs) scored.push_back({d.id, score(query, d.embedding)});
  const std::size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), ranks_before);
  scored.resize(keep);
  return scored;
}

RetrievalDataset generate_dataset(std::shared_ptr<const EmbeddingStore> store,
                                  std::size_t num_queries, double threshold, std::uint64_t seed,
                                  Execution exec) {
  if (!store) throw std::invalid_argument("generate_dataset: null store");
  enum Role : std::uint8_t { kFree = 0, kQuery = 1, kGold = 2 };
  const std::size_t n = store->size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Role> role(n, kFree);
  // Rows that may serve as a gold document: everything except accepted queries
  // and the candidate itself.
  std::vector<std::uint8_t> excluded(n, 0);

  RetrievalDataset ds;
  ds.store = store;
  for (std::size_t candidate : order) {
    if (ds.queries.size() == num_queries) break;
    if (role[candidate] != kFree) continue;
    excluded[candidate] = 1;
    NearestHit hit = kernels::nearest(exec, store->vectors(), store->vector(candidate), excluded);
    if (hit.index == NearestHit::npos || !(hit.score > threshold)) {
      excluded[candidate] = 0;
      continue;
    }
    role[candidate] = kQuery;
    role[hit.index] = kGold;
    ds.queries.push_back(candidate);
    ds.gold.push_back(hit.index);
    ds.pair_similarity.push_back(hit.score);
  }
  if (ds.queries.size() < num_queries) {
    throw DatasetError("generate_dataset: vocabulary exhausted after " +
                           std::to_string(ds.queries.size()) + " of " +
                           std::to_string(num_queries) + " query/gold pairs (threshold " +
                           std::to_string(threshold) + ")",
                       ds.queries.size());
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (role[i] == kFree) ds.irrelevant_pool.push_back(i);
  }
  return ds;
}

}  // namespace pprsim
