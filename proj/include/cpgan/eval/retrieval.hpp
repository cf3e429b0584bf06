#pragma once

// IR baseline: brute-force cosine nearest neighbours over condition-encoder
// embeddings of the training tops; returns the paired training bottoms.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cpgan/data/dataset.hpp"
#include "cpgan/models/networks.hpp"

namespace cpgan::eval {

struct RetrievalIndex {
  std::size_t dim = 0;
  std::vector<double> rows;  // size() x dim, each row L2-normalized
  std::vector<std::size_t> ids;

  std::size_t size() const { return ids.size(); }
  const double* row(std::size_t r) const { return rows.data() + r * dim; }
};

struct RetrievalHit {
  std::size_t id;
  double score;  // cosine similarity
};

/// Encoder embedding of one top, computed alone so a query and its indexed
/// copy go through identical arithmetic.
template <typename Real>
std::vector<double> embed_top(const data::Image& top, const models::EncoderParams<Real>& encoder,
                              const models::ModelConfig& cfg) {
  const data::Image* one[] = {&top};
  const auto y = models::encode_condition(data::to_batch<Real>(one), encoder.detached(), cfg);
  return {y.values().begin(), y.values().end()};
}

inline std::vector<double> l2_normalized(std::vector<double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  const double norm = std::sqrt(s);
  if (!(norm > 0) || !std::isfinite(norm)) throw NonFiniteError("retrieval: embedding has zero or non-finite norm");
  for (auto& x : v) x /= norm;
  return v;
}

template <typename Real>
RetrievalIndex build_index(const data::Dataset& dataset, const models::EncoderParams<Real>& encoder,
                           const models::ModelConfig& cfg) {
  RetrievalIndex index;
  index.dim = cfg.c_dim;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto e = l2_normalized(embed_top(dataset.tops[i], encoder, cfg));
    index.rows.insert(index.rows.end(), e.begin(), e.end());
    index.ids.push_back(i);
  }
  return index;
}

/// Top-k rows by cosine similarity to a normalized query; ties go to the lower id.
inline std::vector<RetrievalHit> nearest_neighbors(const RetrievalIndex& index, const std::vector<double>& query,
                                                   std::size_t k) {
  if (index.size() == 0) throw ArgumentError("retrieval: empty index");
  if (k == 0 || k > index.size())
    throw ArgumentError("retrieval: k must be in [1, " + std::to_string(index.size()) + "]");
  if (query.size() != index.dim) throw ShapeError("retrieval: query dimension differs from the index");
  std::vector<RetrievalHit> hits(index.size());
  for (std::size_t r = 0; r < index.size(); ++r) {
    const double* row = index.row(r);
    double s = 0;
    for (std::size_t d = 0; d < index.dim; ++d) s += row[d] * query[d];
    hits[r] = {index.ids[r], s};
  }
  auto better = [](const RetrievalHit& a, const RetrievalHit& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  };
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), better);
  hits.resize(k);
  return hits;
}

/// The k training bottoms (by sample id) whose tops are most similar to `query_top`.
template <typename Real>
std::vector<RetrievalHit> ir_baseline_retrieve(const data::Image& query_top, const RetrievalIndex& index,
                                               const models::EncoderParams<Real>& encoder,
                                               const models::ModelConfig& cfg, std::size_t k) {
  if (index.size() == 0) throw ArgumentError("retrieval: empty index");
  return nearest_neighbors(index, l2_normalized(embed_top(query_top, encoder, cfg)), k);
}

}  // namespace cpgan::eval
