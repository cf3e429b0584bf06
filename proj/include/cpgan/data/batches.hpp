#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "cpgan/error.hpp"
#include "cpgan/util/random.hpp"

namespace cpgan::data {

enum class BatchRegime { RandomPermuted, ClusterPure };

inline std::string to_string(BatchRegime r) {
  return r == BatchRegime::RandomPermuted ? "random" : "cluster";
}

using Batch = std::vector<std::size_t>;

/// One epoch of sample-id batches.
///   RandomPermuted: a fresh permutation cut into batch_size chunks (last may be short).
///   ClusterPure: clusters visited in a shuffled order; within each, ids are
///   shuffled and chunked, so no batch mixes clusters.
inline std::vector<Batch> make_batches(std::size_t count, BatchRegime regime,
                                       const std::vector<std::size_t>* assignments,
                                       std::size_t batch_size, std::uint64_t epoch_seed) {
  if (batch_size < 1) throw ArgumentError("make_batches: batch_size must be at least 1");
  util::Rng rng = util::make_rng(epoch_seed, 0xba7c);
  std::vector<Batch> out;
  auto chunk = [&](const std::vector<std::size_t>& ids) {
    for (std::size_t i = 0; i < ids.size(); i += batch_size)
      out.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(i),
                       ids.begin() + static_cast<std::ptrdiff_t>(std::min(ids.size(), i + batch_size)));
  };
  if (regime == BatchRegime::RandomPermuted) {
    std::vector<std::size_t> ids(count);
    std::iota(ids.begin(), ids.end(), 0);
    util::shuffle(ids, rng);
    chunk(ids);
    return out;
  }
  if (!assignments || assignments->size() != count)
    throw ArgumentError("make_batches: cluster-pure batches need one cluster id per sample");
  std::size_t k = 0;
  for (std::size_t a : *assignments) k = std::max(k, a + 1);
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < count; ++i) members[(*assignments)[i]].push_back(i);
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  util::shuffle(order, rng);
  for (std::size_t c : order) {
    util::shuffle(members[c], rng);
    chunk(members[c]);
  }
  return out;
}

}  // namespace cpgan::data
