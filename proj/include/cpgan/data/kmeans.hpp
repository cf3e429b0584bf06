#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <vector>

#include "cpgan/error.hpp"
#include "cpgan/util/random.hpp"

namespace cpgan::data {

struct ClusterModel {
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> assignments;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after each Lloyd iteration
  std::size_t iterations = 0;
  bool converged = false;  // reached an assignment fixed point

  std::size_t k() const { return centroids.size(); }
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Nearest centroid, ties to the lowest index.
inline std::size_t nearest(const std::vector<double>& x, const std::vector<std::vector<double>>& c,
                           double* dist = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < c.size(); ++j) {
    const double d = sq_dist(x, c[j]);
    if (d < best_d) best_d = d, best = j;
  }
  if (dist) *dist = best_d;
  return best;
}

inline double inertia(const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& c,
                      const std::vector<std::size_t>& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += sq_dist(x[i], c[a[i]]);
  return s;
}

}  // namespace detail

/// One k-means++ seeding followed by Lloyd iterations until assignments stop
/// changing or `max_iters` is reached. An empty cluster is re-seeded at the
/// point farthest from its current centroid, which then joins that cluster.
inline ClusterModel kmeans_single(const std::vector<std::vector<double>>& x, std::size_t k,
                                  util::Rng& rng, std::size_t max_iters) {
  const std::size_t n = x.size(), d = x.front().size();

  ClusterModel m;
  m.centroids.push_back(x[util::uniform_index(rng, n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = detail::sq_dist(x[i], m.centroids[0]);
  // Greedy k-means++: draw 2 + ln K candidates by D^2 sampling, keep the one
  // that lowers the total potential most.
  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  std::vector<double> cand_d2(n), best_d2(n);
  while (m.centroids.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t best_pick = 0;
    double best_potential = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
      std::size_t pick = n - 1;
      if (total > 0.0) {
        double r = util::uniform01(rng) * total;
        for (std::size_t i = 0; i < n; ++i) {
          if (r < d2[i]) { pick = i; break; }
          r -= d2[i];
        }
      } else {
        pick = util::uniform_index(rng, n);  // every point already coincides with a center
      }
      double potential = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cand_d2[i] = std::min(d2[i], detail::sq_dist(x[i], x[pick]));
        potential += cand_d2[i];
      }
      if (potential < best_potential) {
        best_potential = potential;
        best_pick = pick;
        best_d2.swap(cand_d2);
      }
    }
    m.centroids.push_back(x[best_pick]);
    d2.swap(best_d2);
    best_d2.resize(n);
  }

  m.assignments.assign(n, k);  // k = "unassigned" so the first pass always counts as a change
  for (std::size_t it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = detail::nearest(x[i], m.centroids);
      changed |= a != m.assignments[i];
      m.assignments[i] = a;
    }
    if (!changed) {
      m.converged = true;
      break;
    }
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t a : m.assignments) ++sizes[a];
    for (std::size_t j = 0; j < k; ++j) {
      if (sizes[j] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[m.assignments[i]] < 2) continue;  // never empty another cluster
        const double dd = detail::sq_dist(x[i], m.centroids[m.assignments[i]]);
        if (dd > far_d) far_d = dd, far = i;
      }
      if (far_d < 0.0) continue;
      --sizes[m.assignments[far]];
      m.assignments[far] = j;
      sizes[j] = 1;
      m.centroids[j] = x[far];
    }
    std::vector<std::vector<double>> sums(k, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 0; t < d; ++t) sums[m.assignments[i]][t] += x[i][t];
    for (std::size_t j = 0; j < k; ++j)
      if (sizes[j] > 0)
        for (std::size_t t = 0; t < d; ++t) m.centroids[j][t] = sums[j][t] / static_cast<double>(sizes[j]);
    m.inertia_history.push_back(detail::inertia(x, m.centroids, m.assignments));
    m.iterations = it + 1;
  }
  if (!m.converged)  // iteration cap: leave every point at its nearest centroid
    for (std::size_t i = 0; i < n; ++i) m.assignments[i] = detail::nearest(x[i], m.centroids);
  m.inertia = detail::inertia(x, m.centroids, m.assignments);
  return m;
}

/// Best of `restarts` independent k-means++/Lloyd runs by final inertia.
inline ClusterModel kmeans_fit(const std::vector<std::vector<double>>& x, std::size_t k,
                               std::uint64_t seed, std::size_t max_iters = 100,
                               std::size_t restarts = 10) {
  if (k == 0 || k > x.size()) throw ArgumentError("kmeans_fit: need 1 <= K <= sample count");
  if (restarts == 0) throw ArgumentError("kmeans_fit: restarts must be positive");
  const std::size_t d = x.front().size();
  for (const auto& row : x)
    if (row.size() != d) throw ShapeError("kmeans_fit: ragged feature rows");
  ClusterModel best;
  for (std::size_t r = 0; r < restarts; ++r) {
    util::Rng rng = util::make_rng(seed, 0x6b6d + r);
    ClusterModel m = kmeans_single(x, k, rng, max_iters);
    if (r == 0 || m.inertia < best.inertia) best = std::move(m);
  }
  return best;
}

/// Adjusted Rand index between two labelings of the same points.
template <typename A, typename B>
double adjusted_rand_index(const std::vector<A>& a, const std::vector<B>& b) {
  if (a.size() != b.size() || a.empty()) throw ArgumentError("adjusted_rand_index: size mismatch");
  std::map<std::pair<A, B>, double> joint;
  std::map<A, double> ra;
  std::map<B, double> rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  auto c2 = [](double v) { return v * (v - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [_, v] : joint) index += c2(v);
  for (const auto& [_, v] : ra) sa += c2(v);
  for (const auto& [_, v] : rb) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;  // both labelings trivial
  return (index - expected) / (max_index - expected);
}

}  // namespace cpgan::data
