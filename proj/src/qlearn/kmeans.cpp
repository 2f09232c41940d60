#include <algorithm>
#include <limits>
#include <random>
#include <set>

#include "tidealloc/tabular_q.hpp"

namespace tidealloc::qlearn {
namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t nearest(std::span<const double> x, const std::vector<double>& centers, std::size_t k,
                    std::size_t dim, double* best_distance = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const double d =
        squared_distance(x, std::span<const double>(centers).subspan(c * dim, dim));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (best_distance) *best_distance = best_d;
  return best;
}

}  // namespace

Centroids fit_kmeans(std::span<const double> points, std::size_t dim, std::size_t k,
                     std::uint64_t seed) {
  if (dim == 0 || points.size() % dim != 0) throw std::invalid_argument("fit_kmeans: bad shape");
  if (k == 0) throw ValidationError("fit_kmeans: k must be positive");
  const std::size_t n = points.size() / dim;
  auto point = [&](std::size_t i) { return points.subspan(i * dim, dim); };

  std::set<std::vector<double>> distinct;
  for (std::size_t i = 0; i < n; ++i) distinct.emplace(point(i).begin(), point(i).end());
  if (distinct.size() < k) {
    throw DataError("fit_kmeans: " + std::to_string(distinct.size()) +
                    " distinct points, need at least k=" + std::to_string(k));
  }

  // k-means++ seeding
  std::mt19937_64 rng(seed);
  std::vector<double> centers;
  centers.reserve(k * dim);
  {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const auto first = point(pick(rng));
    centers.insert(centers.end(), first.begin(), first.end());
  }
  std::vector<double> d2(n);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest(point(i), centers, c, dim, &d2[i]);
      total += d2[i];
    }
    std::uniform_real_distribution<double> u(0.0, total);
    const double target = u(rng);
    double acc = 0.0;
    std::size_t chosen = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      chosen = i;
      if (acc >= target) break;
    }
    const auto p = point(chosen);
    centers.insert(centers.end(), p.begin(), p.end());
  }

  // Lloyd iterations
  std::vector<std::size_t> assignment(n, k);
  std::size_t iterations = 0;
  for (; iterations < kMaxKmeansIterations; ++iterations) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = nearest(point(i), centers, k, dim);
      if (c != assignment[i]) {
        assignment[i] = c;
        changed = true;
      }
    }
    if (!changed) break;

    std::vector<double> sums(k * dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = point(i);
      for (std::size_t j = 0; j < dim; ++j) sums[assignment[i] * dim + j] += p[j];
      ++counts[assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Re-seed an empty cluster at the point farthest from its centroid.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = squared_distance(
              point(i), std::span<const double>(centers).subspan(assignment[i] * dim, dim));
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        std::copy(point(far).begin(), point(far).end(), centers.begin() + c * dim);
        assignment[far] = c;
        continue;
      }
      for (std::size_t j = 0; j < dim; ++j) {
        centers[c * dim + j] = sums[c * dim + j] / static_cast<double>(counts[c]);
      }
    }
  }

  Centroids result;
  result.k = k;
  result.dim = dim;
  result.values = std::move(centers);
  result.seed = seed;
  result.iterations = iterations;
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    nearest(point(i), result.values, k, dim, &d);
    result.inertia += d;
  }
  return result;
}

std::size_t assign_cluster(std::span<const double> x, const Centroids& centroids) {
  if (x.size() != centroids.dim) throw std::invalid_argument("assign_cluster: dimension mismatch");
  return nearest(x, centroids.values, centroids.k, centroids.dim);
}

}  // namespace tidealloc::qlearn
