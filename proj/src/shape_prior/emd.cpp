#include <cmath>
#include <limits>

#include "svgsmith/shape_prior.hpp"

namespace svgsmith::shape {

// Shortest augmenting path assignment (Hungarian method with potentials), O(n^3).
Assignment emd_assignment(const PointSet& x, const PointSet& y) {
  if (x.size() != y.size())
    throw ArgumentError("EMD needs equal-size point sets (" + std::to_string(x.size()) + " vs " +
                        std::to_string(y.size()) + ")");
  const int n = static_cast<int>(x.size());
  Assignment result;
  if (n == 0) return result;

  std::vector<double> cost(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) cost[static_cast<std::size_t>(i) * n + j] = norm(x[i] - y[j]);

  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; row 0 / column 0 are the virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  result.match.assign(n, -1);
  for (int j = 1; j <= n; ++j) result.match[p[j] - 1] = j - 1;
  for (int i = 0; i < n; ++i) result.cost += cost[static_cast<std::size_t>(i) * n + result.match[i]];
  return result;
}

double emd(const PointSet& x, const PointSet& y) { return emd_assignment(x, y).cost; }

}  // namespace svgsmith::shape
