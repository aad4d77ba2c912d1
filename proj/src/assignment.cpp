#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "mvgeo/matching.hpp"

namespace mvgeo {

namespace {

using Pairs = std::vector<std::pair<std::size_t, std::size_t>>;

// Hungarian method with row/column potentials for rows <= cols.
// Every row is assigned; a[i][j] must be finite.
std::vector<std::size_t> hungarian_rows(const std::vector<double>& a, std::size_t n, std::size_t m)
{
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<bool> used(m + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = a[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
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
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> row_to_col(n, 0);
    for (std::size_t j = 1; j <= m; ++j) {
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    }
    return row_to_col;
}

Pairs assign_optimal(const CostMatrix& costs)
{
    const bool transpose = costs.rows > costs.cols;
    const std::size_t n = transpose ? costs.cols : costs.rows;
    const std::size_t m = transpose ? costs.rows : costs.cols;

    double max_finite = 0.0;
    bool any_finite = false;
    for (double c : costs.values) {
        if (std::isfinite(c)) {
            max_finite = std::max(max_finite, c);
            any_finite = true;
        }
    }
    if (!any_finite) return {};
    // Larger than any sum of n finite entries, so forbidden pairs are used
    // only when no larger feasible matching exists; they are dropped below.
    const double forbidden = (static_cast<double>(n) + 1.0) * (max_finite + 1.0);

    std::vector<double> a(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double c = transpose ? costs(j, i) : costs(i, j);
            a[i * m + j] = std::isfinite(c) ? c : forbidden;
        }
    }
    const auto row_to_col = hungarian_rows(a, n, m);
    Pairs out;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = transpose ? row_to_col[i] : i;
        const std::size_t c = transpose ? i : row_to_col[i];
        if (std::isfinite(costs(r, c))) out.emplace_back(r, c);
    }
    std::sort(out.begin(), out.end());
    return out;
}

Pairs assign_greedy(const CostMatrix& costs)
{
    std::vector<std::tuple<double, std::size_t, std::size_t>> entries;
    for (std::size_t i = 0; i < costs.rows; ++i) {
        for (std::size_t j = 0; j < costs.cols; ++j) {
            if (std::isfinite(costs(i, j))) entries.emplace_back(costs(i, j), i, j);
        }
    }
    std::sort(entries.begin(), entries.end());
    std::vector<bool> row_used(costs.rows, false);
    std::vector<bool> col_used(costs.cols, false);
    Pairs out;
    for (const auto& [c, i, j] : entries) {
        if (row_used[i] || col_used[j]) continue;
        row_used[i] = col_used[j] = true;
        out.emplace_back(i, j);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> assign(const CostMatrix& costs, AssignmentMode mode)
{
    if (costs.rows == 0 || costs.cols == 0) return {};
    return mode == AssignmentMode::Optimal ? assign_optimal(costs) : assign_greedy(costs);
}

}  // namespace mvgeo
