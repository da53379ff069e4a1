#include <reltrack/hungarian.hpp>
#include <reltrack/error.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace reltrack {

namespace {

// Shortest augmenting path with row/column potentials. Returns row -> column
// and fills the potentials; reduced cost c - u - v is >= 0 everywhere and 0 on
// the assignment.
std::vector<int> solve_square(const CostMatrix& c, std::vector<Real>& u, std::vector<Real>& v) {
    const int n = static_cast<int>(c.rows());
    const Real inf = std::numeric_limits<Real>::infinity();
    // 1-based internally; index 0 is the virtual root column.
    std::vector<Real> uu(n + 1, 0), vv(n + 1, 0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<Real> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            Real delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const Real cur = c(i0 - 1, j - 1) - uu[i0] - vv[j];
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
                    uu[p[j]] += delta;
                    vv[j] -= delta;
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
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
    u.assign(uu.begin() + 1, uu.end());
    v.assign(vv.begin() + 1, vv.end());
    return row_to_col;
}

// Rewrites an optimal assignment into the lexicographically smallest perfect
// matching of the tight (zero reduced cost) subgraph.
void lexicographic_refine(const CostMatrix& c, const std::vector<Real>& u, const std::vector<Real>& v,
                          std::vector<int>& row_to_col, Real tol) {
    const int n = static_cast<int>(c.rows());
    auto tight = [&](int i, int j) { return c(i, j) - u[i] - v[j] <= tol; };
    std::vector<int> col_to_row(n);
    for (int i = 0; i < n; ++i) col_to_row[row_to_col[i]] = i;
    std::vector<char> row_locked(n, 0), col_locked(n, 0);

    for (int i = 0; i < n; ++i) {
        for (int cand = 0; cand < n; ++cand) {
            if (col_locked[cand] || !tight(i, cand)) continue;
            if (row_to_col[i] == cand) break;
            // Alternating path from cand's current row back to i's current column.
            const int target = row_to_col[i];
            const int start = col_to_row[cand];
            std::vector<int> parent_col(n, -1);  // column reached -> row it came from
            std::vector<char> seen_row(n, 0);
            std::vector<int> stack{start};
            seen_row[start] = 1;
            seen_row[i] = 1;
            bool found = false;
            while (!stack.empty() && !found) {
                const int r = stack.back();
                stack.pop_back();
                for (int col = 0; col < n; ++col) {
                    if (col_locked[col] || col == cand || col == row_to_col[r] || parent_col[col] != -1) continue;
                    if (!tight(r, col)) continue;
                    parent_col[col] = r;
                    if (col == target) {
                        found = true;
                        break;
                    }
                    const int next = col_to_row[col];
                    if (!seen_row[next]) {
                        seen_row[next] = 1;
                        stack.push_back(next);
                    }
                }
            }
            if (!found) continue;
            // Shift along the path: each row on it takes the column it reached.
            int col = target;
            while (true) {
                const int r = parent_col[col];
                const int prev_col = row_to_col[r];
                row_to_col[r] = col;
                col_to_row[col] = r;
                if (r == start) break;
                col = prev_col;
            }
            row_to_col[i] = cand;
            col_to_row[cand] = i;
            break;
        }
        row_locked[i] = 1;
        col_locked[row_to_col[i]] = 1;
    }
}

}  // namespace

AssignmentResult hungarian(const CostMatrix& cost) {
    const int rows = static_cast<int>(cost.rows());
    const int cols = static_cast<int>(cost.cols());
    AssignmentResult result;
    if (rows == 0 || cols == 0) {
        for (int i = 0; i < rows; ++i) result.unmatched_rows.push_back(i);
        for (int j = 0; j < cols; ++j) result.unmatched_cols.push_back(j);
        return result;
    }
    if (!cost.allFinite()) throw Error(ErrorKind::NonFiniteValue, "assignment costs must be finite");

    const int n = std::max(rows, cols);
    CostMatrix square = CostMatrix::Zero(n, n);
    square.topLeftCorner(rows, cols) = cost;

    std::vector<Real> u, v;
    auto row_to_col = solve_square(square, u, v);
    const Real scale = std::max<Real>(1, square.cwiseAbs().maxCoeff());
    lexicographic_refine(square, u, v, row_to_col, 1e-9 * scale);

    std::vector<char> col_used(cols, 0);
    for (int i = 0; i < rows; ++i) {
        const int j = row_to_col[i];
        if (j < cols) {
            result.matches.emplace_back(i, j);
            result.cost += cost(i, j);
            col_used[j] = 1;
        } else {
            result.unmatched_rows.push_back(i);
        }
    }
    for (int j = 0; j < cols; ++j)
        if (!col_used[j]) result.unmatched_cols.push_back(j);
    return result;
}

}  // namespace reltrack
