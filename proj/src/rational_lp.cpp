#include "martlab/rational_lp.hpp"

#include <stdexcept>

namespace martlab {

LpResult simplex_max(const std::vector<std::vector<Rational>>& A,
                     const std::vector<Rational>& b,
                     const std::vector<Rational>& c) {
    std::size_t m = A.size();
    std::size_t n = c.size();
    for (const auto& row : A)
        if (row.size() != n) throw std::invalid_argument("simplex: ragged A");
    if (b.size() != m) throw std::invalid_argument("simplex: bad b");
    for (const auto& bi : b)
        if (bi < 0) throw std::invalid_argument("simplex: b must be >= 0");

    // tableau: m rows of [A | I | b], objective row [-c | 0 | 0]
    std::size_t cols = n + m + 1;
    std::vector<std::vector<Rational>> T(m + 1, std::vector<Rational>(cols, 0));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) T[i][j] = A[i][j];
        T[i][n + i] = 1;
        T[i][cols - 1] = b[i];
    }
    for (std::size_t j = 0; j < n; ++j) T[m][j] = -c[j];

    std::vector<std::size_t> basis(m);
    for (std::size_t i = 0; i < m; ++i) basis[i] = n + i;

    for (;;) {
        // Bland: entering variable = smallest index with negative cost row
        std::size_t enter = cols;
        for (std::size_t j = 0; j + 1 < cols; ++j) {
            if (T[m][j] < 0) {
                enter = j;
                break;
            }
        }
        if (enter == cols) break;  // optimal

        // ratio test; ties broken by smallest basis variable index (Bland)
        std::size_t leave = m;
        Rational best_ratio = 0;
        for (std::size_t i = 0; i < m; ++i) {
            if (T[i][enter] <= 0) continue;
            Rational ratio = T[i][cols - 1] / T[i][enter];
            if (leave == m || ratio < best_ratio ||
                (ratio == best_ratio && basis[i] < basis[leave])) {
                leave = i;
                best_ratio = ratio;
            }
        }
        if (leave == m) {
            LpResult r;
            r.status = LpResult::Status::Unbounded;
            return r;
        }

        // pivot
        Rational piv = T[leave][enter];
        for (auto& v : T[leave]) v /= piv;
        for (std::size_t i = 0; i <= m; ++i) {
            if (i == leave) continue;
            Rational f = T[i][enter];
            if (f == 0) continue;
            for (std::size_t j = 0; j < cols; ++j) T[i][j] -= f * T[leave][j];
        }
        basis[leave] = enter;
    }

    LpResult r;
    r.status = LpResult::Status::Optimal;
    r.x.assign(n, 0);
    for (std::size_t i = 0; i < m; ++i)
        if (basis[i] < n) r.x[basis[i]] = T[i][cols - 1];
    r.objective = T[m][cols - 1];
    return r;
}

}  // namespace martlab
