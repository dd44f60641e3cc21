#pragma once

#include "olab/common.hpp"

namespace olab::geometry::detail {

// Minimize c'x subject to A x = b, x >= 0.
//
// Dense two-phase tableau simplex with Bland's rule, sized for the small
// gauge programs solved here (tens of equality rows, a few hundred
// columns).  Returns the primal solution and the equality multipliers; the
// multipliers are what the gauge code uses as subgradients.
struct LpResult {
    enum class Status { optimal, infeasible, unbounded };
    Status status = Status::optimal;
    double objective = 0.0;
    Vec x;
    Vec duals;
};

inline LpResult solve_equality_lp(Mat a, Vec b, const Vec& c) {
    const int m = static_cast<int>(a.rows());
    const int n = static_cast<int>(a.cols());
    if (b.size() != m || c.size() != n)
        throw std::invalid_argument("solve_equality_lp: shape mismatch");

    std::vector<double> row_sign(static_cast<std::size_t>(m), 1.0);
    for (int i = 0; i < m; ++i)
        if (b[i] < 0.0) {
            a.row(i) *= -1.0;
            b[i] = -b[i];
            row_sign[static_cast<std::size_t>(i)] = -1.0;
        }

    const int total = n + m;  // structural columns then artificial columns
    Mat t = Mat::Zero(m + 1, total + 1);
    t.block(0, 0, m, n) = a;
    t.block(0, n, m, m) = Mat::Identity(m, m);
    t.col(total).head(m) = b;
    std::vector<int> basis(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = n + i;

    auto pivot = [&](int row, int col) {
        t.row(row) /= t(row, col);
        for (int i = 0; i <= m; ++i)
            if (i != row && t(i, col) != 0.0) t.row(i) -= t(i, col) * t.row(row);
        basis[static_cast<std::size_t>(row)] = col;
    };

    // Entering restricted to structural columns (artificials never return),
    // Bland's rule on both choices so degenerate programs terminate.
    auto run = [&]() -> bool {
        for (;;) {
            int enter = -1;
            for (int j = 0; j < n; ++j)
                if (t(m, j) < -1e-9) {
                    enter = j;
                    break;
                }
            if (enter < 0) return true;
            int leave = -1;
            double best = kInf;
            for (int i = 0; i < m; ++i) {
                if (t(i, enter) > 1e-11) {
                    double ratio = t(i, total) / t(i, enter);
                    if (ratio < best - 1e-12 ||
                        (std::abs(ratio - best) <= 1e-12 &&
                         (leave < 0 || basis[static_cast<std::size_t>(i)] <
                                           basis[static_cast<std::size_t>(leave)])))
                    {
                        best = ratio;
                        leave = i;
                    }
                }
            }
            if (leave < 0) return false;  // unbounded
            pivot(leave, enter);
        }
    };

    // Phase 1: drive out the artificial sum.
    for (int j = 0; j < n; ++j) t(m, j) = -t.col(j).head(m).sum();
    t(m, total) = -b.sum();
    run();  // the artificial objective is bounded below by zero
    double infeasibility = -t(m, total);
    if (infeasibility > 1e-7 * (1.0 + b.cwiseAbs().maxCoeff())) {
        LpResult res;
        res.status = LpResult::Status::infeasible;
        res.objective = kInf;
        return res;
    }
    // Pivot any artificial still basic (at level zero) onto a structural
    // column; rows with none are redundant and stay put harmlessly.
    for (int i = 0; i < m; ++i) {
        if (basis[static_cast<std::size_t>(i)] < n) continue;
        for (int j = 0; j < n; ++j)
            if (std::abs(t(i, j)) > 1e-9) {
                pivot(i, j);
                break;
            }
    }

    // Phase 2: true costs (artificial columns keep cost zero, which makes
    // their reduced costs the negated equality multipliers).
    t.row(m).setZero();
    for (int j = 0; j < n; ++j) t(m, j) = c[j];
    for (int i = 0; i < m; ++i) {
        int bj = basis[static_cast<std::size_t>(i)];
        if (bj < n && t(m, bj) != 0.0) t.row(m) -= t(m, bj) * t.row(i);
    }
    LpResult res;
    if (!run()) {
        res.status = LpResult::Status::unbounded;
        res.objective = -kInf;
        return res;
    }
    res.status = LpResult::Status::optimal;
    res.objective = -t(m, total);
    res.x = Vec::Zero(n);
    for (int i = 0; i < m; ++i)
        if (basis[static_cast<std::size_t>(i)] < n)
            res.x[basis[static_cast<std::size_t>(i)]] = t(i, total);
    res.duals = Vec::Zero(m);
    for (int i = 0; i < m; ++i)
        res.duals[i] = -t(m, n + i) * row_sign[static_cast<std::size_t>(i)];
    return res;
}

}  // namespace olab::geometry::detail
