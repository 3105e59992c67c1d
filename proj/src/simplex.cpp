#include "relucegar/simplex.hpp"

#include <stdexcept>
#include <vector>

namespace relucegar {

namespace {

constexpr double kPivotEps = 1e-9;
constexpr double kFeasTol = 1e-7;

// max c.z subject to A z <= b, z >= 0
struct StandardSimplex {
    int m, n;          // constraints, structural variables
    int num_art = 0;   // artificial variables
    Eigen::MatrixXd tableau;  // m+1 rows; columns: structural | slack | artificial | rhs
    std::vector<int> basis;

    StandardSimplex(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c)
        : m(static_cast<int>(A.rows())), n(static_cast<int>(A.cols())) {
        for (int i = 0; i < m; ++i)
            if (b(i) < 0)
                ++num_art;
        const int cols = n + m + num_art + 1;
        tableau = Eigen::MatrixXd::Zero(m + 1, cols);
        basis.resize(m);
        int art = 0;
        for (int i = 0; i < m; ++i) {
            const double sign = b(i) < 0 ? -1.0 : 1.0;
            tableau.block(i, 0, 1, n) = sign * A.row(i);
            tableau(i, n + i) = sign;  // slack
            tableau(i, cols - 1) = sign * b(i);
            if (b(i) < 0) {
                tableau(i, n + m + art) = 1.0;
                basis[i] = n + m + art;
                ++art;
            } else {
                basis[i] = n + i;
            }
        }
        objective_ = c;
    }

    LpStatus run(Eigen::VectorXd& z) {
        const int cols = static_cast<int>(tableau.cols());
        const int rhs = cols - 1;

        if (num_art > 0) {
            // Phase 1: minimize the sum of artificials.
            tableau.row(m).setZero();
            for (int j = n + m; j < rhs; ++j)
                tableau(m, j) = 1.0;
            for (int i = 0; i < m; ++i)
                if (basis[i] >= n + m)
                    tableau.row(m) -= tableau.row(i);
            pivot_until_optimal(rhs);
            if (-tableau(m, rhs) > kFeasTol)
                return LpStatus::Infeasible;
            drive_out_artificials();
        }

        // Phase 2: minimize -c.z, artificial columns barred from entering.
        tableau.row(m).setZero();
        tableau.block(m, 0, 1, n) = -objective_.transpose();
        for (int i = 0; i < m; ++i) {
            const double coeff = tableau(m, basis[i]);
            if (coeff != 0.0)
                tableau.row(m) -= coeff * tableau.row(i);
        }
        if (!pivot_until_optimal(n + m))
            return LpStatus::Unbounded;

        z = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < m; ++i)
            if (basis[i] < n)
                z(basis[i]) = tableau(i, rhs);
        return LpStatus::Optimal;
    }

private:
    Eigen::VectorXd objective_;

    // Bland: entering is the smallest-index improving column, leaving is the
    // minimum-ratio row with the smallest basis variable on ties.
    bool pivot_until_optimal(int enter_limit) {
        const int rhs = static_cast<int>(tableau.cols()) - 1;
        for (;;) {
            int enter = -1;
            for (int j = 0; j < enter_limit; ++j)
                if (tableau(m, j) < -kPivotEps) {
                    enter = j;
                    break;
                }
            if (enter < 0)
                return true;
            int leave = -1;
            double best_ratio = 0.0;
            for (int i = 0; i < m; ++i) {
                if (tableau(i, enter) <= kPivotEps)
                    continue;
                const double ratio = tableau(i, rhs) / tableau(i, enter);
                if (leave < 0 || ratio < best_ratio - kPivotEps ||
                    (ratio < best_ratio + kPivotEps && basis[i] < basis[leave])) {
                    leave = i;
                    best_ratio = ratio;
                }
            }
            if (leave < 0)
                return false;
            pivot(leave, enter);
        }
    }

    void pivot(int row, int col) {
        tableau.row(row) /= tableau(row, col);
        for (int i = 0; i <= m; ++i) {
            if (i == row)
                continue;
            const double factor = tableau(i, col);
            if (factor != 0.0)
                tableau.row(i) -= factor * tableau.row(row);
        }
        basis[row] = col;
    }

    void drive_out_artificials() {
        for (int i = 0; i < m; ++i) {
            if (basis[i] < n + m)
                continue;
            int col = -1;
            for (int j = 0; j < n + m; ++j)
                if (std::abs(tableau(i, j)) > kPivotEps) {
                    col = j;
                    break;
                }
            if (col >= 0)
                pivot(i, col);
            // Otherwise the row is redundant; the artificial stays basic at
            // zero and its column can never re-enter.
        }
    }
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp) {
    const int n = static_cast<int>(lp.c.size());
    if (lp.lower.size() != n || lp.upper.size() != n)
        throw std::invalid_argument("solve_lp: bound dimensions do not match the objective");
    if (lp.A.size() > 0 && lp.A.cols() != n)
        throw std::invalid_argument("solve_lp: constraint matrix width mismatch");

    LpResult result;
    for (int i = 0; i < n; ++i)
        if (lp.lower(i) > lp.upper(i) + kFeasTol)
            return result;  // Infeasible

    // Shift to z = x - lower >= 0 and turn upper bounds into rows.
    const int m0 = static_cast<int>(lp.A.rows());
    Eigen::MatrixXd A(m0 + n, n);
    Eigen::VectorXd b(m0 + n);
    if (m0 > 0) {
        A.topRows(m0) = lp.A;
        b.head(m0) = lp.b - lp.A * lp.lower;
    }
    A.bottomRows(n) = Eigen::MatrixXd::Identity(n, n);
    b.tail(n) = lp.upper - lp.lower;

    StandardSimplex solver(A, b, lp.c);
    Eigen::VectorXd z;
    result.status = solver.run(z);
    if (result.status == LpStatus::Optimal) {
        result.x = z + lp.lower;
        result.objective = lp.c.dot(result.x);
    }
    return result;
}

}  // namespace relucegar
