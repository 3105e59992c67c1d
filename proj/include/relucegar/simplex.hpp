#pragma once

#include <Eigen/Dense>

namespace relucegar {

// maximize c.x subject to A x <= b and lower <= x <= upper (finite bounds).
struct LinearProgram {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::VectorXd c;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    double objective = 0.0;
    Eigen::VectorXd x;
};

// Two-phase primal simplex on the dense tableau, Bland's anti-cycling rule,
// absolute feasibility tolerance 1e-7. Adequate for the small programs a
// pattern enumeration produces, with no external dependency.
LpResult solve_lp(const LinearProgram& lp);

}  // namespace relucegar
