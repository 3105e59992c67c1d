#pragma once

#include <Eigen/Dense>

namespace relucegar {

Eigen::MatrixXd remove_row(const Eigen::MatrixXd& m, int row);
Eigen::MatrixXd remove_col(const Eigen::MatrixXd& m, int col);
Eigen::MatrixXd insert_row(const Eigen::MatrixXd& m, int row, const Eigen::VectorXd& values);
Eigen::MatrixXd insert_col(const Eigen::MatrixXd& m, int col, const Eigen::VectorXd& values);
Eigen::VectorXd remove_entry(const Eigen::VectorXd& v, int idx);
Eigen::VectorXd insert_entry(const Eigen::VectorXd& v, int idx, double value);

}  // namespace relucegar
