#include "relucegar/matrix_util.hpp"

#include <stdexcept>

namespace relucegar {

Eigen::MatrixXd remove_row(const Eigen::MatrixXd& m, int row) {
    Eigen::MatrixXd out(m.rows() - 1, m.cols());
    out.topRows(row) = m.topRows(row);
    out.bottomRows(m.rows() - 1 - row) = m.bottomRows(m.rows() - 1 - row);
    return out;
}

Eigen::MatrixXd remove_col(const Eigen::MatrixXd& m, int col) {
    Eigen::MatrixXd out(m.rows(), m.cols() - 1);
    out.leftCols(col) = m.leftCols(col);
    out.rightCols(m.cols() - 1 - col) = m.rightCols(m.cols() - 1 - col);
    return out;
}

Eigen::MatrixXd insert_row(const Eigen::MatrixXd& m, int row, const Eigen::VectorXd& values) {
    if (values.size() != m.cols())
        throw std::invalid_argument("insert_row: width mismatch");
    Eigen::MatrixXd out(m.rows() + 1, m.cols());
    out.topRows(row) = m.topRows(row);
    out.row(row) = values.transpose();
    out.bottomRows(m.rows() - row) = m.bottomRows(m.rows() - row);
    return out;
}

Eigen::MatrixXd insert_col(const Eigen::MatrixXd& m, int col, const Eigen::VectorXd& values) {
    if (values.size() != m.rows())
        throw std::invalid_argument("insert_col: height mismatch");
    Eigen::MatrixXd out(m.rows(), m.cols() + 1);
    out.leftCols(col) = m.leftCols(col);
    out.col(col) = values;
    out.rightCols(m.cols() - col) = m.rightCols(m.cols() - col);
    return out;
}

Eigen::VectorXd remove_entry(const Eigen::VectorXd& v, int idx) {
    Eigen::VectorXd out(v.size() - 1);
    out.head(idx) = v.head(idx);
    out.tail(v.size() - 1 - idx) = v.tail(v.size() - 1 - idx);
    return out;
}

Eigen::VectorXd insert_entry(const Eigen::VectorXd& v, int idx, double value) {
    Eigen::VectorXd out(v.size() + 1);
    out.head(idx) = v.head(idx);
    out(idx) = value;
    out.tail(v.size() - idx) = v.tail(v.size() - idx);
    return out;
}

}  // namespace relucegar
