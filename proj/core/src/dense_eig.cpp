#include "toeplab/dense_eig.hpp"

#include <stdexcept>
#include <string>

#include <lapacke.h>

namespace toeplab {

Eigen::VectorXd symmetric_eigenvalues(Eigen::MatrixXd&& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("symmetric_eigenvalues: matrix is not square");
    const auto n = static_cast<lapack_int>(a.rows());
    Eigen::VectorXd w(n);
    if (n == 0) return w;
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'L', n, a.data(), n, w.data());
    if (info != 0) throw std::runtime_error("LAPACKE_dsyevd failed with info = " + std::to_string(info));
    return w;
}

Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& a) { return symmetric_eigenvalues(Eigen::MatrixXd(a)); }

Eigen::VectorXd singular_values(const Eigen::MatrixXd& a) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
    return svd.singularValues();
}

} // namespace toeplab
