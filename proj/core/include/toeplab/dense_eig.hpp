#pragma once

#include <Eigen/Dense>

namespace toeplab {

/// Ascending eigenvalues of a real symmetric matrix (LAPACK dsyevd, values
/// only, lower triangle referenced). The rvalue overload reuses the caller's
/// storage as workspace, which matters for matrices of order ~10^4.
Eigen::VectorXd symmetric_eigenvalues(Eigen::MatrixXd&& a);
Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& a);

/// Singular values in descending order (Eigen BDCSVD).
Eigen::VectorXd singular_values(const Eigen::MatrixXd& a);

} // namespace toeplab
