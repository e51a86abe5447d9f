#include "oracles.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace oracle {

std::size_t svd_rank(const Matrix& m, double rel_tol) {
    Eigen::MatrixXd e(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j)
            e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    std::size_t rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
        if (sv(k) > rel_tol * sv(0)) ++rank;
    }
    return rank;
}

}  // namespace oracle
