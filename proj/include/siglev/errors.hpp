#pragma once

#include <stdexcept>
#include <string>

namespace siglev {

// Covariance matrix is not usably positive definite (eigenvalue under the
// floor in strict mode, or no positive eigenvalue at all).
struct degenerate_covariance : std::runtime_error {
    explicit degenerate_covariance(const std::string& what) : std::runtime_error(what) {}
};

// Zero-estimator index set too small: the statistic would be identically 0.
struct degenerate_zero_estimator : std::runtime_error {
    explicit degenerate_zero_estimator(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace siglev
