#pragma once

#include <cstddef>
#include <vector>

#include "siglev/dataset.hpp"
#include "siglev/estimate.hpp"
#include "siglev/matrix.hpp"

namespace siglev {

// W_ij = X_ij * Y_i together with the cached reductions every U-statistic
// here is assembled from.
struct WMatrix {
    Matrix w;                          // n x p
    std::vector<double> col_sums;      // sum_i W_ij
    std::vector<double> col_sq_sums;   // sum_i W_ij^2
    std::vector<double> row_sq_norms;  // ||W_i||^2

    std::size_t n() const { return w.rows; }
    std::size_t p() const { return w.cols; }
};

// Requires d.whitened (the caller setting the flag asserts known zero-mean /
// identity-covariance moments).
WMatrix w_matrix(const LabeledDataset& d);

// (n(n-1))^-1 sum_{i1 != i2} W_{i1 j} W_{i2 j}
double beta_sq_hat(const WMatrix& w, std::size_t j);
std::vector<double> beta_sq_all(const WMatrix& w);

// tau^2-hat = sum_j beta_sq_hat_j, assembled in O(np)
Estimate naive_tau2(const WMatrix& w);

double sigma_y2_hat(const LabeledDataset& d);

// sigma^2-hat = sigma_Y^2-hat - tau^2-hat; may be negative (flagged, not clamped)
Estimate sigma2_hat(const LabeledDataset& d, const Estimate& tau2);

// (||X^T Y||^2 - p ||Y||^2) / (n(n+1))
double dicker_tau2(const LabeledDataset& d);

// Closed-form variance estimate of the naive estimator under Gaussian covariates
double var_naive_gaussian_hat(double tau2, double sigma_y2, std::size_t n, std::size_t p);

struct UStatComponents {
    double bab_hat;    // beta^T A beta, order-3 U-statistic
    double frob_hat;   // ||A||_F^2, order-2 U-statistic
    double beta4_hat;  // ||beta||^4 = (naive tau^2-hat)^2
};

// Order-2/3 components assembled from the W Gram matrix in O(n^2 p); the
// exhaustive triple-loop form lives in the test oracles only.
UStatComponents ustat_components(const WMatrix& w);

// Distribution-free variance estimate of the naive estimator (tilde form)
double var_naive_ustat_hat(const WMatrix& w);

}  // namespace siglev
