#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "siglev/dataset.hpp"
#include "siglev/estimate.hpp"

namespace siglev {

// Any map from a labeled dataset to a tau^2 value can be improved; external
// procedures attach here (the CLI wraps subprocesses into this contract).
//
// `weighted_fn`, when set, evaluates the estimator on a bootstrap resample
// given per-row multiplicities of the original dataset instead of the
// materialized resample. Pairwise U-statistics need this: with-replacement
// ties otherwise feed same-row kernel terms into the estimator and inflate
// the bootstrap covariance by a factor of about 1 + p/n. Smooth estimators
// (ridge, external procedures) leave it unset and get the plain resample.
struct InitialEstimator {
    std::string name;
    std::function<double(const LabeledDataset&)> fn;
    std::function<double(const LabeledDataset&, std::span<const std::size_t>)> weighted_fn;
};

struct BootstrapPlan {
    std::size_t m = 100;  // bootstrap replications, >= 2
    std::uint64_t seed = 0;
};

// n rows drawn i.i.d. uniformly with replacement; deterministic given
// (seed, replicate_index) through a counter-based stream split.
LabeledDataset bootstrap_resample(const LabeledDataset& d, std::uint64_t seed,
                                  std::uint64_t replicate_index);

// Improve `est` with the pairwise zero-estimator over index set `s`: bootstrap
// the covariance between the estimator and the zero-statistic, divide by the
// known Var(Z) = var_g / n, and return est(d) - c~ * Z(d).
Estimate empirical_improve(const LabeledDataset& d, const InitialEstimator& est,
                           const BootstrapPlan& plan, std::vector<std::size_t> s);

// ||beta^R||^2 from ridge regression with k-fold CV over the lambda grid.
double ridge_tau2(const LabeledDataset& d, const std::vector<double>& lambda_grid,
                  std::size_t folds, std::uint64_t seed);

// 20 log-spaced points in [1e-3, 1e3] * (||X||_F^2 / (n p))
std::vector<double> default_lambda_grid(const LabeledDataset& d);

}  // namespace siglev
