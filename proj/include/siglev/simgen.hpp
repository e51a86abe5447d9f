#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "siglev/bootstrap.hpp"
#include "siglev/dataset.hpp"

namespace siglev {

enum class Framework { linear, nonlinear };
enum class CovariateDist { gaussian, exp_centered };

// One estimator column of a scenario table. `name` is one of: naive, dicker,
// ooe, oracle_single, single, selection, selection_h, ridge, full_psi, boot.
// boot runs the bootstrap improvement with `initial` (naive | ridge |
// cmd:<executable>) and `select` (all | gap).
struct EstimatorSpec {
    std::string name;
    bool split = false;                 // selection: sample-split the selection step
    std::size_t boot_m = 100;           // boot: bootstrap replications
    std::string initial = "naive";      // boot: initial estimator
    std::string select = "all";         // boot: zero-estimator index set
    std::string label() const;
};

struct ScenarioConfig {
    Framework framework = Framework::linear;
    std::size_t n = 0;
    std::size_t p = 0;
    std::size_t replications = 1;
    double tau2 = 1.0;
    double sparsity = 0.0;  // tau_B^2 / tau^2 (linear) or eta (nonlinear)
    std::size_t k_large = 0;  // 0 = framework default (5 linear, 6 nonlinear)
    CovariateDist covariate_dist = CovariateDist::exp_centered;
    std::vector<EstimatorSpec> estimators;
    std::uint64_t seed = 0;
    std::optional<std::size_t> unlabeled_n;  // estimate moments from N fresh rows
    std::optional<std::size_t> bandwidth;    // banded covariance estimation

    std::size_t effective_k() const {
        if (k_large != 0) return k_large;
        return framework == Framework::linear ? 5 : 6;
    }
    void validate() const;  // throws std::invalid_argument naming the field
};

std::string scenario_config_to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_config_from_json(const std::string& text);

struct EstimatorSummary {
    std::string name;
    std::size_t completed = 0;
    std::size_t failed = 0;
    double mean = 0.0;
    double bias = 0.0;
    std::optional<double> se;       // sd of replicate values (absent when R = 1)
    double rmse = 0.0;
    std::optional<double> rmse_se;  // delta-method sd of the RMSE
    std::optional<double> pct_change;      // RMSE vs baseline (first estimator)
    std::optional<double> mse_pct_change;  // MSE vs baseline (subsampling tables)
    std::vector<double> values;     // per-replicate estimates, kept for audit
    std::vector<std::string> errors;  // per-replicate failure messages ("" = ok)
};

struct ScenarioSummary {
    std::string config_json;   // resolved configuration echo
    std::uint64_t seed = 0;
    double tau2_true = 0.0;
    std::size_t replications = 0;
    std::vector<EstimatorSummary> estimators;
    bool incomplete = false;  // any replicate failed for any estimator

    std::string to_json(bool include_values = false) const;
    std::string to_csv() const;  // Estimator, Mean, SE, RMSE, RMSE_SE, %Change
    std::string to_csv_mse() const;  // Estimator, Mean, MSE, %Change (subsampling layout)
    std::string replicate_csv() const;
};

// sd(errors^2) / (2 * RMSE * sqrt(R)); absent when RMSE == 0.
std::optional<double> rmse_se_delta(std::span<const double> errors);

// E[X sin X] and E[sin X] under the covariate law, by adaptive quadrature,
// cached to 1e-10 (the tests recompute both with an independent integrator).
double kappa_x_sin_x(CovariateDist dist);
double mean_sin_x(CovariateDist dist);

struct GeneratedData {
    LabeledDataset data;  // raw draw, whitened flag off
    std::vector<double> beta_true;
    std::vector<double> theta_true;  // E(W_j g) for the full pairwise g
};

// Linear model: beta_j^2 = tau_B^2/k for j < k, (tau^2 - tau_B^2)/(p - k)
// otherwise (positive roots); Y = X beta + eps, eps ~ N(0,1).
GeneratedData gen_linear(const ScenarioConfig& cfg, std::uint64_t replicate_index);

// Nonlinear model: Y = gamma_L sum_{j in Theta}[X_j + sin X_j] +
// gamma_S sum_{j not in Theta}[X_j + sin X_j] + xi, centered to E(Y) = 0;
// best-linear beta_j = gamma(1 + kappa).
GeneratedData gen_nonlinear(const ScenarioConfig& cfg, std::uint64_t replicate_index);

// Runs every configured estimator over `replications` seeded replicates
// (optionally whitening with moments estimated from a fresh unlabeled draw)
// and aggregates the table. Replicates may run on `threads` workers; results
// are identical for any thread count.
ScenarioSummary run_scenario(const ScenarioConfig& cfg, std::size_t threads = 1);

// Full-data reference tau^2 = beta-hat^T Sigma-hat beta-hat from least squares
// over the entire dataset. Throws when the design is rank deficient (prune
// collinear columns first).
double full_data_tau2_reference(const LabeledDataset& d);

// Ch-4-style benchmark: per replicate draw n_sub labeled rows without
// replacement, treat the rest as unlabeled, estimate moments (optional band),
// whiten, run the estimators; aggregate against the full-data reference.
ScenarioSummary subsample_study(const LabeledDataset& d, std::size_t n_sub, std::size_t reps,
                                const std::vector<EstimatorSpec>& estimators, std::uint64_t seed,
                                std::optional<std::size_t> bandwidth = {},
                                std::size_t threads = 1);

struct CorrelationTable {
    std::vector<std::string> initial_names;
    std::vector<std::string> zero_names;
    std::vector<std::vector<std::optional<double>>> corr;  // absent when a column is constant
    std::string to_json() const;
    std::string to_csv() const;
};

// Pearson correlations between initial-estimator values and zero-estimator
// values across seeded subsamples of size n_sub.
CorrelationTable correlation_study(const LabeledDataset& d, std::size_t n_sub, std::size_t reps,
                                   const std::vector<EstimatorSpec>& initial_estimators,
                                   const std::vector<std::string>& zero_estimators,
                                   std::uint64_t seed, std::optional<std::size_t> bandwidth = {},
                                   std::size_t threads = 1);

// Synthetic benchmark dataset drawn from the nonlinear model (one large raw
// sample, later split into labeled/unlabeled parts by subsample_study).
LabeledDataset make_synthetic_dataset(std::size_t rows, std::size_t p, double tau2, double eta,
                                      std::uint64_t seed, std::size_t k = 6,
                                      CovariateDist dist = CovariateDist::exp_centered);

// Hook for the CLI: wrap an external command (CSV on stdin, single real on
// stdout) as an InitialEstimator.
InitialEstimator external_estimator(const std::string& command);
InitialEstimator builtin_initial_estimator(const std::string& name, std::uint64_t seed);

}  // namespace siglev
