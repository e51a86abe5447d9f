#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "siglev/dataset.hpp"
#include "siglev/estimate.hpp"
#include "siglev/naive.hpp"

namespace siglev {

enum class VarSource { analytic_independent, empirical_unlabeled };

// Z = (1/n) sum_i g(X_i) with g the sum of pairwise products over `index_set`,
// plus Var[g(X)] for a single observation.
struct ZeroStat {
    double value = 0.0;
    std::vector<std::size_t> index_set;
    double var_g = 0.0;
    VarSource var_source = VarSource::analytic_independent;
};

enum class SelectionProcedure { gap, all, external };

struct SelectionResult {
    std::vector<std::size_t> set;
    SelectionProcedure procedure = SelectionProcedure::gap;
    std::optional<std::uint64_t> split_seed;
};

// Per-row g(x) = sum_{j<j' in s} x_j x_j' = ((sum_s x)^2 - sum_s x^2) / 2
double pairwise_g_row(std::span<const double> row, std::span<const std::size_t> s);

// Var[g(X)]: |s|(|s|-1)/2 for whitened independent columns, or the sample
// variance of g over whitened unlabeled rows. |s| < 2 throws
// degenerate_zero_estimator (Z would be identically 0).
double var_pairwise_zero(std::span<const std::size_t> s, std::size_t p, VarSource source,
                         const UnlabeledDataset* u = nullptr);

ZeroStat pairwise_zero_stat(const LabeledDataset& d, std::vector<std::size_t> s,
                            VarSource source = VarSource::analytic_independent,
                            const UnlabeledDataset* u = nullptr);

// c-hat = [ (2/(n(n-1))) sum_{i1 != i2} W_{i1}^T W_{i2} g(X_{i2}) ] / var_g,
// with g restricted to z.index_set. O(np).
double c_hat(const WMatrix& w, const LabeledDataset& d, const ZeroStat& z);

// Same estimator with caller-supplied per-row zero-statistic values (the
// low-dimensional single-moment hook used in tests).
double c_hat_raw(const WMatrix& w, std::span<const double> g_rows, double var_g);

// value = tau2.value - c * z.value; method records single vs selection by
// comparing |z.index_set| with p.
Estimate improve_single(const Estimate& tau2, double c, const ZeroStat& z, std::size_t p);

// Largest gap in the ordered beta_j^2-hat values; selects every covariate at
// or above the top of that gap. Argmax ties break toward the smaller ordered
// index (more covariates selected).
SelectionResult gap_selection(std::span<const double> beta_sq);

// Order-3 U-statistic psi-hat_{jj'}; whitened input required so that
// E(X_j X_j') = 1{j = j'}. O(n) per pair.
double psi_hat(const WMatrix& w, const LabeledDataset& d, std::size_t j, std::size_t jp);

struct SplitSpec {
    std::uint64_t seed = 0;
};

// T = tau^2-hat - 2 sum_{j,j' in s} psi-hat_{jj'} (ordered pairs, j = j'
// included). With `split`, selection is recomputed on the first half of a
// seeded row split and the psi-hat terms use the second half.
Estimate t_selection_linear(const WMatrix& w, const LabeledDataset& d, const SelectionResult& s,
                            const std::optional<SplitSpec>& split = {});

// The all-pairs variant (every j, j'): benchmark curiosity only, its variance
// penalty grows like p^2/n^3. O(n^2 p) via the same collision expansion.
Estimate t_full_psi(const WMatrix& w, const LabeledDataset& d);

// Oracle estimators for benchmarking: coefficients built from generator truth.
Estimate oracle_ooe(const WMatrix& w, const LabeledDataset& d, std::span<const double> beta_true);
Estimate oracle_single(const WMatrix& w, const LabeledDataset& d, std::span<const double> beta_true,
                       std::span<const double> theta_true, const ZeroStat& z);

// Variance estimate for the selection estimator. Gaussian form when
// fourth_moments is absent; distribution-free tilde form otherwise
// (fourth_moments[j] = E(X_j^4) for j in the selection order).
double var_selection_hat(double var_naive, std::span<const double> beta_sq_sel, std::size_t n,
                         const std::optional<std::vector<double>>& fourth_moments = {});

// Variance estimate for the single-zero-estimator improvement (tilde form).
double var_single_hat(double var_naive_tilde, const WMatrix& w, const LabeledDataset& d,
                      const ZeroStat& z);

// (1/n) sum_i [x_{i1}^k1 x_{i2}^k2 - expected_moment]: the p = 2 monomial
// zero-estimator family hook used by the orthogonality tests.
double monomial_zero_stat(const LabeledDataset& d, unsigned k1, unsigned k2,
                          double expected_moment);

}  // namespace siglev
