#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "siglev/dataset.hpp"
#include "siglev/matrix.hpp"

namespace siglev {

// First two covariate moments plus the transform matrix. Either constructed
// analytically (the N = infinity setting) or estimated from unlabeled data.
struct CovariateModel {
    enum class Source { known, estimated };

    std::vector<double> mu;   // length p
    Matrix sigma;             // p x p, symmetric PD (after any flooring)
    Matrix sigma_inv_sqrt;    // p x p, symmetric
    std::optional<std::size_t> bandwidth;
    Source source = Source::known;
    std::size_t estimated_n = 0;   // N when source == estimated
    std::size_t floored_eigenvalues = 0;  // how many eigenvalues the PD repair clamped
    bool is_identity = false;      // exact identity shortcut (mu = 0, sigma = I)

    std::size_t p() const { return mu.size(); }

    static CovariateModel identity(std::size_t p);
    static CovariateModel known(std::vector<double> mu, Matrix sigma);
};

// V diag(lambda_k^{-1/2}) V^T from the symmetric eigendecomposition.
// strict (clamp = false): any eigenvalue below floor_rel * lambda_max throws
// degenerate_covariance. clamp = true: eigenvalues are floored instead and
// *floored counts the repairs. Always throws when no positive eigenvalue.
Matrix inv_sqrt(const Matrix& sigma, double floor_rel = 1e-10, bool clamp = false,
                std::size_t* floored = nullptr);

// Plug-in moments from unlabeled rows: mu = column means, sigma = (1/N)
// sum (x - mu)(x - mu)^T, zeroed outside |j - j'| <= bandwidth when given.
// Requires N >= p + 1 for the full estimator (N >= 2 when banded).
CovariateModel estimate_moments(const UnlabeledDataset& u,
                                std::optional<std::size_t> bandwidth = {});

// x -> sigma_inv_sqrt (x - mu) for every row; sets the whitened flag.
LabeledDataset whiten(const CovariateModel& m, const LabeledDataset& d);
UnlabeledDataset whiten(const CovariateModel& m, const UnlabeledDataset& d);

// Versioned JSON document (mu, dense or banded sigma, bandwidth, source).
std::string covariate_model_to_json(const CovariateModel& m);
CovariateModel covariate_model_from_json(const std::string& text);

}  // namespace siglev
