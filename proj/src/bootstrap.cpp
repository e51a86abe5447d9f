#include "siglev/bootstrap.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "siglev/errors.hpp"
#include "siglev/kernels.hpp"
#include "siglev/rng.hpp"
#include "siglev/zeroest.hpp"

namespace siglev {

namespace {

std::vector<std::size_t> draw_indices(std::size_t n, std::uint64_t seed,
                                      std::uint64_t replicate_index) {
    Rng rng(seed, streams::id(replicate_index, streams::bootstrap));
    std::vector<std::size_t> idx(n);
    for (auto& v : idx) v = static_cast<std::size_t>(rng.next_below(n));
    return idx;
}

LabeledDataset materialize(const LabeledDataset& d, std::span<const std::size_t> idx) {
    const std::size_t p = d.p();
    LabeledDataset out;
    out.whitened = d.whitened;
    out.column_names = d.column_names;
    out.x = Matrix(idx.size(), p);
    out.y.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::memcpy(out.x.row(i), d.x.row(idx[i]), p * sizeof(double));
        out.y[i] = d.y[idx[i]];
    }
    return out;
}

}  // namespace

LabeledDataset bootstrap_resample(const LabeledDataset& d, std::uint64_t seed,
                                  std::uint64_t replicate_index) {
    return materialize(d, draw_indices(d.n(), seed, replicate_index));
}

Estimate empirical_improve(const LabeledDataset& d, const InitialEstimator& est,
                           const BootstrapPlan& plan, std::vector<std::size_t> s) {
    if (plan.m < 2) throw std::invalid_argument("empirical_improve: m >= 2 required");
    const std::size_t n = d.n();
    const ZeroStat z = pairwise_zero_stat(d, std::move(s));

    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = pairwise_g_row(d.x.row_span(i), z.index_set);

    std::vector<double> est_vals(plan.m), z_vals(plan.m);
    std::vector<std::size_t> counts(n);
    for (std::size_t b = 0; b < plan.m; ++b) {
        const auto idx = draw_indices(n, plan.seed, b);
        counts.assign(n, 0);
        for (auto i : idx) ++counts[i];
        double z_acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) z_acc += static_cast<double>(counts[i]) * g[i];
        z_vals[b] = z_acc / static_cast<double>(n);
        est_vals[b] = est.weighted_fn ? est.weighted_fn(d, counts) : est.fn(materialize(d, idx));
    }

    const double mm = static_cast<double>(plan.m);
    const double est_mean = kernels::sum(est_vals) / mm;
    const double z_mean = kernels::sum(z_vals) / mm;
    double cov = 0.0, cov_sq = 0.0;
    for (std::size_t b = 0; b < plan.m; ++b) {
        const double prod = (est_vals[b] - est_mean) * (z_vals[b] - z_mean);
        cov += prod;
        cov_sq += prod * prod;
    }
    cov /= mm - 1.0;

    // Var(Z) is known in the semi-supervised setting: var_g / n.
    const double var_z = z.var_g / static_cast<double>(n);
    const double c_tilde = cov / var_z;

    Estimate e;
    e.value = est.fn(d) - c_tilde * z.value;
    e.method = "boot:" + est.name;
    e.selection_set = z.index_set;
    // SE of the bootstrap covariance estimate (moment method)
    const double cov_var = (cov_sq / mm - (cov * (mm - 1.0) / mm) * (cov * (mm - 1.0) / mm)) / mm;
    e.boot_cov_se = cov_var > 0.0 ? std::sqrt(cov_var) : 0.0;
    return e;
}

std::vector<double> default_lambda_grid(const LabeledDataset& d) {
    const double x_scale = kernels::sumsq(d.x.data) / static_cast<double>(d.n() * d.p());
    std::vector<double> grid(20);
    for (std::size_t k = 0; k < 20; ++k) {
        const double expo = -3.0 + 6.0 * static_cast<double>(k) / 19.0;
        grid[k] = std::pow(10.0, expo) * x_scale;
    }
    return grid;
}

namespace {

using EigenRowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Ridge coefficients for every lambda from one eigendecomposition of X^T X.
struct RidgeSolver {
    Eigen::MatrixXd v;       // eigenvectors of X^T X
    Eigen::VectorXd evals;   // eigenvalues
    Eigen::VectorXd vt_xty;  // V^T X^T y

    RidgeSolver(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
        Eigen::MatrixXd xtx = x.transpose() * x;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(xtx);
        v = eig.eigenvectors();
        evals = eig.eigenvalues();
        vt_xty = v.transpose() * (x.transpose() * y);
    }

    Eigen::VectorXd solve(double lambda) const {
        Eigen::VectorXd scaled = vt_xty.array() / (evals.array() + lambda);
        return v * scaled;
    }
};

}  // namespace

double ridge_tau2(const LabeledDataset& d, const std::vector<double>& lambda_grid,
                  std::size_t folds, std::uint64_t seed) {
    const std::size_t n = d.n(), p = d.p();
    if (folds < 2) throw std::invalid_argument("ridge_tau2: folds >= 2 required");
    if (folds > n) throw std::invalid_argument("ridge_tau2: folds > n");
    if (lambda_grid.empty()) throw std::invalid_argument("ridge_tau2: empty lambda grid");
    for (double l : lambda_grid) {
        if (!(l > 0.0)) throw std::invalid_argument("ridge_tau2: lambda must be > 0");
    }

    Eigen::Map<const EigenRowMat> x(d.x.data.data(), static_cast<Eigen::Index>(n),
                                    static_cast<Eigen::Index>(p));
    Eigen::Map<const Eigen::VectorXd> y(d.y.data(), static_cast<Eigen::Index>(n));

    // seeded shuffle, folds assigned round-robin over the shuffled order
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed, streams::id(0, streams::folds));
    for (std::size_t i = n - 1; i > 0; --i) {
        std::size_t k = rng.next_below(i + 1);
        std::swap(perm[i], perm[k]);
    }

    std::vector<double> cv_err(lambda_grid.size(), 0.0);
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < n; ++i) {
            (i % folds == f ? test : train).push_back(perm[i]);
        }
        Eigen::MatrixXd xt(train.size(), p);
        Eigen::VectorXd yt(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) {
            xt.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(train[i]));
            yt(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(train[i]));
        }
        RidgeSolver solver(xt, yt);
        for (std::size_t k = 0; k < lambda_grid.size(); ++k) {
            const Eigen::VectorXd beta = solver.solve(lambda_grid[k]);
            double err = 0.0;
            for (std::size_t t : test) {
                const double pred = x.row(static_cast<Eigen::Index>(t)).dot(beta);
                const double r = y(static_cast<Eigen::Index>(t)) - pred;
                err += r * r;
            }
            cv_err[k] += err;
        }
    }

    std::size_t best = 0;
    for (std::size_t k = 1; k < lambda_grid.size(); ++k) {
        if (cv_err[k] < cv_err[best]) best = k;
    }

    RidgeSolver full(x, y);
    return full.solve(lambda_grid[best]).squaredNorm();
}

}  // namespace siglev
