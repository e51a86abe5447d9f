#include "siglev/whitening.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <stdexcept>

#include "siglev/errors.hpp"
#include "siglev/kernels.hpp"

namespace siglev {

namespace {

using EigenRowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EigenRowMat> as_eigen(const Matrix& m) {
    return {m.data.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)};
}

Matrix from_eigen(const Eigen::MatrixXd& m) {
    Matrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = m(i, j);
    return out;
}

Matrix identity_matrix(std::size_t p) {
    Matrix m(p, p);
    for (std::size_t j = 0; j < p; ++j) m(j, j) = 1.0;
    return m;
}

}  // namespace

CovariateModel CovariateModel::identity(std::size_t p) {
    CovariateModel m;
    m.mu.assign(p, 0.0);
    m.sigma = identity_matrix(p);
    m.sigma_inv_sqrt = identity_matrix(p);
    m.source = Source::known;
    m.is_identity = true;
    return m;
}

CovariateModel CovariateModel::known(std::vector<double> mu, Matrix sigma) {
    if (sigma.rows != sigma.cols || sigma.rows != mu.size()) {
        throw std::invalid_argument("CovariateModel::known: dimension mismatch");
    }
    CovariateModel m;
    m.mu = std::move(mu);
    m.sigma = std::move(sigma);
    m.sigma_inv_sqrt = inv_sqrt(m.sigma);
    m.source = Source::known;
    return m;
}

Matrix inv_sqrt(const Matrix& sigma, double floor_rel, bool clamp, std::size_t* floored) {
    if (sigma.rows != sigma.cols) throw std::invalid_argument("inv_sqrt: matrix not square");
    const auto p = static_cast<Eigen::Index>(sigma.rows);
    Eigen::MatrixXd s = as_eigen(sigma);
    s = 0.5 * (s + s.transpose().eval());  // symmetrize

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    if (eig.info() != Eigen::Success) throw degenerate_covariance("inv_sqrt: eigendecomposition failed");
    const Eigen::VectorXd& lam = eig.eigenvalues();
    const double lam_max = lam(p - 1);
    if (!(lam_max > 0.0)) throw degenerate_covariance("inv_sqrt: no positive eigenvalue");
    const double floor = floor_rel * lam_max;

    std::size_t n_floored = 0;
    Eigen::VectorXd inv_root(p);
    for (Eigen::Index k = 0; k < p; ++k) {
        double l = lam(k);
        if (l < floor) {
            if (!clamp) {
                throw degenerate_covariance("inv_sqrt: eigenvalue " + std::to_string(l) +
                                            " below floor " + std::to_string(floor));
            }
            l = floor;
            ++n_floored;
        }
        inv_root(k) = 1.0 / std::sqrt(l);
    }
    if (floored != nullptr) *floored = n_floored;
    Eigen::MatrixXd out = eig.eigenvectors() * inv_root.asDiagonal() * eig.eigenvectors().transpose();
    return from_eigen(out);
}

CovariateModel estimate_moments(const UnlabeledDataset& u, std::optional<std::size_t> bandwidth) {
    const std::size_t big_n = u.n(), p = u.p();
    if (big_n < 2) throw std::invalid_argument("estimate_moments: need at least 2 rows");
    if (!bandwidth && big_n < p + 1) {
        throw std::invalid_argument("estimate_moments: N >= p + 1 required for the full covariance");
    }

    CovariateModel m;
    m.mu.assign(p, 0.0);
    for (std::size_t i = 0; i < big_n; ++i) kernels::vadd(u.x.row_span(i), m.mu);
    const double inv_n = 1.0 / static_cast<double>(big_n);
    for (auto& v : m.mu) v *= inv_n;

    // centered copy, transposed so covariance entries are contiguous dots
    Matrix ct(p, big_n);
    for (std::size_t i = 0; i < big_n; ++i) {
        const double* row = u.x.row(i);
        for (std::size_t j = 0; j < p; ++j) ct(j, i) = row[j] - m.mu[j];
    }

    m.sigma = Matrix(p, p);
    const std::size_t b = bandwidth.value_or(p);
    for (std::size_t j = 0; j < p; ++j) {
        const std::size_t hi = std::min(p - 1, j + b);
        for (std::size_t jp = j; jp <= hi; ++jp) {
            const double v = kernels::dot(ct.row_span(j), ct.row_span(jp)) * inv_n;
            m.sigma(j, jp) = v;
            m.sigma(jp, j) = v;
        }
    }

    m.bandwidth = bandwidth;
    m.source = CovariateModel::Source::estimated;
    m.estimated_n = big_n;
    m.sigma_inv_sqrt = inv_sqrt(m.sigma, 1e-10, /*clamp=*/true, &m.floored_eigenvalues);
    return m;
}

namespace {

Matrix whiten_rows(const CovariateModel& m, const Matrix& x) {
    if (x.cols != m.p()) throw std::invalid_argument("whiten: dimension mismatch");
    if (m.is_identity) return x;
    Eigen::MatrixXd centered = as_eigen(x);
    Eigen::Map<const Eigen::VectorXd> mu(m.mu.data(), static_cast<Eigen::Index>(m.mu.size()));
    centered.rowwise() -= mu.transpose();
    Eigen::MatrixXd out = centered * as_eigen(m.sigma_inv_sqrt);  // S symmetric
    return from_eigen(out);
}

}  // namespace

LabeledDataset whiten(const CovariateModel& m, const LabeledDataset& d) {
    LabeledDataset out;
    out.x = whiten_rows(m, d.x);
    out.y = d.y;
    out.whitened = true;
    out.column_names = d.column_names;
    return out;
}

UnlabeledDataset whiten(const CovariateModel& m, const UnlabeledDataset& d) {
    UnlabeledDataset out;
    out.x = whiten_rows(m, d.x);
    out.whitened = true;
    return out;
}

std::string covariate_model_to_json(const CovariateModel& m) {
    nlohmann::json j;
    j["version"] = 1;
    j["mu"] = m.mu;
    const std::size_t p = m.p();
    if (m.bandwidth) {
        j["bandwidth"] = *m.bandwidth;
        // upper band rows: sigma[j][j..min(j+b, p-1)]
        std::vector<std::vector<double>> band(p);
        for (std::size_t jj = 0; jj < p; ++jj) {
            const std::size_t hi = std::min(p - 1, jj + *m.bandwidth);
            for (std::size_t k = jj; k <= hi; ++k) band[jj].push_back(m.sigma(jj, k));
        }
        j["sigma_band"] = band;
    } else {
        std::vector<std::vector<double>> dense(p, std::vector<double>(p));
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b2 = 0; b2 < p; ++b2) dense[a][b2] = m.sigma(a, b2);
        j["sigma"] = dense;
    }
    j["source"] = m.source == CovariateModel::Source::known ? "known" : "estimated";
    if (m.source == CovariateModel::Source::estimated) j["estimated_n"] = m.estimated_n;
    return j.dump();
}

CovariateModel covariate_model_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != 1) throw std::runtime_error("covariate model: unsupported version");
    CovariateModel m;
    m.mu = j.at("mu").get<std::vector<double>>();
    const std::size_t p = m.mu.size();
    m.sigma = Matrix(p, p);
    if (j.contains("bandwidth")) {
        m.bandwidth = j.at("bandwidth").get<std::size_t>();
        auto band = j.at("sigma_band").get<std::vector<std::vector<double>>>();
        for (std::size_t jj = 0; jj < p; ++jj) {
            for (std::size_t k = 0; k < band[jj].size(); ++k) {
                m.sigma(jj, jj + k) = band[jj][k];
                m.sigma(jj + k, jj) = band[jj][k];
            }
        }
    } else {
        auto dense = j.at("sigma").get<std::vector<std::vector<double>>>();
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b2 = 0; b2 < p; ++b2) m.sigma(a, b2) = dense[a][b2];
    }
    m.source = j.at("source").get<std::string>() == "known" ? CovariateModel::Source::known
                                                            : CovariateModel::Source::estimated;
    if (j.contains("estimated_n")) m.estimated_n = j.at("estimated_n").get<std::size_t>();
    m.sigma_inv_sqrt = inv_sqrt(m.sigma, 1e-10, /*clamp=*/true, &m.floored_eigenvalues);
    return m;
}

}  // namespace siglev
