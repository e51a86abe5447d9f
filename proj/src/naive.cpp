#include "siglev/naive.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

#include "siglev/kernels.hpp"

namespace siglev {

std::string estimate_to_json(const Estimate& e) {
    nlohmann::json j;
    j["value"] = e.value;
    j["variance_hat"] = e.variance_hat ? nlohmann::json(*e.variance_hat) : nlohmann::json();
    j["raw_variance_hat"] = e.raw_variance_hat ? nlohmann::json(*e.raw_variance_hat) : nlohmann::json();
    j["variance_clamped"] = e.variance_clamped;
    j["negative_value"] = e.negative_value;
    j["method"] = e.method;
    j["selection_set"] = e.selection_set ? nlohmann::json(*e.selection_set) : nlohmann::json();
    if (e.boot_cov_se) j["boot_cov_se"] = *e.boot_cov_se;
    return j.dump();
}

WMatrix w_matrix(const LabeledDataset& d) {
    if (!d.whitened) {
        throw std::invalid_argument("w_matrix: dataset is not whitened (whiten first or set the flag for known moments)");
    }
    const std::size_t n = d.n(), p = d.p();
    WMatrix w;
    w.w = Matrix(n, p);
    w.col_sums.assign(p, 0.0);
    w.col_sq_sums.assign(p, 0.0);
    w.row_sq_norms.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto src = d.x.row_span(i);
        auto dst = w.w.row_span(i);
        kernels::scale(d.y[i], src, dst);
        kernels::vadd(dst, w.col_sums);
        kernels::vaddsq(dst, w.col_sq_sums);
        w.row_sq_norms[i] = kernels::sumsq(dst);
    }
    return w;
}

double beta_sq_hat(const WMatrix& w, std::size_t j) {
    const std::size_t n = w.n();
    if (n < 2) throw std::invalid_argument("beta_sq_hat: n >= 2 required");
    if (j >= w.p()) throw std::invalid_argument("beta_sq_hat: column index out of range");
    const double c = w.col_sums[j];
    return (c * c - w.col_sq_sums[j]) / (static_cast<double>(n) * static_cast<double>(n - 1));
}

std::vector<double> beta_sq_all(const WMatrix& w) {
    const std::size_t n = w.n(), p = w.p();
    if (n < 2) throw std::invalid_argument("beta_sq_all: n >= 2 required");
    const double denom = static_cast<double>(n) * static_cast<double>(n - 1);
    std::vector<double> out(p);
    for (std::size_t j = 0; j < p; ++j) {
        out[j] = (w.col_sums[j] * w.col_sums[j] - w.col_sq_sums[j]) / denom;
    }
    return out;
}

Estimate naive_tau2(const WMatrix& w) {
    const std::size_t n = w.n();
    if (n < 2) throw std::invalid_argument("naive_tau2: n >= 2 required");
    const double denom = static_cast<double>(n) * static_cast<double>(n - 1);
    const double total = kernels::sumsq(w.col_sums) - kernels::sum(w.row_sq_norms);
    Estimate e;
    e.value = total / denom;
    e.method = "naive";
    return e;
}

double sigma_y2_hat(const LabeledDataset& d) {
    const std::size_t n = d.n();
    if (n < 2) throw std::invalid_argument("sigma_y2_hat: n >= 2 required");
    const double mean = kernels::sum(d.y) / static_cast<double>(n);
    double acc = 0.0;
    for (double v : d.y) acc += (v - mean) * (v - mean);
    return acc / static_cast<double>(n - 1);
}

Estimate sigma2_hat(const LabeledDataset& d, const Estimate& tau2) {
    Estimate e;
    e.value = sigma_y2_hat(d) - tau2.value;
    e.negative_value = e.value < 0.0;
    e.method = "sigma2";
    return e;
}

double dicker_tau2(const LabeledDataset& d) {
    const std::size_t n = d.n(), p = d.p();
    if (n < 1) throw std::invalid_argument("dicker_tau2: empty dataset");
    std::vector<double> xty(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        kernels::axpy(d.y[i], d.x.row_span(i), xty);
    }
    const double y2 = kernels::sumsq(d.y);
    return (kernels::sumsq(xty) - static_cast<double>(p) * y2) /
           (static_cast<double>(n) * static_cast<double>(n + 1));
}

double var_naive_gaussian_hat(double tau2, double sigma_y2, std::size_t n, std::size_t p) {
    if (n < 2) throw std::invalid_argument("var_naive_gaussian_hat: n >= 2 required");
    const double nn = static_cast<double>(n);
    const double pp = static_cast<double>(p);
    const double t4 = tau2 * tau2;
    const double s4 = sigma_y2 * sigma_y2;
    return (4.0 / nn) * ((nn - 2.0) / (nn - 1.0) * (sigma_y2 * tau2 + t4) +
                         (pp * s4 + 4.0 * sigma_y2 * tau2 + 3.0 * t4) / (2.0 * (nn - 1.0)));
}

UStatComponents ustat_components(const WMatrix& w) {
    const std::size_t n = w.n(), p = w.p();
    if (n < 3) throw std::invalid_argument("ustat_components: n >= 3 required");
    const double nn = static_cast<double>(n);

    // Gram matrix G = W W^T; the order-2 and order-3 sums collapse to row
    // statistics of G (full sums minus index-collision terms).
    Matrix gram(n, n);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a; b < n; ++b) {
            const double g = kernels::dot(w.w.row_span(a), w.w.row_span(b));
            gram(a, b) = g;
            gram(b, a) = g;
        }
    }

    double bab_sum = 0.0;   // sum over distinct (i1, i2, i3) of G[i1,i2] G[i2,i3]
    double frob_sum = 0.0;  // sum over distinct (i1, i2) of G[i1,i2]^2
    double tau_sum = 0.0;   // sum over distinct (i1, i2) of G[i1,i2]
    for (std::size_t i = 0; i < n; ++i) {
        double row_sum = 0.0, row_sq = 0.0;
        kernels::sum_sumsq(gram.row_span(i), row_sum, row_sq);
        const double diag = gram(i, i);
        const double off_sum = row_sum - diag;
        const double off_sq = row_sq - diag * diag;
        bab_sum += off_sum * off_sum - off_sq;
        frob_sum += off_sq;
        tau_sum += off_sum;
    }

    UStatComponents c;
    c.bab_hat = bab_sum / (nn * (nn - 1.0) * (nn - 2.0));
    c.frob_hat = frob_sum / (nn * (nn - 1.0));
    const double tau2 = tau_sum / (nn * (nn - 1.0));
    c.beta4_hat = tau2 * tau2;
    (void)p;
    return c;
}

double var_naive_ustat_hat(const WMatrix& w) {
    const std::size_t n = w.n();
    if (n < 3) throw std::invalid_argument("var_naive_ustat_hat: n >= 3 required");
    const double nn = static_cast<double>(n);
    const UStatComponents c = ustat_components(w);
    return 4.0 * (nn - 2.0) / (nn * (nn - 1.0)) * (c.bab_hat - c.beta4_hat) +
           2.0 / (nn * (nn - 1.0)) * (c.frob_hat - c.beta4_hat);
}

}  // namespace siglev
