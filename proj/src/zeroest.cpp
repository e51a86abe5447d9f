#include "siglev/zeroest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "siglev/errors.hpp"
#include "siglev/kernels.hpp"
#include "siglev/rng.hpp"

namespace siglev {

namespace {

bool is_full_set(std::span<const std::size_t> s, std::size_t p) {
    if (s.size() != p) return false;
    for (std::size_t j = 0; j < p; ++j)
        if (s[j] != j) return false;
    return true;
}

void check_whitened(const LabeledDataset& d, const char* who) {
    if (!d.whitened) throw std::invalid_argument(std::string(who) + ": dataset is not whitened");
}

// g per row for every row of d, restricted to s (sorted unique indices).
std::vector<double> g_rows(const LabeledDataset& d, std::span<const std::size_t> s) {
    const std::size_t n = d.n();
    std::vector<double> g(n);
    if (is_full_set(s, d.p())) {
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0, sq = 0.0;
            kernels::sum_sumsq(d.x.row_span(i), sum, sq);
            g[i] = 0.5 * (sum * sum - sq);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) g[i] = pairwise_g_row(d.x.row_span(i), s);
    }
    return g;
}

std::vector<std::size_t> checked_set(std::vector<std::size_t> s, std::size_t p, const char* who) {
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
        throw std::invalid_argument(std::string(who) + ": duplicate index in set");
    }
    if (!s.empty() && s.back() >= p) {
        throw std::invalid_argument(std::string(who) + ": index out of range");
    }
    return s;
}

}  // namespace

double pairwise_g_row(std::span<const double> row, std::span<const std::size_t> s) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t j : s) {
        const double v = row[j];
        sum += v;
        sq += v * v;
    }
    return 0.5 * (sum * sum - sq);
}

double var_pairwise_zero(std::span<const std::size_t> s, std::size_t p, VarSource source,
                         const UnlabeledDataset* u) {
    if (s.size() < 2) {
        throw degenerate_zero_estimator("pairwise zero-estimator needs |s| >= 2 (Z would be identically 0)");
    }
    if (source == VarSource::analytic_independent) {
        (void)p;
        const double m = static_cast<double>(s.size());
        return m * (m - 1.0) / 2.0;
    }
    if (u == nullptr) throw std::invalid_argument("var_pairwise_zero: unlabeled data required for empirical variance");
    if (!u->whitened) throw std::invalid_argument("var_pairwise_zero: unlabeled data must be whitened");
    const std::size_t big_n = u->n();
    if (big_n < 2) throw std::invalid_argument("var_pairwise_zero: need at least 2 unlabeled rows");
    double mean = 0.0;
    std::vector<double> g(big_n);
    for (std::size_t i = 0; i < big_n; ++i) {
        g[i] = pairwise_g_row(u->x.row_span(i), s);
        mean += g[i];
    }
    mean /= static_cast<double>(big_n);
    double acc = 0.0;
    for (double v : g) acc += (v - mean) * (v - mean);
    return acc / static_cast<double>(big_n - 1);
}

ZeroStat pairwise_zero_stat(const LabeledDataset& d, std::vector<std::size_t> s, VarSource source,
                            const UnlabeledDataset* u) {
    check_whitened(d, "pairwise_zero_stat");
    ZeroStat z;
    z.index_set = checked_set(std::move(s), d.p(), "pairwise_zero_stat");
    z.var_g = var_pairwise_zero(z.index_set, d.p(), source, u);
    z.var_source = source;
    const auto g = g_rows(d, z.index_set);
    z.value = kernels::sum(g) / static_cast<double>(d.n());
    return z;
}

double c_hat_raw(const WMatrix& w, std::span<const double> g_vals, double var_g) {
    const std::size_t n = w.n();
    if (n < 2) throw std::invalid_argument("c_hat: n >= 2 required");
    // sum_{i1 != i2} W_i1^T W_i2 g_i2 = sum_i g_i (col_sums . W_i - ||W_i||^2)
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d_i = kernels::dot(w.w.row_span(i), w.col_sums);
        acc += g_vals[i] * (d_i - w.row_sq_norms[i]);
    }
    const double nn = static_cast<double>(n);
    return 2.0 * acc / (nn * (nn - 1.0)) / var_g;
}

double c_hat(const WMatrix& w, const LabeledDataset& d, const ZeroStat& z) {
    check_whitened(d, "c_hat");
    const auto g = g_rows(d, z.index_set);
    return c_hat_raw(w, g, z.var_g);
}

Estimate improve_single(const Estimate& tau2, double c, const ZeroStat& z, std::size_t p) {
    Estimate e;
    e.value = tau2.value - c * z.value;
    e.method = z.index_set.size() == p ? "single" : "selection_h";
    e.selection_set = z.index_set;
    return e;
}

SelectionResult gap_selection(std::span<const double> beta_sq) {
    const std::size_t p = beta_sq.size();
    if (p < 2) throw std::invalid_argument("gap_selection: p >= 2 required");
    std::vector<double> sorted(beta_sq.begin(), beta_sq.end());
    std::sort(sorted.begin(), sorted.end());

    std::size_t j_star = 1;  // ordered position of the top of the largest gap
    double best = sorted[1] - sorted[0];
    for (std::size_t j = 2; j < p; ++j) {
        const double gap = sorted[j] - sorted[j - 1];
        if (gap > best) {
            best = gap;
            j_star = j;
        }
    }
    const double threshold = sorted[j_star];

    SelectionResult r;
    r.procedure = SelectionProcedure::gap;
    for (std::size_t j = 0; j < p; ++j) {
        if (beta_sq[j] >= threshold) r.set.push_back(j);
    }
    return r;
}

double psi_hat(const WMatrix& w, const LabeledDataset& d, std::size_t j, std::size_t jp) {
    check_whitened(d, "psi_hat");
    const std::size_t n = w.n();
    if (n < 3) throw std::invalid_argument("psi_hat: n >= 3 required");
    if (j >= w.p() || jp >= w.p()) throw std::invalid_argument("psi_hat: column index out of range");

    // a_i = W_ij, b_i = W_ij', e_i = X_ij X_ij' - 1{j = j'}; the sum over
    // distinct triples expands by inclusion-exclusion into one-pass sums.
    const double expected = j == jp ? 1.0 : 0.0;
    double sa = 0.0, sb = 0.0, se = 0.0;
    double sab = 0.0, sae = 0.0, sbe = 0.0, sabe = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = w.w(i, j);
        const double b = w.w(i, jp);
        const double e = d.x(i, j) * d.x(i, jp) - expected;
        sa += a;
        sb += b;
        se += e;
        sab += a * b;
        sae += a * e;
        sbe += b * e;
        sabe += a * b * e;
    }
    // grouped so that swapping j and j' performs identical operations
    const double cross = sae * sb + sbe * sa;
    const double distinct = sa * sb * se - sab * se - cross + 2.0 * sabe;
    const double nn = static_cast<double>(n);
    return distinct / (nn * (nn - 1.0) * (nn - 2.0));
}

Estimate t_selection_linear(const WMatrix& w, const LabeledDataset& d, const SelectionResult& s,
                            const std::optional<SplitSpec>& split) {
    check_whitened(d, "t_selection_linear");
    const std::size_t n = w.n();
    if (n < 3) throw std::invalid_argument("t_selection_linear: n >= 3 required");

    const Estimate tau2 = naive_tau2(w);
    std::vector<std::size_t> set = s.set;

    const WMatrix* eval_w = &w;
    const LabeledDataset* eval_d = &d;
    WMatrix half_w;
    LabeledDataset half_d;
    if (split) {
        // seeded permutation: first half reselects, second half evaluates psi
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        Rng rng(split->seed, streams::id(0, streams::split));
        for (std::size_t i = n - 1; i > 0; --i) {
            std::size_t k = rng.next_below(i + 1);
            std::swap(perm[i], perm[k]);
        }
        const std::size_t n_half = n / 2;
        auto subset = [&](std::size_t from, std::size_t count) {
            LabeledDataset part;
            part.whitened = true;
            part.x = Matrix(count, d.p());
            part.y.resize(count);
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t src = perm[from + i];
                std::copy(d.x.row(src), d.x.row(src) + d.p(), part.x.row(i));
                part.y[i] = d.y[src];
            }
            return part;
        };
        LabeledDataset select_part = subset(0, n_half);
        half_d = subset(n_half, n - n_half);
        WMatrix select_w = w_matrix(select_part);
        set = gap_selection(beta_sq_all(select_w)).set;
        half_w = w_matrix(half_d);
        eval_w = &half_w;
        eval_d = &half_d;
    }

    Estimate e;
    e.method = "selection";
    e.selection_set = set;
    if (set.empty()) {
        e.value = tau2.value;
        return e;
    }

    // Column gathers once, then every psi pair is a contiguous O(n) pass.
    const std::size_t m = set.size();
    const std::size_t n_eval = eval_w->n();
    Matrix wc(m, n_eval), xc(m, n_eval);
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t i = 0; i < n_eval; ++i) {
            wc(a, i) = eval_w->w(i, set[a]);
            xc(a, i) = eval_d->x(i, set[a]);
        }
    }
    const double nn = static_cast<double>(n_eval);
    const double denom = nn * (nn - 1.0) * (nn - 2.0);
    double psi_total = 0.0;
    std::vector<double> e_buf(n_eval);
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) {
            const double expected = set[a] == set[b] ? 1.0 : 0.0;
            double sa = 0.0, sb = 0.0, s_e = 0.0, sab = 0.0, sae = 0.0, sbe = 0.0, sabe = 0.0;
            const double* wa = wc.row(a);
            const double* wb = wc.row(b);
            const double* xa = xc.row(a);
            const double* xb = xc.row(b);
            for (std::size_t i = 0; i < n_eval; ++i) {
                const double av = wa[i], bv = wb[i];
                const double ev = xa[i] * xb[i] - expected;
                sa += av;
                sb += bv;
                s_e += ev;
                sab += av * bv;
                sae += av * ev;
                sbe += bv * ev;
                sabe += av * bv * ev;
            }
            const double cross = sae * sb + sbe * sa;
            psi_total += (sa * sb * s_e - sab * s_e - cross + 2.0 * sabe) / denom;
        }
    }
    e.value = tau2.value - 2.0 * psi_total;
    return e;
}

Estimate t_full_psi(const WMatrix& w, const LabeledDataset& d) {
    check_whitened(d, "t_full_psi");
    const std::size_t n = w.n();
    if (n < 3) throw std::invalid_argument("t_full_psi: n >= 3 required");
    const Estimate tau2 = naive_tau2(w);

    // sum_{j,j'} psi_hat reduces through U[i,k] = W_i . X_k:
    // sum over distinct (i1,i2,i3) of U[i1,i3] U[i2,i3] - W_i1 . W_i2.
    Matrix u(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) u(i, k) = kernels::dot(w.w.row_span(i), d.x.row_span(k));

    double first = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double s = 0.0, q = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = u(i, k);
            s += v;
            q += v * v;
        }
        const double diag = u(k, k);
        const double off_s = s - diag;
        const double off_q = q - diag * diag;
        first += off_s * off_s - off_q;
    }
    const double nn = static_cast<double>(n);
    const double pair_sum = kernels::sumsq(w.col_sums) - kernels::sum(w.row_sq_norms);
    const double second = (nn - 2.0) * pair_sum;  // sum over distinct triples of W_i1 . W_i2
    const double psi_total = (first - second) / (nn * (nn - 1.0) * (nn - 2.0));

    Estimate e;
    e.value = tau2.value - 2.0 * psi_total;
    e.method = "full_psi";
    return e;
}

Estimate oracle_ooe(const WMatrix& w, const LabeledDataset& d, std::span<const double> beta_true) {
    check_whitened(d, "oracle_ooe");
    const std::size_t n = d.n();
    const Estimate tau2 = naive_tau2(w);
    const double beta_norm2 = kernels::sumsq(beta_true);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double proj = kernels::dot(d.x.row_span(i), beta_true);
        acc += proj * proj;
    }
    const double correction = 2.0 * (acc / static_cast<double>(n) - beta_norm2);
    Estimate e;
    e.value = tau2.value - correction;
    e.method = "ooe";
    return e;
}

Estimate oracle_single(const WMatrix& w, const LabeledDataset& d, std::span<const double> beta_true,
                       std::span<const double> theta_true, const ZeroStat& z) {
    check_whitened(d, "oracle_single");
    const double c_star = 2.0 * kernels::dot(beta_true, theta_true) / z.var_g;
    const Estimate tau2 = naive_tau2(w);
    Estimate e;
    e.value = tau2.value - c_star * z.value;
    e.method = "oracle_single";
    return e;
}

double var_selection_hat(double var_naive, std::span<const double> beta_sq_sel, std::size_t n,
                         const std::optional<std::vector<double>>& fourth_moments) {
    if (n < 2) throw std::invalid_argument("var_selection_hat: n >= 2 required");
    const double nn = static_cast<double>(n);
    if (!fourth_moments) {
        const double tau_b2 = kernels::sum(beta_sq_sel);
        return var_naive - 8.0 / nn * tau_b2 * tau_b2;
    }
    if (fourth_moments->size() != beta_sq_sel.size()) {
        throw std::invalid_argument("var_selection_hat: fourth_moments size mismatch");
    }
    double quartic = 0.0;
    for (std::size_t k = 0; k < beta_sq_sel.size(); ++k) {
        quartic += beta_sq_sel[k] * beta_sq_sel[k] * ((*fourth_moments)[k] - 1.0);
    }
    const double s = kernels::sum(beta_sq_sel);
    const double cross = s * s - kernels::sumsq(beta_sq_sel);  // sum over j != j'
    return var_naive - 4.0 / nn * (quartic + 2.0 * cross);
}

double var_single_hat(double var_naive_tilde, const WMatrix& w, const LabeledDataset& d,
                      const ZeroStat& z) {
    check_whitened(d, "var_single_hat");
    const auto g = g_rows(d, z.index_set);
    const double numerator = c_hat_raw(w, g, 1.0);  // the bracketed U-statistic itself
    return var_naive_tilde - numerator * numerator / z.var_g;
}

double monomial_zero_stat(const LabeledDataset& d, unsigned k1, unsigned k2,
                          double expected_moment) {
    if (d.p() < 2) throw std::invalid_argument("monomial_zero_stat: p >= 2 required");
    const std::size_t n = d.n();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double term = 1.0;
        for (unsigned k = 0; k < k1; ++k) term *= d.x(i, 0);
        for (unsigned k = 0; k < k2; ++k) term *= d.x(i, 1);
        acc += term - expected_moment;
    }
    return acc / static_cast<double>(n);
}

}  // namespace siglev
