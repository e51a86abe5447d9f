#include "siglev/simgen.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unistd.h>

#include "siglev/kernels.hpp"
#include "siglev/naive.hpp"
#include "siglev/rng.hpp"
#include "siglev/whitening.hpp"
#include "siglev/zeroest.hpp"

namespace siglev {

// ---------------------------------------------------------------------------
// quadrature constants
// ---------------------------------------------------------------------------

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
               double fb, double whole, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    return simpson(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
           simpson(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double eps) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson(f, a, b, fa, fm, fb, whole, eps, 48);
}

double expectation(CovariateDist dist, const std::function<double(double)>& h) {
    if (dist == CovariateDist::exp_centered) {
        // X = E - 1, E ~ Exp(1)
        auto f = [&](double t) { return std::exp(-t) * h(t - 1.0); };
        return adaptive_simpson(f, 0.0, 60.0, 1e-12);
    }
    auto f = [&](double z) {
        return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846) * h(z);
    };
    return adaptive_simpson(f, -12.0, 12.0, 1e-12);
}

}  // namespace

double kappa_x_sin_x(CovariateDist dist) {
    static const double exp_val =
        expectation(CovariateDist::exp_centered, [](double x) { return x * std::sin(x); });
    static const double gauss_val =
        expectation(CovariateDist::gaussian, [](double x) { return x * std::sin(x); });
    return dist == CovariateDist::exp_centered ? exp_val : gauss_val;
}

double mean_sin_x(CovariateDist dist) {
    static const double exp_val =
        expectation(CovariateDist::exp_centered, [](double x) { return std::sin(x); });
    static const double gauss_val =
        expectation(CovariateDist::gaussian, [](double x) { return std::sin(x); });
    return dist == CovariateDist::exp_centered ? exp_val : gauss_val;
}

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

std::string EstimatorSpec::label() const {
    if (name == "boot") return "boot:" + initial + ":" + select;
    if (name == "cmd") return "cmd:" + initial;
    if (name == "selection" && split) return "selection:split";
    return name;
}

void ScenarioConfig::validate() const {
    if (n < 2) throw std::invalid_argument("config field n: must be >= 2");
    if (p < 1) throw std::invalid_argument("config field p: must be >= 1");
    if (replications < 1) throw std::invalid_argument("config field replications: must be >= 1");
    if (!(tau2 > 0.0)) throw std::invalid_argument("config field tau2: must be > 0");
    if (sparsity < 0.0 || sparsity > 1.0)
        throw std::invalid_argument("config field sparsity: must be in [0, 1]");
    if (effective_k() >= p) throw std::invalid_argument("config field k_large: must be < p");
    if (estimators.empty()) throw std::invalid_argument("config field estimators: must not be empty");
    static const std::vector<std::string> known = {"naive",      "dicker",    "ooe",
                                                   "oracle_single", "single", "selection",
                                                   "selection_h",   "ridge",  "full_psi",
                                                   "boot",          "cmd"};
    for (const auto& e : estimators) {
        if (std::find(known.begin(), known.end(), e.name) == known.end()) {
            throw std::invalid_argument("config field estimators: unknown estimator \"" + e.name + "\"");
        }
    }
    if (unlabeled_n && *unlabeled_n < 2)
        throw std::invalid_argument("config field unlabeled_n: must be >= 2");
}

namespace {

nlohmann::json spec_to_json(const EstimatorSpec& e) {
    if (e.name == "boot") {
        return nlohmann::json{
            {"name", "boot"}, {"initial", e.initial}, {"m", e.boot_m}, {"select", e.select}};
    }
    if (e.split) return nlohmann::json{{"name", e.name}, {"split", true}};
    return nlohmann::json(e.name);
}

EstimatorSpec spec_from_json(const nlohmann::json& j) {
    EstimatorSpec e;
    if (j.is_string()) {
        e.name = j.get<std::string>();
        return e;
    }
    e.name = j.at("name").get<std::string>();
    if (j.contains("split")) e.split = j.at("split").get<bool>();
    if (j.contains("m")) e.boot_m = j.at("m").get<std::size_t>();
    if (j.contains("initial")) e.initial = j.at("initial").get<std::string>();
    if (j.contains("select")) e.select = j.at("select").get<std::string>();
    return e;
}

}  // namespace

std::string scenario_config_to_json(const ScenarioConfig& cfg) {
    nlohmann::json j;
    j["framework"] = cfg.framework == Framework::linear ? "linear" : "nonlinear";
    j["n"] = cfg.n;
    j["p"] = cfg.p;
    j["replications"] = cfg.replications;
    j["tau2"] = cfg.tau2;
    j["sparsity"] = cfg.sparsity;
    j["k_large"] = cfg.effective_k();
    j["covariate_dist"] = cfg.covariate_dist == CovariateDist::gaussian ? "gaussian" : "exp_centered";
    nlohmann::json est = nlohmann::json::array();
    for (const auto& e : cfg.estimators) est.push_back(spec_to_json(e));
    j["estimators"] = est;
    j["seed"] = cfg.seed;
    if (cfg.unlabeled_n) j["unlabeled_n"] = *cfg.unlabeled_n;
    if (cfg.bandwidth) j["bandwidth"] = *cfg.bandwidth;
    return j.dump();
}

ScenarioConfig scenario_config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
        throw std::invalid_argument(std::string("config parse error: ") + ex.what());
    }
    ScenarioConfig cfg;
    try {
        const auto fw = j.at("framework").get<std::string>();
        if (fw == "linear") {
            cfg.framework = Framework::linear;
        } else if (fw == "nonlinear") {
            cfg.framework = Framework::nonlinear;
        } else {
            throw std::invalid_argument("config field framework: expected linear|nonlinear");
        }
        cfg.n = j.at("n").get<std::size_t>();
        cfg.p = j.at("p").get<std::size_t>();
        cfg.replications = j.at("replications").get<std::size_t>();
        cfg.tau2 = j.at("tau2").get<double>();
        cfg.sparsity = j.at("sparsity").get<double>();
        if (j.contains("k_large")) cfg.k_large = j.at("k_large").get<std::size_t>();
        if (j.contains("covariate_dist")) {
            const auto cd = j.at("covariate_dist").get<std::string>();
            if (cd == "gaussian") {
                cfg.covariate_dist = CovariateDist::gaussian;
            } else if (cd == "exp_centered") {
                cfg.covariate_dist = CovariateDist::exp_centered;
            } else {
                throw std::invalid_argument("config field covariate_dist: expected gaussian|exp_centered");
            }
        }
        for (const auto& e : j.at("estimators")) cfg.estimators.push_back(spec_from_json(e));
        cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("unlabeled_n") && !j.at("unlabeled_n").is_null())
            cfg.unlabeled_n = j.at("unlabeled_n").get<std::size_t>();
        if (j.contains("bandwidth") && !j.at("bandwidth").is_null())
            cfg.bandwidth = j.at("bandwidth").get<std::size_t>();
    } catch (const nlohmann::json::exception& ex) {
        throw std::invalid_argument(std::string("config error: ") + ex.what());
    }
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// generators
// ---------------------------------------------------------------------------

namespace {

void fill_covariates(Matrix& x, Rng& rng, CovariateDist dist) {
    if (dist == CovariateDist::gaussian) {
        for (auto& v : x.data) v = rng.next_normal();
    } else {
        for (auto& v : x.data) v = rng.next_exp_centered();
    }
}

std::vector<double> theta_from_beta(const std::vector<double>& beta) {
    const double total = kernels::sum(beta);
    std::vector<double> theta(beta.size());
    for (std::size_t j = 0; j < beta.size(); ++j) theta[j] = total - beta[j];
    return theta;
}

}  // namespace

GeneratedData gen_linear(const ScenarioConfig& cfg, std::uint64_t replicate_index) {
    const std::size_t k = cfg.effective_k();
    if (cfg.p <= k) throw std::invalid_argument("gen_linear: p must exceed k_large");
    const double tau_b2 = cfg.sparsity * cfg.tau2;
    if (tau_b2 > cfg.tau2) throw std::invalid_argument("gen_linear: invalid sparsity split");

    GeneratedData out;
    out.beta_true.resize(cfg.p);
    const double big = std::sqrt(tau_b2 / static_cast<double>(k));
    const double small = std::sqrt((cfg.tau2 - tau_b2) / static_cast<double>(cfg.p - k));
    for (std::size_t j = 0; j < cfg.p; ++j) out.beta_true[j] = j < k ? big : small;
    out.theta_true = theta_from_beta(out.beta_true);

    out.data.x = Matrix(cfg.n, cfg.p);
    Rng rx(cfg.seed, streams::id(replicate_index, streams::covariates));
    fill_covariates(out.data.x, rx, cfg.covariate_dist);

    out.data.y.resize(cfg.n);
    Rng re(cfg.seed, streams::id(replicate_index, streams::noise));
    for (std::size_t i = 0; i < cfg.n; ++i) {
        out.data.y[i] = kernels::dot(out.data.x.row_span(i), out.beta_true) + re.next_normal();
    }
    out.data.whitened = false;
    return out;
}

GeneratedData gen_nonlinear(const ScenarioConfig& cfg, std::uint64_t replicate_index) {
    const std::size_t k = cfg.effective_k();
    if (cfg.p <= k) throw std::invalid_argument("gen_nonlinear: p must exceed k_large");
    const double eta = cfg.sparsity;
    if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("gen_nonlinear: invalid eta");

    const double kappa = kappa_x_sin_x(cfg.covariate_dist);
    const double one_k2 = (1.0 + kappa) * (1.0 + kappa);
    const double gamma_l = std::sqrt(eta * cfg.tau2 / (static_cast<double>(k) * one_k2));
    const double gamma_s =
        std::sqrt(cfg.tau2 * (1.0 - eta) / (static_cast<double>(cfg.p - k) * one_k2));

    GeneratedData out;
    out.beta_true.resize(cfg.p);
    for (std::size_t j = 0; j < cfg.p; ++j) {
        out.beta_true[j] = (j < k ? gamma_l : gamma_s) * (1.0 + kappa);
    }
    out.theta_true = theta_from_beta(out.beta_true);

    out.data.x = Matrix(cfg.n, cfg.p);
    Rng rx(cfg.seed, streams::id(replicate_index, streams::covariates));
    fill_covariates(out.data.x, rx, cfg.covariate_dist);

    // subtract the analytic response mean so that E(Y) = 0 exactly
    const double alpha = (gamma_l * static_cast<double>(k) +
                          gamma_s * static_cast<double>(cfg.p - k)) *
                         mean_sin_x(cfg.covariate_dist);
    out.data.y.resize(cfg.n);
    Rng re(cfg.seed, streams::id(replicate_index, streams::noise));
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const double* row = out.data.x.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) acc += gamma_l * (row[j] + std::sin(row[j]));
        for (std::size_t j = k; j < cfg.p; ++j) acc += gamma_s * (row[j] + std::sin(row[j]));
        out.data.y[i] = acc + re.next_normal() - alpha;
    }
    out.data.whitened = false;
    return out;
}

LabeledDataset make_synthetic_dataset(std::size_t rows, std::size_t p, double tau2, double eta,
                                      std::uint64_t seed, std::size_t k, CovariateDist dist) {
    ScenarioConfig cfg;
    cfg.framework = Framework::nonlinear;
    cfg.n = rows;
    cfg.p = p;
    cfg.tau2 = tau2;
    cfg.sparsity = eta;
    cfg.k_large = k;
    cfg.covariate_dist = dist;
    cfg.seed = seed;
    return gen_nonlinear(cfg, 0).data;
}

// ---------------------------------------------------------------------------
// estimator dispatch
// ---------------------------------------------------------------------------

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t replicate, streams::Channel channel) {
    return Rng(seed, streams::id(replicate, channel)).next_u64();
}

struct ReplicateCtx {
    const LabeledDataset* data = nullptr;  // whitened
    const WMatrix* w = nullptr;
    std::span<const double> beta_true;
    std::span<const double> theta_true;
    std::uint64_t seed = 0;
    std::uint64_t replicate = 0;

    mutable std::optional<std::vector<double>> beta_sq_cache;
    const std::vector<double>& beta_sq() const {
        if (!beta_sq_cache) beta_sq_cache = beta_sq_all(*w);
        return *beta_sq_cache;
    }
};

std::vector<std::size_t> full_index_set(std::size_t p) {
    std::vector<std::size_t> s(p);
    std::iota(s.begin(), s.end(), std::size_t{0});
    return s;
}

double evaluate_estimator(const EstimatorSpec& spec, const ReplicateCtx& ctx) {
    const LabeledDataset& d = *ctx.data;
    const WMatrix& w = *ctx.w;
    const std::size_t p = d.p();

    if (spec.name == "naive") return naive_tau2(w).value;
    if (spec.name == "dicker") return dicker_tau2(d);
    if (spec.name == "ooe") {
        if (ctx.beta_true.empty()) throw std::invalid_argument("ooe: generator truth unavailable");
        return oracle_ooe(w, d, ctx.beta_true).value;
    }
    if (spec.name == "oracle_single") {
        if (ctx.beta_true.empty() || ctx.theta_true.empty())
            throw std::invalid_argument("oracle_single: generator truth unavailable");
        const ZeroStat z = pairwise_zero_stat(d, full_index_set(p));
        return oracle_single(w, d, ctx.beta_true, ctx.theta_true, z).value;
    }
    if (spec.name == "single") {
        const ZeroStat z = pairwise_zero_stat(d, full_index_set(p));
        const double c = c_hat(w, d, z);
        return improve_single(naive_tau2(w), c, z, p).value;
    }
    if (spec.name == "selection") {
        const SelectionResult sel = gap_selection(ctx.beta_sq());
        std::optional<SplitSpec> split;
        if (spec.split) split = SplitSpec{derive_seed(ctx.seed, ctx.replicate, streams::split)};
        return t_selection_linear(w, d, sel, split).value;
    }
    if (spec.name == "selection_h") {
        const SelectionResult sel = gap_selection(ctx.beta_sq());
        if (sel.set.size() < 2) return naive_tau2(w).value;  // degenerate selection
        const ZeroStat z = pairwise_zero_stat(d, sel.set);
        const double c = c_hat(w, d, z);
        return improve_single(naive_tau2(w), c, z, p).value;
    }
    if (spec.name == "ridge") {
        return ridge_tau2(d, default_lambda_grid(d), 10,
                          derive_seed(ctx.seed, ctx.replicate, streams::folds));
    }
    if (spec.name == "full_psi") return t_full_psi(w, d).value;
    if (spec.name == "cmd") return external_estimator(spec.initial).fn(d);
    if (spec.name == "boot") {
        InitialEstimator init;
        if (spec.initial.rfind("cmd:", 0) == 0) {
            init = external_estimator(spec.initial.substr(4));
        } else {
            init = builtin_initial_estimator(spec.initial,
                                             derive_seed(ctx.seed, ctx.replicate, streams::folds));
        }
        std::vector<std::size_t> s;
        if (spec.select == "gap") {
            s = gap_selection(ctx.beta_sq()).set;
            if (s.size() < 2) return init.fn(d);  // degenerate selection: no correction
        } else {
            s = full_index_set(p);
        }
        BootstrapPlan plan;
        plan.m = spec.boot_m;
        plan.seed = derive_seed(ctx.seed, ctx.replicate, streams::bootstrap);
        return empirical_improve(d, init, plan, std::move(s)).value;
    }
    throw std::invalid_argument("unknown estimator: " + spec.name);
}

// ---------------------------------------------------------------------------
// aggregation
// ---------------------------------------------------------------------------

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

EstimatorSummary summarize(const std::string& name, const std::vector<double>& values,
                           const std::vector<std::string>& errors, double tau2_true) {
    EstimatorSummary s;
    s.name = name;
    s.values = values;
    s.errors = errors;
    std::vector<double> ok;
    for (std::size_t r = 0; r < values.size(); ++r) {
        if (errors[r].empty()) {
            ok.push_back(values[r]);
        } else {
            ++s.failed;
        }
    }
    s.completed = ok.size();
    if (ok.empty()) return s;

    const double nr = static_cast<double>(ok.size());
    s.mean = kernels::sum(ok) / nr;
    s.bias = s.mean - tau2_true;
    double err2 = 0.0;
    for (double v : ok) err2 += (v - tau2_true) * (v - tau2_true);
    s.rmse = std::sqrt(err2 / nr);
    if (ok.size() >= 2) {
        double acc = 0.0;
        for (double v : ok) acc += (v - s.mean) * (v - s.mean);
        s.se = std::sqrt(acc / (nr - 1.0));
        std::vector<double> errs(ok.size());
        for (std::size_t i = 0; i < ok.size(); ++i) errs[i] = ok[i] - tau2_true;
        s.rmse_se = rmse_se_delta(errs);
    } else {
        s.rmse = std::abs(s.bias);
    }
    return s;
}

void attach_pct_changes(std::vector<EstimatorSummary>& summaries) {
    if (summaries.empty() || summaries[0].completed == 0) return;
    const double base_rmse = summaries[0].rmse;
    const double base_mse = base_rmse * base_rmse;
    for (auto& s : summaries) {
        if (s.completed == 0 || base_rmse <= 0.0) continue;
        s.pct_change = 100.0 * (s.rmse - base_rmse) / base_rmse;
        s.mse_pct_change = 100.0 * (s.rmse * s.rmse - base_mse) / base_mse;
    }
}

void run_replicates(std::size_t reps, std::size_t threads,
                    const std::function<void(std::size_t)>& body) {
    if (threads <= 1) {
        for (std::size_t r = 0; r < reps; ++r) body(r);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t r = next.fetch_add(1);
            if (r >= reps) break;
            body(r);
        }
    };
    std::vector<std::thread> pool;
    const std::size_t count = std::min(threads, reps);
    pool.reserve(count);
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

}  // namespace

std::optional<double> rmse_se_delta(std::span<const double> errors) {
    const std::size_t r = errors.size();
    if (r < 2) return std::nullopt;
    std::vector<double> sq(r);
    for (std::size_t i = 0; i < r; ++i) sq[i] = errors[i] * errors[i];
    const double rr = static_cast<double>(r);
    const double mean_sq = kernels::sum(sq) / rr;
    const double rmse = std::sqrt(mean_sq);
    if (rmse == 0.0) return std::nullopt;
    double acc = 0.0;
    for (double v : sq) acc += (v - mean_sq) * (v - mean_sq);
    const double sd = std::sqrt(acc / (rr - 1.0));
    return sd / (2.0 * rmse * std::sqrt(rr));
}

// ---------------------------------------------------------------------------
// scenario runner
// ---------------------------------------------------------------------------

ScenarioSummary run_scenario(const ScenarioConfig& cfg, std::size_t threads) {
    cfg.validate();
    const std::size_t reps = cfg.replications;
    const std::size_t n_est = cfg.estimators.size();

    std::vector<std::vector<double>> values(n_est, std::vector<double>(reps, kNaN));
    std::vector<std::vector<std::string>> errors(n_est, std::vector<std::string>(reps));

    auto body = [&](std::size_t r) {
        GeneratedData gen = cfg.framework == Framework::linear ? gen_linear(cfg, r)
                                                               : gen_nonlinear(cfg, r);
        LabeledDataset dw;
        if (cfg.unlabeled_n) {
            UnlabeledDataset u;
            u.x = Matrix(*cfg.unlabeled_n, cfg.p);
            Rng ru(cfg.seed, streams::id(r, streams::unlabeled));
            fill_covariates(u.x, ru, cfg.covariate_dist);
            const CovariateModel model = estimate_moments(u, cfg.bandwidth);
            dw = whiten(model, gen.data);
        } else {
            dw = whiten(CovariateModel::identity(cfg.p), gen.data);
        }
        const WMatrix w = w_matrix(dw);
        ReplicateCtx ctx;
        ctx.data = &dw;
        ctx.w = &w;
        ctx.beta_true = gen.beta_true;
        ctx.theta_true = gen.theta_true;
        ctx.seed = cfg.seed;
        ctx.replicate = r;
        for (std::size_t e = 0; e < n_est; ++e) {
            try {
                values[e][r] = evaluate_estimator(cfg.estimators[e], ctx);
            } catch (const std::exception& ex) {
                errors[e][r] = ex.what();
            }
        }
    };
    run_replicates(reps, threads, body);

    ScenarioSummary out;
    out.config_json = scenario_config_to_json(cfg);
    out.seed = cfg.seed;
    out.tau2_true = cfg.tau2;
    out.replications = reps;
    for (std::size_t e = 0; e < n_est; ++e) {
        out.estimators.push_back(
            summarize(cfg.estimators[e].label(), values[e], errors[e], cfg.tau2));
        if (out.estimators.back().failed > 0) out.incomplete = true;
    }
    attach_pct_changes(out.estimators);
    return out;
}

// ---------------------------------------------------------------------------
// real-data protocol
// ---------------------------------------------------------------------------

double full_data_tau2_reference(const LabeledDataset& d) {
    const std::size_t n = d.n(), p = d.p();
    if (n <= p) {
        throw std::runtime_error(
            "full-data least squares needs more rows than columns; reduce p or add data");
    }
    using EigenRowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const EigenRowMat> x(d.x.data.data(), static_cast<Eigen::Index>(n),
                                    static_cast<Eigen::Index>(p));
    Eigen::Map<const Eigen::VectorXd> y(d.y.data(), static_cast<Eigen::Index>(n));
    Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
    Eigen::VectorXd yc = y.array() - y.mean();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xc);
    if (qr.rank() < static_cast<Eigen::Index>(p)) {
        throw std::runtime_error(
            "full-data least squares is rank deficient; run collinearity pruning (drop_collinear) first");
    }
    Eigen::VectorXd beta = qr.solve(yc);
    // tau^2 = beta^T Sigma-hat beta with the plug-in covariance (divide by N)
    return (xc * beta).squaredNorm() / static_cast<double>(n);
}

namespace {

struct SubsampleParts {
    LabeledDataset labeled;    // whitened, response centered by labeled mean
    CovariateModel model;
};

SubsampleParts draw_subsample(const LabeledDataset& d, std::size_t n_sub, std::uint64_t seed,
                              std::size_t replicate, std::optional<std::size_t> bandwidth) {
    const std::size_t total = d.n(), p = d.p();
    std::vector<std::size_t> perm(total);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed, streams::id(replicate, streams::subsample));
    for (std::size_t i = 0; i < n_sub; ++i) {
        const std::size_t k = i + static_cast<std::size_t>(rng.next_below(total - i));
        std::swap(perm[i], perm[k]);
    }

    LabeledDataset lab;
    lab.x = Matrix(n_sub, p);
    lab.y.resize(n_sub);
    for (std::size_t i = 0; i < n_sub; ++i) {
        const std::size_t src = perm[i];
        std::copy(d.x.row(src), d.x.row(src) + p, lab.x.row(i));
        lab.y[i] = d.y[src];
    }
    UnlabeledDataset unlab;
    unlab.x = Matrix(total - n_sub, p);
    for (std::size_t i = n_sub; i < total; ++i) {
        std::copy(d.x.row(perm[i]), d.x.row(perm[i]) + p, unlab.x.row(i - n_sub));
    }

    SubsampleParts parts;
    parts.model = estimate_moments(unlab, bandwidth);
    parts.labeled = whiten(parts.model, lab);
    const double y_mean = kernels::sum(parts.labeled.y) / static_cast<double>(n_sub);
    for (auto& v : parts.labeled.y) v -= y_mean;
    return parts;
}

void check_subsample_args(const LabeledDataset& d, std::size_t n_sub, std::size_t reps,
                          std::optional<std::size_t> bandwidth) {
    if (reps < 2) throw std::invalid_argument("subsample study: reps >= 2 required");
    if (n_sub < 3) throw std::invalid_argument("subsample study: n_sub >= 3 required");
    if (n_sub >= d.n()) {
        throw std::invalid_argument(
            "subsample study: n_sub must leave unlabeled rows (moments not estimable otherwise)");
    }
    const std::size_t rest = d.n() - n_sub;
    if (!bandwidth && rest < d.p() + 1) {
        throw std::invalid_argument(
            "subsample study: unlabeled remainder too small for full covariance estimation");
    }
}

}  // namespace

ScenarioSummary subsample_study(const LabeledDataset& d, std::size_t n_sub, std::size_t reps,
                                const std::vector<EstimatorSpec>& estimators, std::uint64_t seed,
                                std::optional<std::size_t> bandwidth, std::size_t threads) {
    check_subsample_args(d, n_sub, reps, bandwidth);
    if (estimators.empty()) throw std::invalid_argument("subsample study: no estimators");
    const double tau2_ref = full_data_tau2_reference(d);
    const std::size_t n_est = estimators.size();

    std::vector<std::vector<double>> values(n_est, std::vector<double>(reps, kNaN));
    std::vector<std::vector<std::string>> errors(n_est, std::vector<std::string>(reps));

    auto body = [&](std::size_t r) {
        SubsampleParts parts = draw_subsample(d, n_sub, seed, r, bandwidth);
        const WMatrix w = w_matrix(parts.labeled);
        ReplicateCtx ctx;
        ctx.data = &parts.labeled;
        ctx.w = &w;
        ctx.seed = seed;
        ctx.replicate = r;
        for (std::size_t e = 0; e < n_est; ++e) {
            try {
                values[e][r] = evaluate_estimator(estimators[e], ctx);
            } catch (const std::exception& ex) {
                errors[e][r] = ex.what();
            }
        }
    };
    run_replicates(reps, threads, body);

    ScenarioSummary out;
    nlohmann::json cfg;
    cfg["study"] = "subsample";
    cfg["n_sub"] = n_sub;
    cfg["reps"] = reps;
    cfg["seed"] = seed;
    if (bandwidth) cfg["bandwidth"] = *bandwidth;
    cfg["tau2_reference"] = tau2_ref;
    out.config_json = cfg.dump();
    out.seed = seed;
    out.tau2_true = tau2_ref;
    out.replications = reps;
    for (std::size_t e = 0; e < n_est; ++e) {
        out.estimators.push_back(summarize(estimators[e].label(), values[e], errors[e], tau2_ref));
        if (out.estimators.back().failed > 0) out.incomplete = true;
    }
    attach_pct_changes(out.estimators);
    return out;
}

CorrelationTable correlation_study(const LabeledDataset& d, std::size_t n_sub, std::size_t reps,
                                   const std::vector<EstimatorSpec>& initial_estimators,
                                   const std::vector<std::string>& zero_estimators,
                                   std::uint64_t seed, std::optional<std::size_t> bandwidth,
                                   std::size_t threads) {
    check_subsample_args(d, n_sub, reps, bandwidth);
    if (initial_estimators.empty() || zero_estimators.empty()) {
        throw std::invalid_argument("correlation study: need at least one initial and one zero estimator");
    }
    for (const auto& z : zero_estimators) {
        if (z != "single" && z != "selection") {
            throw std::invalid_argument("correlation study: zero estimator must be single|selection");
        }
    }

    const std::size_t n_init = initial_estimators.size(), n_zero = zero_estimators.size();
    std::vector<std::vector<double>> init_vals(n_init, std::vector<double>(reps, kNaN));
    std::vector<std::vector<double>> zero_vals(n_zero, std::vector<double>(reps, kNaN));

    auto body = [&](std::size_t r) {
        SubsampleParts parts = draw_subsample(d, n_sub, seed, r, bandwidth);
        const WMatrix w = w_matrix(parts.labeled);
        ReplicateCtx ctx;
        ctx.data = &parts.labeled;
        ctx.w = &w;
        ctx.seed = seed;
        ctx.replicate = r;
        for (std::size_t e = 0; e < n_init; ++e) {
            try {
                init_vals[e][r] = evaluate_estimator(initial_estimators[e], ctx);
            } catch (const std::exception&) {
                // left as NaN; the pair is dropped from the correlation
            }
        }
        for (std::size_t z = 0; z < n_zero; ++z) {
            std::vector<std::size_t> set;
            if (zero_estimators[z] == "single") {
                set = full_index_set(d.p());
            } else {
                set = gap_selection(ctx.beta_sq()).set;
            }
            if (set.size() < 2) {
                zero_vals[z][r] = 0.0;  // degenerate zero-estimator is identically 0
            } else {
                double acc = 0.0;
                for (std::size_t i = 0; i < parts.labeled.n(); ++i) {
                    acc += pairwise_g_row(parts.labeled.x.row_span(i), set);
                }
                zero_vals[z][r] = acc / static_cast<double>(parts.labeled.n());
            }
        }
    };
    run_replicates(reps, threads, body);

    CorrelationTable table;
    for (const auto& e : initial_estimators) table.initial_names.push_back(e.label());
    table.zero_names = zero_estimators;
    table.corr.assign(n_init, std::vector<std::optional<double>>(n_zero));
    for (std::size_t e = 0; e < n_init; ++e) {
        for (std::size_t z = 0; z < n_zero; ++z) {
            std::vector<double> a, b;
            for (std::size_t r = 0; r < reps; ++r) {
                if (std::isnan(init_vals[e][r]) || std::isnan(zero_vals[z][r])) continue;
                a.push_back(init_vals[e][r]);
                b.push_back(zero_vals[z][r]);
            }
            if (a.size() < 2) continue;
            const double nr = static_cast<double>(a.size());
            const double ma = kernels::sum(a) / nr, mb = kernels::sum(b) / nr;
            double saa = 0.0, sbb = 0.0, sab = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                saa += (a[i] - ma) * (a[i] - ma);
                sbb += (b[i] - mb) * (b[i] - mb);
                sab += (a[i] - ma) * (b[i] - mb);
            }
            if (saa <= 0.0 || sbb <= 0.0) continue;  // zero-variance column: flagged absent
            table.corr[e][z] = sab / std::sqrt(saa * sbb);
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// initial estimators (built-in and external)
// ---------------------------------------------------------------------------

namespace {

// Multiplicity-weighted naive estimator over distinct original rows: the
// tie-aware evaluation used when bootstrap resamples carry repeated rows.
double naive_tau2_weighted(const LabeledDataset& d, std::span<const std::size_t> counts) {
    const std::size_t n = d.n(), p = d.p();
    std::vector<double> w_row(p), col_sums(p, 0.0);
    double diag = 0.0, total_draws = 0.0, sq_counts = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = static_cast<double>(counts[i]);
        if (m == 0.0) continue;
        kernels::scale(d.y[i], d.x.row_span(i), w_row);
        kernels::axpy(m, w_row, col_sums);
        diag += m * m * kernels::sumsq(w_row);
        total_draws += m;
        sq_counts += m * m;
    }
    const double pairs = total_draws * total_draws - sq_counts;
    return (kernels::sumsq(col_sums) - diag) / pairs;
}

}  // namespace

InitialEstimator builtin_initial_estimator(const std::string& name, std::uint64_t seed) {
    if (name == "naive") {
        InitialEstimator est;
        est.name = "naive";
        est.fn = [](const LabeledDataset& d) { return naive_tau2(w_matrix(d)).value; };
        est.weighted_fn = naive_tau2_weighted;
        return est;
    }
    if (name == "ridge") {
        InitialEstimator est;
        est.name = "ridge";
        est.fn = [seed](const LabeledDataset& d) {
            return ridge_tau2(d, default_lambda_grid(d), 10, seed);
        };
        return est;
    }
    throw std::invalid_argument("unknown initial estimator: " + name);
}

InitialEstimator external_estimator(const std::string& command) {
    auto fn = [command](const LabeledDataset& d) -> double {
        char in_path[] = "/tmp/siglev_in_XXXXXX";
        char out_path[] = "/tmp/siglev_out_XXXXXX";
        int in_fd = mkstemp(in_path);
        int out_fd = mkstemp(out_path);
        if (in_fd < 0 || out_fd < 0) throw std::runtime_error("external estimator: mkstemp failed");
        close(in_fd);
        close(out_fd);
        write_csv(d, in_path);
        const std::string cmdline = command + " < " + in_path + " > " + std::string(out_path);
        const int rc = std::system(cmdline.c_str());
        std::string text;
        {
            std::ifstream in(out_path);
            std::stringstream ss;
            ss << in.rdbuf();
            text = ss.str();
        }
        std::remove(in_path);
        std::remove(out_path);
        if (rc != 0) throw std::runtime_error("external estimator failed: " + command);
        // first token must parse as a finite real
        std::istringstream ss(text);
        std::string tok;
        if (!(ss >> tok)) throw std::runtime_error("external estimator produced no output: " + command);
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
            throw std::runtime_error("external estimator output not a real number: " + tok);
        }
        return v;
    };
    InitialEstimator est;
    est.name = "cmd:" + command;
    est.fn = fn;
    return est;
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

nlohmann::json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json();
}

}  // namespace

std::string ScenarioSummary::to_json(bool include_values) const {
    nlohmann::json j;
    j["version"] = "0.1.0";
    j["config"] = nlohmann::json::parse(config_json);
    j["seed"] = seed;
    j["tau2_true"] = tau2_true;
    j["replications"] = replications;
    j["incomplete"] = incomplete;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : estimators) {
        nlohmann::json row;
        row["estimator"] = s.name;
        row["completed"] = s.completed;
        row["failed"] = s.failed;
        row["mean"] = s.mean;
        row["bias"] = s.bias;
        row["se"] = opt_json(s.se);
        row["rmse"] = s.rmse;
        row["rmse_se"] = opt_json(s.rmse_se);
        row["pct_change"] = opt_json(s.pct_change);
        row["mse_pct_change"] = opt_json(s.mse_pct_change);
        if (include_values) {
            nlohmann::json vals = nlohmann::json::array();
            for (std::size_t r = 0; r < s.values.size(); ++r) {
                if (s.errors[r].empty()) {
                    vals.push_back(s.values[r]);
                } else {
                    vals.push_back(nullptr);
                }
            }
            row["values"] = vals;
        }
        rows.push_back(row);
    }
    j["estimators"] = rows;
    return j.dump();
}

std::string ScenarioSummary::to_csv() const {
    std::string out = "Estimator,Mean,SE,RMSE,RMSE_SE,PctChange\n";
    for (const auto& s : estimators) {
        out += s.name + ',' + fmt(s.mean) + ',';
        out += (s.se ? fmt(*s.se) : std::string()) + ',';
        out += fmt(s.rmse) + ',';
        out += (s.rmse_se ? fmt(*s.rmse_se) : std::string()) + ',';
        out += (s.pct_change ? fmt(*s.pct_change) : std::string()) + '\n';
    }
    return out;
}

std::string ScenarioSummary::to_csv_mse() const {
    std::string out = "Estimator,Mean,MSE,PctChange\n";
    for (const auto& s : estimators) {
        out += s.name + ',' + fmt(s.mean) + ',' + fmt(s.rmse * s.rmse) + ',';
        out += (s.mse_pct_change ? fmt(*s.mse_pct_change) : std::string()) + '\n';
    }
    return out;
}

std::string ScenarioSummary::replicate_csv() const {
    std::string out = "replicate";
    for (const auto& s : estimators) out += ',' + s.name;
    out += '\n';
    for (std::size_t r = 0; r < replications; ++r) {
        out += std::to_string(r);
        for (const auto& s : estimators) {
            out += ',';
            if (s.errors[r].empty()) out += fmt(s.values[r]);
        }
        out += '\n';
    }
    return out;
}

std::string CorrelationTable::to_json() const {
    nlohmann::json j;
    j["version"] = "0.1.0";
    j["initial"] = initial_names;
    j["zero"] = zero_names;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : corr) {
        nlohmann::json r = nlohmann::json::array();
        for (const auto& c : row) r.push_back(c ? nlohmann::json(*c) : nlohmann::json());
        rows.push_back(r);
    }
    j["corr"] = rows;
    return j.dump();
}

std::string CorrelationTable::to_csv() const {
    std::string out = "initial";
    for (const auto& z : zero_names) out += ',' + z;
    out += '\n';
    for (std::size_t e = 0; e < initial_names.size(); ++e) {
        out += initial_names[e];
        for (std::size_t z = 0; z < zero_names.size(); ++z) {
            out += ',';
            if (corr[e][z]) out += fmt(*corr[e][z]);
        }
        out += '\n';
    }
    return out;
}

}  // namespace siglev
