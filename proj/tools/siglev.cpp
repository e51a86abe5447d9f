// siglev: signal- and noise-level estimation for high-dimensional regression
// in the semi-supervised setting, plus the Monte Carlo benchmark harness.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "siglev/bootstrap.hpp"
#include "siglev/dataset.hpp"
#include "siglev/errors.hpp"
#include "siglev/naive.hpp"
#include "siglev/simgen.hpp"
#include "siglev/whitening.hpp"
#include "siglev/zeroest.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using namespace siglev;

struct OutputOpts {
    std::string path;       // empty = stdout
    std::string format = "csv";  // csv | json
    bool quiet = false;
};

void add_output_opts(CLI::App* cmd, OutputOpts& out) {
    cmd->add_option("-o,--output", out.path, "Output file (default: stdout)");
    cmd->add_option("--format", out.format, "Output format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_flag("-q,--quiet", out.quiet, "Suppress progress notes on stderr");
}

void emit(const OutputOpts& out, const std::string& text) {
    if (out.path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(out.path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file: " + out.path);
    f << text;
}

std::string artifact_header(std::uint64_t seed, const std::string& config_json) {
    std::string h = "# siglev ";
    h += kVersion;
    h += "\n# seed: " + std::to_string(seed);
    h += "\n# config: " + config_json + "\n";
    return h;
}

ColumnRef parse_column_ref(const std::string& s) {
    if (!s.empty() && s.find_first_not_of("0123456789") == std::string::npos) {
        return static_cast<std::size_t>(std::stoull(s));
    }
    return s;
}

LabeledDataset load_any(const std::string& path, const std::string& response, bool no_header) {
    if (path.size() > 4 && path.substr(path.size() - 4) == ".bin") return load_cache(path);
    if (response.empty()) throw std::invalid_argument("--response is required for CSV input");
    return load_csv(path, parse_column_ref(response), !no_header);
}

EstimatorSpec parse_estimator_token(const std::string& tok) {
    EstimatorSpec e;
    if (tok.rfind("cmd:", 0) == 0) {
        e.name = "cmd";
        e.initial = tok.substr(4);
        return e;
    }
    if (tok.rfind("boot", 0) == 0) {
        e.name = "boot";
        std::stringstream ss(tok);
        std::string part;
        std::getline(ss, part, ':');  // "boot"
        if (std::getline(ss, part, ':') && !part.empty()) e.initial = part;
        if (std::getline(ss, part, ':') && !part.empty()) e.select = part;
        if (std::getline(ss, part, ':') && !part.empty()) e.boot_m = std::stoull(part);
        return e;
    }
    if (tok == "selection:split") {
        e.name = "selection";
        e.split = true;
        return e;
    }
    e.name = tok;
    return e;
}

std::vector<EstimatorSpec> parse_estimator_list(const std::string& csv) {
    std::vector<EstimatorSpec> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(parse_estimator_token(tok));
    }
    if (out.empty()) throw std::invalid_argument("empty estimator list");
    return out;
}

// moments source shared by estimate/improve
struct MomentsOpts {
    std::string unlabeled_path;
    std::string moments_path;
    bool known_identity = false;
    std::optional<std::size_t> bandwidth;
    bool no_header = false;
};

void add_moments_opts(CLI::App* cmd, MomentsOpts& m) {
    cmd->add_option("--unlabeled", m.unlabeled_path, "Unlabeled covariate CSV for moment estimation");
    cmd->add_option("--moments", m.moments_path, "Covariate model JSON (mu/sigma)");
    cmd->add_flag("--known-identity", m.known_identity, "Assume E(X)=0, Cov(X)=I");
    cmd->add_option("--bandwidth", m.bandwidth, "Band limit for the covariance estimate");
}

CovariateModel resolve_model(const MomentsOpts& m, std::size_t p) {
    const int sources = int(!m.unlabeled_path.empty()) + int(!m.moments_path.empty()) +
                        int(m.known_identity);
    if (sources != 1) {
        throw std::invalid_argument("choose exactly one of --unlabeled, --moments, --known-identity");
    }
    if (m.known_identity) return CovariateModel::identity(p);
    if (!m.moments_path.empty()) {
        std::ifstream in(m.moments_path);
        if (!in) throw std::invalid_argument("cannot open moments file: " + m.moments_path);
        std::stringstream ss;
        ss << in.rdbuf();
        return covariate_model_from_json(ss.str());
    }
    const auto u = load_unlabeled_csv(m.unlabeled_path, !m.no_header);
    return estimate_moments(u, m.bandwidth);
}

// --------------------------------------------------------------------------
// estimate
// --------------------------------------------------------------------------

std::vector<std::size_t> load_index_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open index file: " + path);
    std::vector<std::size_t> idx;
    std::size_t v = 0;
    while (in >> v) idx.push_back(v);
    if (idx.empty()) throw std::invalid_argument("index file is empty: " + path);
    return idx;
}

int run_estimate(const std::string& data_path, const std::string& response, bool no_header,
                 const MomentsOpts& moments, const std::string& estimators,
                 const std::string& var_form, const std::string& select,
                 const std::string& var_source, bool split, std::uint64_t seed,
                 const std::string& save_moments, const OutputOpts& out) {
    LabeledDataset raw = load_any(data_path, response, no_header);
    CovariateModel model = resolve_model(moments, raw.p());
    if (model.p() != raw.p()) throw std::invalid_argument("moments dimension does not match data");
    if (!save_moments.empty()) {
        std::ofstream mf(save_moments);
        mf << covariate_model_to_json(model) << "\n";
    }
    LabeledDataset dw = whiten(model, raw);
    const WMatrix w = w_matrix(dw);
    const Estimate naive = naive_tau2(w);
    const double sy2 = sigma_y2_hat(dw);
    const std::size_t n = dw.n(), p = dw.p();

    const double var_tilde = n >= 3 ? var_naive_ustat_hat(w) : 0.0;
    const double var_gauss = var_naive_gaussian_hat(naive.value, sy2, n, p);
    const bool use_gauss = var_form == "gaussian";

    const VarSource vsrc = var_source == "empirical" ? VarSource::empirical_unlabeled
                                                     : VarSource::analytic_independent;
    std::optional<UnlabeledDataset> u_white;
    if (vsrc == VarSource::empirical_unlabeled) {
        if (moments.unlabeled_path.empty()) {
            throw std::invalid_argument("--var-source empirical requires --unlabeled data");
        }
        u_white = whiten(model, load_unlabeled_csv(moments.unlabeled_path, !moments.no_header));
    }
    const UnlabeledDataset* u_ptr = u_white ? &*u_white : nullptr;

    auto selection_set = [&]() -> SelectionResult {
        if (select == "all") {
            SelectionResult r;
            r.procedure = SelectionProcedure::all;
            r.set.resize(p);
            for (std::size_t j = 0; j < p; ++j) r.set[j] = j;
            return r;
        }
        if (select.rfind("file:", 0) == 0) {
            SelectionResult r;
            r.procedure = SelectionProcedure::external;
            r.set = load_index_file(select.substr(5));
            return r;
        }
        return gap_selection(beta_sq_all(w));
    };

    nlohmann::json records = nlohmann::json::array();
    std::string csv = "estimator,tau2,sigma2,variance_hat,raw_variance_hat,selection_set\n";
    const auto specs = parse_estimator_list(estimators);
    for (const auto& spec : specs) {
        Estimate est;
        if (spec.name == "naive") {
            est = naive;
            est.set_variance(use_gauss ? var_gauss : var_tilde);
        } else if (spec.name == "dicker") {
            est.value = dicker_tau2(dw);
            est.method = "dicker";
        } else if (spec.name == "single") {
            const std::vector<std::size_t> all = [&] {
                std::vector<std::size_t> v(p);
                for (std::size_t j = 0; j < p; ++j) v[j] = j;
                return v;
            }();
            const ZeroStat z = pairwise_zero_stat(dw, all, vsrc, u_ptr);
            const double c = c_hat(w, dw, z);
            est = improve_single(naive, c, z, p);
            est.set_variance(var_single_hat(var_tilde, w, dw, z));
        } else if (spec.name == "selection" || spec.name == "selection_h") {
            const auto beta_sq = beta_sq_all(w);
            const SelectionResult sel = selection_set();
            if (spec.name == "selection") {
                std::optional<SplitSpec> split_spec;
                if (split || spec.split) split_spec = SplitSpec{seed};
                est = t_selection_linear(w, dw, sel, split_spec);
                std::vector<double> bsel;
                for (auto j : *est.selection_set) bsel.push_back(beta_sq[j]);
                est.set_variance(var_selection_hat(use_gauss ? var_gauss : var_tilde, bsel, n));
            } else {
                if (sel.set.size() < 2) {
                    est = naive;
                    est.method = "selection_h";
                    est.selection_set = sel.set;
                } else {
                    const ZeroStat z = pairwise_zero_stat(dw, sel.set, vsrc, u_ptr);
                    est = improve_single(naive, c_hat(w, dw, z), z, p);
                    est.set_variance(var_single_hat(var_tilde, w, dw, z));
                }
            }
        } else if (spec.name == "full_psi") {
            est = t_full_psi(w, dw);
        } else if (spec.name == "cmd") {
            est.value = external_estimator(spec.initial).fn(dw);
            est.method = "cmd:" + spec.initial;
        } else {
            throw std::invalid_argument("estimate: unsupported estimator " + spec.name);
        }
        Estimate sig = sigma2_hat(dw, est);

        nlohmann::json rec;
        rec["estimator"] = spec.label();
        rec["tau2"] = nlohmann::json::parse(estimate_to_json(est));
        rec["sigma2"] = nlohmann::json::parse(estimate_to_json(sig));
        records.push_back(rec);

        char num[64];
        csv += spec.label() + ',';
        std::snprintf(num, sizeof num, "%.10g,", est.value);
        csv += num;
        std::snprintf(num, sizeof num, "%.10g,", sig.value);
        csv += num;
        if (est.variance_hat) {
            std::snprintf(num, sizeof num, "%.10g", *est.variance_hat);
            csv += num;
        }
        csv += ',';
        if (est.raw_variance_hat) {
            std::snprintf(num, sizeof num, "%.10g", *est.raw_variance_hat);
            csv += num;
        }
        csv += ',' + std::to_string(est.selection_set ? est.selection_set->size() : std::size_t{0}) + '\n';
    }

    nlohmann::json cfg;
    cfg["command"] = "estimate";
    cfg["data"] = data_path;
    cfg["estimators"] = estimators;
    cfg["var_form"] = var_form;
    if (out.format == "json") {
        nlohmann::json j;
        j["version"] = kVersion;
        j["seed"] = seed;
        j["config"] = cfg;
        j["records"] = records;
        emit(out, j.dump() + "\n");
    } else {
        emit(out, artifact_header(seed, cfg.dump()) + csv);
    }
    return 0;
}

// --------------------------------------------------------------------------
// improve
// --------------------------------------------------------------------------

int run_improve(const std::string& data_path, const std::string& response, bool no_header,
                const MomentsOpts& moments, const std::string& initial, std::size_t m,
                std::uint64_t seed, const std::string& select, const OutputOpts& out) {
    LabeledDataset raw = load_any(data_path, response, no_header);
    CovariateModel model = resolve_model(moments, raw.p());
    LabeledDataset dw = whiten(model, raw);

    InitialEstimator est = initial.rfind("cmd:", 0) == 0 ? external_estimator(initial.substr(4))
                                                         : builtin_initial_estimator(initial, seed);
    std::vector<std::size_t> s;
    if (select == "gap") {
        const WMatrix w = w_matrix(dw);
        s = gap_selection(beta_sq_all(w)).set;
        if (s.size() < 2) throw degenerate_zero_estimator("gap selection chose fewer than 2 covariates");
    } else {
        s.resize(dw.p());
        for (std::size_t j = 0; j < dw.p(); ++j) s[j] = j;
    }
    BootstrapPlan plan{m, seed};
    const Estimate improved = empirical_improve(dw, est, plan, std::move(s));

    nlohmann::json cfg;
    cfg["command"] = "improve";
    cfg["initial"] = initial;
    cfg["M"] = m;
    cfg["select"] = select;
    if (out.format == "json") {
        nlohmann::json j;
        j["version"] = kVersion;
        j["seed"] = seed;
        j["config"] = cfg;
        j["record"] = nlohmann::json::parse(estimate_to_json(improved));
        emit(out, j.dump() + "\n");
    } else {
        char line[128];
        std::snprintf(line, sizeof line, "estimator,value\n%s,%.10g\n", improved.method.c_str(),
                      improved.value);
        emit(out, artifact_header(seed, cfg.dump()) + line);
    }
    return 0;
}

// --------------------------------------------------------------------------
// preprocess
// --------------------------------------------------------------------------

int run_preprocess(const std::string& in_path, const std::string& response, bool no_header,
                   const std::string& out_path, const std::string& cache_out, bool log_response,
                   bool center_response, const std::string& interactions, double collinear_tol,
                   bool quiet) {
    LabeledDataset d = load_any(in_path, response, no_header);
    if (log_response) {
        for (auto& v : d.y) {
            if (v <= -1.0) throw std::invalid_argument("log-response requires y > -1 (uses log1p)");
            v = std::log1p(v);
        }
    }
    if (center_response) {
        double mean = 0.0;
        for (double v : d.y) mean += v;
        mean /= static_cast<double>(d.n());
        for (auto& v : d.y) v -= mean;
    }
    if (interactions == "all") {
        d = add_pairwise_interactions(d);
    } else if (interactions.rfind("top:", 0) == 0) {
        const std::size_t k = std::stoull(interactions.substr(4));
        d = add_pairwise_interactions(d, top_t_value_columns(d, k));
    } else if (interactions != "none") {
        throw std::invalid_argument("--interactions must be all, top:<k>, or none");
    }
    std::size_t before = d.p();
    std::vector<std::size_t> kept;
    if (collinear_tol > 0.0) {
        auto [pruned, k] = drop_collinear(d, collinear_tol);
        d = std::move(pruned);
        kept = std::move(k);
    }
    if (!out_path.empty()) write_csv(d, out_path);
    if (!cache_out.empty()) save_cache(d, cache_out);
    if (!quiet) {
        std::cerr << "preprocess: " << d.n() << " rows, " << before << " -> " << d.p()
                  << " columns\n";
    }
    return 0;
}

// --------------------------------------------------------------------------
// simulate / realbench / correlate
// --------------------------------------------------------------------------

int run_simulate(const std::string& config_path, std::optional<std::uint64_t> seed_override,
                 std::size_t threads, const std::string& replicates_out, const OutputOpts& out) {
    std::ifstream in(config_path);
    if (!in) throw std::invalid_argument("missing config file: " + config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    ScenarioConfig cfg = scenario_config_from_json(ss.str());
    if (seed_override) cfg.seed = *seed_override;
    const ScenarioSummary summary = run_scenario(cfg, threads);
    if (!replicates_out.empty()) {
        std::ofstream rf(replicates_out, std::ios::binary);
        rf << summary.replicate_csv();
    }
    if (out.format == "json") {
        emit(out, summary.to_json() + "\n");
    } else {
        emit(out, artifact_header(summary.seed, summary.config_json) + summary.to_csv());
    }
    return summary.incomplete ? 1 : 0;
}

struct BenchData {
    LabeledDataset data;
    nlohmann::json source;
};

BenchData resolve_bench_data(const std::string& data_path, const std::string& response,
                             bool no_header, bool synthetic, std::size_t rows, std::size_t p,
                             double tau2, double eta, std::uint64_t seed) {
    BenchData b;
    if (synthetic) {
        b.data = make_synthetic_dataset(rows, p, tau2, eta, seed);
        b.source = {{"synthetic", true}, {"rows", rows}, {"p", p}, {"tau2", tau2}, {"eta", eta}};
        return b;
    }
    if (data_path.empty()) throw std::invalid_argument("provide --data or --synthetic");
    b.data = load_any(data_path, response, no_header);
    b.source = {{"data", data_path}};
    return b;
}

int run_realbench(const BenchData& bench, std::size_t n_sub, std::size_t reps,
                  const std::string& estimators, std::uint64_t seed,
                  std::optional<std::size_t> bandwidth, std::size_t threads,
                  const OutputOpts& out) {
    const auto specs = parse_estimator_list(estimators);
    const ScenarioSummary summary =
        subsample_study(bench.data, n_sub, reps, specs, seed, bandwidth, threads);
    nlohmann::json cfg = nlohmann::json::parse(summary.config_json);
    cfg["source"] = bench.source;
    if (out.format == "json") {
        nlohmann::json j = nlohmann::json::parse(summary.to_json());
        j["config"] = cfg;
        emit(out, j.dump() + "\n");
    } else {
        emit(out, artifact_header(seed, cfg.dump()) + summary.to_csv_mse());
    }
    return summary.incomplete ? 1 : 0;
}

int run_correlate(const BenchData& bench, std::size_t n_sub, std::size_t reps,
                  const std::string& initial, const std::string& zero, std::uint64_t seed,
                  std::optional<std::size_t> bandwidth, std::size_t threads,
                  const OutputOpts& out) {
    if (reps < 10) {
        throw std::invalid_argument("correlate: minimum replications is 10 (correlations are meaningless below)");
    }
    const auto initial_specs = parse_estimator_list(initial);
    std::vector<std::string> zero_names;
    std::stringstream ss(zero);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) zero_names.push_back(tok);
    }
    const CorrelationTable table = correlation_study(bench.data, n_sub, reps, initial_specs,
                                                     zero_names, seed, bandwidth, threads);
    nlohmann::json cfg;
    cfg["command"] = "correlate";
    cfg["n_sub"] = n_sub;
    cfg["reps"] = reps;
    cfg["source"] = bench.source;
    if (out.format == "json") {
        emit(out, table.to_json() + "\n");
    } else {
        emit(out, artifact_header(seed, cfg.dump()) + table.to_csv());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"signal/noise level estimation with zero-estimator improvements"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo scenario from a JSON config");
    std::string sim_config;
    std::optional<std::uint64_t> sim_seed;
    std::size_t sim_threads = 1;
    std::string sim_reps_out;
    OutputOpts sim_out;
    sim->add_option("-c,--config", sim_config, "Scenario config JSON")->required();
    sim->add_option("--seed", sim_seed, "Override the config seed");
    sim->add_option("--threads", sim_threads, "Worker threads (never changes results)");
    sim->add_option("--replicates-out", sim_reps_out, "Dump per-replicate estimates to CSV");
    add_output_opts(sim, sim_out);

    // estimate
    auto* est = app.add_subcommand("estimate", "Point estimates on a dataset");
    std::string est_data, est_response, est_list = "naive", est_var_form = "ustat";
    std::string est_select = "gap", est_var_source = "analytic", est_save_moments;
    bool est_no_header = false, est_split = false;
    std::uint64_t est_seed = 0;
    MomentsOpts est_moments;
    OutputOpts est_out;
    est->add_option("--data", est_data, "Labeled CSV (or .bin cache)")->required();
    est->add_option("--response", est_response, "Response column (name or 0-based index)");
    est->add_flag("--no-header", est_no_header, "CSV has no header row");
    add_moments_opts(est, est_moments);
    est->add_option("--estimator,--estimators", est_list,
                    "Comma list: naive,dicker,single,selection,selection_h,full_psi,cmd:<exe>");
    est->add_option("--var-form", est_var_form, "Variance estimator form: gaussian or ustat")
        ->check(CLI::IsMember({"gaussian", "ustat"}));
    est->add_option("--select", est_select, "Selection procedure: gap, all, or file:<path>");
    est->add_option("--var-source", est_var_source,
                    "Zero-estimator variance: analytic or empirical (needs --unlabeled)")
        ->check(CLI::IsMember({"analytic", "empirical"}));
    est->add_flag("--split", est_split, "Sample-split the selection step");
    est->add_option("--seed", est_seed, "Seed for the selection split");
    est->add_option("--save-moments", est_save_moments, "Write the covariate model JSON here");
    add_output_opts(est, est_out);

    // improve
    auto* imp = app.add_subcommand("improve", "Bootstrap zero-estimator improvement of an initial estimator");
    std::string imp_data, imp_response, imp_initial, imp_select = "all";
    bool imp_no_header = false;
    std::size_t imp_m = 100;
    std::uint64_t imp_seed = 0;
    MomentsOpts imp_moments;
    OutputOpts imp_out;
    imp->add_option("--data", imp_data, "Labeled CSV (or .bin cache)")->required();
    imp->add_option("--response", imp_response, "Response column (name or 0-based index)");
    imp->add_flag("--no-header", imp_no_header, "CSV has no header row");
    add_moments_opts(imp, imp_moments);
    imp->add_option("--initial", imp_initial, "naive | ridge | cmd:<executable>")->required();
    imp->add_option("--M", imp_m, "Bootstrap replications")->check(CLI::Range(std::size_t{2}, std::size_t{1000000}));
    imp->add_option("--seed", imp_seed, "Bootstrap seed");
    imp->add_option("--select", imp_select, "Zero-estimator index set: all or gap")
        ->check(CLI::IsMember({"all", "gap"}));
    add_output_opts(imp, imp_out);

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "Clean a dataset: transforms, interactions, collinearity pruning");
    std::string pre_in, pre_response, pre_out_path, pre_cache, pre_interactions = "none";
    bool pre_no_header = false, pre_log = false, pre_center = false, pre_quiet = false;
    double pre_tol = 1e-8;
    pre->add_option("--in", pre_in, "Input CSV")->required();
    pre->add_option("--response", pre_response, "Response column (name or 0-based index)")->required();
    pre->add_flag("--no-header", pre_no_header, "CSV has no header row");
    pre->add_option("--out", pre_out_path, "Output CSV path");
    pre->add_option("--cache-out", pre_cache, "Binary cache output path");
    pre->add_flag("--log-response", pre_log, "Apply log1p to the response");
    pre->add_flag("--center-response", pre_center, "Subtract the response mean");
    pre->add_option("--interactions", pre_interactions, "all, top:<k>, or none");
    pre->add_option("--collinear-tol", pre_tol, "Greedy pruning tolerance (0 disables)");
    pre->add_flag("-q,--quiet", pre_quiet, "Suppress notes");

    // realbench
    auto* rb = app.add_subcommand("realbench", "Subsampling benchmark against the full-data reference");
    std::string rb_data, rb_response, rb_estimators = "naive,selection_h,single";
    bool rb_no_header = false, rb_synth = false;
    std::size_t rb_rows = 10000, rb_p = 200, rb_nsub = 0, rb_reps = 100, rb_threads = 1;
    double rb_tau2 = 2.0, rb_eta = 0.5;
    std::uint64_t rb_seed = 0;
    std::optional<std::size_t> rb_band;
    OutputOpts rb_out;
    rb->add_option("--data", rb_data, "Full labeled CSV (or .bin cache)");
    rb->add_option("--response", rb_response, "Response column (name or 0-based index)");
    rb->add_flag("--no-header", rb_no_header, "CSV has no header row");
    rb->add_flag("--synthetic", rb_synth, "Use the bundled synthetic benchmark generator");
    rb->add_option("--rows", rb_rows, "Synthetic: total rows");
    rb->add_option("--p", rb_p, "Synthetic: covariate count");
    rb->add_option("--tau2", rb_tau2, "Synthetic: signal level");
    rb->add_option("--eta", rb_eta, "Synthetic: sparsity level");
    rb->add_option("--n-sub", rb_nsub, "Labeled subsample size")->required();
    rb->add_option("--reps", rb_reps, "Subsample replications");
    rb->add_option("--estimators", rb_estimators, "Comma list of estimators");
    rb->add_option("--seed", rb_seed, "Seed");
    rb->add_option("--bandwidth", rb_band, "Banded covariance estimation");
    rb->add_option("--threads", rb_threads, "Worker threads");
    add_output_opts(rb, rb_out);

    // correlate
    auto* co = app.add_subcommand("correlate", "Correlations between initial and zero estimators over subsamples");
    std::string co_data, co_response, co_initial = "naive", co_zero = "single,selection";
    bool co_no_header = false, co_synth = false;
    std::size_t co_rows = 10000, co_p = 200, co_nsub = 0, co_reps = 300, co_threads = 1;
    double co_tau2 = 2.0, co_eta = 0.5;
    std::uint64_t co_seed = 0;
    std::optional<std::size_t> co_band;
    OutputOpts co_out;
    co->add_option("--data", co_data, "Full labeled CSV (or .bin cache)");
    co->add_option("--response", co_response, "Response column (name or 0-based index)");
    co->add_flag("--no-header", co_no_header, "CSV has no header row");
    co->add_flag("--synthetic", co_synth, "Use the bundled synthetic benchmark generator");
    co->add_option("--rows", co_rows, "Synthetic: total rows");
    co->add_option("--p", co_p, "Synthetic: covariate count");
    co->add_option("--tau2", co_tau2, "Synthetic: signal level");
    co->add_option("--eta", co_eta, "Synthetic: sparsity level");
    co->add_option("--n-sub", co_nsub, "Labeled subsample size")->required();
    co->add_option("--reps", co_reps, "Subsample replications (>= 10)");
    co->add_option("--initial", co_initial, "Comma list of initial estimators");
    co->add_option("--zero", co_zero, "Comma list of zero estimators: single,selection");
    co->add_option("--seed", co_seed, "Seed");
    co->add_option("--bandwidth", co_band, "Banded covariance estimation");
    co->add_option("--threads", co_threads, "Worker threads");
    add_output_opts(co, co_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sim->parsed()) return run_simulate(sim_config, sim_seed, sim_threads, sim_reps_out, sim_out);
        if (est->parsed()) {
            return run_estimate(est_data, est_response, est_no_header, est_moments, est_list,
                                est_var_form, est_select, est_var_source, est_split, est_seed,
                                est_save_moments, est_out);
        }
        if (imp->parsed()) {
            return run_improve(imp_data, imp_response, imp_no_header, imp_moments, imp_initial,
                               imp_m, imp_seed, imp_select, imp_out);
        }
        if (pre->parsed()) {
            return run_preprocess(pre_in, pre_response, pre_no_header, pre_out_path, pre_cache,
                                  pre_log, pre_center, pre_interactions, pre_tol, pre_quiet);
        }
        if (rb->parsed()) {
            const BenchData bench = resolve_bench_data(rb_data, rb_response, rb_no_header, rb_synth,
                                                       rb_rows, rb_p, rb_tau2, rb_eta, rb_seed);
            return run_realbench(bench, rb_nsub, rb_reps, rb_estimators, rb_seed, rb_band,
                                 rb_threads, rb_out);
        }
        if (co->parsed()) {
            const BenchData bench = resolve_bench_data(co_data, co_response, co_no_header, co_synth,
                                                       co_rows, co_p, co_tau2, co_eta, co_seed);
            return run_correlate(bench, co_nsub, co_reps, co_initial, co_zero, co_seed, co_band,
                                 co_threads, co_out);
        }
    } catch (const std::invalid_argument& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
