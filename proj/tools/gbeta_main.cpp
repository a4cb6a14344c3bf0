// Command-line front door: population generation, sampling, fitting,
// dependence diagnostics, and the batch experiment harness.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "gbeta/diagnostics.hpp"
#include "gbeta/estimator.hpp"
#include "gbeta/experiment.hpp"
#include "gbeta/io.hpp"
#include "gbeta/model.hpp"
#include "gbeta/sampler.hpp"
#include "gbeta/version.hpp"

namespace fs = std::filesystem;
using namespace gbeta;

namespace {

std::string sample_name(int k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%03d.csv", k);
    return buf;
}

int cmd_generate_population(int n, std::uint64_t seed, const std::string& out) {
    Population pop = generate_population_paper(n, seed);
    write_json_file(out, population_to_json(pop));
    std::cout << "wrote " << out << " (N=" << pop.n_nodes() << ", K=" << pop.n_subpops()
              << ", D=" << pop.max_neighborhood_size()
              << ", min3=" << (pop.assumption_min3() ? "true" : "false") << ")\n";
    return 0;
}

int cmd_sample(const std::string& model_path, const std::string& theta_path, int n_samples,
               int burn_in, int spacing, std::uint64_t seed, const std::string& scan,
               const std::string& out_dir) {
    ModelSpec model = model_from_json(read_json_file(model_path));
    Theta theta = theta_from_json(read_json_file(theta_path));
    check_bound(theta, model);

    GibbsConfig cfg;
    cfg.burn_in_sweeps = burn_in;
    cfg.sweeps_between_samples = spacing;
    cfg.seed = seed;
    cfg.scan_order = scan == "random" ? ScanOrder::random_permutation_per_sweep
                                      : ScanOrder::systematic_lexicographic;

    fs::create_directories(out_dir);
    std::vector<Graph> samples;
    if (model.variant() == Variant::beta && n_samples > 0) {
        for (int k = 0; k < n_samples; ++k)
            samples.push_back(sample_beta_exact(theta, model, mix_seed(seed, k)));
    } else {
        samples = gibbs_sample(theta, model, cfg, n_samples);
    }
    for (int k = 0; k < n_samples; ++k)
        save_graph_csv((fs::path(out_dir) / sample_name(k)).string(), samples[static_cast<std::size_t>(k)]);

    json manifest{{"version", version_string},
                  {"model", model_to_json(model)},
                  {"theta", theta_to_json(theta)},
                  {"n_samples", n_samples},
                  {"burn_in", burn_in},
                  {"spacing", spacing},
                  {"seed", seed},
                  {"scan_order", scan},
                  {"sampler", model.variant() == Variant::beta ? "exact_bernoulli" : "gibbs"}};
    write_json_file((fs::path(out_dir) / "manifest.json").string(), manifest);
    std::cout << "wrote " << n_samples << " sample(s) to " << out_dir << "\n";
    return 0;
}

int cmd_fit(const std::string& graph_path, const std::string& model_path, double gamma,
            int max_iter, const std::string& init, const std::string& out) {
    ModelSpec model = model_from_json(read_json_file(model_path));
    Graph g = load_graph_csv(graph_path, model.n_nodes());

    FitOptions opts;
    opts.max_iterations = max_iter;
    opts.beta_warm_start = init == "beta-warm";

    auto t0 = std::chrono::steady_clock::now();
    FitResult fit = fit_mple(g, model, gamma, opts);
    double wall =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    json trace = json::array();
    for (auto& [obj, gn] : fit.trace) trace.push_back(json{{"objective", obj}, {"grad_inf", gn}});
    json j{{"status", fit_status_name(fit.status)},
           {"theta_hat", theta_to_json(fit.theta_hat)},
           {"grad_inf_norm", fit.grad_inf_norm},
           {"gamma", fit.gamma},
           {"in_theta_tilde_set", fit.in_theta_tilde_set},
           {"iterations", fit.iterations},
           {"trace", trace},
           {"wall_ms", wall}};
    write_json_file(out, j);
    std::cout << "status=" << fit_status_name(fit.status) << " grad_inf=" << fit.grad_inf_norm
              << " iters=" << fit.iterations << " -> " << out << "\n";
    return 0;
}

int cmd_diagnose(const std::string& pop_path, const std::string& model_path,
                 const std::string& theta_path, const std::string& assumption, double omega1,
                 double omega2, const std::string& mc_mode, int mc_n, std::uint64_t seed,
                 const std::string& out) {
    ModelSpec model = !model_path.empty()
                          ? model_from_json(read_json_file(model_path))
                          : ModelSpec(Variant::brokerage,
                                      population_from_json(read_json_file(pop_path)));
    const Population& pop = model.population();
    Theta theta = theta_path.empty() ? Theta::zeros(model)
                                     : theta_from_json(read_json_file(theta_path));
    check_bound(theta, model);

    DependenceReport rep;
    rep.d_max = pop.max_neighborhood_size();
    rep.pi_star = pi_star_bound(model, theta);
    rep.psi = psi_bound(pop, model);
    SubpopGraph sg = build_subpop_graph(pop);
    rep.assumption_b = check_assumption_B(sg, omega1, omega2, rep.d_max);
    try {
        AssumptionBParams params;
        if (assumption == "b1")
            params = B1Params{omega1, omega2};
        else
            params = B2Params{};
        rep.coupling_bound = coupling_norm_bound(pop, model, theta, params);
        rep.coupling_bound_valid = true;
    } catch (const AssumptionViolated& e) {
        rep.coupling_bound_valid = false;
        rep.coupling_bound_error = e.what();
    }
    if (mc_mode != "off") {
        CouplingMcOptions opts;
        opts.n_mc = mc_n;
        opts.seed = seed;
        opts.mode = mc_mode == "sampled" ? CouplingPrefixMode::sampled
                                         : CouplingPrefixMode::exhaustive;
        rep.mc_coupling = coupling_matrix_mc(model, theta, opts);
    }
    write_json_file(out, dependence_report_to_json(rep));
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_experiment(const ExperimentConfig& cfg, const json& echo, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<TrialRecord> trials = run_experiment(cfg);
    {
        std::ofstream os(fs::path(out_dir) / "trials.csv");
        write_trials_csv(os, trials);
    }
    json manifest = echo;
    manifest["version"] = version_string;
    write_json_file((fs::path(out_dir) / "manifest.json").string(), manifest);
    try {
        RateSummary s = summarize_rate(trials);
        write_json_file((fs::path(out_dir) / "summary.json").string(), summary_to_json(s));
    } catch (const InsufficientData& e) {
        write_json_file((fs::path(out_dir) / "summary.json").string(),
                        json{{"error", e.what()}});
    }
    std::cout << "wrote " << (fs::path(out_dir) / "trials.csv").string() << " ("
              << trials.size() << " trials)\n";
    return 0;
}

int cmd_summarize(const std::string& trials_path, const std::string& out) {
    std::vector<TrialRecord> trials = read_trials_csv(trials_path);
    RateSummary s = summarize_rate(trials);
    json j = summary_to_json(s);
    write_json_file(out, j);
    for (const PerNSummary& r : s.rows)
        std::cout << "N=" << r.n << " median_error=" << r.median_error_sup
                  << " r=" << r.rate_r << " converged=" << r.convergence_rate << "\n";
    std::cout << "rate_consistent=" << (s.rate_consistent ? "true" : "false") << " -> " << out
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(version_string) +
                 " - generalized beta-models with dependent edges"};
    app.require_subcommand(1);

    // generate-population
    int gp_n = 125;
    std::uint64_t gp_seed = 0;
    std::string gp_out = "population.json";
    auto* gp = app.add_subcommand("generate-population",
                                  "Generate a population with overlapping subpopulations");
    gp->add_option("--n", gp_n, "number of nodes (multiple of 25)")->required();
    gp->add_option("--seed", gp_seed, "rng seed");
    gp->add_option("--out", gp_out, "output population json");

    // sample
    std::string s_model, s_theta, s_out = "samples", s_scan = "systematic";
    int s_n = 1, s_burn = 50, s_spacing = 5;
    std::uint64_t s_seed = 0;
    auto* sc = app.add_subcommand("sample", "Draw graphs (Gibbs; exact for the beta variant)");
    sc->add_option("--model", s_model, "model json")->required();
    sc->add_option("--theta", s_theta, "theta json")->required();
    sc->add_option("--n-samples", s_n, "number of samples");
    sc->add_option("--burn-in", s_burn, "burn-in sweeps");
    sc->add_option("--spacing", s_spacing, "sweeps between samples");
    sc->add_option("--seed", s_seed, "rng seed");
    sc->add_option("--scan", s_scan, "systematic|random")
        ->check(CLI::IsMember({"systematic", "random"}));
    sc->add_option("--out", s_out, "output directory");

    // fit
    std::string f_graph, f_model, f_out = "result.json", f_init = "zero";
    double f_gamma = 1e-6;
    int f_maxit = 200;
    auto* fc = app.add_subcommand("fit", "Maximum pseudo-likelihood fit");
    fc->add_option("--graph", f_graph, "edge-list csv")->required();
    fc->add_option("--model", f_model, "model json")->required();
    fc->add_option("--gamma", f_gamma, "gradient sup-norm stopping threshold");
    fc->add_option("--max-iter", f_maxit, "iteration cap");
    fc->add_option("--init", f_init, "zero|beta-warm")
        ->check(CLI::IsMember({"zero", "beta-warm"}));
    fc->add_option("--out", f_out, "result json");

    // diagnose
    std::string d_pop, d_model, d_theta, d_assumption = "b2", d_mc = "off",
                d_out = "report.json";
    double d_o1 = 2.0, d_o2 = 0.0;
    int d_mc_n = 200;
    std::uint64_t d_seed = 0;
    auto* dc = app.add_subcommand("diagnose", "Dependence diagnostics and norm bounds");
    dc->add_option("--population", d_pop, "population json");
    dc->add_option("--model", d_model, "model json (overrides --population)");
    dc->add_option("--theta", d_theta, "theta json (defaults to zeros)");
    dc->add_option("--assumption", d_assumption, "b1|b2")
        ->check(CLI::IsMember({"b1", "b2"}));
    dc->add_option("--omega1", d_o1, "assumption B.1 omega1");
    dc->add_option("--omega2", d_o2, "assumption B.1 omega2");
    dc->add_option("--mc-coupling", d_mc, "off|exhaustive|sampled")
        ->check(CLI::IsMember({"off", "exhaustive", "sampled"}));
    dc->add_option("--mc-n", d_mc_n, "MC replications per prefix");
    dc->add_option("--seed", d_seed, "rng seed");
    dc->add_option("--out", d_out, "report json");

    // experiment
    std::string e_config, e_nlist = "50,100,200", e_variant = "brokerage", e_out = "experiment";
    int e_reps = 100, e_burn = 50, e_spacing = 5, e_threads = 0, e_maxit = 200;
    double e_alpha = 0.0, e_gamma = 1e-6;
    std::uint64_t e_seed = 0;
    auto* ec = app.add_subcommand("experiment", "Replication loop: simulate, fit, measure");
    ec->add_option("--config", e_config, "config json (overrides the other flags)");
    ec->add_option("--n-list", e_nlist, "comma-separated N values");
    ec->add_option("--reps", e_reps, "replications per N");
    ec->add_option("--variant", e_variant, "beta|brokerage|sparse_brokerage|size_dependent")
        ->check(CLI::IsMember({"beta", "brokerage", "sparse_brokerage", "size_dependent"}));
    ec->add_option("--alpha", e_alpha, "sparsity level (sparse_brokerage)");
    ec->add_option("--gamma", e_gamma, "fit stopping threshold");
    ec->add_option("--max-iter", e_maxit, "fit iteration cap");
    ec->add_option("--burn-in", e_burn, "Gibbs burn-in sweeps");
    ec->add_option("--spacing", e_spacing, "Gibbs spacing sweeps");
    ec->add_option("--seed", e_seed, "master seed");
    ec->add_option("--threads", e_threads, "worker threads (0 = hardware)");
    ec->add_option("--out", e_out, "output directory");

    // summarize
    std::string m_trials, m_out = "summary.json";
    auto* mc = app.add_subcommand("summarize", "Rate table from a trials.csv");
    mc->add_option("--trials", m_trials, "trials csv")->required();
    mc->add_option("--out", m_out, "summary json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        if (gp->parsed()) return cmd_generate_population(gp_n, gp_seed, gp_out);
        if (sc->parsed())
            return cmd_sample(s_model, s_theta, s_n, s_burn, s_spacing, s_seed, s_scan, s_out);
        if (fc->parsed()) return cmd_fit(f_graph, f_model, f_gamma, f_maxit, f_init, f_out);
        if (dc->parsed())
            return cmd_diagnose(d_pop, d_model, d_theta, d_assumption, d_o1, d_o2, d_mc, d_mc_n,
                                d_seed, d_out);
        if (ec->parsed()) {
            ExperimentConfig cfg;
            json echo;
            if (!e_config.empty()) {
                json j = read_json_file(e_config);
                cfg.n_values = j.value("n_values", cfg.n_values);
                cfg.replications = j.value("replications", cfg.replications);
                cfg.variant = variant_from_string(j.value("variant", std::string("brokerage")));
                cfg.alpha = j.value("alpha", 0.0);
                cfg.theta_star.lo = j.value("theta_lo", cfg.theta_star.lo);
                cfg.theta_star.hi = j.value("theta_hi", cfg.theta_star.hi);
                cfg.theta_star.brokerage = j.value("theta_brokerage", cfg.theta_star.brokerage);
                cfg.gamma = j.value("gamma", cfg.gamma);
                cfg.max_iterations = j.value("max_iterations", cfg.max_iterations);
                cfg.burn_in_sweeps = j.value("burn_in", cfg.burn_in_sweeps);
                cfg.sweeps_between_samples = j.value("spacing", cfg.sweeps_between_samples);
                cfg.seed = j.value("seed", cfg.seed);
                cfg.n_threads = j.value("threads", cfg.n_threads);
                echo = j;
            } else {
                cfg.n_values.clear();
                std::stringstream ss(e_nlist);
                std::string tok;
                while (std::getline(ss, tok, ','))
                    if (!tok.empty()) cfg.n_values.push_back(std::stoi(tok));
                if (cfg.n_values.empty()) throw IoError("--n-list is empty");
                cfg.replications = e_reps;
                cfg.variant = variant_from_string(e_variant);
                cfg.alpha = e_alpha;
                cfg.gamma = e_gamma;
                cfg.max_iterations = e_maxit;
                cfg.burn_in_sweeps = e_burn;
                cfg.sweeps_between_samples = e_spacing;
                cfg.seed = e_seed;
                cfg.n_threads = e_threads;
                echo = json{{"n_values", cfg.n_values},
                            {"replications", cfg.replications},
                            {"variant", variant_name(cfg.variant)},
                            {"alpha", cfg.alpha},
                            {"theta_lo", cfg.theta_star.lo},
                            {"theta_hi", cfg.theta_star.hi},
                            {"theta_brokerage", cfg.theta_star.brokerage},
                            {"gamma", cfg.gamma},
                            {"max_iterations", cfg.max_iterations},
                            {"burn_in", cfg.burn_in_sweeps},
                            {"spacing", cfg.sweeps_between_samples},
                            {"seed", cfg.seed},
                            {"threads", cfg.n_threads}};
            }
            for (int n : cfg.n_values)
                if (n < 25 || n % 25 != 0)
                    throw BadN("experiment: every N must be a positive multiple of 25");
            return cmd_experiment(cfg, echo, e_out);
        }
        if (mc->parsed()) return cmd_summarize(m_trials, m_out);
    } catch (const IoError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const BadN& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const WrongVariant& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const BadNodeId& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const EmptyCoverage& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
