#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "gbeta/estimator.hpp"
#include "gbeta/model.hpp"
#include "gbeta/rng.hpp"
#include "gbeta/sampler.hpp"

namespace gbeta {

struct BadN : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InsufficientData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Population generator for replication experiments: K = N/25 subpopulations;
// node i belongs to 1 + Y_i of them, Y_i ~ Binomial(K-1, 1/K); memberships
// are drawn sequentially without replacement from the size-balancing
// probabilities p_k^(i) (node 1 uniform; later nodes downweight crowded
// subpopulations by 1 - N_k / sum N).
inline Population generate_population_paper(int n, std::uint64_t seed) {
    if (n < 25 || n % 25 != 0)
        throw BadN("generate_population_paper: N must be a positive multiple of 25");
    const int k = n / 25;
    Rng rng(seed);
    std::vector<std::vector<int>> subpops(static_cast<std::size_t>(k));
    std::vector<double> filled(static_cast<std::size_t>(k), 0.0);  // N_k over nodes 1..i-1
    std::vector<double> w(static_cast<std::size_t>(k));
    std::vector<char> taken(static_cast<std::size_t>(k));
    double filled_total = 0.0;
    for (int i = 1; i <= n; ++i) {
        int extra = 0;  // Binomial(K-1, 1/K)
        for (int t = 0; t < k - 1; ++t)
            if (rng.bernoulli(1.0 / k)) ++extra;
        int memberships = 1 + extra;

        for (int c = 0; c < k; ++c) {
            taken[static_cast<std::size_t>(c)] = 0;
            w[static_cast<std::size_t>(c)] =
                (k == 1 || i == 1 || filled_total == 0.0)
                    ? 1.0 / k
                    : (1.0 - filled[static_cast<std::size_t>(c)] / filled_total) / (k - 1);
        }
        for (int draw = 0; draw < memberships; ++draw) {
            double avail = 0.0;
            for (int c = 0; c < k; ++c)
                if (!taken[static_cast<std::size_t>(c)]) avail += w[static_cast<std::size_t>(c)];
            int pick = -1;
            if (avail > 0.0) {
                double u = rng.uniform01() * avail;
                double acc = 0.0;
                for (int c = 0; c < k; ++c) {
                    if (taken[static_cast<std::size_t>(c)]) continue;
                    acc += w[static_cast<std::size_t>(c)];
                    pick = c;
                    if (u < acc) break;
                }
            } else {
                // All remaining weights zero; fall back to a uniform pick.
                int n_left = 0;
                for (int c = 0; c < k; ++c)
                    if (!taken[static_cast<std::size_t>(c)]) ++n_left;
                int target = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_left)));
                for (int c = 0; c < k; ++c) {
                    if (taken[static_cast<std::size_t>(c)]) continue;
                    if (target-- == 0) {
                        pick = c;
                        break;
                    }
                }
            }
            taken[static_cast<std::size_t>(pick)] = 1;
            subpops[static_cast<std::size_t>(pick)].push_back(i);
        }
        for (int c = 0; c < k; ++c)
            if (taken[static_cast<std::size_t>(c)]) {
                filled[static_cast<std::size_t>(c)] += 1.0;
                filled_total += 1.0;
            }
    }
    // A subpopulation can stay empty at small K; drop such slots.
    std::vector<std::vector<int>> nonempty;
    for (auto& sp : subpops)
        if (!sp.empty()) nonempty.push_back(std::move(sp));
    return Population(std::move(nonempty), n);
}

struct ThetaStarSpec {
    double lo = -1.25;
    double hi = -0.75;
    double brokerage = 0.25;
};

inline Theta draw_theta_star(const Population& pop, const ThetaStarSpec& spec,
                             std::uint64_t seed, bool has_brokerage) {
    Rng rng(seed);
    Theta t;
    t.v.resize(static_cast<std::size_t>(pop.n_nodes() + (has_brokerage ? 1 : 0)));
    for (int i = 0; i < pop.n_nodes(); ++i)
        t.v[static_cast<std::size_t>(i)] = rng.uniform(spec.lo, spec.hi);
    if (has_brokerage) t.v.back() = spec.brokerage;
    return t;
}

struct ExperimentConfig {
    std::vector<int> n_values{50, 100, 200};
    int replications = 100;
    Variant variant = Variant::brokerage;
    double alpha = 0.0;
    ThetaStarSpec theta_star;
    double gamma = 1e-6;
    int max_iterations = 200;
    int burn_in_sweeps = 50;
    int sweeps_between_samples = 5;
    std::uint64_t seed = 0;
    int n_threads = 0;  // 0: hardware concurrency
};

struct TrialRecord {
    int n = 0;
    int rep = 0;
    std::uint64_t seed = 0;
    bool converged = false;
    double error_sup = 0.0;
    double error_degrees = 0.0;
    double error_brokerage = 0.0;
    int iterations = 0;
    std::int64_t wall_ms = 0;
    // Not part of the CSV schema: whether the generated population met the
    // min-subpopulation-size-3 assumption. Violations are counted in the
    // summary rather than silently dropped.
    bool assumption_min3 = true;
};

inline TrialRecord run_trial(const ExperimentConfig& cfg, int n, int rep) {
    TrialRecord rec;
    rec.n = n;
    rec.rep = rep;
    rec.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep));
    const auto t0 = std::chrono::steady_clock::now();

    Population pop = generate_population_paper(n, mix_seed(rec.seed, 1));
    rec.assumption_min3 = pop.assumption_min3();
    ModelSpec model(cfg.variant, std::move(pop), cfg.alpha);
    Theta theta_star =
        draw_theta_star(model.population(), cfg.theta_star, mix_seed(rec.seed, 2),
                        model.has_brokerage());

    GibbsConfig gc;
    gc.burn_in_sweeps = cfg.burn_in_sweeps;
    gc.sweeps_between_samples = cfg.sweeps_between_samples;
    gc.seed = mix_seed(rec.seed, 3);
    Graph x = gibbs_sample(theta_star, model, gc, 1).front();

    FitOptions opts;
    opts.max_iterations = cfg.max_iterations;
    FitResult fit = fit_mple(x, model, cfg.gamma, opts);

    rec.converged = fit.status == FitStatus::converged;
    rec.iterations = fit.iterations;
    const int nn = model.n_nodes();
    for (int i = 0; i < nn; ++i)
        rec.error_degrees =
            std::max(rec.error_degrees, std::fabs(fit.theta_hat.v[static_cast<std::size_t>(i)] -
                                                  theta_star.v[static_cast<std::size_t>(i)]));
    if (model.has_brokerage())
        rec.error_brokerage = std::fabs(fit.theta_hat.v.back() - theta_star.v.back());
    rec.error_sup = std::max(rec.error_degrees, rec.error_brokerage);
    rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    return rec;
}

// Runs all (N, replication) trials. Trials are independent; a work queue
// feeds a small thread pool and results land in deterministic (N, rep) order
// regardless of completion order. Per-trial failures are converged=false
// records; the run itself never aborts on a bad trial.
inline std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg) {
    if (cfg.replications < 1) throw BadN("run_experiment: replications must be >= 1");
    struct Cell {
        int n, rep;
    };
    std::vector<Cell> cells;
    for (int n : cfg.n_values)
        for (int rep = 0; rep < cfg.replications; ++rep) cells.push_back({n, rep});
    std::vector<TrialRecord> out(cells.size());

    unsigned hw = std::thread::hardware_concurrency();
    int n_threads = cfg.n_threads > 0 ? cfg.n_threads : static_cast<int>(hw ? hw : 1);
    n_threads = std::min<int>(n_threads, static_cast<int>(cells.size()));

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            std::size_t at = next.fetch_add(1);
            if (at >= cells.size()) return;
            try {
                out[at] = run_trial(cfg, cells[at].n, cells[at].rep);
            } catch (const std::exception&) {
                TrialRecord rec;
                rec.n = cells[at].n;
                rec.rep = cells[at].rep;
                rec.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(cells[at].n),
                                    static_cast<std::uint64_t>(cells[at].rep));
                rec.converged = false;
                out[at] = rec;
            }
        }
    };
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return out;
}

// Shortest round-trip decimal formatting; keeps CSV output byte-stable.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Exact column set of trials.csv. wall_ms is written as 0: per-trial wall
// time varies run to run and would break byte-identical reruns; measured
// timings are reported in summary.json instead.
inline void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& trials) {
    os << "n,rep,seed,converged,error_sup,error_degrees,error_brokerage,iterations,wall_ms\n";
    for (const TrialRecord& t : trials) {
        os << t.n << ',' << t.rep << ',' << t.seed << ',' << (t.converged ? 1 : 0) << ','
           << format_double(t.error_sup) << ',' << format_double(t.error_degrees) << ','
           << format_double(t.error_brokerage) << ',' << t.iterations << ",0\n";
    }
}

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    double pos = q * static_cast<double>(v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

struct PerNSummary {
    int n = 0;
    int trials = 0;
    int converged = 0;
    int min3_violations = 0;
    double convergence_rate = 0.0;
    double median_error_sup = 0.0;
    double q1_error_sup = 0.0;
    double q3_error_sup = 0.0;
    double median_error_degrees = 0.0;
    double median_error_brokerage = 0.0;
    double median_wall_ms = 0.0;
    double rate_r = 0.0;  // median error / sqrt(log N / N)
};

struct RateSummary {
    std::vector<PerNSummary> rows;
    double r_max_over_min = 0.0;
    bool rate_consistent = false;  // max r / min r <= 2
};

// Medians use converged trials only; convergence rates count everything.
// r(N) = median error / sqrt(log N / N) is flat when errors follow the
// sqrt(log N / N) law.
inline RateSummary summarize_rate(const std::vector<TrialRecord>& trials) {
    std::vector<int> ns;
    for (const auto& t : trials)
        if (std::find(ns.begin(), ns.end(), t.n) == ns.end()) ns.push_back(t.n);
    std::sort(ns.begin(), ns.end());
    if (ns.size() < 2) throw InsufficientData("summarize_rate: need >= 2 distinct N");

    RateSummary out;
    double r_min = std::numeric_limits<double>::infinity();
    double r_max = 0.0;
    for (int n : ns) {
        PerNSummary row;
        row.n = n;
        std::vector<double> es, ed, eb, wall;
        for (const auto& t : trials) {
            if (t.n != n) continue;
            ++row.trials;
            if (!t.assumption_min3) ++row.min3_violations;
            if (t.converged) {
                ++row.converged;
                es.push_back(t.error_sup);
                ed.push_back(t.error_degrees);
                eb.push_back(t.error_brokerage);
                wall.push_back(static_cast<double>(t.wall_ms));
            }
        }
        if (es.empty()) throw InsufficientData("summarize_rate: no converged trials at N=" +
                                               std::to_string(n));
        row.convergence_rate = static_cast<double>(row.converged) / row.trials;
        row.median_error_sup = median(es);
        row.q1_error_sup = quantile(es, 0.25);
        row.q3_error_sup = quantile(es, 0.75);
        row.median_error_degrees = median(ed);
        row.median_error_brokerage = median(eb);
        row.median_wall_ms = median(wall);
        row.rate_r = row.median_error_sup / std::sqrt(std::log(static_cast<double>(n)) / n);
        r_min = std::min(r_min, row.rate_r);
        r_max = std::max(r_max, row.rate_r);
        out.rows.push_back(row);
    }
    out.r_max_over_min = r_max / r_min;
    out.rate_consistent = out.r_max_over_min <= 2.0;
    return out;
}

}  // namespace gbeta
