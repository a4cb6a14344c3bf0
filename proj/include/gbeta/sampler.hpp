#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "gbeta/model.hpp"
#include "gbeta/rng.hpp"

namespace gbeta {

struct TooLarge : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ScanOrder { systematic_lexicographic, random_permutation_per_sweep };

struct GibbsConfig {
    int burn_in_sweeps = 50;
    int sweeps_between_samples = 5;
    std::uint64_t seed = 0;
    ScanOrder scan_order = ScanOrder::systematic_lexicographic;
};

// Each edge independently Bernoulli(logistic(theta_i + theta_j)).
inline Graph sample_beta_exact(const Theta& theta, const ModelSpec& model, std::uint64_t seed) {
    if (model.variant() != Variant::beta)
        throw WrongVariant("sample_beta_exact requires the beta variant");
    check_bound(theta, model);
    Rng rng(seed);
    Graph g(model.n_nodes());
    const EdgeIndex& idx = g.index();
    for (std::int64_t m = 0; m < idx.total(); ++m) {
        auto [i, j] = idx.pair(m);
        g.set_edge(m, rng.bernoulli(logistic(theta.degree(i) + theta.degree(j))));
    }
    return g;
}

// Single-site Gibbs chain over the C(N,2) edge variables, starting from the
// empty graph. Shared-partner counts are kept incrementally so one edge
// update costs O(D). One chain belongs to one worker; runs are reproducible
// bit-for-bit given the seed.
class GibbsChain {
public:
    GibbsChain(Theta theta, const ModelSpec& model, std::uint64_t seed,
               ScanOrder order = ScanOrder::systematic_lexicographic)
        : model_(&model),
          theta_(std::move(theta)),
          g_(model.n_nodes()),
          counts_(model.population(), g_),
          rng_(seed),
          order_(order) {
        check_bound(theta_, model);
        const EdgeIndex& idx = g_.index();
        pairs_.reserve(static_cast<std::size_t>(idx.total()));
        for (std::int64_t m = 0; m < idx.total(); ++m) pairs_.push_back(idx.pair(m));
        scan_.resize(pairs_.size());
        std::iota(scan_.begin(), scan_.end(), std::int64_t{0});
    }

    const Graph& state() const { return g_; }

    void run_sweeps(int n) {
        for (int s = 0; s < n; ++s) {
            if (order_ == ScanOrder::random_permutation_per_sweep) rng_.shuffle(scan_);
            for (std::int64_t m : scan_) update_edge(m);
        }
    }

private:
    void update_edge(std::int64_t m) {
        auto [i, j] = pairs_[static_cast<std::size_t>(m)];
        EdgeFlipDelta d = model_->has_brokerage()
                              ? edge_flip_delta(g_, i, j, *model_, counts_)
                              : EdgeFlipDelta{};
        double p = logistic(conditional_logit(i, j, theta_, *model_, d));
        bool nv = rng_.uniform01() < p;
        bool ov = g_.edge(m);
        if (nv != ov) {
            counts_.apply_flip(g_, i, j, nv ? +1 : -1);
            g_.set_edge(m, nv);
        }
    }

    const ModelSpec* model_;
    Theta theta_;
    Graph g_;
    SharedPartnerCounts counts_;
    Rng rng_;
    ScanOrder order_;
    std::vector<std::pair<int, int>> pairs_;
    std::vector<std::int64_t> scan_;
};

// Burn in, then return n_samples states spaced by cfg.sweeps_between_samples.
inline std::vector<Graph> gibbs_sample(const Theta& theta, const ModelSpec& model,
                                       const GibbsConfig& cfg, int n_samples) {
    if (cfg.burn_in_sweeps < 0 || cfg.sweeps_between_samples < 1 || n_samples < 0)
        throw std::invalid_argument("gibbs_sample: nonnegative burn-in, spacing >= 1 required");
    GibbsChain chain(theta, model, cfg.seed, cfg.scan_order);
    chain.run_sweeps(cfg.burn_in_sweeps);
    std::vector<Graph> out;
    out.reserve(static_cast<std::size_t>(n_samples));
    for (int s = 0; s < n_samples; ++s) {
        chain.run_sweeps(cfg.sweeps_between_samples);
        out.push_back(chain.state());
    }
    return out;
}

struct EnumerationResult {
    double log_normalizer = 0.0;               // psi(theta)
    std::vector<double> mean_suff_stats;       // E_theta s(X)
    double mean_brokerage = 0.0;               // E_theta b(X), unweighted
    std::vector<double> log_probs;             // per state mask, when retained
};

namespace detail {

// Walks all 2^M graphs in Gray-code order, maintaining the statistics
// incrementally, and calls f(state_mask, log_unnormalized, suff_stats,
// brokered_count) for every state. The dot product is re-formed from the
// statistic vector each step, so no floating-point drift accumulates over
// the walk.
template <typename F>
inline void gray_walk(const Theta& theta, const ModelSpec& model, F&& f) {
    const std::int64_t m_total = EdgeIndex(model.n_nodes()).total();
    Graph g(model.n_nodes());
    SharedPartnerCounts counts(model.population(), g);
    std::vector<double> s(static_cast<std::size_t>(model.p()), 0.0);
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(m_total));
    for (std::int64_t m = 0; m < m_total; ++m) pairs.push_back(g.index().pair(m));

    const int n = model.n_nodes();
    double log_ref = 0.0;
    long long bcount = 0;
    auto value = [&]() {
        double v = 0;
        for (std::size_t k = 0; k < s.size(); ++k) v += theta.v[k] * s[k];
        return v + log_ref;
    };
    f(std::uint64_t{0}, value(), s, bcount);

    std::uint64_t mask = 0;
    const std::uint64_t n_states = 1ULL << m_total;
    for (std::uint64_t step = 1; step < n_states; ++step) {
        int bit = __builtin_ctzll(step);
        auto [i, j] = pairs[static_cast<std::size_t>(bit)];
        EdgeFlipDelta d = edge_flip_delta(g, i, j, model, counts);
        int dir = g.edge(bit) ? -1 : +1;
        s[static_cast<std::size_t>(i - 1)] += dir;
        s[static_cast<std::size_t>(j - 1)] += dir;
        if (model.has_brokerage()) s[static_cast<std::size_t>(n)] += dir * d.d_suff_brokerage;
        bcount += dir * d.d_brokered_count;
        log_ref += dir * d.d_log_ref;
        counts.apply_flip(g, i, j, dir);
        g.flip(bit);
        mask ^= 1ULL << bit;
        f(mask, value(), s, bcount);
    }
}

}  // namespace detail

// Exact psi(theta), E_theta s(X), and E_theta b(X) by complete enumeration in
// log-sum-exp arithmetic. Two passes over the 2^M states; the second pass
// forms the expectations against exp(v - psi).
inline EnumerationResult enumerate_exact(const Theta& theta, const ModelSpec& model,
                                         bool retain_distribution = false) {
    check_bound(theta, model);
    const std::int64_t m_total = EdgeIndex(model.n_nodes()).total();
    if (m_total > 28)
        throw TooLarge("enumerate_exact: M = " + std::to_string(m_total) + " exceeds 28");
    if (retain_distribution && m_total > 24)
        throw TooLarge("enumerate_exact: distribution retention capped at M <= 24");

    EnumerationResult res;
    double log_z = -std::numeric_limits<double>::infinity();
    detail::gray_walk(theta, model, [&](std::uint64_t, double v, const std::vector<double>&,
                                        long long) { log_z = logaddexp(log_z, v); });
    res.log_normalizer = log_z;

    res.mean_suff_stats.assign(static_cast<std::size_t>(model.p()), 0.0);
    if (retain_distribution) res.log_probs.assign(1ULL << m_total, 0.0);
    detail::gray_walk(theta, model,
                      [&](std::uint64_t mask, double v, const std::vector<double>& s,
                          long long bcount) {
                          double w = std::exp(v - log_z);
                          for (std::size_t k = 0; k < s.size(); ++k)
                              res.mean_suff_stats[k] += w * s[k];
                          res.mean_brokerage += w * static_cast<double>(bcount);
                          if (retain_distribution)
                              res.log_probs[static_cast<std::size_t>(mask)] = v - log_z;
                      });
    return res;
}

}  // namespace gbeta
