#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "gbeta/graph.hpp"
#include "gbeta/population.hpp"

namespace gbeta {

struct WrongVariant : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Variant { beta, brokerage, sparse_brokerage, size_dependent };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::beta: return "beta";
        case Variant::brokerage: return "brokerage";
        case Variant::sparse_brokerage: return "sparse_brokerage";
        case Variant::size_dependent: return "size_dependent";
    }
    return "?";
}

inline double logistic(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + e^x) without overflow.
inline double log1pexp(double x) {
    if (x > 0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

inline double logaddexp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::fabs(a - b)));
}

// Size weight of a neighborhood intersection with |I| = c:
// log(1 + log(c)/c). Zero for c <= 1; the brokerage indicator is already 0
// when the intersection is empty, and log(1+0) = 0 at c = 1.
inline double size_weight(int c) {
    if (c <= 1) return 0.0;
    return std::log(1.0 + std::log(static_cast<double>(c)) / static_cast<double>(c));
}

// One of the four model variants bound to a population. p = N for the
// beta variant, N+1 otherwise. alpha in [0, 1/2) only for sparse_brokerage.
class ModelSpec {
public:
    ModelSpec(Variant v, std::shared_ptr<const Population> pop, double alpha = 0.0)
        : variant_(v), alpha_(alpha), pop_(std::move(pop)) {
        if (v != Variant::sparse_brokerage && alpha != 0.0)
            throw WrongVariant("alpha is only meaningful for sparse_brokerage");
        if (v == Variant::sparse_brokerage && (alpha < 0.0 || alpha >= 0.5))
            throw WrongVariant("sparse_brokerage requires alpha in [0, 1/2)");
        if (v == Variant::size_dependent) {
            weights_.resize(static_cast<std::size_t>(pop_->n_dep_pairs()));
            for (int id = 0; id < pop_->n_dep_pairs(); ++id)
                weights_[static_cast<std::size_t>(id)] =
                    size_weight(static_cast<int>(pop_->dep_pair(id).members.size()));
        }
    }
    ModelSpec(Variant v, Population pop, double alpha = 0.0)
        : ModelSpec(v, std::make_shared<const Population>(std::move(pop)), alpha) {}

    Variant variant() const { return variant_; }
    double alpha() const { return alpha_; }
    const Population& population() const { return *pop_; }
    std::shared_ptr<const Population> population_ptr() const { return pop_; }

    int n_nodes() const { return pop_->n_nodes(); }
    bool has_brokerage() const { return variant_ != Variant::beta; }
    int p() const { return pop_->n_nodes() + (has_brokerage() ? 1 : 0); }

    // Weight of dep pair id in s_{N+1}: 1 except for the size-dependent
    // variant, where the eta factor is absorbed into the statistic.
    double pair_weight(int dep_id) const {
        if (variant_ == Variant::size_dependent) return weights_[static_cast<std::size_t>(dep_id)];
        return 1.0;
    }

private:
    Variant variant_;
    double alpha_;
    std::shared_ptr<const Population> pop_;
    std::vector<double> weights_;
};

// Parameter vector theta: degree parameters first, brokerage parameter last
// (absent for the beta variant).
struct Theta {
    std::vector<double> v;

    Theta() = default;
    explicit Theta(std::vector<double> vals) : v(std::move(vals)) {}

    static Theta zeros(const ModelSpec& m) { return Theta(std::vector<double>(m.p(), 0.0)); }
    static Theta constant(const ModelSpec& m, double deg, double brok) {
        Theta t(std::vector<double>(static_cast<std::size_t>(m.p()), deg));
        if (m.has_brokerage()) t.v.back() = brok;
        return t;
    }

    double degree(int i) const { return v[static_cast<std::size_t>(i - 1)]; }
    double& degree(int i) { return v[static_cast<std::size_t>(i - 1)]; }

    double sup_norm() const {
        double m = 0;
        for (double x : v) m = std::max(m, std::fabs(x));
        return m;
    }
};

inline void check_bound(const Theta& t, const ModelSpec& m) {
    if (static_cast<int>(t.v.size()) != m.p())
        throw std::invalid_argument("Theta length " + std::to_string(t.v.size()) +
                                    " does not match model p=" + std::to_string(m.p()));
}

inline double brokerage_param(const Theta& t, const ModelSpec& m) {
    return m.has_brokerage() ? t.v.back() : 0.0;
}

// Parameter-norm condition: ||theta||_inf <= U + (1-vartheta)/8 * log N.
inline bool norm_bound_ok(const Theta& t, double U, double vartheta, int n_nodes) {
    return t.sup_norm() <= U + (1.0 - vartheta) / 8.0 * std::log(static_cast<double>(n_nodes));
}

// --------------------------------------------------------------------------
// Statistics
// --------------------------------------------------------------------------

// b_{i,j}: 1 iff the edge {i,j} is present and i,j have at least one shared
// partner h in N_i cap N_j with both x_{i,h} and x_{j,h} present.
inline int brokerage_indicator(const Graph& g, int i, int j, const Population& pop) {
    const auto& inter = pop.intersection(i, j);
    if (inter.empty()) return 0;
    if (!g.edge(i, j)) return 0;
    for (int h : inter)
        if (g.edge(i, h) && g.edge(j, h)) return 1;
    return 0;
}

// Unweighted count of brokered edges, sum_{i<j} b_{i,j}(x).
inline int brokered_edge_count(const Graph& g, const Population& pop) {
    int total = 0;
    for (int id = 0; id < pop.n_dep_pairs(); ++id) {
        const auto& dp = pop.dep_pair(id);
        if (!g.edge(dp.i, dp.j)) continue;
        for (int h : dp.members)
            if (g.edge(dp.i, h) && g.edge(dp.j, h)) {
                ++total;
                break;
            }
    }
    return total;
}

// Sufficient statistics: degrees, plus the (possibly size-weighted)
// brokered-edge total for the dependent variants.
inline std::vector<double> suff_stats(const Graph& g, const ModelSpec& model) {
    const Population& pop = model.population();
    const int n = pop.n_nodes();
    std::vector<double> s(static_cast<std::size_t>(model.p()), 0.0);
    const EdgeIndex& idx = g.index();
    for (std::int64_t m = 0; m < idx.total(); ++m) {
        if (!g.edge(m)) continue;
        auto [i, j] = idx.pair(m);
        s[static_cast<std::size_t>(i - 1)] += 1.0;
        s[static_cast<std::size_t>(j - 1)] += 1.0;
    }
    if (model.has_brokerage()) {
        double b = 0;
        for (int id = 0; id < pop.n_dep_pairs(); ++id) {
            const auto& dp = pop.dep_pair(id);
            if (!g.edge(dp.i, dp.j)) continue;
            for (int h : dp.members)
                if (g.edge(dp.i, h) && g.edge(dp.j, h)) {
                    b += model.pair_weight(id);
                    break;
                }
        }
        s[static_cast<std::size_t>(n)] = b;
    }
    return s;
}

// log a(x): 0 except for sparse_brokerage, which pays -alpha log N per
// present edge between nodes with empty neighborhood intersection.
inline double log_reference(const Graph& g, const ModelSpec& model) {
    if (model.variant() != Variant::sparse_brokerage || model.alpha() == 0.0) return 0.0;
    const Population& pop = model.population();
    const EdgeIndex& idx = g.index();
    std::int64_t penalized = 0;
    for (std::int64_t m = 0; m < idx.total(); ++m)
        if (g.edge(m) && pop.dep_pair_id_linear(m) < 0) ++penalized;
    return -model.alpha() * std::log(static_cast<double>(pop.n_nodes())) *
           static_cast<double>(penalized);
}

// <theta, s(x)> + log a(x); exact up to the additive constant -psi(theta).
inline double log_unnormalized_density(const Graph& g, const Theta& theta,
                                       const ModelSpec& model) {
    check_bound(theta, model);
    std::vector<double> s = suff_stats(g, model);
    double v = 0;
    for (std::size_t k = 0; k < s.size(); ++k) v += theta.v[k] * s[k];
    return v + log_reference(g, model);
}

// --------------------------------------------------------------------------
// Single-edge flip deltas
// --------------------------------------------------------------------------

// Effect of setting x_{i,j}: 0 -> 1 with the rest of the graph held fixed.
// Degrees of i and j move by +1 implicitly; the brokerage coordinate moves
// by d_suff_brokerage and the unweighted brokered count by d_brokered_count.
struct EdgeFlipDelta {
    double d_suff_brokerage = 0.0;
    int d_brokered_count = 0;
    double d_log_ref = 0.0;
};

// Shared-partner counts cnt[{a,b}] = sum_{h in N_a cap N_b} x_{a,h} x_{b,h},
// one slot per dependent pair, maintained incrementally under edge flips.
// The count for a pair never involves that pair's own edge bit.
class SharedPartnerCounts {
public:
    SharedPartnerCounts(const Population& pop, const Graph& g) : pop_(&pop) {
        cnt_.assign(static_cast<std::size_t>(pop.n_dep_pairs()), 0);
        for (int id = 0; id < pop.n_dep_pairs(); ++id) {
            const auto& dp = pop.dep_pair(id);
            int c = 0;
            for (int h : dp.members)
                if (g.edge(dp.i, h) && g.edge(dp.j, h)) ++c;
            cnt_[static_cast<std::size_t>(id)] = c;
        }
    }

    int count(int dep_id) const { return cnt_[static_cast<std::size_t>(dep_id)]; }

    // Call when edge {i,j} flips by delta = +-1. Reads only edge bits other
    // than {i,j} from g, so it may run before or after the bit itself moves.
    void apply_flip(const Graph& g, int i, int j, int delta) {
        if (!pop_->shares_subpop(i, j)) return;  // x_{i,j} is in no count otherwise
        for (int b : pop_->neighborhood(j)) {
            if (b == i) continue;
            if (!g.edge(std::min(b, j), std::max(b, j))) continue;
            cnt_[static_cast<std::size_t>(pop_->dep_pair_id(std::min(i, b), std::max(i, b)))] +=
                delta;
        }
        for (int b : pop_->neighborhood(i)) {
            if (b == j) continue;
            if (!g.edge(std::min(b, i), std::max(b, i))) continue;
            cnt_[static_cast<std::size_t>(pop_->dep_pair_id(std::min(j, b), std::max(j, b)))] +=
                delta;
        }
    }

private:
    const Population* pop_;
    std::vector<int> cnt_;
};

namespace detail {

// Shared body of the cached and cache-free delta computations. CountOf(i,j)
// must return the shared-partner count of a dependent pair evaluated with
// x_{i,j} treated as absent contributions are corrected by the caller.
template <typename CountAt>
inline EdgeFlipDelta flip_delta_impl(const Graph& g, int i, int j, const ModelSpec& model,
                                     CountAt&& count_excluding_flip_edge) {
    EdgeFlipDelta d;
    const Population& pop = model.population();
    int id = pop.dep_pair_id(std::min(i, j), std::max(i, j));
    if (id < 0) {
        if (model.variant() == Variant::sparse_brokerage && model.alpha() != 0.0)
            d.d_log_ref = -model.alpha() * std::log(static_cast<double>(pop.n_nodes()));
    }
    // b_{i,j} itself: 0 -> 1 iff some shared partner pair is already closed.
    if (id >= 0 && count_excluding_flip_edge(i, j, id) >= 1) {
        d.d_suff_brokerage += model.pair_weight(id);
        d.d_brokered_count += 1;
    }
    // Pairs for which x_{i,j} acts as a partner edge: {i,b} with
    // j in N_i cap N_b, and {j,b} with i in N_j cap N_b. Such pairs exist
    // only when i and j share a subpopulation.
    if (pop.shares_subpop(i, j)) {
        for (int b : pop.neighborhood(j)) {
            if (b == i) continue;
            if (!g.edge(std::min(i, b), std::max(i, b))) continue;
            if (!g.edge(std::min(b, j), std::max(b, j))) continue;
            int pid = pop.dep_pair_id(std::min(i, b), std::max(i, b));
            if (count_excluding_flip_edge(std::min(i, b), std::max(i, b), pid) == 0) {
                d.d_suff_brokerage += model.pair_weight(pid);
                d.d_brokered_count += 1;
            }
        }
        for (int b : pop.neighborhood(i)) {
            if (b == j) continue;
            if (!g.edge(std::min(j, b), std::max(j, b))) continue;
            if (!g.edge(std::min(b, i), std::max(b, i))) continue;
            int pid = pop.dep_pair_id(std::min(j, b), std::max(j, b));
            if (count_excluding_flip_edge(std::min(j, b), std::max(j, b), pid) == 0) {
                d.d_suff_brokerage += model.pair_weight(pid);
                d.d_brokered_count += 1;
            }
        }
    }
    return d;
}

}  // namespace detail

// O(D) delta using maintained shared-partner counts.
inline EdgeFlipDelta edge_flip_delta(const Graph& g, int i, int j, const ModelSpec& model,
                                     const SharedPartnerCounts& counts) {
    if (i > j) std::swap(i, j);
    const int xij = g.edge(i, j) ? 1 : 0;
    return detail::flip_delta_impl(g, i, j, model, [&](int a, int b, int pid) {
        int c = counts.count(pid);
        if (a == i && b == j) return c;  // own pair: count never includes x_{i,j}
        // x_{i,j} contributes one closed partner pair to cnt_{a,b} exactly when
        // present; both incident bits were verified present by the caller.
        (void)a;
        (void)b;
        return c - xij;
    });
}

// O(D^2) delta recomputing counts by direct scan; no auxiliary state.
inline EdgeFlipDelta edge_flip_delta(const Graph& g, int i, int j, const ModelSpec& model) {
    if (i > j) std::swap(i, j);
    const Population& pop = model.population();
    return detail::flip_delta_impl(g, i, j, model, [&](int a, int b, int pid) {
        int c = 0;
        for (int h : pop.dep_pair(pid).members) {
            // Count with x_{i,j} treated as absent.
            if ((a == i && h == j) || (a == j && h == i) || (b == i && h == j) ||
                (b == j && h == i))
                continue;
            if (g.edge(std::min(a, h), std::max(a, h)) && g.edge(std::min(b, h), std::max(b, h)))
                ++c;
        }
        return c;
    });
}

// Log-odds of the full conditional P(X_{i,j} = 1 | rest).
inline double conditional_logit(int i, int j, const Theta& theta, const ModelSpec& model,
                                const EdgeFlipDelta& d) {
    double eta = theta.degree(std::min(i, j)) + theta.degree(std::max(i, j)) + d.d_log_ref;
    if (model.has_brokerage()) eta += theta.v.back() * d.d_suff_brokerage;
    return eta;
}

inline double conditional_edge_prob(const Graph& g, int i, int j, const Theta& theta,
                                    const ModelSpec& model) {
    check_bound(theta, model);
    EdgeFlipDelta d =
        model.has_brokerage() ? edge_flip_delta(g, i, j, model) : EdgeFlipDelta{};
    return logistic(conditional_logit(i, j, theta, model, d));
}

inline double conditional_edge_prob(const Graph& g, int i, int j, const Theta& theta,
                                    const ModelSpec& model, const SharedPartnerCounts& counts) {
    EdgeFlipDelta d =
        model.has_brokerage() ? edge_flip_delta(g, i, j, model, counts) : EdgeFlipDelta{};
    return logistic(conditional_logit(i, j, theta, model, d));
}

// --------------------------------------------------------------------------
// Analytic conditional-probability envelopes
// --------------------------------------------------------------------------

enum class PairClass { empty_intersection, nonempty_intersection };

struct CondProbEnvelope {
    double l0, u0, l1, u1;
};

// L_k/U_k bounds on P(X_{i,j} = k | rest). The beta variant uses the
// exponent 2||theta||_inf; the dependent variants use (3 + 2D)||theta||_inf,
// with N^{-alpha} factors on empty-intersection pairs under sparsity.
inline CondProbEnvelope conditional_prob_envelope(const ModelSpec& model, const Theta& theta,
                                                  PairClass cls) {
    check_bound(theta, model);
    const double t = theta.sup_norm();
    const int d_max = model.population().max_neighborhood_size();
    const double n_alpha =
        std::pow(static_cast<double>(model.n_nodes()),
                 -(cls == PairClass::empty_intersection ? model.alpha() : 0.0));
    double e;
    if (model.variant() == Variant::beta)
        e = 2.0 * t;
    else
        e = (3.0 + 2.0 * static_cast<double>(d_max)) * t;
    CondProbEnvelope env;
    env.l0 = 1.0 / (1.0 + std::exp(e));
    env.u0 = 1.0 / (1.0 + std::exp(-e) * n_alpha);
    env.l1 = n_alpha / (1.0 + std::exp(e));
    env.u1 = 1.0 / (1.0 + std::exp(-e));
    return env;
}

inline PairClass pair_class(const Population& pop, int i, int j) {
    return pop.dep_pair_id(std::min(i, j), std::max(i, j)) < 0
               ? PairClass::empty_intersection
               : PairClass::nonempty_intersection;
}

}  // namespace gbeta
