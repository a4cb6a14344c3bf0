#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gbeta/model.hpp"
#include "gbeta/rng.hpp"
#include "gbeta/sampler.hpp"

namespace gbeta {

struct AssumptionViolated : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --------------------------------------------------------------------------
// Conditional independence graph
// --------------------------------------------------------------------------

// Vertices are the M edge variables (linear indices); two vertices are
// adjacent iff they appear together in some factor of the density. Factor
// {c,d} involves x_{c,d} and the partner edges {c,h}, {d,h} for h in
// N_c cap N_d, so the graph is the union of one clique per dependent pair.
struct CondIndGraph {
    std::int64_t n_vertices = 0;
    std::vector<std::vector<std::int32_t>> adj;  // sorted, deduplicated

    bool adjacent(std::int64_t a, std::int64_t b) const {
        const auto& row = adj[static_cast<std::size_t>(a)];
        return std::binary_search(row.begin(), row.end(), static_cast<std::int32_t>(b));
    }
    std::int64_t n_edges() const {
        std::int64_t tot = 0;
        for (const auto& row : adj) tot += static_cast<std::int64_t>(row.size());
        return tot / 2;
    }
    int max_degree() const {
        std::size_t best = 0;
        for (const auto& row : adj) best = std::max(best, row.size());
        return static_cast<int>(best);
    }
};

inline CondIndGraph build_cond_ind_graph(const Population& pop) {
    const EdgeIndex& idx = pop.edge_index();
    CondIndGraph ci;
    ci.n_vertices = idx.total();
    ci.adj.assign(static_cast<std::size_t>(idx.total()), {});
    std::vector<std::int32_t> clique;
    for (int id = 0; id < pop.n_dep_pairs(); ++id) {
        const auto& dp = pop.dep_pair(id);
        clique.clear();
        clique.push_back(static_cast<std::int32_t>(idx.linear(dp.i, dp.j)));
        for (int h : dp.members) {
            clique.push_back(static_cast<std::int32_t>(idx.linear(dp.i, h)));
            clique.push_back(static_cast<std::int32_t>(idx.linear(dp.j, h)));
        }
        for (std::size_t a = 0; a < clique.size(); ++a)
            for (std::size_t b = a + 1; b < clique.size(); ++b) {
                ci.adj[static_cast<std::size_t>(clique[a])].push_back(clique[b]);
                ci.adj[static_cast<std::size_t>(clique[b])].push_back(clique[a]);
            }
    }
    for (auto& row : ci.adj) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
    }
    return ci;
}

// Model 1 has independent edges: no adjacency at all.
inline CondIndGraph build_cond_ind_graph(const ModelSpec& model) {
    if (model.variant() == Variant::beta) {
        CondIndGraph ci;
        ci.n_vertices = model.population().edge_index().total();
        ci.adj.assign(static_cast<std::size_t>(ci.n_vertices), {});
        return ci;
    }
    return build_cond_ind_graph(model.population());
}

struct AssumptionAReport {
    int max_neighbors = 0;
    bool within_cap = true;
    std::vector<int> neighbor_counts;  // |frak-N_m| per edge variable
};

// Assumption A: every edge variable depends on a bounded set of others.
inline AssumptionAReport assumption_A_neighbors(const CondIndGraph& ci, int declared_cap) {
    AssumptionAReport rep;
    rep.neighbor_counts.reserve(ci.adj.size());
    for (const auto& row : ci.adj) {
        rep.neighbor_counts.push_back(static_cast<int>(row.size()));
        rep.max_neighbors = std::max(rep.max_neighbors, rep.neighbor_counts.back());
    }
    rep.within_cap = rep.max_neighbors <= declared_cap;
    return rep;
}

inline AssumptionAReport assumption_A_neighbors(const Population& pop, int declared_cap) {
    return assumption_A_neighbors(build_cond_ind_graph(pop), declared_cap);
}

// --------------------------------------------------------------------------
// Empirical conditional-independence verification
// --------------------------------------------------------------------------

struct CondIndViolation {
    std::int64_t pair;     // edge variable whose conditional moved
    std::int64_t flipped;  // edge variable outside the conditioning set
    std::uint64_t rest;    // configuration mask of the remaining variables
    double p_before, p_after;
};

struct CondIndReport {
    long long checks = 0;
    std::vector<CondIndViolation> violations;
    bool ok() const { return violations.empty(); }
};

// Checks that P(X_m = 1 | rest) is invariant to flipping any edge outside
// the conditioning set implied by the factorization (the vertex's
// CondIndGraph neighborhood; empty under the beta variant). Exhaustive over
// rest configurations when exhaustive = true (Mbits must be small), else
// randomized with n_checks draws.
inline CondIndReport verify_cond_ind_empirically(const ModelSpec& model, const Theta& theta,
                                                 const std::vector<std::int64_t>& pairs,
                                                 bool exhaustive, long long n_checks = 1000,
                                                 std::uint64_t seed = 0, double tol = 1e-14) {
    check_bound(theta, model);
    const CondIndGraph ci = build_cond_ind_graph(model);
    const std::int64_t m_total = ci.n_vertices;
    const EdgeIndex idx(model.n_nodes());
    CondIndReport rep;

    auto cond_prob = [&](const Graph& g, std::int64_t m) {
        auto [i, j] = idx.pair(m);
        return conditional_edge_prob(g, i, j, theta, model);
    };

    if (exhaustive) {
        if (m_total > 24) throw TooLarge("verify_cond_ind_empirically: exhaustive mode needs small M");
        for (std::int64_t m : pairs) {
            const auto& nbrs = ci.adj[static_cast<std::size_t>(m)];
            for (std::uint64_t rest = 0; rest < (1ULL << m_total); ++rest) {
                Graph g(model.n_nodes());
                for (std::int64_t e = 0; e < m_total; ++e)
                    g.set_edge(e, (rest >> e) & 1ULL);
                double p0 = cond_prob(g, m);
                for (std::int64_t e = 0; e < m_total; ++e) {
                    if (e == m) continue;
                    if (std::binary_search(nbrs.begin(), nbrs.end(),
                                           static_cast<std::int32_t>(e)))
                        continue;
                    g.flip(e);
                    double p1 = cond_prob(g, m);
                    g.flip(e);
                    ++rep.checks;
                    if (std::fabs(p1 - p0) > tol)
                        rep.violations.push_back({m, e, rest, p0, p1});
                }
            }
        }
        return rep;
    }

    Rng rng(seed);
    for (long long c = 0; c < n_checks; ++c) {
        std::int64_t m = pairs[static_cast<std::size_t>(rng.below(pairs.size()))];
        const auto& nbrs = ci.adj[static_cast<std::size_t>(m)];
        Graph g(model.n_nodes());
        for (std::int64_t e = 0; e < m_total; ++e) g.set_edge(e, rng.bernoulli(0.5));
        // Draw outside edges until one misses the conditioning set.
        std::int64_t e = -1;
        for (int tries = 0; tries < 64; ++tries) {
            std::int64_t cand = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(m_total)));
            if (cand == m) continue;
            if (std::binary_search(nbrs.begin(), nbrs.end(), static_cast<std::int32_t>(cand)))
                continue;
            e = cand;
            break;
        }
        if (e < 0) continue;  // fully dependent vertex; nothing to test
        double p0 = cond_prob(g, m);
        g.flip(e);
        double p1 = cond_prob(g, m);
        ++rep.checks;
        if (std::fabs(p1 - p0) > tol) rep.violations.push_back({m, e, 0, p0, p1});
    }
    return rep;
}

// --------------------------------------------------------------------------
// Subpopulation graph and Assumption B
// --------------------------------------------------------------------------

// Vertices are subpopulations (0-based); {k,l} adjacent iff A_k cap A_l != 0.
struct SubpopGraph {
    int k = 0;
    std::vector<std::vector<int>> adj;
    std::vector<std::vector<int>> dist;  // -1 encodes infinity

    bool connected() const {
        if (k == 0) return true;
        for (int v = 0; v < k; ++v)
            if (dist[0][static_cast<std::size_t>(v)] < 0) return false;
        return true;
    }
    std::int64_t n_edges() const {
        std::int64_t tot = 0;
        for (const auto& row : adj) tot += static_cast<std::int64_t>(row.size());
        return tot / 2;
    }
    bool is_tree() const { return connected() && n_edges() == k - 1; }

    // max_k |V_{A_k, l}|: worst-case number of subpopulations at distance l.
    int max_count_at_distance(int l) const {
        int best = 0;
        for (int v = 0; v < k; ++v) {
            int c = 0;
            for (int w = 0; w < k; ++w)
                if (dist[static_cast<std::size_t>(v)][static_cast<std::size_t>(w)] == l) ++c;
            best = std::max(best, c);
        }
        return best;
    }
    int diameter() const {
        int d = 0;
        for (const auto& row : dist)
            for (int v : row) d = std::max(d, v);
        return d;
    }
};

inline SubpopGraph build_subpop_graph(const Population& pop) {
    SubpopGraph sg;
    sg.k = pop.n_subpops();
    sg.adj.assign(static_cast<std::size_t>(sg.k), {});
    const auto& sps = pop.subpops();
    for (int a = 0; a < sg.k; ++a)
        for (int b = a + 1; b < sg.k; ++b) {
            const auto& sa = sps[static_cast<std::size_t>(a)];
            const auto& sb = sps[static_cast<std::size_t>(b)];
            bool overlap = false;
            for (int v : sa)
                if (std::binary_search(sb.begin(), sb.end(), v)) {
                    overlap = true;
                    break;
                }
            if (overlap) {
                sg.adj[static_cast<std::size_t>(a)].push_back(b);
                sg.adj[static_cast<std::size_t>(b)].push_back(a);
            }
        }
    sg.dist.assign(static_cast<std::size_t>(sg.k), std::vector<int>(static_cast<std::size_t>(sg.k), -1));
    for (int src = 0; src < sg.k; ++src) {
        auto& row = sg.dist[static_cast<std::size_t>(src)];
        std::deque<int> q{src};
        row[static_cast<std::size_t>(src)] = 0;
        while (!q.empty()) {
            int v = q.front();
            q.pop_front();
            for (int w : sg.adj[static_cast<std::size_t>(v)])
                if (row[static_cast<std::size_t>(w)] < 0) {
                    row[static_cast<std::size_t>(w)] = row[static_cast<std::size_t>(v)] + 1;
                    q.push_back(w);
                }
        }
    }
    return sg;
}

struct AssumptionBReport {
    std::vector<int> counts;          // max_k |V_{A_k,l}| for l = 1..diameter
    bool b1_holds = true;
    std::vector<int> b1_violated_l;   // distances where the envelope fails
    std::vector<double> b1_envelope_raw;       // omega1 + omega2/(8 D^2) log l
    std::vector<double> b1_envelope_absorbed;  // 8 D^2 omega1 + omega2 log l
    bool b2_tree = false;
    std::vector<double> b2_growth_log_ratio;   // log(max(g(l),1)) / l
    double b2_growth_witness = 0.0;            // max of the above
};

// B.1 verifies the logarithmic envelope on the realized subpopulation
// counts; B.2 tests the tree property and reports the subexponential-growth
// witness. No verdict is issued for B.2 growth: the witness is reported.
inline AssumptionBReport check_assumption_B(const SubpopGraph& sg, double omega1, double omega2,
                                            int d_max) {
    AssumptionBReport rep;
    const double d2 = 8.0 * std::max(d_max, 2) * std::max(d_max, 2);
    const int diam = sg.diameter();
    for (int l = 1; l <= std::max(diam, 1); ++l) {
        int g_l = sg.max_count_at_distance(l);
        rep.counts.push_back(g_l);
        double env_raw = omega1 + omega2 / d2 * std::log(static_cast<double>(l));
        rep.b1_envelope_raw.push_back(env_raw);
        rep.b1_envelope_absorbed.push_back(d2 * omega1 + omega2 * std::log(static_cast<double>(l)));
        if (static_cast<double>(g_l) > env_raw) {
            rep.b1_holds = false;
            rep.b1_violated_l.push_back(l);
        }
        double lr = std::log(static_cast<double>(std::max(g_l, 1))) / static_cast<double>(l);
        rep.b2_growth_log_ratio.push_back(lr);
        rep.b2_growth_witness = std::max(rep.b2_growth_witness, lr);
    }
    rep.b2_tree = sg.is_tree();
    return rep;
}

// --------------------------------------------------------------------------
// pi* and Psi bounds
// --------------------------------------------------------------------------

// Worst-case full-conditional bound: 0 under the beta variant, else
// 1 / (1 + exp(-(3 + 2D) ||theta||_inf)).
inline double pi_star_bound(const ModelSpec& model, const Theta& theta) {
    check_bound(theta, model);
    if (model.variant() == Variant::beta) return 0.0;
    const double e = (3.0 + 2.0 * model.population().max_neighborhood_size()) * theta.sup_norm();
    return 1.0 / (1.0 + std::exp(-e));
}

struct PsiBound {
    double analytic = 0.0;           // sqrt(N) or max{1, 3 D^2} sqrt(N)
    double empirical_max_flip = 0.0; // largest observed |delta s_{N+1}| over random flips
};

inline PsiBound psi_bound(const Population& pop, const ModelSpec& model,
                          int n_random_graphs = 40, std::uint64_t seed = 7) {
    PsiBound out;
    const double rn = std::sqrt(static_cast<double>(pop.n_nodes()));
    const double d = pop.max_neighborhood_size();
    out.analytic = model.has_brokerage() ? std::max(1.0, 3.0 * d * d) * rn : rn;
    if (!model.has_brokerage()) return out;
    Rng rng(seed);
    const std::int64_t m_total = pop.edge_index().total();
    for (int t = 0; t < n_random_graphs; ++t) {
        Graph g(pop.n_nodes());
        for (std::int64_t m = 0; m < m_total; ++m) g.set_edge(m, rng.bernoulli(0.5));
        for (int f = 0; f < 20; ++f) {
            std::int64_t m = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(m_total)));
            auto [i, j] = pop.edge_index().pair(m);
            EdgeFlipDelta dlt = edge_flip_delta(g, i, j, model);
            out.empirical_max_flip =
                std::max(out.empirical_max_flip, std::fabs(dlt.d_suff_brokerage));
            g.flip(m);
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// Coupling: exact tables, the greedy coupling run, and the MC matrix
// --------------------------------------------------------------------------

// log unnormalized density for every graph state mask; M <= 24.
inline std::vector<double> log_density_table(const Theta& theta, const ModelSpec& model) {
    check_bound(theta, model);
    const std::int64_t m_total = EdgeIndex(model.n_nodes()).total();
    if (m_total > 24) throw TooLarge("log_density_table: M > 24");
    std::vector<double> table(1ULL << m_total);
    detail::gray_walk(theta, model,
                      [&](std::uint64_t mask, double v, const std::vector<double>&, long long) {
                          table[static_cast<std::size_t>(mask)] = v;
                      });
    return table;
}

// P(X_j = 1 | X_A = a) where A is the assigned-vertex mask and a the values
// on A; marginalizes the table over the free vertices.
inline double prefix_conditional(const std::vector<double>& table, int m_total,
                                 std::uint32_t assigned_mask, std::uint32_t assigned_vals,
                                 int j) {
    const std::uint32_t full = m_total == 32 ? 0xffffffffu : ((1u << m_total) - 1u);
    const std::uint32_t free2 = full & ~assigned_mask & ~(1u << j);
    double ls0 = -std::numeric_limits<double>::infinity();
    double ls1 = -std::numeric_limits<double>::infinity();
    std::uint32_t sub = free2;
    while (true) {
        std::uint32_t base = (assigned_vals & assigned_mask) | sub;
        ls0 = logaddexp(ls0, table[base]);
        ls1 = logaddexp(ls1, table[base | (1u << j)]);
        if (sub == 0) break;
        sub = (sub - 1) & free2;
    }
    return std::exp(ls1 - logaddexp(ls0, ls1));
}

struct CouplingRun {
    std::uint32_t x_star = 0;       // completion with X_i = 0
    std::uint32_t x_star_star = 0;  // completion with X_i = 1
};

// One pass of the greedy coupling: starting from a shared prefix and the
// split value at vertex i, extend vertex by vertex, preferring the smallest
// unassigned vertex adjacent to a current disagreement, drawing each pair
// from the monotone optimal coupling of the two prefix conditionals
// (X* = 1{U < p}, X** = 1{U < q}, so P(disagree) = |p - q|).
inline CouplingRun coupling_run(const std::vector<double>& table, int m_total,
                                const std::vector<std::uint32_t>& adj_mask, int i,
                                std::uint32_t prefix_vals, Rng& rng) {
    CouplingRun r;
    std::uint32_t assigned = (i == 31) ? 0xffffffffu : ((1u << (i + 1)) - 1u);
    r.x_star = prefix_vals & (assigned >> 1);  // bits 0..i-1
    r.x_star_star = r.x_star | (1u << i);
    const std::uint32_t full = m_total == 32 ? 0xffffffffu : ((1u << m_total) - 1u);
    while (assigned != full) {
        std::uint32_t disagree = (r.x_star ^ r.x_star_star) & assigned;
        int j = -1;
        for (int cand = 0; cand < m_total; ++cand) {
            if ((assigned >> cand) & 1u) continue;
            if (adj_mask[static_cast<std::size_t>(cand)] & disagree) {
                j = cand;
                break;
            }
        }
        if (j < 0)
            for (int cand = 0; cand < m_total; ++cand)
                if (!((assigned >> cand) & 1u)) {
                    j = cand;
                    break;
                }
        double p = prefix_conditional(table, m_total, assigned, r.x_star, j);
        double q = prefix_conditional(table, m_total, assigned, r.x_star_star, j);
        double u = rng.uniform01();
        if (u < p) r.x_star |= 1u << j;
        if (u < q) r.x_star_star |= 1u << j;
        assigned |= 1u << j;
    }
    return r;
}

enum class CouplingPrefixMode { exhaustive, sampled };

struct CouplingMcOptions {
    int n_mc = 200;
    std::uint64_t seed = 0;
    CouplingPrefixMode mode = CouplingPrefixMode::exhaustive;
    int n_prefix_samples = 64;  // per vertex, sampled mode only
};

struct CouplingMcResult {
    int m_total = 0;
    bool exhaustive = true;  // false marks the lower-confidence sampled estimate
    // Upper triangular: entry(i,j), i < j, is the max over prefixes of the
    // MC disagreement frequency; diagonal 1, below-diagonal 0.
    std::vector<std::vector<double>> entries;
    double entry(int i, int j) const {
        if (i == j) return 1.0;
        if (i > j) return 0.0;
        return entries[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
};

inline CouplingMcResult coupling_matrix_mc(const ModelSpec& model, const Theta& theta,
                                           const CouplingMcOptions& opts = {}) {
    check_bound(theta, model);
    const std::int64_t m64 = EdgeIndex(model.n_nodes()).total();
    if (opts.mode == CouplingPrefixMode::exhaustive && m64 > 15)
        throw TooLarge("coupling_matrix_mc: exhaustive prefixes capped at M <= 15");
    if (m64 > 24) throw TooLarge("coupling_matrix_mc: M > 24");
    const int m_total = static_cast<int>(m64);

    const std::vector<double> table = log_density_table(theta, model);
    const CondIndGraph ci = build_cond_ind_graph(model);
    std::vector<std::uint32_t> adj_mask(static_cast<std::size_t>(m_total), 0);
    for (int v = 0; v < m_total; ++v)
        for (std::int32_t w : ci.adj[static_cast<std::size_t>(v)])
            adj_mask[static_cast<std::size_t>(v)] |= 1u << w;

    CouplingMcResult res;
    res.m_total = m_total;
    res.exhaustive = opts.mode == CouplingPrefixMode::exhaustive;
    res.entries.assign(static_cast<std::size_t>(m_total),
                       std::vector<double>(static_cast<std::size_t>(m_total), 0.0));

    std::vector<long long> disagree_count(static_cast<std::size_t>(m_total));
    for (int i = 0; i < m_total; ++i) {
        auto run_prefix = [&](std::uint32_t prefix, Rng& rng) {
            std::fill(disagree_count.begin(), disagree_count.end(), 0);
            for (int rep = 0; rep < opts.n_mc; ++rep) {
                CouplingRun r = coupling_run(table, m_total, adj_mask, i, prefix, rng);
                std::uint32_t dis = r.x_star ^ r.x_star_star;
                for (int j = i + 1; j < m_total; ++j)
                    if ((dis >> j) & 1u) ++disagree_count[static_cast<std::size_t>(j)];
            }
            for (int j = i + 1; j < m_total; ++j) {
                double freq = static_cast<double>(disagree_count[static_cast<std::size_t>(j)]) /
                              static_cast<double>(opts.n_mc);
                auto& cell = res.entries[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                cell = std::max(cell, freq);
            }
        };
        if (opts.mode == CouplingPrefixMode::exhaustive) {
            const std::uint32_t n_prefix = 1u << i;
            for (std::uint32_t prefix = 0; prefix < n_prefix; ++prefix) {
                Rng rng(mix_seed(opts.seed, static_cast<std::uint64_t>(i), prefix, 0xC0u));
                run_prefix(prefix, rng);
            }
        } else {
            Rng prng(mix_seed(opts.seed, static_cast<std::uint64_t>(i), 0, 0xC1u));
            const std::uint32_t space = i >= 31 ? 0xffffffffu : ((1u << i) - 1u);
            for (int s = 0; s < opts.n_prefix_samples; ++s) {
                std::uint32_t prefix = static_cast<std::uint32_t>(prng.next_u64()) & space;
                Rng rng(mix_seed(opts.seed, static_cast<std::uint64_t>(i), prefix, 0xC2u));
                run_prefix(prefix, rng);
            }
        }
    }
    return res;
}

// --------------------------------------------------------------------------
// Graphical cover distances and the analytic |||D|||_2 bounds
// --------------------------------------------------------------------------

// Distances in the cover graph G*: the conditional independence graph plus a
// clique over all edge variables inside A_v cup A_w for every overlapping
// subpopulation pair. BFS from every vertex; -1 encodes infinity.
inline std::vector<std::vector<int>> coupling_cover_distances(const Population& pop) {
    const EdgeIndex& idx = pop.edge_index();
    const std::int64_t m_total = idx.total();
    CondIndGraph ci = build_cond_ind_graph(pop);
    std::vector<std::vector<std::int32_t>> adj = ci.adj;

    const auto& sps = pop.subpops();
    const SubpopGraph sg = build_subpop_graph(pop);
    std::vector<int> nodes;
    std::vector<std::int32_t> verts;
    for (int a = 0; a < sg.k; ++a)
        for (int b : sg.adj[static_cast<std::size_t>(a)]) {
            if (b < a) continue;
            nodes.clear();
            nodes.insert(nodes.end(), sps[static_cast<std::size_t>(a)].begin(),
                         sps[static_cast<std::size_t>(a)].end());
            nodes.insert(nodes.end(), sps[static_cast<std::size_t>(b)].begin(),
                         sps[static_cast<std::size_t>(b)].end());
            std::sort(nodes.begin(), nodes.end());
            nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
            verts.clear();
            for (std::size_t x = 0; x < nodes.size(); ++x)
                for (std::size_t y = x + 1; y < nodes.size(); ++y)
                    verts.push_back(static_cast<std::int32_t>(idx.linear(nodes[x], nodes[y])));
            for (std::size_t x = 0; x < verts.size(); ++x)
                for (std::size_t y = x + 1; y < verts.size(); ++y) {
                    adj[static_cast<std::size_t>(verts[x])].push_back(verts[y]);
                    adj[static_cast<std::size_t>(verts[y])].push_back(verts[x]);
                }
        }
    for (auto& row : adj) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
    }

    std::vector<std::vector<int>> dist(static_cast<std::size_t>(m_total),
                                       std::vector<int>(static_cast<std::size_t>(m_total), -1));
    for (std::int64_t src = 0; src < m_total; ++src) {
        auto& row = dist[static_cast<std::size_t>(src)];
        std::deque<std::int32_t> q{static_cast<std::int32_t>(src)};
        row[static_cast<std::size_t>(src)] = 0;
        while (!q.empty()) {
            std::int32_t v = q.front();
            q.pop_front();
            for (std::int32_t w : adj[static_cast<std::size_t>(v)])
                if (row[static_cast<std::size_t>(w)] < 0) {
                    row[static_cast<std::size_t>(w)] = row[static_cast<std::size_t>(v)] + 1;
                    q.push_back(w);
                }
        }
    }
    return dist;
}

// Analytic per-entry percolation bound under Assumption B.2:
// D_{ij} <= pi* (1 - (1 - pi*)^{2 D^2})^{d-1} for cover distance d >= 1.
inline double b2_entry_bound(double pi_star, int d_max, int cover_dist) {
    if (cover_dist < 0) return 0.0;  // disconnected: no path of disagreement
    if (cover_dist == 0) return 1.0;
    const double dd = std::max(d_max, 2);
    const double rho = 1.0 - std::pow(1.0 - pi_star, 2.0 * dd * dd);
    return pi_star * std::pow(rho, cover_dist - 1);
}

struct B1Params {
    double omega1 = 0.0;
    double omega2 = 0.0;
};
struct B2Params {};
using AssumptionBParams = std::variant<B1Params, B2Params>;

// Upper bound on |||D|||_2 assembled from the percolation bounds:
// 1 + sum_k (#vertices at cover distance k) * (per-entry bound at k).
//
// B.1: the count envelope is 8 D^2 omega1 + omega2 log k (the 8 D^2 is
// absorbed into omega1); the per-entry bound exp(-A k^{1 - omega2 |log(1-pi*)|})
// with A = exp(-8 D^2 omega1 |log(1-pi*)|). The series is summed until terms
// fall below 1e-15 (or a term cap), with the remainder bounded by the
// dominating series c / k^2, c = (omega1' + omega2) u! / A^u.
//
// B.2: per-distance counts 2 D^2 g(k) with g taken from the realized
// subpopulation graph up to its diameter and held at its peak beyond, so the
// geometric tail sums in closed form. For chains this makes the bound
// independent of the chain length.
inline double coupling_norm_bound(const Population& pop, const ModelSpec& model,
                                  const Theta& theta, const AssumptionBParams& assumption) {
    check_bound(theta, model);
    if (model.variant() == Variant::beta) return 1.0;  // D is the identity

    const double dd = std::max(pop.max_neighborhood_size(), 2);
    // log(1 - pi*) = -log(1 + e^{(3+2D)||theta||}), formed without
    // cancellation; pi* sits next to 1 already at moderate norms.
    const double expo =
        (3.0 + 2.0 * pop.max_neighborhood_size()) * theta.sup_norm();
    const double log_one_minus = -log1pexp(expo);
    const SubpopGraph sg = build_subpop_graph(pop);
    const double inf = std::numeric_limits<double>::infinity();

    if (std::holds_alternative<B2Params>(assumption)) {
        if (!sg.is_tree())
            throw AssumptionViolated("assumption B.2: subpopulation graph is not a tree");
        const double log_omr = 2.0 * dd * dd * log_one_minus;  // log(1 - rho)
        if (log_omr < -700.0) return inf;                      // 1 - rho underflows
        const double one_minus_rho = std::exp(log_omr);
        const double rho = 1.0 - one_minus_rho;
        const int diam = std::max(sg.diameter(), 1);
        double g_peak = 1.0;
        double total = 1.0;
        double rho_k = 1.0;
        for (int k = 1; k <= diam; ++k) {
            rho_k *= rho;
            double g_k = sg.max_count_at_distance(k);
            g_peak = std::max(g_peak, g_k);
            total += 2.0 * dd * dd * g_k * rho_k;
        }
        // Tail beyond the realized diameter at the plateau envelope.
        total += 2.0 * dd * dd * g_peak * rho_k * rho / one_minus_rho;
        return total;
    }

    const B1Params b1 = std::get<B1Params>(assumption);
    const double log_r = -log_one_minus;  // |log(1 - pi*)|
    if (!(b1.omega2 < 1.0 / log_r))
        throw AssumptionViolated("assumption B.1: omega2 >= 1/|log(1-pi*)|");
    // The envelope must dominate the realized per-distance counts.
    for (int l = 1; l <= sg.diameter(); ++l) {
        double env = b1.omega1 + b1.omega2 / (8.0 * dd * dd) * std::log(static_cast<double>(l));
        if (static_cast<double>(sg.max_count_at_distance(l)) > env)
            throw AssumptionViolated("assumption B.1: count envelope fails at distance " +
                                     std::to_string(l));
    }
    const double w1 = 8.0 * dd * dd * b1.omega1;  // absorbed omega1
    const double beta = 1.0 - b1.omega2 * log_r;
    const double log_a = -w1 * log_r;  // A = exp(log_a) in (0, 1)
    double total = 1.0;
    const long long k_cap = 1000000;
    long long k = 1;
    for (; k <= k_cap; ++k) {
        double term = (w1 + b1.omega2 * std::log(static_cast<double>(k))) *
                      std::exp(-std::exp(log_a) * std::pow(static_cast<double>(k), beta));
        total += term;
        if (term < 1e-15 * std::max(1.0, total)) break;
    }
    // Dominating-series remainder: sum_{k > k0} c / k^2 <= c / k0.
    const int u = static_cast<int>(std::ceil(3.0 / beta));
    double log_c = std::lgamma(static_cast<double>(u) + 1.0) - u * log_a +
                   std::log(w1 + b1.omega2);
    double log_tail = log_c - std::log(static_cast<double>(std::min(k, k_cap)));
    if (log_tail > 700.0) return inf;
    return total + std::exp(log_tail);
}

// --------------------------------------------------------------------------
// Aggregate report
// --------------------------------------------------------------------------

struct DependenceReport {
    int d_max = 0;
    double pi_star = 0.0;
    PsiBound psi;
    std::optional<AssumptionBReport> assumption_b;
    double coupling_bound = std::numeric_limits<double>::infinity();
    bool coupling_bound_valid = false;
    std::string coupling_bound_error;
    std::optional<CouplingMcResult> mc_coupling;
};

}  // namespace gbeta
