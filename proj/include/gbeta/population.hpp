#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbeta/edge_index.hpp"

namespace gbeta {

struct EmptyCoverage : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BadNodeId : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Node set {1..N} with K possibly overlapping subpopulations A_1..A_K.
//
// Derived structure, all fixed at construction:
//   - neighborhood(i) = { j != i : i and j share at least one subpopulation },
//   - the "dependent pairs" {i,j} with nonempty neighborhood intersection
//     N_i cap N_j, indexed densely so per-pair state can live in flat arrays,
//   - D = max_i |N_i|.
//
// Immutable after construction; safe to share read-only across threads.
class Population {
public:
    struct DepPair {
        int i, j;                  // 1-based, i < j
        std::vector<int> members;  // N_i cap N_j, sorted ascending
    };

    Population(std::vector<std::vector<int>> subpops, int n_nodes)
        : n_(n_nodes), idx_(n_nodes), subpops_(std::move(subpops)) {
        if (n_ < 1) throw BadNodeId("Population: n_nodes must be >= 1");
        std::vector<char> covered(static_cast<std::size_t>(n_) + 1, 0);
        min3_ = true;
        for (auto& sp : subpops_) {
            std::sort(sp.begin(), sp.end());
            sp.erase(std::unique(sp.begin(), sp.end()), sp.end());
            if (sp.empty()) throw BadNodeId("Population: empty subpopulation");
            if (sp.front() < 1 || sp.back() > n_)
                throw BadNodeId("Population: node id outside 1.." + std::to_string(n_));
            if (static_cast<int>(sp.size()) < 3) min3_ = false;
            for (int v : sp) covered[static_cast<std::size_t>(v)] = 1;
        }
        for (int v = 1; v <= n_; ++v)
            if (!covered[static_cast<std::size_t>(v)])
                throw EmptyCoverage("Population: node " + std::to_string(v) +
                                    " belongs to no subpopulation");

        // Neighborhoods from subpopulation co-membership.
        nbr_mat_.assign(static_cast<std::size_t>(n_) * n_, 0);
        for (const auto& sp : subpops_)
            for (std::size_t a = 0; a < sp.size(); ++a)
                for (std::size_t b = a + 1; b < sp.size(); ++b) {
                    nbr_mat_[pos(sp[a], sp[b])] = 1;
                    nbr_mat_[pos(sp[b], sp[a])] = 1;
                }
        nbr_.assign(static_cast<std::size_t>(n_) + 1, {});
        d_max_ = 0;
        for (int i = 1; i <= n_; ++i) {
            for (int j = 1; j <= n_; ++j)
                if (nbr_mat_[pos(i, j)]) nbr_[static_cast<std::size_t>(i)].push_back(j);
            d_max_ = std::max(d_max_, static_cast<int>(nbr_[static_cast<std::size_t>(i)].size()));
        }

        // Pairwise neighborhood intersections: h lies in N_i cap N_j exactly
        // when both i and j are neighbors of h. Iterating h ascending leaves
        // each member list sorted.
        dep_id_.assign(static_cast<std::size_t>(idx_.total()), -1);
        for (int h = 1; h <= n_; ++h) {
            const auto& nh = nbr_[static_cast<std::size_t>(h)];
            for (std::size_t a = 0; a < nh.size(); ++a)
                for (std::size_t b = a + 1; b < nh.size(); ++b) {
                    std::int64_t m = idx_.linear(nh[a], nh[b]);
                    int id = dep_id_[static_cast<std::size_t>(m)];
                    if (id < 0) {
                        id = static_cast<int>(deps_.size());
                        dep_id_[static_cast<std::size_t>(m)] = id;
                        deps_.push_back(DepPair{nh[a], nh[b], {}});
                    }
                    deps_[static_cast<std::size_t>(id)].members.push_back(h);
                }
        }
    }

    int n_nodes() const { return n_; }
    int n_subpops() const { return static_cast<int>(subpops_.size()); }
    const std::vector<std::vector<int>>& subpops() const { return subpops_; }
    const EdgeIndex& edge_index() const { return idx_; }

    const std::vector<int>& neighborhood(int i) const {
        check_node(i);
        return nbr_[static_cast<std::size_t>(i)];
    }

    // D = max_i |N_i|
    int max_neighborhood_size() const { return d_max_; }

    // False when some |A_k| < 3; the dependence-bound guarantees assume >= 3.
    bool assumption_min3() const { return min3_; }

    bool shares_subpop(int i, int j) const {
        check_node(i);
        check_node(j);
        if (i == j) return false;
        return nbr_mat_[pos(i, j)] != 0;
    }

    int n_dep_pairs() const { return static_cast<int>(deps_.size()); }

    // -1 when N_i cap N_j is empty.
    int dep_pair_id(int i, int j) const {
        return dep_id_[static_cast<std::size_t>(idx_.linear(i, j))];
    }
    int dep_pair_id_linear(std::int64_t m) const { return dep_id_[static_cast<std::size_t>(m)]; }

    const DepPair& dep_pair(int id) const { return deps_[static_cast<std::size_t>(id)]; }

    // N_i cap N_j; empty vector when the pair has no entry.
    const std::vector<int>& intersection(int i, int j) const {
        int id = dep_pair_id(i, j);
        return id < 0 ? empty_ : deps_[static_cast<std::size_t>(id)].members;
    }

    int intersection_size(int i, int j) const {
        int id = dep_pair_id(i, j);
        return id < 0 ? 0 : static_cast<int>(deps_[static_cast<std::size_t>(id)].members.size());
    }

private:
    std::size_t pos(int i, int j) const {
        return static_cast<std::size_t>(i - 1) * n_ + static_cast<std::size_t>(j - 1);
    }
    void check_node(int i) const {
        if (i < 1 || i > n_) throw BadNodeId("Population: node id " + std::to_string(i));
    }

    int n_;
    EdgeIndex idx_;
    std::vector<std::vector<int>> subpops_;
    std::vector<std::vector<int>> nbr_;
    std::vector<char> nbr_mat_;
    std::vector<int> dep_id_;
    std::vector<DepPair> deps_;
    std::vector<int> empty_;
    int d_max_ = 0;
    bool min3_ = true;
};

inline Population build_population(std::vector<std::vector<int>> subpops, int n_nodes) {
    return Population(std::move(subpops), n_nodes);
}

}  // namespace gbeta
