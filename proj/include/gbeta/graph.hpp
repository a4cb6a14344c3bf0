#pragma once

#include <cstdint>
#include <vector>

#include "gbeta/edge_index.hpp"

namespace gbeta {

// Simple undirected graph on N nodes stored as a bit vector over the
// C(N,2) edge variables in lexicographic order. No self-loops by
// construction (only i < j pairs exist).
class Graph {
public:
    explicit Graph(int n_nodes)
        : idx_(n_nodes),
          bits_(static_cast<std::size_t>((idx_.total() + 63) / 64), 0) {}

    int n_nodes() const { return idx_.n_nodes(); }
    std::int64_t n_edge_vars() const { return idx_.total(); }
    const EdgeIndex& index() const { return idx_; }

    bool edge(std::int64_t m) const {
        return (bits_[static_cast<std::size_t>(m >> 6)] >> (m & 63)) & 1ULL;
    }
    bool edge(int i, int j) const { return edge(idx_.linear(i, j)); }

    void set_edge(std::int64_t m, bool v) {
        std::uint64_t mask = 1ULL << (m & 63);
        if (v)
            bits_[static_cast<std::size_t>(m >> 6)] |= mask;
        else
            bits_[static_cast<std::size_t>(m >> 6)] &= ~mask;
    }
    void set_edge(int i, int j, bool v) { set_edge(idx_.linear(i, j), v); }

    void flip(std::int64_t m) { bits_[static_cast<std::size_t>(m >> 6)] ^= 1ULL << (m & 63); }

    int degree(int i) const {
        int d = 0;
        for (int j = 1; j <= n_nodes(); ++j)
            if (j != i && edge(std::min(i, j), std::max(i, j))) ++d;
        return d;
    }

    std::int64_t edge_count() const {
        std::int64_t c = 0;
        for (std::uint64_t w : bits_) c += __builtin_popcountll(w);
        return c;
    }

    void clear() { std::fill(bits_.begin(), bits_.end(), 0); }

    bool operator==(const Graph& o) const { return bits_ == o.bits_ && n_nodes() == o.n_nodes(); }
    bool operator!=(const Graph& o) const { return !(*this == o); }

    // Low 2^M state mask for tiny graphs (M <= 64); used by enumeration oracles.
    std::uint64_t state_mask() const { return bits_.empty() ? 0 : bits_[0]; }

private:
    EdgeIndex idx_;
    std::vector<std::uint64_t> bits_;
};

}  // namespace gbeta
