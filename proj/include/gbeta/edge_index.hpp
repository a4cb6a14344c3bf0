#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace gbeta {

struct OutOfRange : std::out_of_range {
    using std::out_of_range::out_of_range;
};

// Bijection between unordered node pairs {i,j}, 1 <= i < j <= N, and linear
// edge-variable indices 0..M-1 in lexicographic (i,j) order:
//   (1,2) -> 0, (1,3) -> 1, ..., (1,N) -> N-2, (2,3) -> N-1, ...
class EdgeIndex {
public:
    explicit EdgeIndex(int n_nodes) : n_(n_nodes) {
        if (n_nodes < 1) throw OutOfRange("EdgeIndex: n_nodes must be >= 1");
        m_ = static_cast<std::int64_t>(n_) * (n_ - 1) / 2;
    }

    int n_nodes() const { return n_; }
    std::int64_t total() const { return m_; }  // M = N(N-1)/2

    // Accepts an unordered pair; swaps internally so only i != j is required.
    std::int64_t linear(int i, int j) const {
        if (i > j) std::swap(i, j);
        if (i < 1 || j > n_ || i == j)
            throw OutOfRange("EdgeIndex::linear: bad pair (" + std::to_string(i) + "," +
                             std::to_string(j) + ") for N=" + std::to_string(n_));
        std::int64_t r = static_cast<std::int64_t>(i - 1);
        return r * n_ - r * (r + 1) / 2 + (j - i - 1);
    }

    std::pair<int, int> pair(std::int64_t m) const {
        if (m < 0 || m >= m_) throw OutOfRange("EdgeIndex::pair: index " + std::to_string(m));
        int i = 1;
        while (m >= n_ - i) {
            m -= n_ - i;
            ++i;
        }
        return {i, i + 1 + static_cast<int>(m)};
    }

private:
    int n_;
    std::int64_t m_;
};

}  // namespace gbeta
