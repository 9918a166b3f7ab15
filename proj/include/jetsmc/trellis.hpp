#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "jetsmc/errors.hpp"
#include "jetsmc/topology.hpp"

namespace jetsmc {

inline constexpr int kEnumerateMaxLeaves = 12;
inline constexpr int kBruteForceMaxLeaves = 10;
inline constexpr int kTrellisMaxLeaves = 25;  // O(3^N) time, O(2^N) space

/// Number of unordered rooted binary topologies over n labeled leaves,
/// (2n-3)!! with (-1)!! = 1. 128-bit so the n = 20 limit fits.
inline unsigned __int128 count_topologies(int n) {
    if (n < 1) throw std::invalid_argument("count_topologies: n must be >= 1");
    if (n > 20) throw std::overflow_error("count_topologies: overflow for n > 20");
    unsigned __int128 count = 1;
    for (int m = 2; m < n; ++m) count *= static_cast<unsigned>(2 * m - 1);
    return count;
}

namespace detail {

// Leaf-insertion enumeration: every tree over leaves 0..m-1 grows to 2m-1
// trees over leaves 0..m by splitting the edge above any current node.
class TopologyEnumerator {
public:
    TopologyEnumerator(const std::vector<FourVector>& leaves,
                       const std::function<void(const Topology&)>& visit)
        : leaves_(leaves), visit_(visit), n_(static_cast<int>(leaves.size())) {
        parent_.assign(2 * n_ - 1, kNoParent);
        root_ = 0;
    }

    void run() {
        if (n_ == 1) {
            emit();
            return;
        }
        insert_leaf(1);
    }

private:
    void insert_leaf(int m) {
        int fresh = n_ + m - 1;  // internal node created by inserting leaf m
        for (int v = 0; v < m + (m - 1); ++v) {
            int node = v < m ? v : n_ + (v - m);
            int old_parent = parent_[node];
            parent_[node] = fresh;
            parent_[m] = fresh;
            parent_[fresh] = old_parent;
            int old_root = root_;
            if (old_parent == kNoParent) root_ = fresh;
            if (m + 1 == n_)
                emit();
            else
                insert_leaf(m + 1);
            root_ = old_root;
            parent_[node] = old_parent;
            parent_[m] = kNoParent;
            parent_[fresh] = kNoParent;
        }
    }

    void emit() { visit_(make_topology(leaves_, parent_)); }

    const std::vector<FourVector>& leaves_;
    const std::function<void(const Topology&)>& visit_;
    int n_;
    std::vector<int> parent_;
    int root_;
};

// Streaming log-sum-exp accumulator.
class LogSumAcc {
public:
    void add(double x) {
        if (x == kLogZero) return;
        if (x <= max_) {
            sum_ += std::exp(x - max_);
            return;
        }
        if (max_ != kLogZero) sum_ *= std::exp(max_ - x);
        sum_ += 1.0;
        max_ = x;
    }
    double value() const { return max_ == kLogZero ? kLogZero : max_ + std::log(sum_); }

private:
    double max_ = kLogZero;
    double sum_ = 0.0;
};

// Squared mass of every leaf subset, summing components per subset.
inline std::vector<double> subset_masses(const std::vector<FourVector>& leaves) {
    int n = static_cast<int>(leaves.size());
    std::vector<double> t(std::size_t{1} << n);
    for (std::uint32_t s = 1; s < t.size(); ++s) {
        FourVector sum;
        for (std::uint32_t m = s; m != 0; m &= m - 1)
            sum += leaves[std::countr_zero(m)];
        t[s] = squared_mass(sum);
    }
    return t;
}

}  // namespace detail

/// Visits each unordered rooted binary topology over the leaves exactly once.
inline void enumerate_topologies(const std::vector<FourVector>& leaves,
                                 const std::function<void(const Topology&)>& visit) {
    int n = static_cast<int>(leaves.size());
    if (n < 1) throw std::invalid_argument("enumerate_topologies: need at least one leaf");
    if (n > kEnumerateMaxLeaves)
        throw size_guard_error("enumerate_topologies: N > 12");
    detail::TopologyEnumerator(leaves, visit).run();
}

/// log P(X | params) by explicit summation of tree likelihoods over all
/// (2N-3)!! topologies (uniform topology prior absorbed as a constant).
inline double brute_force_log_marginal(const std::vector<FourVector>& leaves,
                                       const GinkgoParams& params) {
    int n = static_cast<int>(leaves.size());
    if (n > kBruteForceMaxLeaves) throw size_guard_error("brute_force_log_marginal: N > 10");
    detail::LogSumAcc acc;
    if (n == 1) return 0.0;
    enumerate_topologies(leaves,
                         [&](const Topology& topo) { acc.add(tree_log_likelihood(topo, params)); });
    return acc.value();
}

/// Exact log-marginal via subset dynamic programming:
///   Z[{leaf}] = 1,
///   Z[S] = sum over unordered splits (S_L, S_R) of
///          F(t(S_L), t(S_R) | t(S)) Z[S_L] Z[S_R],
/// all in log domain; the full set takes the root rate in heavy mode.
inline double trellis_log_marginal(const std::vector<FourVector>& leaves,
                                   const GinkgoParams& params) {
    params.validate();
    int n = static_cast<int>(leaves.size());
    if (n > kTrellisMaxLeaves) throw size_guard_error("trellis_log_marginal: N > 25");
    if (n == 1) return 0.0;
    const std::uint32_t full = (std::uint32_t{1} << n) - 1;
    std::vector<double> t = detail::subset_masses(leaves);
    std::vector<double> z(t.size(), 0.0);
    for (std::uint32_t s = 3; s <= full; ++s) {
        if ((s & (s - 1)) == 0) continue;  // singleton
        double lambda = params.lambda_for(s == full);
        std::uint32_t low = s & (0u - s);
        std::uint32_t rest = s ^ low;
        detail::LogSumAcc acc;
        // Each unordered split appears once: the left part keeps the lowest leaf.
        for (std::uint32_t sub = rest;; sub = (sub - 1) & rest) {
            std::uint32_t left = low | sub;
            if (left != s) {
                std::uint32_t right = s ^ left;
                double term =
                    node_split_log_likelihood(t[left], t[right], lambda, params.t_cut, t[s]);
                if (term != kLogZero) acc.add(term + z[left] + z[right]);
            }
            if (sub == 0) break;
        }
        z[s] = acc.value();
        if (z[s] == kLogZero && s == full) return kLogZero;
    }
    return z[full];
}

/// Same recursion with max in place of sum, plus argmax backtracking.
/// Returns the MAP topology and its log-likelihood (-inf with an empty
/// topology when no valid tree exists).
inline std::pair<Topology, double> trellis_log_map(const std::vector<FourVector>& leaves,
                                                   const GinkgoParams& params) {
    params.validate();
    int n = static_cast<int>(leaves.size());
    if (n > kTrellisMaxLeaves) throw size_guard_error("trellis_log_map: N > 25");
    if (n == 1) {
        Topology topo;
        topo.n_leaves = 1;
        topo.parent = {kNoParent};
        topo.node_vectors = {leaves[0]};
        return {topo, 0.0};
    }
    const std::uint32_t full = (std::uint32_t{1} << n) - 1;
    std::vector<double> t = detail::subset_masses(leaves);
    std::vector<double> best(t.size(), 0.0);
    std::vector<std::uint32_t> best_left(t.size(), 0);
    for (std::uint32_t s = 3; s <= full; ++s) {
        if ((s & (s - 1)) == 0) continue;
        double lambda = params.lambda_for(s == full);
        std::uint32_t low = s & (0u - s);
        std::uint32_t rest = s ^ low;
        double best_val = kLogZero;
        std::uint32_t arg = 0;
        for (std::uint32_t sub = rest;; sub = (sub - 1) & rest) {
            std::uint32_t left = low | sub;
            if (left != s) {
                std::uint32_t right = s ^ left;
                double term =
                    node_split_log_likelihood(t[left], t[right], lambda, params.t_cut, t[s]);
                if (term != kLogZero && best[left] != kLogZero && best[right] != kLogZero) {
                    double v = term + best[left] + best[right];
                    if (v > best_val) {
                        best_val = v;
                        arg = left;
                    }
                }
            }
            if (sub == 0) break;
        }
        best[s] = best_val;
        best_left[s] = arg;
    }
    if (best[full] == kLogZero) return {Topology{}, kLogZero};

    std::vector<int> parent(2 * n - 1, kNoParent);
    int next_internal = n;
    // Post-order assignment of internal ids while unwinding the best splits.
    std::function<int(std::uint32_t)> build = [&](std::uint32_t s) -> int {
        if ((s & (s - 1)) == 0) return std::countr_zero(s);
        int left = build(best_left[s]);
        int right = build(s ^ best_left[s]);
        int u = next_internal++;
        parent[left] = u;
        parent[right] = u;
        return u;
    };
    build(full);
    return {make_topology(leaves, parent), best[full]};
}

}  // namespace jetsmc
