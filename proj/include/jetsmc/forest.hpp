#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "jetsmc/topology.hpp"

namespace jetsmc {

/// Append-only record of merges. Leaf i is node id i (0..N-1); the merge at
/// arena index k creates internal node id N+k. Shared structure between
/// copied states stays valid because entries are never mutated.
struct MergeArena {
    int n_leaves = 0;
    std::vector<std::pair<int, int>> merges;

    explicit MergeArena(int n) : n_leaves(n) {}

    int add(int left, int right) {
        merges.emplace_back(left, right);
        return n_leaves + static_cast<int>(merges.size()) - 1;
    }

    bool is_leaf(int node) const { return node < n_leaves; }
    int left_of(int node) const { return merges[node - n_leaves].first; }
    int right_of(int node) const { return merges[node - n_leaves].second; }
};

/// Materializes the tree rooted at `node` as a Topology. When the tree spans
/// a strict subset of the leaves, those leaves are re-indexed in increasing
/// original order.
inline Topology extract_tree(const MergeArena& arena, int node,
                             const std::vector<FourVector>& leaves) {
    std::vector<int> leaf_ids;
    std::vector<int> stack{node};
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        if (arena.is_leaf(u)) {
            leaf_ids.push_back(u);
        } else {
            stack.push_back(arena.right_of(u));
            stack.push_back(arena.left_of(u));
        }
    }
    std::vector<int> sorted_ids = leaf_ids;
    std::sort(sorted_ids.begin(), sorted_ids.end());
    int n = static_cast<int>(sorted_ids.size());

    std::vector<FourVector> local_leaves(n);
    for (int i = 0; i < n; ++i) local_leaves[i] = leaves[sorted_ids[i]];
    auto local_index = [&](int leaf_id) {
        return static_cast<int>(std::lower_bound(sorted_ids.begin(), sorted_ids.end(), leaf_id) -
                                sorted_ids.begin());
    };

    std::vector<int> parent(2 * n - 1, kNoParent);
    if (n == 1) return make_topology(local_leaves, parent);

    int next_internal = n;
    // Post-order walk assigning internal ids and parent links.
    struct Frame {
        int node;
        int stage;
        int child_ids[2];
    };
    std::vector<Frame> frames{{node, 0, {kNoParent, kNoParent}}};
    std::vector<int> results;
    while (!frames.empty()) {
        Frame& f = frames.back();
        if (arena.is_leaf(f.node)) {
            results.push_back(local_index(f.node));
            frames.pop_back();
            continue;
        }
        if (f.stage == 0) {
            f.stage = 1;
            frames.push_back({arena.left_of(f.node), 0, {kNoParent, kNoParent}});
        } else if (f.stage == 1) {
            f.stage = 2;
            f.child_ids[0] = results.back();
            results.pop_back();
            frames.push_back({arena.right_of(f.node), 0, {kNoParent, kNoParent}});
        } else {
            f.child_ids[1] = results.back();
            results.pop_back();
            int u = next_internal++;
            parent[f.child_ids[0]] = u;
            parent[f.child_ids[1]] = u;
            results.push_back(u);
            frames.pop_back();
        }
    }
    return make_topology(local_leaves, parent);
}

/// Order-independent structural hash of the tree rooted at a node, for forest
/// deduplication. Children are combined symmetrically so equal unordered
/// trees hash equally.
inline std::uint64_t tree_structure_hash(std::uint64_t left, std::uint64_t right,
                                         std::uint64_t salt) {
    std::uint64_t lo = std::min(left, right);
    std::uint64_t hi = std::max(left, right);
    std::uint64_t z = lo ^ (hi * UINT64_C(0x9E3779B97F4A7C15)) ^ salt;
    z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
    return z ^ (z >> 31);
}

inline std::uint64_t leaf_structure_hash(int leaf, std::uint64_t salt) {
    std::uint64_t z = static_cast<std::uint64_t>(leaf) + salt + UINT64_C(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
    return z ^ (z >> 31);
}

}  // namespace jetsmc
