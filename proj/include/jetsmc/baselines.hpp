#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_set>
#include <utility>
#include <vector>

#include "jetsmc/errors.hpp"
#include "jetsmc/forest.hpp"
#include "jetsmc/likelihood.hpp"

namespace jetsmc {

struct SearchResult {
    Topology tree;
    double log_lik = kLogZero;
};

namespace detail {

struct SearchTree {
    FourVector vec;
    double t = 0.0;
    int node = kNoParent;     // arena node id
    int leaf_count = 1;
    std::uint64_t hash1 = 0;  // structural hashes for forest dedup
    std::uint64_t hash2 = 0;
};

inline std::vector<SearchTree> singleton_forest(const std::vector<FourVector>& leaves) {
    std::vector<SearchTree> forest(leaves.size());
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        forest[i].vec = leaves[i];
        forest[i].t = squared_mass(leaves[i]);
        forest[i].node = static_cast<int>(i);
        forest[i].hash1 = leaf_structure_hash(static_cast<int>(i), UINT64_C(0x6a09e667f3bcc908));
        forest[i].hash2 = leaf_structure_hash(static_cast<int>(i), UINT64_C(0xbb67ae8584caa73b));
    }
    return forest;
}

inline SearchTree merge_trees(const SearchTree& a, const SearchTree& b, MergeArena& arena) {
    SearchTree merged;
    merged.vec = a.vec + b.vec;
    merged.t = squared_mass(merged.vec);
    merged.node = arena.add(a.node, b.node);
    merged.leaf_count = a.leaf_count + b.leaf_count;
    merged.hash1 = tree_structure_hash(a.hash1, b.hash1, UINT64_C(0x3c6ef372fe94f82b));
    merged.hash2 = tree_structure_hash(a.hash2, b.hash2, UINT64_C(0xa54ff53a5f1d36f1));
    return merged;
}

}  // namespace detail

/// Greedy agglomerative clustering: repeatedly merges the valid pair whose
/// created node has the largest splitting term, ties broken by the
/// lexicographically smallest (i, j). Throws dead_end_error when no valid
/// pair remains.
inline SearchResult greedy_cluster(const std::vector<FourVector>& leaves,
                                   const GinkgoParams& params) {
    params.validate();
    int n = static_cast<int>(leaves.size());
    if (n < 1) throw std::invalid_argument("greedy_cluster: need at least one leaf");
    MergeArena arena(n);
    auto forest = detail::singleton_forest(leaves);
    double total = 0.0;
    while (forest.size() > 1) {
        int m = static_cast<int>(forest.size());
        double best_term = kLogZero;
        int best_i = -1, best_j = -1;
        for (int i = 0; i < m; ++i) {
            for (int j = i + 1; j < m; ++j) {
                FourVector sum = forest[i].vec + forest[j].vec;
                double t_p = squared_mass(sum);
                if (!merge_is_valid(forest[i].t, forest[j].t, t_p, params.t_cut)) continue;
                bool is_root = forest[i].leaf_count + forest[j].leaf_count == n;
                double term = node_split_log_likelihood(
                    forest[i].t, forest[j].t, params.lambda_for(is_root), params.t_cut, t_p);
                if (term > best_term) {
                    best_term = term;
                    best_i = i;
                    best_j = j;
                }
            }
        }
        if (best_i < 0) throw dead_end_error("greedy_cluster: no valid pair remains");
        forest[best_i] = detail::merge_trees(forest[best_i], forest[best_j], arena);
        forest.erase(forest.begin() + best_j);
        total += best_term;
    }
    return {extract_tree(arena, forest[0].node, leaves), total};
}

/// Beam search over partial forests. Keeps at most `beam_width` distinct
/// states per level ranked by cumulative log-likelihood (the sum of realized
/// merge terms); identical forests are deduplicated. beam_width == 1
/// reproduces greedy_cluster exactly.
inline SearchResult beam_search(const std::vector<FourVector>& leaves, const GinkgoParams& params,
                                int beam_width) {
    params.validate();
    if (beam_width < 1) throw std::invalid_argument("beam_search: beam width must be >= 1");
    int n = static_cast<int>(leaves.size());
    if (n < 1) throw std::invalid_argument("beam_search: need at least one leaf");
    MergeArena arena(n);

    struct BeamState {
        std::vector<detail::SearchTree> forest;
        double score = 0.0;
    };
    std::vector<BeamState> beam{{detail::singleton_forest(leaves), 0.0}};

    struct Candidate {
        int state;
        int i, j;
        double score;
        double term;
        std::uint64_t key1, key2;
    };

    for (int level = 0; level < n - 1; ++level) {
        std::vector<Candidate> pool;
        for (int s = 0; s < static_cast<int>(beam.size()); ++s) {
            const auto& state = beam[s];
            int m = static_cast<int>(state.forest.size());
            // Forest hash excluding a tree is the XOR of the others; build the
            // candidate key incrementally from the state's total.
            std::uint64_t all1 = 0, all2 = 0;
            for (const auto& tree : state.forest) {
                all1 ^= tree.hash1;
                all2 ^= tree.hash2;
            }
            for (int i = 0; i < m; ++i) {
                for (int j = i + 1; j < m; ++j) {
                    const auto& a = state.forest[i];
                    const auto& b = state.forest[j];
                    FourVector sum = a.vec + b.vec;
                    double t_p = squared_mass(sum);
                    if (!merge_is_valid(a.t, b.t, t_p, params.t_cut)) continue;
                    bool is_root = a.leaf_count + b.leaf_count == n;
                    double term = node_split_log_likelihood(
                        a.t, b.t, params.lambda_for(is_root), params.t_cut, t_p);
                    Candidate c;
                    c.state = s;
                    c.i = i;
                    c.j = j;
                    c.term = term;
                    c.score = state.score + term;
                    c.key1 = all1 ^ a.hash1 ^ b.hash1 ^
                             tree_structure_hash(a.hash1, b.hash1, UINT64_C(0x3c6ef372fe94f82b));
                    c.key2 = all2 ^ a.hash2 ^ b.hash2 ^
                             tree_structure_hash(a.hash2, b.hash2, UINT64_C(0xa54ff53a5f1d36f1));
                    pool.push_back(c);
                }
            }
        }
        if (pool.empty()) throw dead_end_error("beam_search: all beams died");
        std::stable_sort(pool.begin(), pool.end(),
                         [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
        std::vector<BeamState> next;
        next.reserve(std::min<std::size_t>(beam_width, pool.size()));
        std::unordered_set<std::uint64_t> seen;
        for (const auto& c : pool) {
            if (static_cast<int>(next.size()) >= beam_width) break;
            std::uint64_t key = c.key1 ^ (c.key2 * UINT64_C(0x9E3779B97F4A7C15));
            if (!seen.insert(key).second) continue;
            BeamState state;
            state.forest = beam[c.state].forest;
            state.forest[c.i] =
                detail::merge_trees(state.forest[c.i], state.forest[c.j], arena);
            state.forest.erase(state.forest.begin() + c.j);
            state.score = c.score;
            next.push_back(std::move(state));
        }
        beam = std::move(next);
    }
    const BeamState* best = &beam[0];
    for (const auto& state : beam)
        if (state.score > best->score) best = &state;
    return {extract_tree(arena, best->forest[0].node, leaves), best->score};
}

}  // namespace jetsmc
