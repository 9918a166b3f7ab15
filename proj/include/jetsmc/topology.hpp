#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "jetsmc/likelihood.hpp"

namespace jetsmc {

inline constexpr int kNoParent = -1;

/// Rooted binary tree over N leaves. Node ids: leaves 0..N-1, internal nodes
/// N..2N-2; parent[root] == kNoParent. node_vectors holds the observed leaf
/// vectors and, for internal nodes, the sum of the two children (the latent Z
/// at inference time).
struct Topology {
    int n_leaves = 0;
    std::vector<int> parent;
    std::vector<FourVector> node_vectors;

    int n_nodes() const { return 2 * n_leaves - 1; }
};

namespace detail {

struct ChildTable {
    // children[u] = {-1, -1} for leaves.
    std::vector<std::array<int, 2>> children;
    int root = kNoParent;
};

inline ChildTable build_child_table(const Topology& topo) {
    const int n = topo.n_nodes();
    if (topo.n_leaves < 1 || static_cast<int>(topo.parent.size()) != n ||
        static_cast<int>(topo.node_vectors.size()) != n)
        throw std::invalid_argument("Topology: inconsistent sizes");
    ChildTable table;
    table.children.assign(n, {kNoParent, kNoParent});
    for (int v = 0; v < n; ++v) {
        int p = topo.parent[v];
        if (p == kNoParent) {
            if (table.root != kNoParent) throw std::invalid_argument("Topology: multiple roots");
            table.root = v;
            continue;
        }
        if (p < topo.n_leaves || p >= n || p == v)
            throw std::invalid_argument("Topology: bad parent id");
        auto& slots = table.children[p];
        if (slots[0] == kNoParent)
            slots[0] = v;
        else if (slots[1] == kNoParent)
            slots[1] = v;
        else
            throw std::invalid_argument("Topology: node with more than two children");
    }
    if (table.root == kNoParent) throw std::invalid_argument("Topology: no root");
    for (int u = topo.n_leaves; u < n; ++u)
        if (table.children[u][0] == kNoParent || table.children[u][1] == kNoParent)
            throw std::invalid_argument("Topology: internal node without two children");
    // Reachability from the root guards against disconnected cycles.
    int seen = 0;
    std::vector<int> stack{table.root};
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        ++seen;
        if (u >= topo.n_leaves) {
            stack.push_back(table.children[u][0]);
            stack.push_back(table.children[u][1]);
        }
    }
    if (seen != n) throw std::invalid_argument("Topology: disconnected nodes");
    return table;
}

}  // namespace detail

/// Builds a Topology from observed leaves and a parent table, computing every
/// internal vector as the sum of its children.
inline Topology make_topology(const std::vector<FourVector>& leaves,
                              const std::vector<int>& parent) {
    Topology topo;
    topo.n_leaves = static_cast<int>(leaves.size());
    topo.parent = parent;
    topo.node_vectors.assign(topo.n_nodes(), FourVector{});
    for (int i = 0; i < topo.n_leaves; ++i) topo.node_vectors[i] = leaves[i];
    auto table = detail::build_child_table(topo);
    // Children first: repeatedly resolve internal nodes whose children are done.
    std::vector<int> order;
    order.reserve(topo.n_nodes());
    std::vector<int> stack{table.root};
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        order.push_back(u);
        if (u >= topo.n_leaves) {
            stack.push_back(table.children[u][0]);
            stack.push_back(table.children[u][1]);
        }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        int u = *it;
        if (u >= topo.n_leaves)
            topo.node_vectors[u] =
                topo.node_vectors[table.children[u][0]] + topo.node_vectors[table.children[u][1]];
    }
    return topo;
}

/// Log-likelihood of a full tree: the sum over internal nodes of the node
/// splitting terms, with the root node taking lambda_1 in heavy-resonance
/// mode. A single leaf scores 0; any node at or below t_cut makes it -inf.
inline double tree_log_likelihood(const Topology& topo, const GinkgoParams& params) {
    params.validate();
    auto table = detail::build_child_table(topo);
    double total = 0.0;
    for (int u = topo.n_leaves; u < topo.n_nodes(); ++u) {
        double t_p = squared_mass(topo.node_vectors[u]);
        double t_l = squared_mass(topo.node_vectors[table.children[u][0]]);
        double t_r = squared_mass(topo.node_vectors[table.children[u][1]]);
        total += node_split_log_likelihood(t_l, t_r, params.lambda_for(u == table.root),
                                           params.t_cut, t_p);
    }
    return total;
}

/// Analytic gradient of tree_log_likelihood in the lambda components.
/// Throws std::domain_error when the likelihood is -inf.
inline GradVector grad_lambda_tree_log_likelihood(const Topology& topo,
                                                  const GinkgoParams& params) {
    params.validate();
    auto table = detail::build_child_table(topo);
    GradVector grad(params.lambdas.size(), 0.0);
    for (int u = topo.n_leaves; u < topo.n_nodes(); ++u) {
        double t_p = squared_mass(topo.node_vectors[u]);
        double t_l = squared_mass(topo.node_vectors[table.children[u][0]]);
        double t_r = squared_mass(topo.node_vectors[table.children[u][1]]);
        bool is_root = (u == table.root);
        NodeTerm term =
            node_split_with_grad(t_l, t_r, params.lambda_for(is_root), params.t_cut, t_p);
        if (term.log_lik == kLogZero)
            throw std::domain_error("grad_lambda_tree_log_likelihood: zero-probability tree");
        grad[params.lambda_index_for(is_root)] += term.dlambda;
    }
    return grad;
}

}  // namespace jetsmc
