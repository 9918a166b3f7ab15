#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "jetsmc/random.hpp"
#include "jetsmc/topology.hpp"

namespace jetsmc {

/// A simulated jet: the observed leaves plus the full generative history.
struct GeneratedJet {
    Topology truth;
    std::vector<FourVector> leaves;
    GinkgoParams params;
    std::uint64_t seed = 0;
    double truth_loglik = 0.0;
};

/// Inverse-CDF draw from the truncated exponential f(. | lambda, t_parent):
///   t = -(t_parent / lambda) log(1 - u (1 - e^-lambda)).
inline double sample_truncated_exp(double t_parent, double lambda, RandomStream& rng) {
    double omega = -std::expm1(-lambda);
    return -(t_parent / lambda) * std::log1p(-rng.uniform() * omega);
}

/// Child squared masses for one split. t_L is drawn first against t_parent,
/// t_R against the reduced scale (sqrt t_P - sqrt t_L)^2, which guarantees
/// sqrt t_L + sqrt t_R < sqrt t_parent.
inline std::pair<double, double> sample_child_masses(double t_parent, double lambda,
                                                     RandomStream& rng) {
    double t_l = sample_truncated_exp(t_parent, lambda, rng);
    double s = std::sqrt(t_parent) - std::sqrt(t_l);
    double t_r = sample_truncated_exp(s * s, lambda, rng);
    return {t_l, t_r};
}

/// Uniform direction on the 2-sphere (z uniform on [-1,1], azimuth uniform).
inline std::array<double, 3> sample_unit_sphere(RandomStream& rng) {
    double z = rng.uniform(-1.0, 1.0);
    double phi = rng.uniform(0.0, 6.283185307179586476925287);
    double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {rho * std::cos(phi), rho * std::sin(phi), z};
}

/// Two-body decay of a parent with squared mass t_parent, in its rest frame:
///   E_L = (sqrt s / 2)(1 + t_L/s - t_R/s),  |p| = (sqrt s / 2) beta_bar,
/// children back to back along `direction`.
inline std::pair<FourVector, FourVector> two_body_decay(double t_parent, double t_l, double t_r,
                                                        const std::array<double, 3>& direction) {
    double s = t_parent;
    if (!(s > 0.0)) throw std::domain_error("two_body_decay: t_parent must be > 0");
    double sqrt_s = std::sqrt(s);
    double e_l = 0.5 * sqrt_s * (1.0 + t_l / s - t_r / s);
    double e_r = 0.5 * sqrt_s * (1.0 + t_r / s - t_l / s);
    double beta_sq = 1.0 - 2.0 * (t_l + t_r) / s + (t_l - t_r) * (t_l - t_r) / (s * s);
    if (beta_sq < -1e-12) throw std::domain_error("two_body_decay: children heavier than parent");
    double p = 0.5 * sqrt_s * std::sqrt(std::max(beta_sq, 0.0));
    FourVector left{e_l, p * direction[0], p * direction[1], p * direction[2]};
    FourVector right{e_r, -p * direction[0], -p * direction[1], -p * direction[2]};
    return {left, right};
}

/// Boost from the parent rest frame to the lab frame, with
/// gamma = E_p / sqrt(t_p) and gamma beta = |p_p| / sqrt(t_p).
inline FourVector lorentz_boost(const FourVector& z_rest, const FourVector& parent_lab) {
    double t_p = squared_mass(parent_lab);
    if (!(t_p > 0.0)) throw std::domain_error("lorentz_boost: parent must be timelike");
    double m = std::sqrt(t_p);
    double p_norm = parent_lab.p_norm();
    if (p_norm == 0.0) return z_rest;
    double gamma = parent_lab.E / m;
    double gamma_beta = p_norm / m;
    double nx = parent_lab.px / p_norm;
    double ny = parent_lab.py / p_norm;
    double nz = parent_lab.pz / p_norm;
    double p_par = z_rest.px * nx + z_rest.py * ny + z_rest.pz * nz;
    double e_out = gamma * z_rest.E + gamma_beta * p_par;
    double scale = (gamma - 1.0) * p_par + gamma_beta * z_rest.E;
    return {e_out, z_rest.px + scale * nx, z_rest.py + scale * ny, z_rest.pz + scale * nz};
}

namespace detail {

struct ShowerNode {
    FourVector vec;
    int left = -1;
    int right = -1;
};

inline int shower(std::vector<ShowerNode>& nodes, const FourVector& vec_lab,
                  const GinkgoParams& params, const RandomStream& stream, bool is_root) {
    int id = static_cast<int>(nodes.size());
    nodes.push_back({vec_lab, -1, -1});
    double t_p = squared_mass(vec_lab);
    if (t_p <= params.t_cut) return id;
    RandomStream draws = stream.derive(0);
    double lambda = params.lambda_for(is_root);
    auto [t_l, t_r] = sample_child_masses(t_p, lambda, draws);
    auto dir = sample_unit_sphere(draws);
    auto [rest_l, rest_r] = two_body_decay(t_p, t_l, t_r, dir);
    FourVector lab_l = lorentz_boost(rest_l, vec_lab);
    FourVector lab_r = lorentz_boost(rest_r, vec_lab);
    int left = shower(nodes, lab_l, params, stream.derive(1), false);
    int right = shower(nodes, lab_r, params, stream.derive(2), false);
    nodes[id].left = left;
    nodes[id].right = right;
    return id;
}

}  // namespace detail

/// Runs the full parton-shower recursion from params.root. Leaves are
/// collected left to right; node streams are keyed by the path from the root
/// so the jet is a pure function of (params, seed).
inline GeneratedJet generate_jet(const GinkgoParams& params, std::uint64_t seed) {
    params.validate();
    GeneratedJet jet;
    jet.params = params;
    jet.seed = seed;

    std::vector<detail::ShowerNode> nodes;
    detail::shower(nodes, params.root, params, RandomStream(seed), true);

    int n_leaves = 0;
    for (const auto& node : nodes)
        if (node.left < 0) ++n_leaves;

    Topology topo;
    topo.n_leaves = n_leaves;
    topo.parent.assign(2 * n_leaves - 1, kNoParent);
    topo.node_vectors.assign(2 * n_leaves - 1, FourVector{});
    // Renumber: leaves 0..N-1 in left-to-right order, internals N..2N-2.
    int next_leaf = 0;
    int next_internal = n_leaves;
    std::vector<int> new_id(nodes.size(), -1);
    std::vector<int> stack{0};
    while (!stack.empty()) {
        int raw = stack.back();
        stack.pop_back();
        const auto& node = nodes[raw];
        int id = node.left < 0 ? next_leaf++ : next_internal++;
        new_id[raw] = id;
        topo.node_vectors[id] = node.vec;
        if (node.left >= 0) {
            stack.push_back(node.right);
            stack.push_back(node.left);
        }
    }
    // Leaf order: the DFS above visits left subtrees first only if pushed
    // last; re-walk to assign parents now that ids exist.
    for (std::size_t raw = 0; raw < nodes.size(); ++raw) {
        if (nodes[raw].left >= 0) {
            topo.parent[new_id[nodes[raw].left]] = new_id[raw];
            topo.parent[new_id[nodes[raw].right]] = new_id[raw];
        }
    }
    jet.truth = std::move(topo);
    for (int i = 0; i < n_leaves; ++i) jet.leaves.push_back(jet.truth.node_vectors[i]);
    jet.truth_loglik = tree_log_likelihood(jet.truth, params);
    return jet;
}

/// Exactly n leaves for benchmarking: lowers t_cut (halving) until a jet with
/// at least n leaves appears, then keeps the first n in collection order.
inline std::vector<FourVector> generate_leaves_with_count(GinkgoParams params, int n,
                                                          std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("generate_leaves_with_count: n must be >= 1");
    RandomStream seeder(seed);
    for (int attempt = 0; attempt < 256; ++attempt) {
        GeneratedJet jet = generate_jet(params, seeder.derive(attempt).state());
        if (static_cast<int>(jet.leaves.size()) >= n) {
            jet.leaves.resize(n);
            return jet.leaves;
        }
        if (attempt % 4 == 3) params.t_cut *= 0.5;
    }
    throw std::runtime_error("generate_leaves_with_count: could not reach requested leaf count");
}

}  // namespace jetsmc
