#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "jetsmc/errors.hpp"
#include "jetsmc/forest.hpp"
#include "jetsmc/likelihood.hpp"
#include "jetsmc/logspace.hpp"
#include "jetsmc/random.hpp"

namespace jetsmc {

// ---------------------------------------------------------------------------
// Partial states (forests of disjoint subtrees) and the per-step operations.
// ---------------------------------------------------------------------------

struct PartialTree {
    FourVector vec;
    double t = 0.0;
    double log_lik = 0.0;  // cached subtree log-likelihood
    int node = kNoParent;  // arena node id
    int leaf_count = 1;
};

/// Forest state after `rank` coalescent events; log_pi caches the natural
/// forest extension, the sum of member-tree log-likelihoods.
struct PartialState {
    std::vector<PartialTree> forest;
    int rank = 0;
    double log_pi = 0.0;

    int total_leaves() const {
        int n = 0;
        for (const auto& tree : forest) n += tree.leaf_count;
        return n;
    }
};

inline PartialState initial_partial_state(const std::vector<FourVector>& leaves) {
    PartialState state;
    state.forest.resize(leaves.size());
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        state.forest[i].vec = leaves[i];
        state.forest[i].t = squared_mass(leaves[i]);
        state.forest[i].node = static_cast<int>(i);
    }
    return state;
}

/// log of the number of immediate predecessor forests: the count of trees
/// with at least two leaves. The all-singleton state maps to 0 by convention.
inline double overcounting_log_nu(const PartialState& state) {
    int count = 0;
    for (const auto& tree : state.forest)
        if (tree.leaf_count >= 2) ++count;
    return count <= 1 ? 0.0 : std::log(static_cast<double>(count));
}

namespace detail {

// Lexicographic ordinal of the pair (i, j), i < j, over m slots, and back.
inline int pair_ordinal(int i, int j, int m) {
    return i * m - i * (i + 1) / 2 + (j - i - 1);
}

inline std::pair<int, int> pair_from_ordinal(int c, int m) {
    for (int i = 0; i < m - 1; ++i) {
        int row = m - 1 - i;
        if (c < row) return {i, i + 1 + c};
        c -= row;
    }
    return {m - 2, m - 1};
}

}  // namespace detail

struct CsmcProposal {
    PartialState state;
    double log_q = 0.0;
    bool dead = false;  // no valid pair existed; state is left unextended
};

/// Extends a partial state by one merge drawn uniformly among the pairs that
/// pass the merge constraints; log_q = -log(#valid pairs). The cached log_pi
/// gains exactly the created node's splitting term.
inline CsmcProposal csmc_propose(const PartialState& state, const GinkgoParams& params,
                                 RandomStream& rng, MergeArena& arena) {
    int m = static_cast<int>(state.forest.size());
    if (m < 2) throw std::invalid_argument("csmc_propose: state must have at least two trees");
    int n_total = state.total_leaves();
    std::vector<std::pair<int, int>> valid;
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            FourVector sum = state.forest[i].vec + state.forest[j].vec;
            if (merge_is_valid(state.forest[i].t, state.forest[j].t, squared_mass(sum),
                               params.t_cut))
                valid.emplace_back(i, j);
        }
    }
    CsmcProposal out;
    if (valid.empty()) {
        out.state = state;
        out.log_q = 0.0;
        out.dead = true;
        return out;
    }
    auto [i, j] = valid[rng.uniform_index(valid.size())];
    const auto& a = state.forest[i];
    const auto& b = state.forest[j];
    PartialTree merged;
    merged.vec = a.vec + b.vec;
    merged.t = squared_mass(merged.vec);
    merged.leaf_count = a.leaf_count + b.leaf_count;
    bool is_root = merged.leaf_count == n_total;
    double term = node_split_log_likelihood(a.t, b.t, params.lambda_for(is_root), params.t_cut,
                                            merged.t);
    merged.log_lik = a.log_lik + b.log_lik + term;
    merged.node = arena.add(a.node, b.node);
    out.state = state;
    out.state.forest[i] = merged;
    out.state.forest.erase(out.state.forest.begin() + j);
    out.state.rank = state.rank + 1;
    out.state.log_pi = state.log_pi + term;
    out.log_q = -std::log(static_cast<double>(valid.size()));
    return out;
}

/// CSMC importance weight of a one-merge extension:
///   log w = [log pi(next) - log pi(prev)] - log nu(next) - log q.
inline double csmc_weight(const PartialState& prev, const PartialState& next, double log_q) {
    double delta = next.log_pi - prev.log_pi;
    if (delta == kLogZero) return kLogZero;
    return delta - overcounting_log_nu(next) - log_q;
}

struct PairPotential {
    int i = 0;
    int j = 0;
    double log_potential = kLogZero;
};

/// One-step look-ahead potentials for every candidate pair: the csmc_weight
/// of that extension with log_q = 0 (enumeration replaces sampling; M = 1
/// since parent vectors are deterministic sums). Invalid pairs get -inf.
inline std::vector<PairPotential> ncsmc_potentials(const PartialState& state,
                                                   const GinkgoParams& params) {
    int m = static_cast<int>(state.forest.size());
    if (m < 2) throw std::invalid_argument("ncsmc_potentials: state must have at least two trees");
    int n_total = state.total_leaves();
    int nonsingleton = 0;
    for (const auto& tree : state.forest)
        if (tree.leaf_count >= 2) ++nonsingleton;
    std::vector<PairPotential> table;
    table.reserve(m * (m - 1) / 2);
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            const auto& a = state.forest[i];
            const auto& b = state.forest[j];
            PairPotential entry{i, j, kLogZero};
            FourVector sum = a.vec + b.vec;
            double t_p = squared_mass(sum);
            if (merge_is_valid(a.t, b.t, t_p, params.t_cut)) {
                bool is_root = a.leaf_count + b.leaf_count == n_total;
                double term = node_split_log_likelihood(a.t, b.t, params.lambda_for(is_root),
                                                        params.t_cut, t_p);
                if (term != kLogZero) {
                    int nu = nonsingleton + 1 - (a.leaf_count >= 2) - (b.leaf_count >= 2);
                    entry.log_potential = term - (nu <= 1 ? 0.0 : std::log(double(nu)));
                }
            }
            table.push_back(entry);
        }
    }
    return table;
}

/// K i.i.d. ancestor indices with P(a = i) proportional to exp(log_weights[i]).
inline std::vector<int> multinomial_resample(std::span<const double> log_weights,
                                             RandomStream& rng) {
    int k = static_cast<int>(log_weights.size());
    double max = kLogZero;
    for (double w : log_weights)
        if (w > max) max = w;
    if (max == kLogZero)
        throw std::domain_error("multinomial_resample: every weight is zero");
    std::vector<double> cumulative(k);
    double acc = 0.0;
    for (int i = 0; i < k; ++i) {
        double w = log_weights[i];
        if (w != kLogZero) acc += std::exp(w - max);
        cumulative[i] = acc;
    }
    std::vector<int> ancestors(k);
    for (int i = 0; i < k; ++i) {
        double u = rng.uniform() * acc;
        int lo = 0, hi = k - 1;
        while (lo < hi) {
            int mid = (lo + hi) / 2;
            if (cumulative[mid] > u)
                hi = mid;
            else
                lo = mid + 1;
        }
        ancestors[i] = lo;
    }
    return ancestors;
}

// ---------------------------------------------------------------------------
// The particle system runner.
// ---------------------------------------------------------------------------

enum class SmcAlgorithm { Csmc, Ncsmc };

/// Discrete choices of one sweep, recordable and replayable so that weights
/// can be re-evaluated at perturbed parameters along a fixed trajectory.
struct SmcTrajectory {
    std::vector<std::vector<int>> ancestors;  // [rank-1][k]
    std::vector<std::vector<int>> choices;    // [rank-1][k], pair ordinal; -1 = dead
};

struct SmcOptions {
    int n_particles = 64;
    std::uint64_t seed = 0;
    /// Per-particle rate overrides (pseudo-marginal lambda draws), [k][comp].
    const std::vector<std::vector<double>>* particle_lambdas = nullptr;
    /// Added to each particle's rank-1 log-weight (prior/proposal ratio).
    const std::vector<double>* rank1_log_weight_offset = nullptr;
    const SmcTrajectory* replay = nullptr;
    SmcTrajectory* record = nullptr;
    bool weight_grads = false;
};

struct SmcResult {
    double log_z = 0.0;
    std::vector<double> log_z_per_rank;            // logmeanexp of each rank's weights
    std::vector<std::vector<double>> log_weights;  // [rank-1][k]
    std::vector<std::vector<int>> ancestors;       // [rank-1][k]
    /// d(log w_r^k)/d(lambda_c) of the particle's own rates, when requested.
    std::vector<std::vector<GradVector>> weight_grads;
    /// Which rank-1 lambda draw each particle carried at each rank (filled
    /// when per-particle rates are in play; rates travel with resampling).
    std::vector<std::vector<int>> lambda_refs;
    std::vector<double> final_log_pi;  // [k]; -inf for particles dead at the end
    Topology best_tree;
    double best_log_lik = kLogZero;
};

namespace detail {

// Particle storage, one row per particle, tree attributes side by side so the
// pair-validity scans vectorize and resampling is a row gather.
struct Swarm {
    int n_particles = 0;
    int capacity = 0;  // trees per row
    std::vector<double> e, px, py, pz, t, ll;
    std::vector<int> node, leaves;
    std::vector<int> m;            // live tree count per row
    std::vector<double> log_pi;
    std::vector<int> valid_pairs;  // maintained in CSMC mode only
    std::vector<int> nonsingleton;
    std::vector<int> lambda_ref;   // which rank-1 lambda draw this particle carries
    std::vector<std::uint8_t> dead;

    Swarm(int k, int n) : n_particles(k), capacity(n) {
        std::size_t cells = static_cast<std::size_t>(k) * n;
        e.resize(cells);
        px.resize(cells);
        py.resize(cells);
        pz.resize(cells);
        t.resize(cells);
        ll.resize(cells);
        node.resize(cells);
        leaves.resize(cells);
        m.assign(k, 0);
        log_pi.assign(k, 0.0);
        valid_pairs.assign(k, 0);
        nonsingleton.assign(k, 0);
        lambda_ref.resize(k);
        for (int i = 0; i < k; ++i) lambda_ref[i] = i;
        dead.assign(k, 0);
    }

    std::size_t row(int k) const { return static_cast<std::size_t>(k) * capacity; }

    void copy_row(const Swarm& src, int from, int to) {
        std::size_t s = src.row(from), d = row(to);
        int count = src.m[from];
        std::memcpy(&e[d], &src.e[s], count * sizeof(double));
        std::memcpy(&px[d], &src.px[s], count * sizeof(double));
        std::memcpy(&py[d], &src.py[s], count * sizeof(double));
        std::memcpy(&pz[d], &src.pz[s], count * sizeof(double));
        std::memcpy(&t[d], &src.t[s], count * sizeof(double));
        std::memcpy(&ll[d], &src.ll[s], count * sizeof(double));
        std::memcpy(&node[d], &src.node[s], count * sizeof(int));
        std::memcpy(&leaves[d], &src.leaves[s], count * sizeof(int));
        m[to] = count;
        log_pi[to] = src.log_pi[from];
        valid_pairs[to] = src.valid_pairs[from];
        nonsingleton[to] = src.nonsingleton[from];
        lambda_ref[to] = src.lambda_ref[from];
        dead[to] = 0;
    }

    double pair_mass(std::size_t base, int i, int j) const {
        return t[base + i] + t[base + j] +
               2.0 * (e[base + i] * e[base + j] - px[base + i] * px[base + j] -
                      py[base + i] * py[base + j] - pz[base + i] * pz[base + j]);
    }

    // #valid merges of slot i against every other slot except `skip`.
    int count_valid_against(int k, int i, int skip, double t_cut) const {
        std::size_t base = row(k);
        int count = 0;
        for (int x = 0; x < m[k]; ++x) {
            if (x == i || x == skip) continue;
            double tp = pair_mass(base, i, x);
            count += merge_is_valid(t[base + i], t[base + x], tp, t_cut) ? 1 : 0;
        }
        return count;
    }

    int count_valid_pairs(int k, double t_cut) const {
        std::size_t base = row(k);
        int count = 0;
        for (int i = 0; i < m[k]; ++i)
            for (int j = i + 1; j < m[k]; ++j)
                if (merge_is_valid(t[base + i], t[base + j], pair_mass(base, i, j), t_cut))
                    ++count;
        return count;
    }

    // Replaces slot i with the merge of (i, j), erases slot j, updates caches.
    void apply_merge(int k, int i, int j, double term, double merged_t, MergeArena& arena,
                     double t_cut, bool track_valid_pairs) {
        std::size_t base = row(k);
        if (track_valid_pairs) {
            int lost = count_valid_against(k, i, j, t_cut) + count_valid_against(k, j, i, t_cut);
            valid_pairs[k] -= lost + 1;  // the merged pair itself was valid
        }
        nonsingleton[k] += 1 - (leaves[base + i] >= 2) - (leaves[base + j] >= 2);
        e[base + i] += e[base + j];
        px[base + i] += px[base + j];
        py[base + i] += py[base + j];
        pz[base + i] += pz[base + j];
        t[base + i] = merged_t;
        ll[base + i] += ll[base + j] + term;
        node[base + i] = arena.add(node[base + i], node[base + j]);
        leaves[base + i] += leaves[base + j];
        int last = m[k] - 1;
        for (int x = j; x < last; ++x) {
            e[base + x] = e[base + x + 1];
            px[base + x] = px[base + x + 1];
            py[base + x] = py[base + x + 1];
            pz[base + x] = pz[base + x + 1];
            t[base + x] = t[base + x + 1];
            ll[base + x] = ll[base + x + 1];
            node[base + x] = node[base + x + 1];
            leaves[base + x] = leaves[base + x + 1];
        }
        m[k] = last;
        log_pi[k] += term;
        if (track_valid_pairs) valid_pairs[k] += count_valid_against(k, i, -1, t_cut);
    }
};

inline std::span<const double> lambdas_for_particle(const SmcOptions& options,
                                                    const GinkgoParams& params, int k) {
    if (options.particle_lambdas) return (*options.particle_lambdas)[k];
    return params.lambdas;
}

inline double rate_of(std::span<const double> lambdas, bool is_root) {
    if (lambdas.size() == 2) return is_root ? lambdas[0] : lambdas[1];
    return lambdas[0];
}

inline std::size_t rate_index_of(std::span<const double> lambdas, bool is_root) {
    return (lambdas.size() == 2 && !is_root) ? 1 : 0;
}

}  // namespace detail

/// Shared CSMC/NCSMC sweep: resample -> propose -> weight for r = 1..N-1.
/// Returns the particle system, the running log Z-hat, and the best complete
/// tree among surviving particles. Throws total_death_error if every particle
/// dies at the same rank.
inline SmcResult run_smc(const std::vector<FourVector>& leaves, const GinkgoParams& params,
                         SmcAlgorithm algorithm, const SmcOptions& options) {
    params.validate();
    const int n = static_cast<int>(leaves.size());
    if (n < 2) throw std::invalid_argument("run_smc: need at least two leaves");
    const int k_particles = options.n_particles;
    if (k_particles < 1) throw std::invalid_argument("run_smc: need at least one particle");
    const int n_ranks = n - 1;
    const bool track_valid = algorithm == SmcAlgorithm::Csmc;
    const std::size_t n_comp = params.lambdas.size();

    MergeArena arena(n);
    arena.merges.reserve(static_cast<std::size_t>(k_particles) * n_ranks);

    detail::Swarm cur(k_particles, n), nxt(k_particles, n);
    {
        // All particles start in the same all-singleton state.
        std::size_t base = cur.row(0);
        for (int i = 0; i < n; ++i) {
            cur.e[base + i] = leaves[i].E;
            cur.px[base + i] = leaves[i].px;
            cur.py[base + i] = leaves[i].py;
            cur.pz[base + i] = leaves[i].pz;
            cur.t[base + i] = squared_mass(leaves[i]);
            cur.ll[base + i] = 0.0;
            cur.node[base + i] = i;
            cur.leaves[base + i] = 1;
        }
        cur.m[0] = n;
        if (track_valid) cur.valid_pairs[0] = cur.count_valid_pairs(0, params.t_cut);
        for (int k = 1; k < k_particles; ++k) cur.copy_row(cur, 0, k);
    }

    RandomStream base_stream(options.seed);
    SmcResult result;
    result.log_weights.assign(n_ranks, std::vector<double>(k_particles, kLogZero));
    result.ancestors.assign(n_ranks, std::vector<int>(k_particles, 0));
    result.log_z_per_rank.assign(n_ranks, kLogZero);
    result.final_log_pi.assign(k_particles, kLogZero);
    if (options.weight_grads)
        result.weight_grads.assign(n_ranks,
                                   std::vector<GradVector>(k_particles, GradVector(n_comp, 0.0)));
    if (options.particle_lambdas)
        result.lambda_refs.assign(n_ranks, std::vector<int>(k_particles, 0));
    if (options.record) {
        options.record->ancestors.assign(n_ranks, std::vector<int>(k_particles, 0));
        options.record->choices.assign(n_ranks, std::vector<int>(k_particles, -1));
    }

    std::vector<double> prev_weights(k_particles, 0.0);  // w_0 uniform
    std::vector<double> potentials, softmax_buf;
    std::vector<GradVector> potential_grads;

    for (int r = 1; r <= n_ranks; ++r) {
        // Resample ancestors by the previous weights.
        std::vector<int> ancestors;
        if (options.replay) {
            ancestors = options.replay->ancestors[r - 1];
        } else {
            RandomStream resample_stream = base_stream.derive(r, 0);
            ancestors = multinomial_resample(prev_weights, resample_stream);
        }
        result.ancestors[r - 1] = ancestors;
        if (options.record) options.record->ancestors[r - 1] = ancestors;
        for (int k = 0; k < k_particles; ++k) nxt.copy_row(cur, ancestors[k], k);
        std::swap(cur, nxt);
        if (options.particle_lambdas)
            for (int k = 0; k < k_particles; ++k)
                result.lambda_refs[r - 1][k] = cur.lambda_ref[k];

        const int m = n - r + 1;  // trees per particle entering this rank
        auto& rank_weights = result.log_weights[r - 1];

        for (int k = 0; k < k_particles; ++k) {
            std::span<const double> lambdas =
                detail::lambdas_for_particle(options, params, cur.lambda_ref[k]);
            std::size_t base = cur.row(k);
            double weight = kLogZero;
            int chosen = -1;

            if (algorithm == SmcAlgorithm::Csmc) {
                int n_valid = cur.valid_pairs[k];
                if (n_valid > 0) {
                    int i = -1, j = -1;
                    if (options.replay) {
                        chosen = options.replay->choices[r - 1][k];
                        auto pair = detail::pair_from_ordinal(chosen, m);
                        i = pair.first;
                        j = pair.second;
                    } else {
                        RandomStream rng = base_stream.derive(r, k + 1);
                        const int total_pairs = m * (m - 1) / 2;
                        int tries = 4 * total_pairs + 64;
                        while (tries-- > 0) {
                            int c = static_cast<int>(rng.uniform_index(total_pairs));
                            auto pair = detail::pair_from_ordinal(c, m);
                            double tp = cur.pair_mass(base, pair.first, pair.second);
                            if (merge_is_valid(cur.t[base + pair.first], cur.t[base + pair.second],
                                               tp, params.t_cut)) {
                                chosen = c;
                                i = pair.first;
                                j = pair.second;
                                break;
                            }
                        }
                        if (chosen < 0) {
                            // Rare dense-rejection fallback: pick among valid pairs directly.
                            int target = static_cast<int>(rng.uniform_index(n_valid));
                            for (int a = 0; a < m && chosen < 0; ++a) {
                                for (int b = a + 1; b < m; ++b) {
                                    double tp = cur.pair_mass(base, a, b);
                                    if (!merge_is_valid(cur.t[base + a], cur.t[base + b], tp,
                                                        params.t_cut))
                                        continue;
                                    if (target-- == 0) {
                                        chosen = detail::pair_ordinal(a, b, m);
                                        i = a;
                                        j = b;
                                        break;
                                    }
                                }
                            }
                        }
                    }
                    double merged_t = cur.pair_mass(base, i, j);
                    bool is_root = cur.leaves[base + i] + cur.leaves[base + j] == n;
                    NodeTerm term = options.weight_grads
                                        ? node_split_with_grad(cur.t[base + i], cur.t[base + j],
                                                               detail::rate_of(lambdas, is_root),
                                                               params.t_cut, merged_t)
                                        : NodeTerm{node_split_log_likelihood(
                                                       cur.t[base + i], cur.t[base + j],
                                                       detail::rate_of(lambdas, is_root),
                                                       params.t_cut, merged_t),
                                                   0.0};
                    if (term.log_lik != kLogZero) {
                        int nu = cur.nonsingleton[k] + 1 - (cur.leaves[base + i] >= 2) -
                                 (cur.leaves[base + j] >= 2);
                        weight = term.log_lik - (nu <= 1 ? 0.0 : std::log(double(nu))) +
                                 std::log(double(n_valid));
                        if (options.weight_grads)
                            result.weight_grads[r - 1][k][detail::rate_index_of(
                                lambdas, is_root)] = term.dlambda;
                        cur.apply_merge(k, i, j, term.log_lik, merged_t, arena, params.t_cut,
                                        track_valid);
                    } else {
                        cur.dead[k] = 1;
                        chosen = -1;
                    }
                } else {
                    cur.dead[k] = 1;
                }
            } else {
                // NCSMC: evaluate every one-step-ahead potential.
                const int total_pairs = m * (m - 1) / 2;
                potentials.assign(total_pairs, kLogZero);
                if (options.weight_grads)
                    potential_grads.assign(total_pairs, GradVector(n_comp, 0.0));
                int ordinal = 0;
                for (int i = 0; i < m; ++i) {
                    for (int j = i + 1; j < m; ++j, ++ordinal) {
                        double tp = cur.pair_mass(base, i, j);
                        if (!merge_is_valid(cur.t[base + i], cur.t[base + j], tp, params.t_cut))
                            continue;
                        bool is_root = cur.leaves[base + i] + cur.leaves[base + j] == n;
                        double rate = detail::rate_of(lambdas, is_root);
                        NodeTerm term =
                            options.weight_grads
                                ? node_split_with_grad(cur.t[base + i], cur.t[base + j], rate,
                                                       params.t_cut, tp)
                                : NodeTerm{node_split_log_likelihood(cur.t[base + i],
                                                                     cur.t[base + j], rate,
                                                                     params.t_cut, tp),
                                           0.0};
                        if (term.log_lik == kLogZero) continue;
                        int nu = cur.nonsingleton[k] + 1 - (cur.leaves[base + i] >= 2) -
                                 (cur.leaves[base + j] >= 2);
                        potentials[ordinal] =
                            term.log_lik - (nu <= 1 ? 0.0 : std::log(double(nu)));
                        if (options.weight_grads)
                            potential_grads[ordinal][detail::rate_index_of(lambdas, is_root)] =
                                term.dlambda;
                    }
                }
                // M = 1: the particle weight is the sum of look-ahead
                // potentials (the mean of the q-inclusive potentials).
                double lse = log_sum_exp(potentials);
                if (lse == kLogZero) {
                    cur.dead[k] = 1;
                } else {
                    weight = lse;
                    if (options.weight_grads) {
                        auto& grad = result.weight_grads[r - 1][k];
                        for (int c = 0; c < total_pairs; ++c) {
                            if (potentials[c] == kLogZero) continue;
                            double p = std::exp(potentials[c] - lse);
                            for (std::size_t comp = 0; comp < n_comp; ++comp)
                                grad[comp] += p * potential_grads[c][comp];
                        }
                    }
                    if (options.replay) {
                        chosen = options.replay->choices[r - 1][k];
                    } else {
                        RandomStream rng = base_stream.derive(r, k + 1);
                        double u = rng.uniform();
                        double max = kLogZero;
                        for (double p : potentials)
                            if (p > max) max = p;
                        double total = 0.0;
                        for (double p : potentials)
                            if (p != kLogZero) total += std::exp(p - max);
                        double cut = u * total;
                        double acc = 0.0;
                        for (int c = 0; c < total_pairs; ++c) {
                            if (potentials[c] == kLogZero) continue;
                            acc += std::exp(potentials[c] - max);
                            chosen = c;
                            if (acc > cut) break;
                        }
                    }
                    auto [i, j] = detail::pair_from_ordinal(chosen, m);
                    double merged_t = cur.pair_mass(base, i, j);
                    bool is_root = cur.leaves[base + i] + cur.leaves[base + j] == n;
                    double term =
                        node_split_log_likelihood(cur.t[base + i], cur.t[base + j],
                                                  detail::rate_of(lambdas, is_root), params.t_cut,
                                                  merged_t);
                    cur.apply_merge(k, i, j, term, merged_t, arena, params.t_cut, track_valid);
                }
            }

            if (r == 1 && options.rank1_log_weight_offset && weight != kLogZero)
                weight += (*options.rank1_log_weight_offset)[cur.lambda_ref[k]];
            rank_weights[k] = weight;
            if (options.record) options.record->choices[r - 1][k] = chosen;
        }

        double rank_log_z = log_mean_exp(rank_weights);
        if (rank_log_z == kLogZero)
            throw total_death_error("run_smc: every particle died at rank " + std::to_string(r));
        result.log_z_per_rank[r - 1] = rank_log_z;
        result.log_z += rank_log_z;
        prev_weights = rank_weights;
    }

    int best = -1;
    for (int k = 0; k < k_particles; ++k) {
        if (cur.dead[k]) continue;
        result.final_log_pi[k] = cur.log_pi[k];
        if (best < 0 || cur.log_pi[k] > cur.log_pi[best]) best = k;
    }
    if (best >= 0) {
        result.best_log_lik = cur.log_pi[best];
        result.best_tree = extract_tree(arena, cur.node[cur.row(best)], leaves);
    }
    return result;
}

inline SmcResult run_csmc(const std::vector<FourVector>& leaves, const GinkgoParams& params,
                          int n_particles, std::uint64_t seed) {
    SmcOptions options;
    options.n_particles = n_particles;
    options.seed = seed;
    return run_smc(leaves, params, SmcAlgorithm::Csmc, options);
}

inline SmcResult run_ncsmc(const std::vector<FourVector>& leaves, const GinkgoParams& params,
                           int n_particles, std::uint64_t seed) {
    SmcOptions options;
    options.n_particles = n_particles;
    options.seed = seed;
    return run_smc(leaves, params, SmcAlgorithm::Ncsmc, options);
}

}  // namespace jetsmc
