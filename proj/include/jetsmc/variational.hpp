#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "jetsmc/smc.hpp"

namespace jetsmc {

enum class VariationalMode { PointEstimate, PseudoMarginal };

/// Parameters of the variational family. Point mode carries lambda_hat (the
/// rates being optimized); pseudo-marginal mode carries a log-normal proposal
/// q(lambda) = LogNormal(mu_tilde, sigma_tilde^2) per component plus the
/// prior hyperparameters (mu0, sigma0).
struct VariationalParams {
    VariationalMode mode = VariationalMode::PointEstimate;
    std::vector<double> lambda_hat;
    std::vector<double> mu_tilde;
    std::vector<double> log_sigma_tilde;
    std::vector<double> mu0;
    std::vector<double> sigma0;

    std::size_t n_components() const {
        return mode == VariationalMode::PointEstimate ? lambda_hat.size() : mu_tilde.size();
    }

    /// Dimension of the gradient: rates in point mode, (mu, sigma) pairs in
    /// pseudo-marginal mode.
    std::size_t n_active() const {
        return mode == VariationalMode::PointEstimate ? lambda_hat.size()
                                                      : 2 * mu_tilde.size();
    }

    void validate() const {
        std::size_t n = n_components();
        if (n < 1 || n > 2)
            throw std::invalid_argument("VariationalParams: 1 or 2 rate components required");
        if (mode == VariationalMode::PointEstimate) {
            for (double l : lambda_hat)
                if (!(l > 0.0))
                    throw std::invalid_argument("VariationalParams: lambda_hat must be > 0");
        } else {
            if (log_sigma_tilde.size() != n || mu0.size() != n || sigma0.size() != n)
                throw std::invalid_argument("VariationalParams: component sizes disagree");
            for (double s : sigma0)
                if (!(s > 0.0))
                    throw std::invalid_argument("VariationalParams: sigma0 must be > 0");
        }
    }
};

using JetDataset = std::vector<std::vector<FourVector>>;

struct ElboEvaluation {
    double objective = 0.0;
    /// Point mode: d/d lambda_hat. Pseudo mode: d/d mu_tilde then d/d sigma_tilde.
    std::vector<double> gradient;
    /// Recorded discrete choices per jet (when not replaying), so the same
    /// estimate can be re-evaluated at perturbed parameters.
    std::vector<SmcTrajectory> trajectories;
};

namespace detail {

struct PseudoDraws {
    std::vector<std::vector<double>> lambdas;  // [k][comp]
    std::vector<std::vector<double>> epsilons; // [k][comp]
    std::vector<double> log_ratio;             // [k]: log p(lambda) - log q(lambda)
};

// Reparameterized lambda^k = exp(mu + sigma * eps) with the prior/proposal
// density ratio evaluated along the way. For equal prior and proposal the
// ratio is identically zero.
inline PseudoDraws draw_particle_lambdas(const VariationalParams& vp, int n_particles,
                                         RandomStream stream) {
    std::size_t n = vp.mu_tilde.size();
    PseudoDraws out;
    out.lambdas.assign(n_particles, std::vector<double>(n));
    out.epsilons.assign(n_particles, std::vector<double>(n));
    out.log_ratio.assign(n_particles, 0.0);
    for (int k = 0; k < n_particles; ++k) {
        for (std::size_t c = 0; c < n; ++c) {
            double eps = stream.normal();
            double sigma = std::exp(vp.log_sigma_tilde[c]);
            double log_lambda = vp.mu_tilde[c] + sigma * eps;
            out.epsilons[k][c] = eps;
            out.lambdas[k][c] = std::exp(log_lambda);
            double centered = (log_lambda - vp.mu0[c]) / vp.sigma0[c];
            out.log_ratio[k] += -std::log(vp.sigma0[c]) + vp.log_sigma_tilde[c] -
                                0.5 * centered * centered + 0.5 * eps * eps;
        }
    }
    return out;
}

}  // namespace detail

/// Mean over jets of log Z-hat at the given variational parameters. In
/// pseudo-marginal mode every particle draws its own lambda once (rank 1) and
/// its first weight carries the p/q ratio, so Z-hat estimates p(X) with
/// lambda marginalized. Pass `replay` to re-evaluate a recorded estimate at
/// perturbed parameters; request `want_gradient` for the analytic gradient
/// holding resampling indices and proposal choices fixed.
inline ElboEvaluation evaluate_elbo(const JetDataset& jets, double t_cut,
                                    const VariationalParams& vp, int n_particles,
                                    SmcAlgorithm algorithm, std::uint64_t seed,
                                    const std::vector<SmcTrajectory>* replay,
                                    bool want_gradient) {
    vp.validate();
    if (jets.empty()) throw std::invalid_argument("evaluate_elbo: dataset is empty");
    const bool pseudo = vp.mode == VariationalMode::PseudoMarginal;
    const std::size_t n_comp = vp.n_components();

    GinkgoParams base;
    base.t_cut = t_cut;
    if (pseudo) {
        base.lambdas.resize(n_comp);
        for (std::size_t c = 0; c < n_comp; ++c) base.lambdas[c] = std::exp(vp.mu_tilde[c]);
    } else {
        base.lambdas = vp.lambda_hat;
    }

    ElboEvaluation out;
    out.gradient.assign(want_gradient ? vp.n_active() : 0, 0.0);
    if (!replay) out.trajectories.resize(jets.size());

    RandomStream root(seed);
    const double log_k = std::log(static_cast<double>(n_particles));

    for (std::size_t j = 0; j < jets.size(); ++j) {
        RandomStream jet_stream = root.derive(j + 1);
        SmcOptions options;
        options.n_particles = n_particles;
        options.seed = jet_stream.derive(1).state();
        options.weight_grads = want_gradient;
        if (replay)
            options.replay = &(*replay)[j];
        else
            options.record = &out.trajectories[j];

        detail::PseudoDraws draws;
        if (pseudo) {
            draws = detail::draw_particle_lambdas(vp, n_particles, jet_stream.derive(2));
            options.particle_lambdas = &draws.lambdas;
            options.rank1_log_weight_offset = &draws.log_ratio;
        }

        SmcResult res = run_smc(jets[j], base, algorithm, options);
        out.objective += res.log_z;

        if (!want_gradient) continue;
        for (std::size_t r = 0; r < res.log_weights.size(); ++r) {
            double lse = res.log_z_per_rank[r] + log_k;
            for (int k = 0; k < n_particles; ++k) {
                double w = res.log_weights[r][k];
                if (w == kLogZero) continue;
                double s = std::exp(w - lse);
                if (!pseudo) {
                    for (std::size_t c = 0; c < n_comp; ++c)
                        out.gradient[c] += s * res.weight_grads[r][k][c];
                    continue;
                }
                int ref = res.lambda_refs[r][k];
                for (std::size_t c = 0; c < n_comp; ++c) {
                    double g_lambda = res.weight_grads[r][k][c];
                    double lam = draws.lambdas[ref][c];
                    double eps = draws.epsilons[ref][c];
                    out.gradient[c] += s * g_lambda * lam;
                    out.gradient[n_comp + c] += s * g_lambda * lam * eps;
                    if (r == 0) {
                        double sigma = std::exp(vp.log_sigma_tilde[c]);
                        double centered = vp.mu_tilde[c] + sigma * eps - vp.mu0[c];
                        double s0_sq = vp.sigma0[c] * vp.sigma0[c];
                        out.gradient[c] += s * (-centered / s0_sq);
                        out.gradient[n_comp + c] += s * (1.0 / sigma - centered * eps / s0_sq);
                    }
                }
            }
        }
    }

    double inv_j = 1.0 / static_cast<double>(jets.size());
    out.objective *= inv_j;
    for (double& g : out.gradient) g *= inv_j;
    return out;
}

inline double elbo_estimate(const JetDataset& jets, double t_cut, const VariationalParams& vp,
                            int n_particles, SmcAlgorithm algorithm, std::uint64_t seed) {
    return evaluate_elbo(jets, t_cut, vp, n_particles, algorithm, seed, nullptr, false)
        .objective;
}

inline std::vector<double> grad_elbo(const JetDataset& jets, double t_cut,
                                     const VariationalParams& vp, int n_particles,
                                     SmcAlgorithm algorithm, std::uint64_t seed) {
    return evaluate_elbo(jets, t_cut, vp, n_particles, algorithm, seed, nullptr, true).gradient;
}

struct OptimizerConfig {
    int steps = 200;
    double step_size = 0.05;
    double clip_norm = 10.0;  // <= 0 disables clipping
    std::uint64_t seed = 0;
};

struct FitStep {
    int step = 0;
    double objective = 0.0;
    std::vector<double> params;  // natural values: lambda_hat, or mu_tilde then sigma_tilde
    double grad_norm = 0.0;
    double wall_ms = 0.0;
};

using FitTrace = std::vector<FitStep>;

/// Stochastic gradient ascent on the ELBO. Rates and proposal scales are
/// optimized in log space to stay positive; each step draws a fresh seed
/// derived from (config.seed, step). Aborts on a nonfinite objective.
inline VariationalParams fit(const JetDataset& jets, double t_cut, const VariationalParams& vp0,
                             int n_particles, SmcAlgorithm algorithm,
                             const OptimizerConfig& config, FitTrace* trace) {
    vp0.validate();
    VariationalParams vp = vp0;
    const bool pseudo = vp.mode == VariationalMode::PseudoMarginal;
    const std::size_t n_comp = vp.n_components();
    RandomStream seeder(config.seed);

    for (int step = 0; step < config.steps; ++step) {
        auto t0 = std::chrono::steady_clock::now();
        ElboEvaluation ev = evaluate_elbo(jets, t_cut, vp, n_particles, algorithm,
                                          seeder.derive(step).state(), nullptr, true);
        if (!std::isfinite(ev.objective))
            throw std::runtime_error("fit: objective became nonfinite");

        // Gradient in the optimized (log) space.
        std::vector<double> g(vp.n_active());
        if (!pseudo) {
            for (std::size_t c = 0; c < n_comp; ++c) g[c] = ev.gradient[c] * vp.lambda_hat[c];
        } else {
            for (std::size_t c = 0; c < n_comp; ++c) {
                g[c] = ev.gradient[c];
                g[n_comp + c] = ev.gradient[n_comp + c] * std::exp(vp.log_sigma_tilde[c]);
            }
        }
        double norm_sq = 0.0;
        for (double v : g) norm_sq += v * v;
        double norm = std::sqrt(norm_sq);
        double scale = config.step_size;
        if (config.clip_norm > 0.0 && norm > config.clip_norm)
            scale *= config.clip_norm / norm;

        if (trace) {
            FitStep row;
            row.step = step;
            row.objective = ev.objective;
            if (!pseudo) {
                row.params = vp.lambda_hat;
            } else {
                row.params = vp.mu_tilde;
                for (std::size_t c = 0; c < n_comp; ++c)
                    row.params.push_back(std::exp(vp.log_sigma_tilde[c]));
            }
            row.grad_norm = norm;
            row.wall_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
            trace->push_back(row);
        }

        if (!pseudo) {
            for (std::size_t c = 0; c < n_comp; ++c)
                vp.lambda_hat[c] = std::exp(std::log(vp.lambda_hat[c]) + scale * g[c]);
        } else {
            for (std::size_t c = 0; c < n_comp; ++c) {
                vp.mu_tilde[c] += scale * g[c];
                vp.log_sigma_tilde[c] += scale * g[n_comp + c];
            }
        }
    }
    return vp;
}

}  // namespace jetsmc
