#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "jetsmc/fourvec.hpp"
#include "jetsmc/logspace.hpp"
#include "jetsmc/params.hpp"

namespace jetsmc {

/// log of the truncated exponential density
///   f(t | lambda, t_parent) = (1 - e^-lambda)^-1 (lambda / t_parent) e^(-lambda t / t_parent)
/// supported on [0, t_parent].
inline double truncated_exp_logpdf(double t, double lambda, double t_parent) {
    if (!(lambda > 0.0)) throw std::domain_error("truncated_exp_logpdf: lambda must be > 0");
    if (!(t_parent > 0.0)) throw std::domain_error("truncated_exp_logpdf: t_parent must be > 0");
    if (!(t >= 0.0) || t > t_parent)
        throw std::domain_error("truncated_exp_logpdf: t outside [0, t_parent]");
    return -log1mexp(lambda) + std::log(lambda) - std::log(t_parent) - lambda * t / t_parent;
}

/// d/dlambda of truncated_exp_logpdf at fixed (t, t_parent).
inline double truncated_exp_logpdf_dlambda(double t, double lambda, double t_parent) {
    return 1.0 / lambda - t / t_parent - 1.0 / std::expm1(lambda);
}

/// Probability that a node of squared mass t_parent stops splitting:
///   F_s(t_cut, t_parent) = (1 - e^(-lambda t_cut / t_parent)) / (1 - e^-lambda)
/// for t_parent > t_cut, and 1 otherwise.
inline double stop_cdf(double t_cut, double t_parent, double lambda) {
    if (!(lambda > 0.0) || !(t_cut > 0.0) || !(t_parent > 0.0))
        throw std::domain_error("stop_cdf: inputs must be > 0");
    if (t_parent <= t_cut) return 1.0;
    return std::exp(log1mexp(lambda * t_cut / t_parent) - log1mexp(lambda));
}

/// Per-child splitting factor (one case of the two-branch kernel): the child
/// density when the parent is above cutoff, the stop probability otherwise.
/// t_parent_i is the child-specific scale (t_P for the left child,
/// (sqrt(t_P) - sqrt(t_L))^2 for the right one); the branch condition uses the
/// full parent mass t_parent.
inline double split_factor_log(double t_child, double lambda, double t_cut, double t_parent_i,
                               double t_parent) {
    if (!(t_cut > 0.0)) throw std::domain_error("split_factor_log: t_cut must be > 0");
    if (t_parent > t_cut) return truncated_exp_logpdf(t_child, lambda, t_parent_i);
    return 0.0;  // log F_s(t_cut, t_parent <= t_cut) = log 1
}

namespace detail {

// log(1 - F_s(t_cut, t_parent)) for t_parent > t_cut, written as
// -lambda c + log(1 - e^(-lambda (1-c))) - log(1 - e^-lambda), c = t_cut/t_parent.
inline double log_no_stop(double t_cut, double t_parent, double lambda) {
    double c = t_cut / t_parent;
    return -lambda * c + log1mexp(lambda * (1.0 - c)) - log1mexp(lambda);
}

inline double log_no_stop_dlambda(double t_cut, double t_parent, double lambda) {
    double c = t_cut / t_parent;
    double d = lambda * (1.0 - c);
    // d/dlambda [ log(e^(-lambda c) - e^-lambda) - log(1 - e^-lambda) ]
    return (std::exp(-d) - c) / (-std::expm1(-d)) - 1.0 / std::expm1(lambda);
}

}  // namespace detail

inline constexpr double kLogInv4Pi = -2.5310242469692907930;  // log(1 / 4 pi)

/// Splitting likelihood of a reconstructed parent node (log domain):
///   (1/4pi) (1 - F_s(t_cut, t_P)) f(t_L | lambda, t_P) f(t_R | lambda, t_P^R)
/// after reassigning t_L <- max, t_R <- min, with t_P^R = (sqrt t_P - sqrt t_L)^2.
/// Returns -inf (never throws) for any zero-probability configuration: parent
/// at or below cutoff, a negative child mass, or a parent not strictly heavier
/// than its children.
inline double node_split_log_likelihood(double t_l, double t_r, double lambda, double t_cut,
                                        double t_parent) {
    if (!(lambda > 0.0)) throw std::domain_error("node_split_log_likelihood: lambda must be > 0");
    if (!(t_cut > 0.0)) throw std::domain_error("node_split_log_likelihood: t_cut must be > 0");
    if (t_parent <= t_cut) return kLogZero;
    double tl = std::max(t_l, t_r);
    double tr = std::min(t_l, t_r);
    if (tr < 0.0) return kLogZero;
    if (tl >= t_parent) return kLogZero;
    double srt = std::sqrt(t_parent) - std::sqrt(tl);
    double t_parent_r = srt * srt;
    if (tr > t_parent_r) return kLogZero;
    return kLogInv4Pi + detail::log_no_stop(t_cut, t_parent, lambda) +
           truncated_exp_logpdf(tl, lambda, t_parent) +
           truncated_exp_logpdf(tr, lambda, t_parent_r);
}

/// node_split_log_likelihood together with its lambda derivative. The
/// derivative is 0 when the value is -inf (zero-probability nodes carry no
/// gradient signal).
struct NodeTerm {
    double log_lik = kLogZero;
    double dlambda = 0.0;
};

inline NodeTerm node_split_with_grad(double t_l, double t_r, double lambda, double t_cut,
                                     double t_parent) {
    NodeTerm out;
    out.log_lik = node_split_log_likelihood(t_l, t_r, lambda, t_cut, t_parent);
    if (out.log_lik == kLogZero) return out;
    double tl = std::max(t_l, t_r);
    double tr = std::min(t_l, t_r);
    double srt = std::sqrt(t_parent) - std::sqrt(tl);
    double t_parent_r = srt * srt;
    out.dlambda = detail::log_no_stop_dlambda(t_cut, t_parent, lambda) +
                  truncated_exp_logpdf_dlambda(tl, lambda, t_parent) +
                  truncated_exp_logpdf_dlambda(tr, lambda, t_parent_r);
    return out;
}

/// Physical constraints on coalescing two particles (checked in this order):
///   1. t > 0 for the merged node,
///   2. t > t_cut,
///   3. t > max(t_left, t_right).
enum class MergeVerdict {
    Ok = 0,
    NonpositiveMass = 1,
    BelowCutoff = 2,
    NotAboveChildren = 3,
};

inline MergeVerdict validate_merge(double left_t, double right_t, const FourVector& merged,
                                   double t_cut) {
    double t = squared_mass(merged);
    if (!(t > 0.0)) return MergeVerdict::NonpositiveMass;
    if (!(t > t_cut)) return MergeVerdict::BelowCutoff;
    if (!(t > std::max(left_t, right_t))) return MergeVerdict::NotAboveChildren;
    return MergeVerdict::Ok;
}

/// Same conditions on precomputed masses; the hot path used by search and SMC
/// where the merged squared mass is already known.
inline bool merge_is_valid(double left_t, double right_t, double merged_t, double t_cut) {
    return merged_t > 0.0 && merged_t > t_cut && merged_t > std::max(left_t, right_t);
}

}  // namespace jetsmc
