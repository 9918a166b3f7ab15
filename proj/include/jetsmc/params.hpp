#pragma once

#include <stdexcept>
#include <vector>

#include "jetsmc/fourvec.hpp"

namespace jetsmc {

/// One partial derivative of a log-likelihood per decay-rate component.
using GradVector = std::vector<double>;

/// Model parameters of the Ginkgo decay process. `lambdas` holds one rate for
/// QCD-like jets or two for heavy-resonance jets, where lambdas[0] governs the
/// root split and lambdas[1] every subsequent one.
struct GinkgoParams {
    std::vector<double> lambdas;
    double t_cut = 1.0;
    FourVector root;

    bool heavy_resonance() const { return lambdas.size() == 2; }

    /// Rate used by a node's splitting term. In heavy-resonance mode the root
    /// internal node takes lambdas[0], all others lambdas[1].
    double lambda_for(bool is_root_node) const {
        if (lambdas.size() == 2) return is_root_node ? lambdas[0] : lambdas[1];
        return lambdas[0];
    }

    /// Index into a GradVector for a node's rate.
    std::size_t lambda_index_for(bool is_root_node) const {
        return (lambdas.size() == 2 && !is_root_node) ? 1 : 0;
    }

    void validate() const {
        if (lambdas.empty() || lambdas.size() > 2)
            throw std::invalid_argument("GinkgoParams: lambdas must have 1 or 2 components");
        for (double l : lambdas)
            if (!(l > 0.0)) throw std::invalid_argument("GinkgoParams: every lambda must be > 0");
        if (!(t_cut > 0.0)) throw std::invalid_argument("GinkgoParams: t_cut must be > 0");
    }
};

}  // namespace jetsmc
