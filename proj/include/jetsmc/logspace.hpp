#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace jetsmc {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

/// log(1 - exp(-x)) for x > 0, stable near both ends (Maechler's recipe).
inline double log1mexp(double x) {
    if (x <= 0.6931471805599453) return std::log(-std::expm1(-x));
    return std::log1p(-std::exp(-x));
}

/// log(sum exp(v_i)) with max-shift; -inf entries contribute nothing.
inline double log_sum_exp(std::span<const double> values) {
    double max = kLogZero;
    for (double v : values)
        if (v > max) max = v;
    if (max == kLogZero) return kLogZero;
    double acc = 0.0;
    for (double v : values)
        if (v != kLogZero) acc += std::exp(v - max);
    return max + std::log(acc);
}

inline double log_sum_exp(double a, double b) {
    if (a == kLogZero) return b;
    if (b == kLogZero) return a;
    double m = a > b ? a : b;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// log((1/K) sum exp(v_i)) over all K entries, -inf ones counting as zeros.
inline double log_mean_exp(std::span<const double> values) {
    if (values.empty()) return kLogZero;
    double lse = log_sum_exp(values);
    if (lse == kLogZero) return kLogZero;
    return lse - std::log(static_cast<double>(values.size()));
}

}  // namespace jetsmc
