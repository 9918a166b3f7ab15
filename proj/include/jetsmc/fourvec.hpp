#pragma once

#include <cmath>

namespace jetsmc {

/// Energy-momentum vector (E, px, py, pz) in GeV.
struct FourVector {
    double E = 0.0;
    double px = 0.0;
    double py = 0.0;
    double pz = 0.0;

    FourVector() = default;
    FourVector(double e, double x, double y, double z) : E(e), px(x), py(y), pz(z) {}

    FourVector& operator+=(const FourVector& o) {
        E += o.E;
        px += o.px;
        py += o.py;
        pz += o.pz;
        return *this;
    }

    friend FourVector operator+(FourVector a, const FourVector& b) { return a += b; }

    friend FourVector operator-(const FourVector& a, const FourVector& b) {
        return {a.E - b.E, a.px - b.px, a.py - b.py, a.pz - b.pz};
    }

    double p_squared() const { return px * px + py * py + pz * pz; }
    double p_norm() const { return std::sqrt(p_squared()); }
};

/// Squared invariant mass t(z) = E^2 - |p|^2 (GeV^2). May come out slightly
/// negative for nearly lightlike vectors; callers decide how strict to be.
inline double squared_mass(const FourVector& z) {
    return z.E * z.E - z.p_squared();
}

}  // namespace jetsmc
