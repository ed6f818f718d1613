#pragma once

// Particle systems in an orthorhombic periodic box, plus the result bundle
// returned by the solvers.

#include "prolate.hpp"  // NumericalError

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace esp {

using Vec3 = std::array<double, 3>;

struct ParticleSystem {
    Vec3 box{0.0, 0.0, 0.0};     // edge lengths L_x, L_y, L_z
    std::vector<double> q;       // charges
    std::vector<Vec3> pos;       // positions (any representative; fold() maps to [0,L))

    std::size_t size() const { return q.size(); }
    double volume() const { return box[0] * box[1] * box[2]; }
};

// Map every coordinate into [0, L_d) by periodicity.
inline void fold(ParticleSystem& s) {
    for (auto& p : s.pos)
        for (int d = 0; d < 3; ++d) {
            double L = s.box[d];
            p[d] -= L * std::floor(p[d] / L);
            if (p[d] >= L) p[d] = 0.0;  // guard against floor(x/L) rounding
        }
}

// Total charge must vanish for the periodic Coulomb problem to be well posed.
inline void require_neutral(const ParticleSystem& s) {
    double total = 0.0, abssum = 0.0;
    for (double qi : s.q) {
        total += qi;
        abssum += std::abs(qi);
    }
    if (std::abs(total) > 1e-12 * std::max(abssum, 1.0))
        throw NumericalError("system is not charge neutral");
}

struct EnergyForces {
    double energy = 0.0;
    std::vector<double> u;   // per-particle potential (self-image corrected)
    std::vector<Vec3> F;     // per-particle force
    // Wall time per stage: local, spread, fft, scale, ifft, interpolate.
    std::map<std::string, double> timings;
};

}  // namespace esp
