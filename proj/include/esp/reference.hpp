#pragma once

// Mesh-free Ewald reference: explicit real-space image sums and explicit
// reciprocal-space structure factors, converged to a requested tolerance and
// cross-checked by recomputing at a second splitting width. Slow by design
// (O(N^2)-scale); used as ground truth for the grid solver.

#include "system.hpp"
#include "threads.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace esp {

struct ReferenceResult {
    std::vector<double> u;
    std::vector<Vec3> F;
    double energy = 0.0;
    // Convergence report
    double lambda = 0.0;   // splitting width of the reported pass
    int real_shells = 0;   // max-norm image shells summed
    int recip_kmax = 0;    // reciprocal max-norm cutoff
    double residual = 0.0; // max of stop-criterion bounds and the lambda-check gap
};

namespace detail {

struct DirectPass {
    std::vector<double> u;
    std::vector<Vec3> F;
    double energy = 0.0;
    int real_shells = 0;
    int recip_kmax = 0;
    double tail_bound = 0.0;
};

inline DirectPass direct_ewald_pass(const ParticleSystem& s, double tol, double lambda) {
    const std::size_t N = s.size();
    const double V = s.volume();
    const double inv4pi = 1.0 / (4.0 * M_PI);
    DirectPass out;
    out.u.assign(N, 0.0);
    out.F.assign(N, Vec3{0.0, 0.0, 0.0});

    double qabs = 0.0;
    for (double qi : s.q) qabs += std::abs(qi);

    // Real-space: max-norm image shells until a full shell contributes less
    // than tol/10 to every potential.
    const int shell_cap = 16;
    for (int m = 0; m <= shell_cap; ++m) {
        std::vector<Vec3> offsets;
        for (int nx = -m; nx <= m; ++nx)
            for (int ny = -m; ny <= m; ++ny)
                for (int nz = -m; nz <= m; ++nz) {
                    if (std::max({std::abs(nx), std::abs(ny), std::abs(nz)}) != m)
                        continue;
                    offsets.push_back(
                        Vec3{nx * s.box[0], ny * s.box[1], nz * s.box[2]});
                }
        std::vector<double> shell_mag(N, 0.0);
        parallel_for(static_cast<std::int64_t>(N), [&](std::int64_t b, std::int64_t e) {
            for (std::int64_t i = b; i < e; ++i) {
                double du = 0.0;
                Vec3 dF{0.0, 0.0, 0.0};
                for (std::size_t j = 0; j < N; ++j) {
                    double dx = s.pos[i][0] - s.pos[j][0];
                    double dy = s.pos[i][1] - s.pos[j][1];
                    double dz = s.pos[i][2] - s.pos[j][2];
                    for (const Vec3& n : offsets) {
                        if (m == 0 && j == static_cast<std::size_t>(i)) continue;
                        double rx = dx + n[0], ry = dy + n[1], rz = dz + n[2];
                        double r2 = rx * rx + ry * ry + rz * rz;
                        double r = std::sqrt(r2);
                        double a = r / lambda;
                        if (a > 27.0) continue;  // erfc underflow
                        double er = std::erfc(a);
                        du += s.q[j] * er * inv4pi / r;
                        double fp = -(er / r2
                                      + (2.0 / (lambda * std::sqrt(M_PI)))
                                            * std::exp(-a * a) / r)
                                    * inv4pi;           // f'(r)
                        double coef = -s.q[i] * s.q[j] * fp / r;
                        dF[0] += coef * rx;
                        dF[1] += coef * ry;
                        dF[2] += coef * rz;
                    }
                }
                out.u[i] += du;
                shell_mag[i] = std::abs(du);
                out.F[i][0] += dF[0];
                out.F[i][1] += dF[1];
                out.F[i][2] += dF[2];
            }
        });
        double maxc = 0.0;
        for (double v : shell_mag) maxc = std::max(maxc, v);
        out.real_shells = m;
        if (m >= 1 && maxc < tol / 10.0) {
            out.tail_bound = std::max(out.tail_bound, maxc);
            break;
        }
        if (m == shell_cap)
            throw NumericalError("direct_ewald: real-space sum did not converge");
    }

    // Reciprocal cutoff: smallest max-norm radius whose per-mode bound drops
    // below tol/10.
    double Lmax = std::max({s.box[0], s.box[1], s.box[2]});
    int kmax = 0;
    for (int m = 1;; ++m) {
        double ximin = 2.0 * M_PI * m / Lmax;
        double bound = (qabs / V) * std::exp(-lambda * lambda * ximin * ximin / 4.0)
                       / (ximin * ximin);
        if (bound < tol / 10.0) {
            kmax = m;
            out.tail_bound = std::max(out.tail_bound, bound);
            break;
        }
        if (m >= 512)
            throw NumericalError("direct_ewald: reciprocal sum did not converge");
    }
    out.recip_kmax = kmax;

    // Per-dimension phase tables e^{-i 2 pi k x / L}, k in [-kmax, kmax].
    const int W = 2 * kmax + 1;
    std::array<std::vector<std::complex<double>>, 3> ph;
    for (int d = 0; d < 3; ++d) {
        ph[d].resize(N * W);
        for (std::size_t j = 0; j < N; ++j) {
            double t = -2.0 * M_PI * s.pos[j][d] / s.box[d];
            std::complex<double> step(std::cos(t), std::sin(t));
            std::complex<double>* row = &ph[d][j * W];
            row[kmax] = 1.0;
            for (int k = 1; k <= kmax; ++k) {
                row[kmax + k] = row[kmax + k - 1] * step;
                row[kmax - k] = std::conj(row[kmax + k]);
            }
        }
    }

    // Modes in shell order (max-norm), lexicographic within a shell.
    struct Mode {
        int kx, ky, kz;
        Vec3 xi;
        double w;
        std::complex<double> rho;
    };
    std::vector<Mode> modes;
    for (int m = 1; m <= kmax; ++m)
        for (int kx = -m; kx <= m; ++kx)
            for (int ky = -m; ky <= m; ++ky)
                for (int kz = -m; kz <= m; ++kz) {
                    if (std::max({std::abs(kx), std::abs(ky), std::abs(kz)}) != m)
                        continue;
                    Mode mo;
                    mo.kx = kx;
                    mo.ky = ky;
                    mo.kz = kz;
                    mo.xi = Vec3{2.0 * M_PI * kx / s.box[0], 2.0 * M_PI * ky / s.box[1],
                                 2.0 * M_PI * kz / s.box[2]};
                    double xi2 = mo.xi[0] * mo.xi[0] + mo.xi[1] * mo.xi[1]
                                 + mo.xi[2] * mo.xi[2];
                    mo.w = std::exp(-lambda * lambda * xi2 / 4.0) / (xi2 * V);
                    modes.push_back(mo);
                }
    for (Mode& mo : modes) {
        std::complex<double> rho = 0.0;  // sum_j q_j e^{-i xi.r_j}, fixed j order
        for (std::size_t j = 0; j < N; ++j)
            rho += s.q[j] * ph[0][j * W + kmax + mo.kx] * ph[1][j * W + kmax + mo.ky]
                   * ph[2][j * W + kmax + mo.kz];
        mo.rho = rho;
    }
    const double self = 1.0 / (2.0 * std::pow(M_PI, 1.5) * lambda);
    parallel_for(static_cast<std::int64_t>(N), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) {
            KahanSum ui;
            double Fx = 0.0, Fy = 0.0, Fz = 0.0;
            for (const Mode& mo : modes) {
                std::complex<double> phase =
                    std::conj(ph[0][i * W + kmax + mo.kx] * ph[1][i * W + kmax + mo.ky]
                              * ph[2][i * W + kmax + mo.kz]);  // e^{+i xi.r_i}
                std::complex<double> t = phase * mo.rho;
                ui.add(mo.w * t.real());
                double fcoef = s.q[i] * mo.w * t.imag();
                Fx += fcoef * mo.xi[0];
                Fy += fcoef * mo.xi[1];
                Fz += fcoef * mo.xi[2];
            }
            out.u[i] += ui.value() - s.q[i] * self;
            out.F[i][0] += Fx;
            out.F[i][1] += Fy;
            out.F[i][2] += Fz;
        }
    });

    KahanSum energy;
    for (std::size_t i = 0; i < N; ++i) energy.add(s.q[i] * out.u[i]);
    out.energy = 0.5 * energy.value();
    return out;
}

}  // namespace detail

// Converge potentials, forces, and energy to ~tol; verify the result is
// invariant (within tol) under a change of the internal splitting width.
inline ReferenceResult direct_ewald(const ParticleSystem& system, double tol) {
    if (system.size() > 10000)
        throw std::invalid_argument("direct_ewald: N exceeds the 10^4 oracle bound");
    if (!(tol >= 1e-12))
        throw std::invalid_argument("direct_ewald: tol below double-precision trust "
                                    "(need >= 1e-12)");
    require_neutral(system);
    ParticleSystem s = system;
    fold(s);

    double lambda = std::min({s.box[0], s.box[1], s.box[2]}) / 6.0;
    detail::DirectPass p1 = detail::direct_ewald_pass(s, tol, lambda);
    detail::DirectPass p2 = detail::direct_ewald_pass(s, tol, 1.3 * lambda);
    double gap = std::abs(p1.energy - p2.energy);
    if (gap > tol * std::max(1.0, std::abs(p1.energy)))
        throw NumericalError("direct_ewald: splitting-width invariance check failed");

    ReferenceResult out;
    out.u = std::move(p1.u);
    out.F = std::move(p1.F);
    out.energy = p1.energy;
    out.lambda = lambda;
    out.real_shells = p1.real_shells;
    out.recip_kmax = p1.recip_kmax;
    out.residual = std::max(gap, p1.tail_bound);
    return out;
}

// Relative RMS force error: sqrt( sum |Ft_i - Fr_i|^2 / sum |Fr_i|^2 ).
inline double relative_force_error(const std::vector<Vec3>& test,
                                   const std::vector<Vec3>& ref) {
    if (test.size() != ref.size())
        throw std::invalid_argument("relative_force_error: length mismatch");
    detail::KahanSum num, den;
    for (std::size_t i = 0; i < ref.size(); ++i)
        for (int d = 0; d < 3; ++d) {
            double e = test[i][d] - ref[i][d];
            num.add(e * e);
            den.add(ref[i][d] * ref[i][d]);
        }
    if (den.value() <= 0.0)
        throw std::invalid_argument("relative_force_error: zero reference norm");
    return std::sqrt(num.value() / den.value());
}

}  // namespace esp
