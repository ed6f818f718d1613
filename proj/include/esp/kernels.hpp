#pragma once

// Radial splitting kernels (the short-range/long-range decomposition of
// 1/(4 pi r)) and separable spreading/interpolation windows, both compiled
// to piecewise degree-12 Chebyshev evaluators for fast inner loops.

#include "prolate.hpp"

#include <array>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace esp {

enum class SplitFamily { pswf, gaussian };
enum class WindowFamily { pswf, bspline };

inline const char* to_string(SplitFamily f) {
    return f == SplitFamily::pswf ? "pswf" : "gaussian";
}
inline const char* to_string(WindowFamily f) {
    return f == WindowFamily::pswf ? "pswf" : "bspline";
}

inline SplitFamily split_family_from_string(const std::string& s) {
    if (s == "pswf") return SplitFamily::pswf;
    if (s == "gaussian") return SplitFamily::gaussian;
    throw std::invalid_argument("unknown screen family: " + s);
}

namespace detail {

// Cardinal B-spline M_P on [0,P], iterative Cox-de Boor triangle: m[j] holds
// M_ord(v - j); ascending-j in-place update reads m[j] (current order-1) and
// m[j+1] (not yet overwritten).
inline double bspline_m(int P, double v) {
    if (v <= 0.0 || v >= static_cast<double>(P)) return 0.0;
    std::array<double, 18> m{};
    int j0 = static_cast<int>(std::floor(v));
    if (j0 >= P) return 0.0;
    m[j0] = 1.0;
    for (int ord = 2; ord <= P; ++ord) {
        for (int j = 0; j <= j0; ++j) {
            double u = v - j;
            m[j] = (u * m[j] + (ord - u) * m[j + 1]) / (ord - 1.0);
        }
    }
    return m[0];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Splitting kernel: 1/(4 pi r) = L(r) + S(r) with L supported on [0, r_c].
// chi is the radial splitting density on [0,1] (unit mass up to O(eps)),
// Psi its antiderivative; L(r) = (1 - Psi(r/r_c))/(4 pi r).
// ---------------------------------------------------------------------------

struct SplitKernel {
    SplitFamily family = SplitFamily::pswf;
    double eps = 0.0;
    double shape = 0.0;  // alpha = ln(1/eps) (gaussian) or bandwidth c (pswf)
    double r_c = 0.0;
    double chi0 = 0.0;   // chi(0): 2*sqrt(alpha/pi) | 1/C0

    ProlateExpansion prolate;         // pswf only
    std::vector<double> anti;         // odd-Legendre coefficients of int_0^y psi (pswf)
    detail::PiecewiseCheb Psi_pc;     // compiled Psi on [0,1] (pswf)
    detail::PiecewiseCheb chi_pc;     // compiled chi on [0,1] (pswf)

    // Antiderivative Psi(y) = int_0^y chi; 0 below 0, 1 at/above 1.
    double Psi(double y) const {
        if (y <= 0.0) return 0.0;
        if (y >= 1.0) return 1.0;
        if (family == SplitFamily::gaussian) return std::erf(std::sqrt(shape) * y);
        return Psi_pc.eval(y);
    }
    // Reference (uncompiled) path for validation.
    double Psi_exact(double y) const {
        if (y <= 0.0) return 0.0;
        if (y >= 1.0) return 1.0;
        if (family == SplitFamily::gaussian) return std::erf(std::sqrt(shape) * y);
        return detail::legendre_series(anti, y) / prolate.C0;
    }
    // Splitting density chi on [0,1]; zero outside for the pswf family.
    double chi(double x) const {
        if (family == SplitFamily::gaussian)
            return 2.0 * std::sqrt(shape / M_PI) * std::exp(-shape * x * x);
        if (x < 0.0 || x > 1.0) return 0.0;
        return chi_pc.eval(x);
    }
    // Normalized cosine transform int_0^1 chi(t) cos(nu t) dt; equals 1 at nu=0.
    double chihat_n(double nu) const {
        if (family == SplitFamily::gaussian) return std::exp(-nu * nu / (4.0 * shape));
        return detail::prolate_cos_transform(prolate.coef, nu) / prolate.C0;
    }
    // Transform of the even extension: chihat(0) = 2 * Psi(1).
    double chihat(double nu) const { return 2.0 * chihat_n(nu); }
};

inline SplitKernel build_split(SplitFamily family, double eps, double r_c) {
    if (!(eps >= 1e-8 && eps <= 1e-2))
        throw std::invalid_argument("build_split: unsupported eps (need 1e-8..1e-2)");
    if (!(r_c > 0.0)) throw std::invalid_argument("build_split: r_c must be positive");
    SplitKernel k;
    k.family = family;
    k.eps = eps;
    k.r_c = r_c;
    if (family == SplitFamily::gaussian) {
        k.shape = std::log(1.0 / eps);
        k.chi0 = 2.0 * std::sqrt(k.shape / M_PI);
        return k;
    }
    k.shape = solve_c(eps);
    k.prolate = build_prolate(k.shape);
    const std::vector<double>& a = k.prolate.coef;
    k.chi0 = 1.0 / k.prolate.C0;
    // int_0^y P_n = (P_{n+1}(y) - P_{n-1}(y))/(2n+1) for even n (odd-index output).
    k.anti.assign(2 * a.size() + 1, 0.0);
    for (std::size_t kk = 0; kk < a.size(); ++kk) {
        std::size_t n = 2 * kk;
        k.anti[n + 1] += a[kk] / (2.0 * n + 1.0);
        if (n >= 1) k.anti[n - 1] -= a[kk] / (2.0 * n + 1.0);
    }
    const SplitKernel& kr = k;
    k.Psi_pc = detail::PiecewiseCheb::build(
        [&kr](double y) { return kr.Psi_exact(y); }, 0.0, 1.0, 16);
    k.chi_pc = detail::PiecewiseCheb::build(
        [&kr](double x) {
            return detail::legendre_even_series(kr.prolate.coef, x).first / kr.prolate.C0;
        },
        0.0, 1.0, 16);
    return k;
}

// Short-range kernel value and radial force at separation r:
// potential = (1 - Psi(r/r_c))/(4 pi r) for r < r_c (0 beyond),
// radial_force = -d(potential)/dr.
inline std::pair<double, double> local_kernel(const SplitKernel& k, double r) {
    if (r <= 0.0)
        throw std::domain_error("local_kernel: r must be positive (self-interactions "
                                "are excluded upstream)");
    if (r >= k.r_c) return {0.0, 0.0};
    const double inv4pi = 1.0 / (4.0 * M_PI);
    if (k.family == SplitFamily::gaussian) {
        double sa = std::sqrt(k.shape);
        double u = r / k.r_c;
        double er = std::erfc(sa * u);
        double pot = er * inv4pi / r;
        double dS = -(er / (r * r)
                      + (2.0 * sa / (k.r_c * std::sqrt(M_PI))) * std::exp(-k.shape * u * u) / r)
                    * inv4pi;
        return {pot, -dS};
    }
    double y = r / k.r_c;
    double pot = (1.0 - k.Psi(y)) * inv4pi / r;
    double dS = -pot / r - k.chi(y) * inv4pi / (r * k.r_c);
    return {pot, -dS};
}

// Long-range kernel in Fourier space: S_hat(xi) = chihat_n(r_c xi)/xi^2,
// with the zero mode defined as 0 (periodic zero-mean convention).
inline double spectral_hat(const SplitKernel& k, double xi) {
    if (xi < 0.0) throw std::invalid_argument("spectral_hat: xi must be nonnegative");
    if (xi == 0.0) return 0.0;
    return k.chihat_n(k.r_c * xi) / (xi * xi);
}

// ---------------------------------------------------------------------------
// Spreading/interpolation window phi: even, unit integral, supported on
// [-P h/2, P h/2], with analytic derivative and 1D Fourier transform.
// ---------------------------------------------------------------------------

struct WindowKernel {
    WindowFamily family = WindowFamily::bspline;
    int P = 0;
    double h = 0.0;
    double c1 = std::numeric_limits<double>::quiet_NaN();  // pswf windows only
    double half = 0.0;                                     // P h / 2

    ProlateExpansion prolate;  // pswf windows
    detail::PiecewiseCheb phi_pc, dphi_pc;

    double phi(double x) const {
        if (std::abs(x) >= half) return 0.0;
        return phi_pc.eval(x);
    }
    double dphi(double x) const {
        if (std::abs(x) >= half) return 0.0;
        return dphi_pc.eval(x);
    }
    // Reference (uncompiled) paths: de Boor recursion / Legendre series.
    double phi_direct(double x) const {
        if (family == WindowFamily::bspline)
            return detail::bspline_m(P, x / h + P / 2.0) / h;
        double t = x / half;
        if (std::abs(t) > 1.0) return 0.0;
        return detail::legendre_even_series(prolate.coef, t).first
               / (2.0 * half * prolate.C0);
    }
    double dphi_direct(double x) const {
        if (family == WindowFamily::bspline) {
            double u = x / h + P / 2.0;
            return (detail::bspline_m(P - 1, u) - detail::bspline_m(P - 1, u - 1.0))
                   / (h * h);
        }
        double t = x / half;
        if (std::abs(t) > 1.0) return 0.0;
        return detail::legendre_even_series(prolate.coef, t).second
               / (2.0 * half * half * prolate.C0);
    }
    // 1D transform, phi_hat(0) = 1 (unit integral). Even in xi by
    // construction (|xi| is used) so opposite modes get bitwise-equal
    // multipliers.
    double phi_hat(double xi) const {
        double nu = std::abs(xi);
        if (family == WindowFamily::bspline) {
            double t = nu * h / 2.0;
            double s = (t == 0.0) ? 1.0 : std::sin(t) / t;
            double out = 1.0;
            for (int i = 0; i < P; ++i) out *= s;
            return out;
        }
        return detail::prolate_cos_transform(prolate.coef, nu * half) / prolate.C0;
    }
};

namespace detail {

inline void compile_window(WindowKernel& w) {
    // 4 subintervals per grid cell keep segment boundaries on the B-spline
    // knots (piecewise evaluation stays exact) and hold degree-12 truncation
    // below 1e-12 for pswf windows across the supported P and c1 ranges.
    int nseg = 4 * w.P;
    const WindowKernel& wr = w;
    w.phi_pc = PiecewiseCheb::build([&wr](double x) { return wr.phi_direct(x); },
                                    -w.half, w.half, nseg);
    w.dphi_pc = PiecewiseCheb::build([&wr](double x) { return wr.dphi_direct(x); },
                                     -w.half, w.half, nseg);
}

}  // namespace detail

// PSWF window with an explicit bandwidth c1 (used by the plan optimizer).
inline WindowKernel build_window_pswf(int P, double h, double c1) {
    if (P < 3 || P > 16) throw std::invalid_argument("build_window: P out of range [3,16]");
    if (!(h > 0.0)) throw std::invalid_argument("build_window: h must be positive");
    WindowKernel w;
    w.family = WindowFamily::pswf;
    w.P = P;
    w.h = h;
    w.c1 = c1;
    w.half = P * h / 2.0;
    w.prolate = build_prolate(c1);
    detail::compile_window(w);
    return w;
}

inline WindowKernel build_window_bspline(int P, double h) {
    if (P < 3 || P > 16) throw std::invalid_argument("build_window: P out of range [3,16]");
    if (!(h > 0.0)) throw std::invalid_argument("build_window: h must be positive");
    WindowKernel w;
    w.family = WindowFamily::bspline;
    w.P = P;
    w.h = h;
    w.half = P * h / 2.0;
    detail::compile_window(w);
    return w;
}

// Generic builder; for pswf windows the default bandwidth is the split
// bandwidth for eps (plans usually re-optimize c1 upward; see the solver).
inline WindowKernel build_window(WindowFamily family, int P, double h, double eps) {
    if (family == WindowFamily::bspline) return build_window_bspline(P, h);
    return build_window_pswf(P, h, solve_c(eps));
}

// Plain-text coefficient dump: one line per subinterval, breakpoints first,
// then the Chebyshev coefficients.
inline void dump_piecewise(std::ostream& os, const detail::PiecewiseCheb& pc) {
    os.precision(17);
    for (const auto& seg : pc.segs) {
        os << seg.a << ' ' << seg.b;
        for (double c : seg.coef) os << ' ' << c;
        os << '\n';
    }
}

}  // namespace esp
