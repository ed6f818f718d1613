#pragma once

// Small numeric building blocks shared across the library: symmetric
// tridiagonal eigensolver, Brent root finding, Gauss-Legendre rules,
// piecewise Chebyshev compilation, spherical Bessel series, 5-smooth sizes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace esp::detail {

// ---- symmetric tridiagonal eigensolver (QL with implicit shifts) ----
// diag d[0..n), sub/super e[0..n-1). Returns eigenvalues ascending and,
// in vecs, the corresponding eigenvectors as columns (vecs[i][j] = V_ij,
// j-th eigenvector component i).

struct TridiagEigen {
    std::vector<double> values;
    std::vector<std::vector<double>> vectors;  // vectors[j] = eigenvector j
};

inline TridiagEigen tridiag_eigen(std::vector<double> d, std::vector<double> e) {
    const std::size_t n = d.size();
    if (e.size() + 1 != n) throw std::invalid_argument("tridiag_eigen: size mismatch");
    e.push_back(0.0);
    // z: identity, accumulates rotations; z[i][j] = component i of vector j
    std::vector<std::vector<double>> z(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) z[i][i] = 1.0;

    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= std::numeric_limits<double>::epsilon() * dd) break;
            }
            if (m != l) {
                if (++iter == 50) throw std::runtime_error("tridiag_eigen: no convergence");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                for (std::size_t i = m; i-- > l;) {
                    double f = s * e[i], b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) { d[i + 1] -= p; e[m] = 0.0; break; }
                    s = f / r; c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for (std::size_t k = 0; k < n; ++k) {
                        f = z[k][i + 1];
                        z[k][i + 1] = s * z[k][i] + c * f;
                        z[k][i] = c * z[k][i] - s * f;
                    }
                }
                if (r == 0.0 && m - l > 1) continue;
                d[l] -= p; e[l] = g; e[m] = 0.0;
            }
        } while (m != l);
    }
    // sort ascending, carry vectors
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
    TridiagEigen out;
    out.values.resize(n);
    out.vectors.assign(n, std::vector<double>(n));
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = d[idx[j]];
        for (std::size_t i = 0; i < n; ++i) out.vectors[j][i] = z[i][idx[j]];
    }
    return out;
}

// ---- Brent root finding on a bracketing interval ----

inline double brent_root(const std::function<double(double)>& f, double a, double b,
                         double xtol = 1e-13, int maxit = 200) {
    double fa = f(a), fb = f(b);
    if (fa * fb > 0.0) throw std::invalid_argument("brent_root: no sign change");
    if (std::abs(fa) < std::abs(fb)) { std::swap(a, b); std::swap(fa, fb); }
    double c = a, fc = fa, s = b, fs = fb, d = 0.0;
    bool mflag = true;
    for (int it = 0; it < maxit && fb != 0.0 && std::abs(b - a) > xtol; ++it) {
        if (fa != fc && fb != fc) {
            s = a * fb * fc / ((fa - fb) * (fa - fc))
              + b * fa * fc / ((fb - fa) * (fb - fc))
              + c * fa * fb / ((fc - fa) * (fc - fb));
        } else {
            s = b - fb * (b - a) / (fb - fa);
        }
        double lo = (3.0 * a + b) / 4.0, hi = b;
        if (lo > hi) std::swap(lo, hi);
        bool bad = s < lo || s > hi
                || (mflag && std::abs(s - b) >= std::abs(b - c) / 2.0)
                || (!mflag && std::abs(s - b) >= std::abs(c - d) / 2.0)
                || (mflag && std::abs(b - c) < xtol)
                || (!mflag && std::abs(c - d) < xtol);
        if (bad) { s = (a + b) / 2.0; mflag = true; } else mflag = false;
        fs = f(s);
        d = c; c = b; fc = fb;
        if (fa * fs < 0.0) { b = s; fb = fs; } else { a = s; fa = fs; }
        if (std::abs(fa) < std::abs(fb)) { std::swap(a, b); std::swap(fa, fb); }
    }
    return b;
}

// ---- Gauss-Legendre nodes/weights on [-1,1] (Newton on P_n roots) ----

inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.resize(n); w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double p0, p1, dp;
        for (int it = 0; it < 100; ++it) {
            p0 = 1.0; p1 = t;
            for (int j = 2; j <= n; ++j) {
                double p2 = ((2 * j - 1) * t * p1 - (j - 1) * p0) / j;
                p0 = p1; p1 = p2;
            }
            dp = n * (t * p1 - p0) / (t * t - 1.0);
            double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) break;
        }
        x[i] = -t; x[n - 1 - i] = t;
        double ww = 2.0 / ((1.0 - t * t) * dp * dp);
        w[i] = ww; w[n - 1 - i] = ww;
    }
}

// ---- spherical Bessel j_n(x), upward/downward recurrence, n even use ----

inline double sph_bessel_j(int n, double x) {
    if (x < 0.0) x = -x;  // even orders only used here; j_n(|x|) suffices
    if (x < 1e-8) return n == 0 ? 1.0 - x * x / 6.0 : 0.0;
    double j0 = std::sin(x) / x;
    if (n == 0) return j0;
    double j1 = std::sin(x) / (x * x) - std::cos(x) / x;
    if (n == 1) return j1;
    if (static_cast<double>(n) < 0.8 * x) {  // upward stable below the turning point
        double jm1 = j0, j = j1;
        for (int k = 1; k < n; ++k) {
            double jp1 = (2.0 * k + 1.0) / x * j - jm1;
            jm1 = j; j = jp1;
        }
        return j;
    }
    // downward (Miller) from well above max(n, x)
    int m = n + static_cast<int>(std::max(16.0, 1.3 * std::sqrt(static_cast<double>(n)))) + 16;
    double jp1 = 0.0, j = 1e-30, target = 0.0;
    for (int k = m; k >= 1; --k) {
        double jm1 = (2.0 * k + 1.0) / x * j - jp1;
        jp1 = j; j = jm1;  // j now holds order k-1
        if (k - 1 == n) target = j;
        if (std::abs(j) > 1e250) { j *= 1e-200; jp1 *= 1e-200; target *= 1e-200; }
    }
    return target * (j0 / j);
}

// Fills js[0..nmax] with j_n(x) for all orders at once (downward Miller
// recurrence, normalized against j0 or j1, whichever is better conditioned).
inline void sph_bessel_j_array(int nmax, double x, std::vector<double>& js) {
    js.assign(nmax + 1, 0.0);
    x = std::abs(x);
    if (x < 1e-10) {
        js[0] = 1.0;
        if (nmax >= 1 && x > 0.0) js[1] = x / 3.0;
        return;
    }
    const double j0 = std::sin(x) / x;
    const double j1 = std::sin(x) / (x * x) - std::cos(x) / x;
    int m = std::max(nmax, static_cast<int>(std::ceil(x))) + 40;
    double jp1 = 0.0, j = 1e-300;
    for (int k = m; k >= 1; --k) {
        double jm1 = (2.0 * k + 1.0) / x * j - jp1;
        jp1 = j; j = jm1;
        if (k - 1 <= nmax) js[k - 1] = j;  // overwritten downward; ends correct
        if (std::abs(j) > 1e250) {
            j *= 1e-250; jp1 *= 1e-250;
            for (double& v : js) v *= 1e-250;
        }
    }
    // js currently holds unnormalized values with js[0] = j (the last jm1)
    double scale;
    if (std::abs(j0) >= std::abs(j1) || nmax < 1) scale = j0 / js[0];
    else scale = j1 / js[1];
    for (double& v : js) {
        v *= scale;
        if (!std::isfinite(v)) v = 0.0;  // deep underflow far past turning point
    }
}

// ---- compensated (Kahan) accumulation ----

struct KahanSum {
    double s = 0.0, c = 0.0;
    void add(double x) {
        double y = x - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    double value() const { return s; }
};

// ---- Chebyshev interpolants per subinterval ----

struct ChebSegment {
    double a = 0.0, b = 1.0;
    std::vector<double> coef;  // Chebyshev-T coefficients

    double eval(double x) const {
        double t = (2.0 * x - a - b) / (b - a);
        double b0 = 0.0, b1 = 0.0;
        for (std::size_t i = coef.size(); i-- > 0;) {
            double b2 = b1; b1 = b0;
            b0 = 2.0 * t * b1 - b2 + coef[i];
        }
        return b0 - t * b1;
    }
};

inline ChebSegment cheb_fit(const std::function<double(double)>& f, double a, double b,
                            int degree = 12) {
    const int n = degree + 1;
    std::vector<double> fv(n);
    for (int k = 0; k < n; ++k) {
        double t = std::cos(M_PI * (k + 0.5) / n);
        fv[k] = f(0.5 * (a + b) + 0.5 * (b - a) * t);
    }
    ChebSegment seg;
    seg.a = a; seg.b = b;
    seg.coef.resize(n);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += fv[k] * std::cos(M_PI * j * (k + 0.5) / n);
        seg.coef[j] = 2.0 * s / n;
    }
    seg.coef[0] *= 0.5;
    return seg;
}

// Uniform-breakpoint piecewise Chebyshev evaluator on [lo, hi].
struct PiecewiseCheb {
    double lo = 0.0, hi = 1.0, inv_width = 1.0;
    std::vector<ChebSegment> segs;

    static PiecewiseCheb build(const std::function<double(double)>& f, double lo, double hi,
                               int nseg, int degree = 12) {
        PiecewiseCheb pc;
        pc.lo = lo; pc.hi = hi;
        pc.inv_width = nseg / (hi - lo);
        pc.segs.reserve(nseg);
        for (int i = 0; i < nseg; ++i) {
            double a = lo + (hi - lo) * i / nseg;
            double b = lo + (hi - lo) * (i + 1) / nseg;
            pc.segs.push_back(cheb_fit(f, a, b, degree));
        }
        return pc;
    }

    double eval(double x) const {
        int i = static_cast<int>((x - lo) * inv_width);
        i = std::clamp(i, 0, static_cast<int>(segs.size()) - 1);
        return segs[i].eval(x);
    }
};

// ---- 5-smooth (2,3,5-factor) even grid sizes ----

inline bool is_5smooth(std::int64_t n) {
    for (int p : {2, 3, 5})
        while (n % p == 0) n /= p;
    return n == 1;
}

inline int next_even_5smooth(double x) {
    std::int64_t m = std::max<std::int64_t>(2, static_cast<std::int64_t>(std::ceil(x - 1e-9)));
    while (!(m % 2 == 0 && is_5smooth(m))) ++m;
    return static_cast<int>(m);
}

}  // namespace esp::detail
