#pragma once

// Order-zero prolate spheroidal wave function psi_0^c on [-1,1]:
// construction (Bouwkamp-style Legendre eigenproblem), evaluation,
// bandwidth solve for a target tail level, and the finite Fourier transform.

#include "numerics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace esp {

class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Expansion of psi_0^c in even Legendre polynomials: psi(x) = sum_k coef[k] P_{2k}(x),
// normalized so psi(0) = 1 (sup normalization). The bandwidth solve uses the
// scale-invariant ratio psi(1)/||psi||_2, which reproduces the published shape
// values; see solve_c.
struct ProlateExpansion {
    double c = 0.0;              // bandwidth parameter
    std::vector<double> coef;    // a_k multiplying P_{2k}; psi(0) = 1
    double psi1 = 0.0;           // psi(1) = sum_k a_k
    double l2norm = 0.0;         // ||psi||_{L2[-1,1]} (exact by orthogonality)
    double C0 = 0.0;             // int_0^1 psi dx = coef[0]
    double lambda_mod = 0.0;     // |lambda_0| of F_c[psi](x) = int_{-1}^{1} psi(t) e^{icxt} dt
    double lambda_phase = 0.0;   // arg lambda_0 (0: the order-0 eigenvalue is real positive)
    double eigen_residual = 0.0; // ||T v - theta v||_2 of the banded eigenproblem (diagnostic)
};

namespace detail {

// sum_k a[k] * P_{2k}(x) and its derivative, by the three-term recurrence
// P_{n+1} = ((2n+1) x P_n - n P_{n-1})/(n+1),  P'_{n+1} = P'_{n-1} + (2n+1) P_n.
inline std::pair<double, double> legendre_even_series(const std::vector<double>& a, double x) {
    double v = a[0], dv = 0.0;
    const int kmax = static_cast<int>(a.size()) - 1;
    if (kmax == 0) return {v, dv};
    double pm1 = 1.0, p = x;      // P_0, P_1
    double dpm1 = 0.0, dp = 1.0;  // P'_0, P'_1
    for (int n = 1; n < 2 * kmax; ++n) {
        double pn = ((2.0 * n + 1.0) * x * p - n * pm1) / (n + 1.0);
        double dpn = dpm1 + (2.0 * n + 1.0) * p;
        pm1 = p; p = pn;
        dpm1 = dp; dp = dpn;
        if ((n + 1) % 2 == 0) {
            int k = (n + 1) / 2;
            v += a[k] * p;
            dv += a[k] * dp;
        }
    }
    return {v, dv};
}

// sum_j b[j] * P_j(x) over ALL indices (used for the odd antiderivative series).
inline double legendre_series(const std::vector<double>& b, double x) {
    double acc = b[0];
    if (b.size() == 1) return acc;
    double pm1 = 1.0, p = x;
    acc += b[1] * p;
    for (std::size_t n = 1; n + 1 < b.size(); ++n) {
        double pn = ((2.0 * n + 1.0) * x * p - n * pm1) / (n + 1.0);
        pm1 = p; p = pn;
        acc += b[n + 1] * p;
    }
    return acc;
}

// B(nu) = int_0^1 psi(t) cos(nu t) dt = sum_k a_k (-1)^k j_{2k}(nu).
// Exact for the finite Legendre expansion, valid at every nu (beyond band too).
inline double prolate_cos_transform(const std::vector<double>& a, double nu) {
    thread_local std::vector<double> js;
    const int nmax = 2 * (static_cast<int>(a.size()) - 1);
    sph_bessel_j_array(nmax, nu, js);
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        double term = a[k] * js[2 * k];
        s += (k % 2 == 0) ? term : -term;
    }
    return s;
}

// Solve (T - shift I) x = rhs for a symmetric tridiagonal T (diag d, off e),
// Gaussian elimination with partial pivoting (two-superdiagonal fill).
inline std::vector<double> shifted_tridiag_solve(const std::vector<double>& d,
                                                 const std::vector<double>& e,
                                                 double shift, std::vector<double> b) {
    const std::size_t n = d.size();
    std::vector<double> c(n), dd(n, 0.0), ee(n, 0.0);
    // c: working diagonal; dd: first super; ee: second super (fill-in)
    c[0] = d[0] - shift;
    if (n == 1) {
        if (c[0] == 0.0) c[0] = 1e-300;
        b[0] /= c[0];
        return b;
    }
    dd[0] = e[0];
    std::vector<double> sub(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        sub[i] = e[i - 1];
        c[i] = d[i] - shift;
        if (i + 1 < n) dd[i] = e[i];
    }
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (std::abs(sub[k + 1]) > std::abs(c[k])) {
            std::swap(c[k], sub[k + 1]);
            std::swap(dd[k], c[k + 1]);
            std::swap(ee[k], dd[k + 1]);
            std::swap(b[k], b[k + 1]);
        }
        if (c[k] == 0.0) c[k] = 1e-300;
        double t = -sub[k + 1] / c[k];
        c[k + 1] += t * dd[k];
        dd[k + 1] += t * ee[k];
        b[k + 1] += t * b[k];
    }
    if (c[n - 1] == 0.0) c[n - 1] = 1e-300;
    b[n - 1] /= c[n - 1];
    if (n >= 2) b[n - 2] = (b[n - 2] - dd[n - 2] * b[n - 1]) / c[n - 2];
    for (std::size_t k = n - 2; k-- > 0;)
        b[k] = (b[k] - dd[k] * b[k + 1] - ee[k] * b[k + 2]) / c[k];
    return b;
}

}  // namespace detail

// Builds psi_0^c by the classical route: expand in even Legendre polynomials,
// in which the commuting prolate differential operator is symmetric
// tridiagonal; the ground state of that operator is the eigenfunction with
// the largest eigenvalue of the finite Fourier transform F_c.
inline ProlateExpansion build_prolate(double c, double tol = 1e-15) {
    if (!(c > 0.0)) throw std::invalid_argument("build_prolate: c must be positive");
    if (!(tol >= 1e-16 && tol <= 1e-6))
        throw std::invalid_argument("build_prolate: tol must lie in [1e-16, 1e-6]");

    int nterms = 2 * static_cast<int>(std::ceil(c)) + 30;
    constexpr int kMaxTerms = 600;

    std::vector<double> a;
    std::vector<double> diag, beta;
    double theta = 0.0, resid = 0.0;
    for (;;) {
        diag.assign(nterms, 0.0);
        beta.assign(nterms - 1, 0.0);
        for (int k = 0; k < nterms; ++k) {
            double n = 2.0 * k;
            double B = (n + 1.0) * (n + 1.0) / ((2.0 * n + 1.0) * (2.0 * n + 3.0));
            if (k > 0) B += n * n / ((2.0 * n + 1.0) * (2.0 * n - 1.0));
            diag[k] = n * (n + 1.0) + c * c * B;
            if (k + 1 < nterms)
                beta[k] = c * c * (2.0 * k + 1.0) * (2.0 * k + 2.0)
                        / ((4.0 * k + 3.0) * std::sqrt((4.0 * k + 1.0) * (4.0 * k + 5.0)));
        }
        auto eig = detail::tridiag_eigen(diag, beta);
        theta = eig.values[0];
        std::vector<double> v = eig.vectors[0];
        // Two inverse-iteration + Rayleigh-quotient refinements drive the
        // residual of the banded eigenproblem to machine level.
        for (int pass = 0; pass < 2; ++pass) {
            std::vector<double> w = detail::shifted_tridiag_solve(diag, beta, theta, v);
            double nrm = 0.0;
            for (double x : w) nrm += x * x;
            nrm = std::sqrt(nrm);
            for (double& x : w) x /= nrm;
            double num = 0.0;
            for (int i = 0; i < nterms; ++i) {
                double Tw = diag[i] * w[i];
                if (i > 0) Tw += beta[i - 1] * w[i - 1];
                if (i + 1 < nterms) Tw += beta[i] * w[i + 1];
                num += w[i] * Tw;
            }
            theta = num;
            v = std::move(w);
        }
        resid = 0.0;
        for (int i = 0; i < nterms; ++i) {
            double Tv = diag[i] * v[i] - theta * v[i];
            if (i > 0) Tv += beta[i - 1] * v[i - 1];
            if (i + 1 < nterms) Tv += beta[i] * v[i + 1];
            resid += Tv * Tv;
        }
        resid = std::sqrt(resid);

        // Legendre coefficients: undo the orthonormal-basis scaling.
        a.assign(nterms, 0.0);
        double amax = 0.0;
        for (int k = 0; k < nterms; ++k) {
            a[k] = v[k] * std::sqrt((4.0 * k + 1.0) / 2.0);
            amax = std::max(amax, std::abs(a[k]));
        }
        if (std::abs(a[nterms - 1]) < tol * amax && std::abs(a[nterms - 2]) < tol * amax)
            break;
        nterms += 16;
        if (nterms > kMaxTerms)
            throw NumericalError("build_prolate: expansion order cap exceeded without "
                                 "trailing-coefficient convergence");
    }

    // Sup normalization psi(0) = 1 via P_{2k}(0) = (-1)^k (2k-1)!!/(2k)!!.
    double val0 = 0.0, p0 = 1.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (k > 0) p0 = -p0 * (2.0 * k - 1.0) / (2.0 * k);
        val0 += a[k] * p0;
    }
    for (double& x : a) x /= val0;
    if (a[0] < 0.0)
        for (double& x : a) x = -x;

    // Drop the converged tail, keeping one guard coefficient below threshold.
    double amax = 0.0;
    for (double x : a) amax = std::max(amax, std::abs(x));
    std::size_t keep = a.size();
    while (keep > 2 && std::abs(a[keep - 2]) < tol * amax) --keep;
    a.resize(keep);

    ProlateExpansion exp;
    exp.c = c;
    exp.coef = std::move(a);
    exp.eigen_residual = resid;
    double s1 = 0.0, nrm2 = 0.0;
    for (std::size_t k = 0; k < exp.coef.size(); ++k) {
        s1 += exp.coef[k];
        nrm2 += exp.coef[k] * exp.coef[k] * 2.0 / (4.0 * k + 1.0);
    }
    exp.psi1 = s1;
    exp.l2norm = std::sqrt(nrm2);
    exp.C0 = exp.coef[0];
    exp.lambda_mod = 2.0 * exp.C0;  // F_c[psi](0)/psi(0) = int_{-1}^{1} psi = 2 C0
    exp.lambda_phase = 0.0;
    return exp;
}

// (value, derivative) of psi at x; zero outside [-1,1] (compactly supported use).
inline std::pair<double, double> eval_prolate(const ProlateExpansion& exp, double x) {
    if (std::abs(x) > 1.0) return {0.0, 0.0};
    return detail::legendre_even_series(exp.coef, x);
}

// int_{-1}^{1} psi(x) e^{i xi x} dx, real by even symmetry.
inline double prolate_hat(const ProlateExpansion& exp, double xi) {
    return 2.0 * detail::prolate_cos_transform(exp.coef, xi);
}

// Smallest bandwidth c at which the normalized tail psi(1)/||psi||_2 reaches eps.
// The scale-invariant L2 ratio is the criterion that reproduces the published
// shape table; the sup-normalized tail psi(1) alone does not (the expansion
// itself is stored sup-normalized).
inline double solve_c(double eps) {
    if (!(eps >= 1e-8 && eps <= 1e-2))
        throw std::invalid_argument("solve_c: eps must lie in [1e-8, 1e-2]");
    auto ratio = [](double c) {
        ProlateExpansion e = build_prolate(c);
        return e.psi1 / e.l2norm;
    };
    auto f = [&](double c) { return std::log(std::max(ratio(c), 1e-300)) - std::log(eps); };
    return detail::brent_root(f, 2.0, 28.0, 1e-12);
}

}  // namespace esp
