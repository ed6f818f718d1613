#pragma once

// Grid pipeline: charge spreading onto a regular grid, unnormalized c2c FFTs,
// Fourier-space influence coefficients, and interpolation back to particles.
//
// Conventions (fixed across the library):
//   * grid storage is row-major [ix][iy][iz], z fastest;
//   * forward transform uses e^{-i xi.x} (matches an unnormalized DFT sum);
//   * inverse transform uses e^{+i xi.x} and is unnormalized, so
//     inverse(forward(x)) == N_f * x; the influence coefficients absorb the
//     1/N_f normalization;
//   * mode i of an n-point dimension has integer index k = i (i < n/2) or
//     i - n (i >= n/2), frequency xi = 2 pi k / L.

#include "kernels.hpp"
#include "system.hpp"
#include "threads.hpp"

#include <fftw3.h>

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <new>
#include <stdexcept>
#include <vector>

namespace esp {

namespace detail {

// Fixed 64-byte alignment for grid buffers: FFTW specializes plans by pointer
// alignment, so a stable alignment class keeps transform results bit-identical
// across allocations (and therefore across runs).
template <class T>
struct AlignedAlloc {
    using value_type = T;
    static constexpr std::size_t alignment = 64;
    AlignedAlloc() = default;
    template <class U>
    AlignedAlloc(const AlignedAlloc<U>&) {}
    T* allocate(std::size_t n) {
        return static_cast<T*>(
            ::operator new(n * sizeof(T), std::align_val_t(alignment)));
    }
    void deallocate(T* p, std::size_t) noexcept {
        ::operator delete(p, std::align_val_t(alignment));
    }
    template <class U>
    bool operator==(const AlignedAlloc<U>&) const { return true; }
    template <class U>
    bool operator!=(const AlignedAlloc<U>&) const { return false; }
};

}  // namespace detail

struct GridArray {
    std::array<int, 3> nf{0, 0, 0};
    std::vector<std::complex<double>, detail::AlignedAlloc<std::complex<double>>> v;

    static GridArray zeros(std::array<int, 3> nf) {
        GridArray g;
        g.nf = nf;
        g.v.assign(static_cast<std::size_t>(nf[0]) * nf[1] * nf[2], {0.0, 0.0});
        return g;
    }
    std::size_t idx(int ix, int iy, int iz) const {
        return (static_cast<std::size_t>(ix) * nf[1] + iy) * nf[2] + iz;
    }
};

namespace detail {

inline int signed_mode(int i, int n) { return i < (n + 1) / 2 ? i : i - n; }

inline int wrap_index(int l, int n) {
    int r = l % n;
    return r < 0 ? r + n : r;
}

// FFTW plan creation/destruction is not thread-safe; execution of an
// ESTIMATE-planned in-place transform is deterministic.
inline void fft3_inplace(GridArray& g, int sign) {
    static std::mutex planner_mutex;
    fftw_complex* data = reinterpret_cast<fftw_complex*>(g.v.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex);
        plan = fftw_plan_dft_3d(g.nf[0], g.nf[1], g.nf[2], data, data, sign,
                                FFTW_ESTIMATE);
    }
    if (!plan) throw NumericalError("fft: planner failed");
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(planner_mutex);
        fftw_destroy_plan(plan);
    }
}

// Per-dimension footprint: P window weights and the first (unwrapped) node.
struct Footprint {
    int first = 0;
    std::array<double, 16> w{};
};

inline Footprint footprint(const WindowKernel& win, double x) {
    Footprint f;
    int P = win.P;
    double h = win.h;
    int l0;
    if (P % 2 == 0) {
        l0 = static_cast<int>(std::floor(x / h));
        f.first = l0 - (P / 2 - 1);
    } else {
        l0 = static_cast<int>(std::floor(x / h + 0.5));
        f.first = l0 - (P - 1) / 2;
    }
    for (int j = 0; j < P; ++j) f.w[j] = win.phi(x - h * (f.first + j));
    return f;
}

// Same nodes, derivative weights (for gradient interpolation).
inline Footprint footprint_deriv(const WindowKernel& win, double x) {
    Footprint f;
    int P = win.P;
    double h = win.h;
    int l0;
    if (P % 2 == 0) {
        l0 = static_cast<int>(std::floor(x / h));
        f.first = l0 - (P / 2 - 1);
    } else {
        l0 = static_cast<int>(std::floor(x / h + 0.5));
        f.first = l0 - (P - 1) / 2;
    }
    for (int j = 0; j < P; ++j) f.w[j] = win.dphi(x - h * (f.first + j));
    return f;
}

inline void check_grid_window(const std::array<WindowKernel, 3>& win,
                              const std::array<int, 3>& nf) {
    for (int d = 0; d < 3; ++d) {
        if (nf[d] < 2) throw std::invalid_argument("grid: n_f must be at least 2");
        if (win[d].P > nf[d])
            throw std::invalid_argument("grid: window order P exceeds grid size n_f");
    }
}

}  // namespace detail

// Unnormalized forward / inverse transforms (see conventions above).
inline void fft_forward(GridArray& g) { detail::fft3_inplace(g, FFTW_FORWARD); }
inline void fft_inverse(GridArray& g) { detail::fft3_inplace(g, FFTW_BACKWARD); }

// Fourier-space multipliers p_k mapping the forward transform of the spread
// charge grid to the (pre-inverse-transform) potential grid:
//   p_k = (h_x h_y h_z)^2 * chihat_n(r_c |xi_k|) / (V |xi_k|^2 prod_d phihat_d(xi_kd)^2)
// with p_0 = 0 (zero-mean periodic potential). The squared window transform
// undoes one spreading and one interpolation pass; the (h^2/V) factor carries
// both quadrature weights and the unnormalized inverse FFT's 1/N_f.
inline std::vector<double> influence_coefficients(const SplitKernel& split,
                                                  const std::array<WindowKernel, 3>& win,
                                                  const std::array<int, 3>& nf,
                                                  const Vec3& box) {
    detail::check_grid_window(win, nf);
    std::array<std::vector<double>, 3> phihat;
    std::array<std::vector<double>, 3> freq;
    for (int d = 0; d < 3; ++d) {
        phihat[d].resize(nf[d]);
        freq[d].resize(nf[d]);
        for (int i = 0; i < nf[d]; ++i) {
            int k = detail::signed_mode(i, nf[d]);
            double xi = 2.0 * M_PI * k / box[d];
            freq[d][i] = xi;
            double ph = win[d].phi_hat(xi);
            if (std::abs(ph) < 1e-30)
                throw NumericalError(
                    "influence: window transform underflow - window too narrow for grid");
            phihat[d][i] = ph;
        }
    }
    double V = box[0] * box[1] * box[2];
    double hx = box[0] / nf[0], hy = box[1] / nf[1], hz = box[2] / nf[2];
    double pref = (hx * hy * hz) * (hx * hy * hz) / V;

    std::vector<double> p(static_cast<std::size_t>(nf[0]) * nf[1] * nf[2]);
    detail::parallel_for(nf[0], [&](std::int64_t b, std::int64_t e) {
        for (int ix = static_cast<int>(b); ix < static_cast<int>(e); ++ix) {
            double xx = freq[0][ix] * freq[0][ix];
            double wx = phihat[0][ix] * phihat[0][ix];
            for (int iy = 0; iy < nf[1]; ++iy) {
                double xy = xx + freq[1][iy] * freq[1][iy];
                double wxy = wx * phihat[1][iy] * phihat[1][iy];
                std::size_t row = (static_cast<std::size_t>(ix) * nf[1] + iy)
                                  * static_cast<std::size_t>(nf[2]);
                for (int iz = 0; iz < nf[2]; ++iz) {
                    double xi2 = xy + freq[2][iz] * freq[2][iz];
                    if (xi2 == 0.0) {
                        p[row + iz] = 0.0;
                        continue;
                    }
                    double G = split.chihat_n(split.r_c * std::sqrt(xi2)) / xi2;
                    p[row + iz] = pref * G / (wxy * phihat[2][iz] * phihat[2][iz]);
                }
            }
        }
    });
    return p;
}

// Scatter charges onto the grid: rho_l = sum_i q_i prod_d phi_d(x_id - l_d h_d).
// Serial by design: scatter order is then fixed, so results are bit-identical
// for any thread count.
inline GridArray spread(const ParticleSystem& s, const std::array<WindowKernel, 3>& win,
                        const std::array<int, 3>& nf) {
    detail::check_grid_window(win, nf);
    GridArray g = GridArray::zeros(nf);
    std::array<std::array<int, 16>, 3> node{};
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::array<detail::Footprint, 3> fp;
        for (int d = 0; d < 3; ++d) {
            fp[d] = detail::footprint(win[d], s.pos[i][d]);
            for (int j = 0; j < win[d].P; ++j)
                node[d][j] = detail::wrap_index(fp[d].first + j, nf[d]);
        }
        double qi = s.q[i];
        for (int jx = 0; jx < win[0].P; ++jx) {
            double qx = qi * fp[0].w[jx];
            for (int jy = 0; jy < win[1].P; ++jy) {
                double qxy = qx * fp[1].w[jy];
                std::size_t row = (static_cast<std::size_t>(node[0][jx]) * nf[1]
                                   + node[1][jy])
                                  * static_cast<std::size_t>(nf[2]);
                for (int jz = 0; jz < win[2].P; ++jz)
                    g.v[row + node[2][jz]] += qxy * fp[2].w[jz];
            }
        }
    }
    return g;
}

// Adjoint of spread: u_i = sum_l Re(grid_l) prod_d phi_d(x_id - l_d h_d).
inline std::vector<double> interpolate(const GridArray& g,
                                       const std::array<WindowKernel, 3>& win,
                                       const ParticleSystem& s) {
    detail::check_grid_window(win, g.nf);
    std::vector<double> out(s.size());
    detail::parallel_for(static_cast<std::int64_t>(s.size()),
                         [&](std::int64_t b, std::int64_t e) {
        std::array<std::array<int, 16>, 3> node{};
        for (std::int64_t i = b; i < e; ++i) {
            std::array<detail::Footprint, 3> fp;
            for (int d = 0; d < 3; ++d) {
                fp[d] = detail::footprint(win[d], s.pos[i][d]);
                for (int j = 0; j < win[d].P; ++j)
                    node[d][j] = detail::wrap_index(fp[d].first + j, g.nf[d]);
            }
            double acc = 0.0;
            for (int jx = 0; jx < win[0].P; ++jx) {
                double wx = fp[0].w[jx];
                for (int jy = 0; jy < win[1].P; ++jy) {
                    double wxy = wx * fp[1].w[jy];
                    std::size_t row = (static_cast<std::size_t>(node[0][jx]) * g.nf[1]
                                       + node[1][jy])
                                      * static_cast<std::size_t>(g.nf[2]);
                    double accz = 0.0;
                    for (int jz = 0; jz < win[2].P; ++jz)
                        accz += fp[2].w[jz] * g.v[row + node[2][jz]].real();
                    acc += wxy * accz;
                }
            }
            out[i] = acc;
        }
    });
    return out;
}

// Gradient of the interpolant at each particle (window-derivative weights).
inline std::vector<Vec3> interpolate_gradient(const GridArray& g,
                                              const std::array<WindowKernel, 3>& win,
                                              const ParticleSystem& s) {
    detail::check_grid_window(win, g.nf);
    std::vector<Vec3> out(s.size());
    detail::parallel_for(static_cast<std::int64_t>(s.size()),
                         [&](std::int64_t b, std::int64_t e) {
        std::array<std::array<int, 16>, 3> node{};
        for (std::int64_t i = b; i < e; ++i) {
            std::array<detail::Footprint, 3> fp, dfp;
            for (int d = 0; d < 3; ++d) {
                fp[d] = detail::footprint(win[d], s.pos[i][d]);
                dfp[d] = detail::footprint_deriv(win[d], s.pos[i][d]);
                for (int j = 0; j < win[d].P; ++j)
                    node[d][j] = detail::wrap_index(fp[d].first + j, g.nf[d]);
            }
            Vec3 grad{0.0, 0.0, 0.0};
            for (int jx = 0; jx < win[0].P; ++jx) {
                for (int jy = 0; jy < win[1].P; ++jy) {
                    std::size_t row = (static_cast<std::size_t>(node[0][jx]) * g.nf[1]
                                       + node[1][jy])
                                      * static_cast<std::size_t>(g.nf[2]);
                    for (int jz = 0; jz < win[2].P; ++jz) {
                        double gv = g.v[row + node[2][jz]].real();
                        grad[0] += dfp[0].w[jx] * fp[1].w[jy] * fp[2].w[jz] * gv;
                        grad[1] += fp[0].w[jx] * dfp[1].w[jy] * fp[2].w[jz] * gv;
                        grad[2] += fp[0].w[jx] * fp[1].w[jy] * dfp[2].w[jz] * gv;
                    }
                }
            }
            out[i] = grad;
        }
    });
    return out;
}

}  // namespace esp
