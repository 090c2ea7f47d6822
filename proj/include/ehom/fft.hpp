#ifndef EHOM_FFT_HPP
#define EHOM_FFT_HPP

#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>

#include <fftw3.h>

#include "ehom/grid.hpp"

namespace ehom {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// Real-to-complex transform pair for one grid signature, with owned
/// aligned buffers. Plans use FFTW_ESTIMATE so that planning is
/// deterministic. Not thread safe; use one workspace per thread (see
/// workspace()).
class SpectralWorkspace {
public:
    SpectralWorkspace(int dim, int n) : dim_(dim), n_(n) {
        npts_ = 1;
        for (int d = 0; d < dim; ++d) npts_ *= static_cast<std::size_t>(n);
        ncplx_ = npts_ / n * (n / 2 + 1);
        rbuf_ = fftw_alloc_real(npts_);
        cbuf_ = fftw_alloc_complex(ncplx_);
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        if (dim == 2) {
            fwd_ = fftw_plan_dft_r2c_2d(n, n, rbuf_, cbuf_, FFTW_ESTIMATE);
            bwd_ = fftw_plan_dft_c2r_2d(n, n, cbuf_, rbuf_, FFTW_ESTIMATE);
        } else {
            fwd_ = fftw_plan_dft_r2c_3d(n, n, n, rbuf_, cbuf_, FFTW_ESTIMATE);
            bwd_ = fftw_plan_dft_c2r_3d(n, n, n, cbuf_, rbuf_, FFTW_ESTIMATE);
        }
    }
    ~SpectralWorkspace() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(rbuf_);
        fftw_free(cbuf_);
    }
    SpectralWorkspace(const SpectralWorkspace&) = delete;
    SpectralWorkspace& operator=(const SpectralWorkspace&) = delete;

    int dim() const { return dim_; }
    int n() const { return n_; }
    std::size_t points() const { return npts_; }
    std::size_t complex_count() const { return ncplx_; }

    /// Unnormalized forward transform of one component.
    void forward(const double* src, std::complex<double>* dst) {
        std::memcpy(rbuf_, src, npts_ * sizeof(double));
        fftw_execute(fwd_);
        // std::complex<double> is layout-compatible with fftw_complex
        std::memcpy(reinterpret_cast<double*>(dst), cbuf_, ncplx_ * sizeof(fftw_complex));
    }
    /// Backward transform with the 1/points normalization applied.
    void backward(const std::complex<double>* src, double* dst) {
        std::memcpy(cbuf_, src, ncplx_ * sizeof(fftw_complex));
        fftw_execute(bwd_);
        const double s = 1.0 / static_cast<double>(npts_);
        for (std::size_t i = 0; i < npts_; ++i) dst[i] = rbuf_[i] * s;
    }

private:
    int dim_, n_;
    std::size_t npts_, ncplx_;
    double* rbuf_;
    fftw_complex* cbuf_;
    fftw_plan fwd_, bwd_;
};

/// Per-thread workspace cache keyed by grid signature.
inline SpectralWorkspace& workspace(const TorusGrid& grid) {
    thread_local std::map<std::pair<int, int>, std::unique_ptr<SpectralWorkspace>> cache;
    auto key = std::make_pair(grid.dim(), grid.n());
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, std::make_unique<SpectralWorkspace>(grid.dim(), grid.n())).first;
    return *it->second;
}

/// Signed integer wavenumber of DFT index j with the odd-derivative
/// convention: the Nyquist mode maps to zero.
inline int deriv_wavenumber(int j, int n) {
    if (j == n / 2) return 0;
    return j <= n / 2 ? j : j - n;
}

/// Iterate the r2c half-spectrum; cb(flat_index, keff[3]) where keff are
/// the derivative wavenumbers (Nyquist zeroed).
template <class F>
void for_each_mode(int dim, int n, F&& cb) {
    const int nh = n / 2 + 1;
    if (dim == 2) {
        std::size_t idx = 0;
        for (int j0 = 0; j0 < n; ++j0) {
            const int k0 = deriv_wavenumber(j0, n);
            for (int j1 = 0; j1 < nh; ++j1, ++idx) {
                const int k1 = deriv_wavenumber(j1, n);
                cb(idx, std::array<int, 3>{k0, k1, 0});
            }
        }
    } else {
        std::size_t idx = 0;
        for (int j0 = 0; j0 < n; ++j0) {
            const int k0 = deriv_wavenumber(j0, n);
            for (int j1 = 0; j1 < n; ++j1) {
                const int k1 = deriv_wavenumber(j1, n);
                for (int j2 = 0; j2 < nh; ++j2, ++idx) {
                    const int k2 = deriv_wavenumber(j2, n);
                    cb(idx, std::array<int, 3>{k0, k1, k2});
                }
            }
        }
    }
}

} // namespace ehom

#endif
