#ifndef EHOM_SPECTRAL_HPP
#define EHOM_SPECTRAL_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "ehom/errors.hpp"
#include "ehom/fft.hpp"
#include "ehom/grid.hpp"

namespace ehom {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Compensated (Kahan) sum; fixed sequential order for determinism.
inline double kahan_sum(const double* x, std::size_t n) {
    double s = 0.0, c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double y = x[i] - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}

/// Cell average per component (midpoint quadrature).
inline std::vector<double> mean(const Field& f) {
    std::vector<double> m(f.components());
    for (int c = 0; c < f.components(); ++c)
        m[c] = kahan_sum(f.component(c), f.points()) / static_cast<double>(f.points());
    return m;
}

inline double mean_scalar(const Field& f) { return mean(f)[0]; }

inline Vec mean_vector(const Field& f) {
    auto m = mean(f);
    Vec v(f.grid().dim());
    for (int c = 0; c < v.n; ++c) v[c] = m[c];
    return v;
}

inline Mat mean_matrix(const Field& f) {
    auto m = mean(f);
    Mat r(f.grid().dim());
    for (int c = 0; c < f.components(); ++c) r.a[c] = m[c];
    return r;
}

inline SymMat mean_sym(const Field& f) {
    auto m = mean(f);
    SymMat r(f.grid().dim());
    for (int c = 0; c < f.components(); ++c) r[c] = m[c];
    return r;
}

/// f - mean(f), per component. Idempotent and linear.
inline Field project_zero_mean(const Field& f) {
    Field out = f;
    for (int c = 0; c < f.components(); ++c) {
        const double m = kahan_sum(f.component(c), f.points()) / static_cast<double>(f.points());
        double* oc = out.component(c);
        for (std::size_t p = 0; p < f.points(); ++p) oc[p] -= m;
    }
    return out;
}

/// Discrete L2 inner product: mean of the pointwise Euclidean product.
inline double l2_inner(const Field& a, const Field& b) {
    double s = 0.0;
    for (int c = 0; c < a.components(); ++c) {
        const double* ac = a.component(c);
        const double* bc = b.component(c);
        double sc = 0.0, comp = 0.0;
        for (std::size_t p = 0; p < a.points(); ++p) {
            double y = ac[p] * bc[p] - comp;
            double t = sc + y;
            comp = (t - sc) - y;
            sc = t;
        }
        s += sc;
    }
    return s / static_cast<double>(a.points());
}

inline double l2_norm(const Field& a) { return std::sqrt(l2_inner(a, a)); }

/// Lq norm of the pointwise Euclidean magnitude, by midpoint quadrature.
inline double lq_norm(const Field& a, double q) {
    double s = 0.0, comp = 0.0;
    for (std::size_t p = 0; p < a.points(); ++p) {
        double m2 = 0.0;
        for (int c = 0; c < a.components(); ++c) {
            const double v = a.at(c, p);
            m2 += v * v;
        }
        double y = std::pow(m2, 0.5 * q) - comp;
        double t = s + y;
        comp = (t - s) - y;
        s = t;
    }
    return std::pow(s / static_cast<double>(a.points()), 1.0 / q);
}

/// Trigonometric-interpolation gradient of a scalar field. Exact for
/// resolved Fourier modes; the Nyquist derivative mode is zeroed.
inline Field spectral_gradient(const Field& f) {
    const TorusGrid& g = f.grid();
    const int dim = g.dim();
    SpectralWorkspace& ws = workspace(g);
    std::vector<std::complex<double>> hat(ws.complex_count());
    std::vector<std::complex<double>> dhat(ws.complex_count());
    ws.forward(f.component(0), hat.data());
    Field grad(g, Rank::vector);
    for (int d = 0; d < dim; ++d) {
        for_each_mode(dim, g.n(), [&](std::size_t idx, const std::array<int, 3>& k) {
            dhat[idx] = hat[idx] * std::complex<double>(0.0, two_pi * k[d]);
        });
        ws.backward(dhat.data(), grad.component(d));
    }
    return grad;
}

/// Divergence of a vector field (adjoint convention of spectral_gradient).
inline Field spectral_divergence(const Field& v) {
    const TorusGrid& g = v.grid();
    const int dim = g.dim();
    SpectralWorkspace& ws = workspace(g);
    std::vector<std::complex<double>> hat(ws.complex_count());
    std::vector<std::complex<double>> acc(ws.complex_count(), {0.0, 0.0});
    for (int d = 0; d < dim; ++d) {
        ws.forward(v.component(d), hat.data());
        for_each_mode(dim, g.n(), [&](std::size_t idx, const std::array<int, 3>& k) {
            acc[idx] += hat[idx] * std::complex<double>(0.0, two_pi * k[d]);
        });
    }
    Field div(g, Rank::scalar);
    ws.backward(acc.data(), div.component(0));
    return div;
}

/// Gradient of a vector field: (grad u)_{ij} = d u_i / d y_j.
inline Field spectral_vector_gradient(const Field& u) {
    const TorusGrid& g = u.grid();
    const int dim = g.dim();
    SpectralWorkspace& ws = workspace(g);
    std::vector<std::complex<double>> hat(ws.complex_count());
    std::vector<std::complex<double>> dhat(ws.complex_count());
    Field grad(g, Rank::matrix);
    for (int i = 0; i < dim; ++i) {
        ws.forward(u.component(i), hat.data());
        for (int j = 0; j < dim; ++j) {
            for_each_mode(dim, g.n(), [&](std::size_t idx, const std::array<int, 3>& k) {
                dhat[idx] = hat[idx] * std::complex<double>(0.0, two_pi * k[j]);
            });
            ws.backward(dhat.data(), grad.component(i * dim + j));
        }
    }
    return grad;
}

/// Symmetrized gradient of a vector field in Mandel coordinates.
inline Field spectral_sym_gradient(const Field& u) {
    Field full = spectral_vector_gradient(u);
    const int dim = u.grid().dim();
    Field sym(u.grid(), Rank::sym_matrix);
    const auto& pairs = mandel_pairs(dim);
    for (int a = 0; a < sym_dim(dim); ++a) {
        auto [i, j] = pairs[a];
        const double w = mandel_weight(dim, a);
        const double* gij = full.component(i * dim + j);
        const double* gji = full.component(j * dim + i);
        double* sa = sym.component(a);
        for (std::size_t p = 0; p < u.points(); ++p) sa[p] = 0.5 * w * (gij[p] + gji[p]);
    }
    return sym;
}

/// Divergence of a symmetric-matrix field (Mandel storage):
/// (div s)_i = d s_{ij} / d y_j.
inline Field spectral_div_sym(const Field& s) {
    const TorusGrid& g = s.grid();
    const int dim = g.dim();
    SpectralWorkspace& ws = workspace(g);
    const auto& pairs = mandel_pairs(dim);
    const int d = sym_dim(dim);
    std::vector<std::vector<std::complex<double>>> hat(d);
    for (int a = 0; a < d; ++a) {
        hat[a].resize(ws.complex_count());
        ws.forward(s.component(a), hat[a].data());
    }
    Field div(g, Rank::vector);
    std::vector<std::complex<double>> acc(ws.complex_count());
    for (int i = 0; i < dim; ++i) {
        std::fill(acc.begin(), acc.end(), std::complex<double>(0.0, 0.0));
        for (int a = 0; a < d; ++a) {
            auto [pi, pj] = pairs[a];
            if (pi != i && pj != i) continue;
            const int j = (pi == i) ? pj : pi;
            const double w = 1.0 / mandel_weight(dim, a);
            for_each_mode(dim, g.n(), [&](std::size_t idx, const std::array<int, 3>& k) {
                acc[idx] += hat[a][idx] * std::complex<double>(0.0, two_pi * k[j] * w);
            });
        }
        ws.backward(acc.data(), div.component(i));
    }
    return div;
}

struct PoissonSolution {
    Field psi;  ///< zero-mean potential
    Field tau;  ///< gradient of psi
    double rel_residual = 0.0;   ///< |laplace(psi) - P g| / |g|
    double kernel_discard = 0.0; ///< |g - P g| / |g|, mass in unresolvable modes
};

/// Solve laplace(psi) = g on the torus with zero mean, spectrally. The
/// discrete Laplacian is the composition of the divergence and gradient
/// above, so its kernel contains the mean mode and the pure-Nyquist
/// corner modes; the right-hand side is projected onto the solvable
/// complement and the discarded fraction is reported.
inline PoissonSolution solve_periodic_poisson(const Field& g, double neutrality_tol = 1e-10) {
    const TorusGrid& grid = g.grid();
    const double gnorm = l2_norm(g);
    const double gmean = mean_scalar(g);
    if (std::abs(gmean) > neutrality_tol * std::max(1.0, gnorm))
        throw NonNeutralChargeError("cell_solver",
                                    "charge density has nonzero mean " + std::to_string(gmean));

    SpectralWorkspace& ws = workspace(grid);
    std::vector<std::complex<double>> hat(ws.complex_count());
    std::vector<std::complex<double>> proj(ws.complex_count());
    ws.forward(g.component(0), hat.data());

    double discarded = 0.0;
    const double norm_scale = 1.0 / static_cast<double>(grid.points());
    for_each_mode(grid.dim(), grid.n(), [&](std::size_t idx, const std::array<int, 3>& k) {
        double k2 = 0.0;
        for (int d = 0; d < 3; ++d) k2 += static_cast<double>(k[d]) * k[d];
        if (k2 == 0.0) {
            // kernel modes are self-conjugate, no pair weight needed
            discarded += std::norm(hat[idx]);
            proj[idx] = 0.0;
            hat[idx] = 0.0;
        } else {
            proj[idx] = hat[idx];
            hat[idx] /= -(two_pi * two_pi) * k2;
        }
    });

    PoissonSolution sol;
    sol.psi = Field(grid, Rank::scalar);
    ws.backward(hat.data(), sol.psi.component(0));
    sol.tau = spectral_gradient(sol.psi);
    sol.kernel_discard = gnorm > 0 ? std::sqrt(discarded) * norm_scale / gnorm : 0.0;

    // independent residual: divergence of the stored gradient against the
    // projected right-hand side
    Field pg(grid, Rank::scalar);
    ws.backward(proj.data(), pg.component(0));
    Field resid = spectral_divergence(sol.tau);
    resid -= pg;
    sol.rel_residual = gnorm > 0 ? l2_norm(resid) / gnorm : 0.0;
    return sol;
}

/// Parseval pairing evaluated from the half-spectrum; used to cross-check
/// quadrature against spectral coefficients.
inline double spectral_inner(const Field& a, const Field& b) {
    const TorusGrid& g = a.grid();
    SpectralWorkspace& ws = workspace(g);
    std::vector<std::complex<double>> ahat(ws.complex_count()), bhat(ws.complex_count());
    const int n = g.n();
    double total = 0.0;
    for (int c = 0; c < a.components(); ++c) {
        ws.forward(a.component(c), ahat.data());
        ws.forward(b.component(c), bhat.data());
        double s = 0.0;
        const int nh = n / 2 + 1;
        for_each_mode(g.dim(), n, [&](std::size_t idx, const std::array<int, 3>&) {
            // weight conjugate-pair modes that the r2c layout stores once
            const int jlast = static_cast<int>(idx % nh);
            const double w = (jlast == 0 || jlast == n / 2) ? 1.0 : 2.0;
            s += w * (ahat[idx].real() * bhat[idx].real() + ahat[idx].imag() * bhat[idx].imag());
        });
        total += s;
    }
    const double npts = static_cast<double>(g.points());
    return total / (npts * npts);
}

} // namespace ehom

#endif
