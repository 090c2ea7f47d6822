#ifndef EHOM_CELL_SOLVER_HPP
#define EHOM_CELL_SOLVER_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ehom/errors.hpp"
#include "ehom/microstructure.hpp"
#include "ehom/spectral.hpp"

namespace ehom {

struct SolverOptions {
    double tol = 1e-8;          ///< relative preconditioned residual
    int max_iter = 10000;
    double contrast_cap = 1e6;  ///< reject coefficients beyond this contrast
    bool record_history = false;
};

struct SolveCertificate {
    int iterations = 0;
    double rel_residual = 0.0;      ///< recomputed |A x - b| / |b| after the solve
    double precond_residual = 0.0;  ///< final preconditioned residual ratio
    double kernel_discard = 0.0;    ///< rhs fraction in unresolvable Nyquist modes
    bool converged = false;
    std::vector<double> history;
};

/// Zero the modes the spectral calculus cannot represent (mean and pure
/// Nyquist combinations) from every component; returns the relative
/// L2 fraction removed.
inline double project_solvable(Field& f) {
    const TorusGrid& g = f.grid();
    SpectralWorkspace& ws = workspace(g);
    std::vector<std::complex<double>> hat(ws.complex_count());
    double removed = 0.0, total = 0.0;
    const int n = g.n();
    const int nh = n / 2 + 1;
    for (int c = 0; c < f.components(); ++c) {
        ws.forward(f.component(c), hat.data());
        for_each_mode(g.dim(), n, [&](std::size_t idx, const std::array<int, 3>& k) {
            const int jlast = static_cast<int>(idx % nh);
            const double w = (jlast == 0 || jlast == n / 2) ? 1.0 : 2.0;
            const double m = std::norm(hat[idx]);
            if (k[0] == 0 && k[1] == 0 && k[2] == 0) {
                removed += w * m;
                hat[idx] = 0.0;
            }
            total += w * m;
        });
        ws.backward(hat.data(), f.component(c));
    }
    return total > 0 ? std::sqrt(removed / total) : 0.0;
}

/// Reference-medium inverse Laplacian for scalar problems: divides each
/// mode by the symbol of -div(eps0 grad .).
class ScalarPreconditioner {
public:
    ScalarPreconditioner(const TorusGrid& grid, const Mat& eps0) : grid_(grid) {
        SpectralWorkspace& ws = workspace(grid);
        inv_.assign(ws.complex_count(), 0.0);
        for_each_mode(grid.dim(), grid.n(), [&](std::size_t idx, const std::array<int, 3>& k) {
            Vec kv(grid.dim());
            for (int d = 0; d < grid.dim(); ++d) kv[d] = two_pi * k[d];
            const double s = eps0.quad(kv);
            inv_[idx] = s > 0 ? 1.0 / s : 0.0;
        });
    }
    Field apply(const Field& r) const {
        SpectralWorkspace& ws = workspace(grid_);
        std::vector<std::complex<double>> hat(ws.complex_count());
        ws.forward(r.component(0), hat.data());
        for (std::size_t i = 0; i < hat.size(); ++i) hat[i] *= inv_[i];
        Field z(grid_, Rank::scalar);
        ws.backward(hat.data(), z.component(0));
        return z;
    }

private:
    TorusGrid grid_;
    std::vector<double> inv_;
};

/// Reference-medium inverse for vector (elasticity) problems: inverts the
/// acoustic matrix K_ik = L0_{ijkh} k_j k_h per mode.
class VectorPreconditioner {
public:
    VectorPreconditioner(const TorusGrid& grid, const Rank4& L0) : grid_(grid) {
        const int dim = grid.dim();
        SpectralWorkspace& ws = workspace(grid);
        inv_.assign(ws.complex_count() * dim * dim, 0.0);
        for_each_mode(grid.dim(), grid.n(), [&](std::size_t idx, const std::array<int, 3>& k) {
            Vec kv(dim);
            double k2 = 0;
            for (int d = 0; d < dim; ++d) {
                kv[d] = two_pi * k[d];
                k2 += kv[d] * kv[d];
            }
            if (k2 == 0.0) return;
            Mat K = L0.contract_dirs(kv);
            Mat Ki = mat_inverse(K);
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j)
                    inv_[(idx * dim + i) * dim + j] = Ki(i, j);
        });
    }
    Field apply(const Field& r) const {
        const int dim = grid_.dim();
        SpectralWorkspace& ws = workspace(grid_);
        std::vector<std::vector<std::complex<double>>> hat(dim);
        for (int c = 0; c < dim; ++c) {
            hat[c].resize(ws.complex_count());
            ws.forward(r.component(c), hat[c].data());
        }
        std::vector<std::vector<std::complex<double>>> out(
            dim, std::vector<std::complex<double>>(ws.complex_count()));
        for (std::size_t idx = 0; idx < ws.complex_count(); ++idx) {
            for (int i = 0; i < dim; ++i) {
                std::complex<double> s = 0.0;
                for (int j = 0; j < dim; ++j) s += inv_[(idx * dim + i) * dim + j] * hat[j][idx];
                out[i][idx] = s;
            }
        }
        Field z(grid_, Rank::vector);
        for (int c = 0; c < dim; ++c) ws.backward(out[c].data(), z.component(c));
        return z;
    }

private:
    TorusGrid grid_;
    std::vector<double> inv_;
};

/// Preconditioned conjugate gradients on zero-mean fields.
template <class ApplyFn, class PrecFn>
std::pair<Field, SolveCertificate> pcg(const ApplyFn& apply, const PrecFn& prec, Field b,
                                       const SolverOptions& opts, const std::string& module) {
    SolveCertificate cert;
    cert.kernel_discard = project_solvable(b);
    const double bnorm = l2_norm(b);

    Field x(b.grid(), b.rank());
    if (bnorm == 0.0) {
        cert.converged = true;
        return {x, cert};
    }

    Field r = b;
    Field z = prec(r);
    Field p = z;
    double rz = l2_inner(r, z);
    const double rz0 = rz;
    if (opts.record_history) cert.history.push_back(1.0);

    int it = 0;
    for (; it < opts.max_iter; ++it) {
        Field q = apply(p);
        const double pq = l2_inner(p, q);
        if (pq <= 0.0)
            throw ConvergenceError(module, "operator lost positive definiteness at iteration " +
                                               std::to_string(it));
        const double alpha = rz / pq;
        for (std::size_t i = 0; i < x.raw().size(); ++i) {
            x.raw()[i] += alpha * p.raw()[i];
            r.raw()[i] -= alpha * q.raw()[i];
        }
        z = prec(r);
        const double rz_new = l2_inner(r, z);
        const double ratio = std::sqrt(std::max(rz_new, 0.0) / rz0);
        if (opts.record_history) cert.history.push_back(ratio);
        if (ratio <= opts.tol) {
            cert.converged = true;
            cert.precond_residual = ratio;
            ++it;
            break;
        }
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < p.raw().size(); ++i)
            p.raw()[i] = z.raw()[i] + beta * p.raw()[i];
    }
    cert.iterations = it;
    if (!cert.converged) {
        std::string trace;
        if (!cert.history.empty()) {
            trace = "; residual trace tail:";
            for (std::size_t i = cert.history.size() > 5 ? cert.history.size() - 5 : 0;
                 i < cert.history.size(); ++i)
                trace += " " + std::to_string(cert.history[i]);
        }
        throw ConvergenceError(module, "no convergence within " + std::to_string(opts.max_iter) +
                                           " iterations" + trace);
    }

    x = project_zero_mean(x);
    Field resid = apply(x);
    resid -= b;
    cert.rel_residual = l2_norm(resid) / bnorm;
    return {x, cert};
}

/// Distinct point values of a few-valued coefficient field. Coefficient
/// fields assembled from phases take a handful of values, so collecting
/// them keeps eigenvalue work off the per-point path.
template <class Extract>
std::vector<std::size_t> distinct_value_points(std::size_t npts, const Extract& same_as) {
    std::vector<std::size_t> reps;
    for (std::size_t p = 0; p < npts; ++p) {
        bool found = false;
        for (std::size_t r : reps)
            if (same_as(p, r)) {
                found = true;
                break;
            }
        if (!found) {
            reps.push_back(p);
            if (reps.size() > 64) return reps; // caller falls back
        }
    }
    return reps;
}

inline std::vector<std::size_t> distinct_matrix_points(const Field& eps) {
    const int nc = eps.components();
    return distinct_value_points(eps.points(), [&](std::size_t p, std::size_t r) {
        for (int c = 0; c < nc; ++c)
            if (eps.at(c, p) != eps.at(c, r)) return false;
        return true;
    });
}

/// Reference medium: arithmetic mean of the distinct phase tensors (the
/// volume average when the field is not few-valued).
inline Mat reference_matrix(const Field& eps) {
    auto reps = distinct_matrix_points(eps);
    if (reps.size() > 64) return mean_matrix(eps);
    Mat ref(eps.grid().dim());
    for (std::size_t r : reps) ref += eps.matrix_at(r);
    ref *= 1.0 / static_cast<double>(reps.size());
    return ref;
}

inline Rank4 reference_rank4(const Field& L) {
    const int dim = L.grid().dim();
    auto reps = distinct_matrix_points(L);
    if (reps.size() > 64) {
        auto m = mean(L);
        Rank4 avg(dim);
        for (int c = 0; c < sym_dim(dim) * sym_dim(dim); ++c) avg.c[c] = m[c];
        return avg;
    }
    Rank4 ref(dim);
    for (std::size_t r : reps) ref += L.mandel_at(r);
    ref *= 1.0 / static_cast<double>(reps.size());
    return ref;
}

/// Gershgorin bounds of a symmetric matrix stored component-major in a
/// field at point p; conservative but allocation-free for full-grid scans.
template <class At>
std::pair<double, double> gershgorin_bounds(int rows, const At& entry) {
    double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
    for (int i = 0; i < rows; ++i) {
        double off = 0;
        for (int j = 0; j < rows; ++j)
            if (j != i) off += std::abs(entry(i, j));
        lo = std::min(lo, entry(i, i) - off);
        hi = std::max(hi, entry(i, i) + off);
    }
    return {lo, hi};
}

/// Contrast guard: eigenvalue range of the coefficient over the grid.
/// Few-valued fields are checked exactly on their representatives; other
/// fields get a full Gershgorin scan with exact fallback at suspect
/// points.
inline void check_contrast(const Field& eps, double cap, const std::string& module) {
    auto reps = distinct_matrix_points(eps);
    double lo = std::numeric_limits<double>::max(), hi = 0.0;
    auto account = [&](std::size_t p) {
        auto ev = sym_eigenvalues(eps.matrix_at(p));
        lo = std::min(lo, ev.front());
        hi = std::max(hi, ev.back());
        if (ev.front() <= 0.0)
            throw EllipticityError(module, "coefficient not positive definite at a grid point");
    };
    if (reps.size() <= 64) {
        for (std::size_t r : reps) account(r);
    } else {
        const int n = eps.grid().dim();
        for (std::size_t p = 0; p < eps.points(); ++p) {
            auto [glo, ghi] = gershgorin_bounds(
                n, [&](int i, int j) { return eps.at(i * n + j, p); });
            if (glo <= 0.0) {
                account(p);
            } else {
                lo = std::min(lo, glo);
                hi = std::max(hi, ghi);
            }
        }
    }
    if (hi / lo > cap)
        throw ContrastError(module, "coefficient contrast " + std::to_string(hi / lo) +
                                        " exceeds the cap " + std::to_string(cap));
}

inline void check_contrast_rank4(const Field& L, double cap, const std::string& module) {
    auto reps = distinct_matrix_points(L);
    double lo = std::numeric_limits<double>::max(), hi = 0.0;
    auto account = [&](std::size_t p) {
        auto ev = rank4_eigenvalues(L.mandel_at(p));
        lo = std::min(lo, ev.front());
        hi = std::max(hi, ev.back());
        if (ev.front() <= 0.0)
            throw EllipticityError(module, "elasticity not positive definite at a grid point");
    };
    if (reps.size() <= 64) {
        for (std::size_t r : reps) account(r);
    } else {
        const int d = sym_dim(L.grid().dim());
        for (std::size_t p = 0; p < L.points(); ++p) {
            auto [glo, ghi] = gershgorin_bounds(
                d, [&](int i, int j) {
                    return 0.5 * (L.at(i * d + j, p) + L.at(j * d + i, p));
                });
            if (glo <= 0.0) {
                account(p);
            } else {
                lo = std::min(lo, glo);
                hi = std::max(hi, ghi);
            }
        }
    }
    if (hi / lo > cap)
        throw ContrastError(module, "elasticity contrast " + std::to_string(hi / lo) +
                                        " exceeds the cap " + std::to_string(cap));
}

struct DielectricCorrector {
    Field chi;    ///< zero-mean scalar corrector
    Field grad_w; ///< e_j + grad chi
    SolveCertificate certificate;
};

/// Periodic corrector for direction j: div eps grad(chi_j + y_j) = 0.
inline DielectricCorrector solve_dielectric_corrector(const Field& eps, int j,
                                                      const SolverOptions& opts = {}) {
    const TorusGrid& g = eps.grid();
    check_contrast(eps, opts.contrast_cap, "cell_solver");
    ScalarPreconditioner prec(g, reference_matrix(eps));

    // rhs: div(eps e_j)
    Field col(g, Rank::vector);
    for (int i = 0; i < g.dim(); ++i) {
        const double* e = eps.component(i * g.dim() + j);
        double* c = col.component(i);
        for (std::size_t p = 0; p < g.points(); ++p) c[p] = e[p];
    }
    Field b = spectral_divergence(col);

    auto apply = [&](const Field& u) {
        Field flux = matvec(eps, spectral_gradient(u));
        Field out = spectral_divergence(flux);
        out *= -1.0;
        return out;
    };
    auto [chi, cert] = pcg(apply, [&](const Field& r) { return prec.apply(r); }, std::move(b),
                           opts, "cell_solver");

    DielectricCorrector sol;
    sol.grad_w = spectral_gradient(chi);
    for (std::size_t p = 0; p < g.points(); ++p) sol.grad_w.at(j, p) += 1.0;
    sol.chi = std::move(chi);
    sol.certificate = cert;
    return sol;
}

struct ChargeCorrector {
    Field theta; ///< zero-mean scalar
    Field sigma; ///< eps grad theta - tau
    SolveCertificate certificate;
};

/// Charge corrector: div eps grad theta = g, with sigma = eps grad theta - tau.
inline ChargeCorrector solve_charge_corrector(const Field& eps, const Field& g_density,
                                              const Field& tau, const SolverOptions& opts = {}) {
    const TorusGrid& g = eps.grid();
    check_contrast(eps, opts.contrast_cap, "cell_solver");
    const double m = std::abs(mean_scalar(g_density));
    if (m > 1e-10 * std::max(1.0, l2_norm(g_density)))
        throw NonNeutralChargeError("cell_solver", "charge density mean " + std::to_string(m));
    ScalarPreconditioner prec(g, reference_matrix(eps));

    Field b = g_density;
    b *= -1.0;
    auto apply = [&](const Field& u) {
        Field flux = matvec(eps, spectral_gradient(u));
        Field out = spectral_divergence(flux);
        out *= -1.0;
        return out;
    };
    auto [theta, cert] = pcg(apply, [&](const Field& r) { return prec.apply(r); }, std::move(b),
                             opts, "cell_solver");

    ChargeCorrector sol;
    sol.sigma = matvec(eps, spectral_gradient(theta));
    sol.sigma -= tau;
    sol.theta = std::move(theta);
    sol.certificate = cert;
    return sol;
}

inline ChargeCorrector solve_charge_corrector(const Field& eps, const ChargeFamily& fam,
                                              const SolverOptions& opts = {}) {
    PoissonSolution psi = solve_periodic_poisson(fam.g);
    return solve_charge_corrector(eps, fam.g, psi.tau, opts);
}

struct ElasticCorrector {
    Field X;      ///< zero-mean vector corrector
    Field grad_W; ///< sym(e_i x e_j) + sym grad X, Mandel coordinates
    SolveCertificate certificate;
};

/// Elasticity corrector for the loading pair (i,j):
/// div L grad(X_ij + x_i e_j) = 0.
inline ElasticCorrector solve_elastic_corrector(const Field& L, int i, int j,
                                                const SolverOptions& opts = {}) {
    const TorusGrid& g = L.grid();
    check_contrast_rank4(L, opts.contrast_cap, "cell_solver");
    VectorPreconditioner prec(g, reference_rank4(L));

    const int dim = g.dim();
    const SymMat E = SymMat::sym_outer(Vec::unit(dim, i), Vec::unit(dim, j));
    Field Efield(g, Rank::sym_matrix);
    for (std::size_t p = 0; p < g.points(); ++p) Efield.set_sym(p, E);
    Field b = spectral_div_sym(mandel_apply(L, Efield));

    auto apply = [&](const Field& u) {
        Field stress = mandel_apply(L, spectral_sym_gradient(u));
        Field out = spectral_div_sym(stress);
        out *= -1.0;
        return out;
    };
    auto [X, cert] = pcg(apply, [&](const Field& r) { return prec.apply(r); }, std::move(b), opts,
                         "cell_solver");

    ElasticCorrector sol;
    sol.grad_W = spectral_sym_gradient(X);
    for (std::size_t p = 0; p < g.points(); ++p) {
        SymMat s = sol.grad_W.sym_at(p);
        sol.grad_W.set_sym(p, s + E);
    }
    sol.X = std::move(X);
    sol.certificate = cert;
    return sol;
}

} // namespace ehom

#endif
