#ifndef EHOM_EFFECTIVE_HPP
#define EHOM_EFFECTIVE_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ehom/cell_solver.hpp"
#include "ehom/spectral.hpp"

namespace ehom {

/// Exact-match partition of a few-valued field: representative points and
/// volume fractions. Falls back to an empty partition when the field has
/// more than 64 distinct values.
struct ValuePartition {
    std::vector<std::size_t> reps;
    std::vector<double> fractions;
};

inline ValuePartition value_partition(const Field& f) {
    ValuePartition part;
    std::vector<std::size_t> counts;
    const int nc = f.components();
    for (std::size_t p = 0; p < f.points(); ++p) {
        bool found = false;
        for (std::size_t r = 0; r < part.reps.size(); ++r) {
            bool same = true;
            for (int c = 0; c < nc; ++c)
                if (f.at(c, p) != f.at(c, part.reps[r])) {
                    same = false;
                    break;
                }
            if (same) {
                ++counts[r];
                found = true;
                break;
            }
        }
        if (!found) {
            part.reps.push_back(p);
            counts.push_back(1);
            if (part.reps.size() > 64) return {};
        }
    }
    for (std::size_t c : counts)
        part.fractions.push_back(static_cast<double>(c) / static_cast<double>(f.points()));
    return part;
}

/// Direction set for quadratic-form bracket tests: the basis plus all
/// normalized pair diagonals.
inline std::vector<Vec> bracket_directions(int dim) {
    std::vector<Vec> dirs;
    for (int i = 0; i < dim; ++i) dirs.push_back(Vec::unit(dim, i));
    const double s = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j) {
            Vec v(dim);
            v[i] = s;
            v[j] = s;
            dirs.push_back(v);
            v[j] = -s;
            dirs.push_back(v);
        }
    return dirs;
}

struct EffectivePermittivity {
    Mat eps_h;                      ///< symmetrized flux average
    double symmetry_residual = 0;   ///< relative asymmetry of the raw average
    std::vector<double> eigenvalues;
    double reuss_margin = 0;        ///< min over directions of eps_h - harmonic
    double voigt_margin = 0;        ///< min over directions of arithmetic - eps_h
};

/// eps_h e_j := cell average of eps grad w_j, checked against the
/// Voigt-Reuss bracket in quadratic-form order.
inline EffectivePermittivity effective_permittivity(const Field& eps,
                                                    const std::vector<Field>& grad_w,
                                                    double bracket_tol = 1e-9) {
    const int dim = eps.grid().dim();
    Mat raw(dim);
    for (int j = 0; j < dim; ++j) {
        Vec col = mean_vector(matvec(eps, grad_w[j]));
        for (int i = 0; i < dim; ++i) raw(i, j) = col[i];
    }
    EffectivePermittivity out;
    out.symmetry_residual = raw.asymmetry() / raw.frobenius_norm();
    out.eps_h = raw.sym();
    out.eigenvalues = sym_eigenvalues(out.eps_h);

    Mat arith(dim), harm_acc(dim);
    auto part = value_partition(eps);
    if (!part.reps.empty()) {
        for (std::size_t r = 0; r < part.reps.size(); ++r) {
            Mat v = eps.matrix_at(part.reps[r]);
            arith += v * part.fractions[r];
            harm_acc += mat_inverse(v) * part.fractions[r];
        }
    } else {
        for (std::size_t p = 0; p < eps.points(); ++p) {
            Mat v = eps.matrix_at(p);
            arith += v;
            harm_acc += mat_inverse(v);
        }
        arith *= 1.0 / static_cast<double>(eps.points());
        harm_acc *= 1.0 / static_cast<double>(eps.points());
    }
    Mat harmonic = mat_inverse(harm_acc);

    out.reuss_margin = std::numeric_limits<double>::max();
    out.voigt_margin = std::numeric_limits<double>::max();
    const double scale = arith.frobenius_norm();
    for (const Vec& d : bracket_directions(dim)) {
        out.reuss_margin = std::min(out.reuss_margin, out.eps_h.quad(d) - harmonic.quad(d));
        out.voigt_margin = std::min(out.voigt_margin, arith.quad(d) - out.eps_h.quad(d));
    }
    if (out.reuss_margin < -bracket_tol * scale || out.voigt_margin < -bracket_tol * scale)
        throw BoundViolationError("effective_tensors",
                                  "effective permittivity violates the Voigt-Reuss bracket");
    return out;
}

struct ChargeCoupling {
    Eigen::MatrixXd a;          ///< canonical value: a_{jp} = -avg(g_p chi_j)
    Eigen::MatrixXd a_flux;     ///< avg(tau_p . grad w_j), physical-space quadrature
    Eigen::MatrixXd a_spectral; ///< avg(grad psi_p . (e_j + grad chi_j)), Parseval pairing
    Eigen::MatrixXd b;          ///< b_{jp} = avg(eps grad theta_p)_j
    double max_discrepancy = 0; ///< worst pairwise entry gap between the three routes
    double b_discrepancy = 0;   ///< worst entry gap of b + a
};

/// The charge-coupling matrix by its three equivalent formulas, plus the
/// weak-limit flux average b that must equal -a.
inline ChargeCoupling charge_coupling(const std::vector<ChargeFamily>& families,
                                      const std::vector<PoissonSolution>& psi,
                                      const std::vector<Field>& chi,
                                      const std::vector<Field>& grad_w,
                                      const std::vector<Field>& theta, const Field& eps,
                                      double mismatch_tol = 1e-4) {
    const int dim = eps.grid().dim();
    const int P = static_cast<int>(families.size());
    ChargeCoupling out;
    out.a.resize(dim, P);
    out.a_flux.resize(dim, P);
    out.a_spectral.resize(dim, P);
    out.b.resize(dim, P);

    for (int p = 0; p < P; ++p) {
        for (int j = 0; j < dim; ++j) {
            out.a(j, p) = -l2_inner(families[p].g, chi[j]);
            out.a_flux(j, p) = l2_inner(psi[p].tau, grad_w[j]);
            out.a_spectral(j, p) = spectral_inner(psi[p].tau, grad_w[j]);
        }
        Field flux = matvec(eps, spectral_gradient(theta[p]));
        Vec bp = mean_vector(flux);
        for (int j = 0; j < dim; ++j) out.b(j, p) = bp[j];
    }

    // the entries of a arise from cancellation in the integrands; when
    // they vanish, measure agreement against the integrand magnitude
    double input_scale = 0.0;
    for (int p = 0; p < P; ++p) input_scale = std::max(input_scale, l2_norm(psi[p].tau));
    double w_scale = 0.0;
    for (int j = 0; j < dim; ++j) w_scale = std::max(w_scale, l2_norm(grad_w[j]));
    double scale = std::max({out.a.cwiseAbs().maxCoeff(), out.a_flux.cwiseAbs().maxCoeff(),
                             out.a_spectral.cwiseAbs().maxCoeff(),
                             1e-8 * input_scale * w_scale});
    if (scale == 0.0) scale = 1.0;
    out.max_discrepancy =
        std::max({(out.a - out.a_flux).cwiseAbs().maxCoeff(),
                  (out.a - out.a_spectral).cwiseAbs().maxCoeff(),
                  (out.a_flux - out.a_spectral).cwiseAbs().maxCoeff()}) /
        scale;
    out.b_discrepancy = (out.b + out.a).cwiseAbs().maxCoeff() / scale;
    if (out.max_discrepancy > mismatch_tol)
        throw FormulaMismatchError("effective_tensors",
                                   "charge-coupling formulas disagree by " +
                                       std::to_string(out.max_discrepancy) +
                                       " relative; solve is under-resolved");
    return out;
}

struct KappaResult {
    Eigen::MatrixXd kappa;                 ///< kappa_{pq} = avg(tau_p . grad theta_q)
    std::vector<double> energy_residual;   ///< relative gap to avg(eps grad theta . grad theta)
};

/// kappa by the defining formula, with the diagonal verified against the
/// energy identity; the off-diagonal generalizes the single-family case
/// and is flagged as an extension in output metadata.
inline KappaResult kappa(const Field& eps, const std::vector<PoissonSolution>& psi,
                         const std::vector<Field>& theta, double identity_tol = 1e-6) {
    const int P = static_cast<int>(theta.size());
    KappaResult out;
    out.kappa.resize(P, P);
    std::vector<Field> grad_theta;
    grad_theta.reserve(P);
    for (int q = 0; q < P; ++q) grad_theta.push_back(spectral_gradient(theta[q]));
    for (int p = 0; p < P; ++p)
        for (int q = 0; q < P; ++q) out.kappa(p, q) = l2_inner(psi[p].tau, grad_theta[q]);

    for (int p = 0; p < P; ++p) {
        const double energy = l2_inner(matvec(eps, grad_theta[p]), grad_theta[p]);
        const double diag = out.kappa(p, p);
        const double scale = std::max(std::abs(energy), std::abs(diag));
        const bool charged = l2_norm(theta[p]) > 0;
        out.energy_residual.push_back(scale > 0 ? std::abs(energy - diag) / scale : 0.0);
        if (charged && diag <= 0.0)
            throw NegativeKappaError("effective_tensors",
                                     "kappa_{pp} = " + std::to_string(diag) + " is not positive");
        if (charged && out.energy_residual.back() > identity_tol)
            throw NegativeKappaError("effective_tensors",
                                     "kappa energy identity violated by " +
                                         std::to_string(out.energy_residual.back()));
    }
    return out;
}

struct EffectiveElasticity {
    Rank4 L_h;                      ///< energy-form value (exactly major symmetric)
    double major_symmetry_residual; ///< relative asymmetry of the flux form
    double flux_energy_gap;         ///< relative gap between the two routes
    std::vector<double> eigenvalues;
    double reuss_margin = 0;
    double voigt_margin = 0;
};

/// L^h by the energy form avg(L grad W_ij . grad W_kh), cross-checked
/// against the flux form avg(L grad W) and the Voigt-Reuss bracket.
inline EffectiveElasticity effective_elasticity(const Field& L, const std::vector<Field>& grad_W,
                                                double bracket_tol = 1e-9) {
    const int dim = L.grid().dim();
    const int d = sym_dim(dim);
    EffectiveElasticity out;
    out.L_h = Rank4(dim);
    Rank4 flux_form(dim);
    std::vector<Field> stress;
    stress.reserve(d);
    for (int a = 0; a < d; ++a) stress.push_back(mandel_apply(L, grad_W[a]));
    for (int a = 0; a < d; ++a) {
        SymMat col = mean_sym(stress[a]);
        for (int b = 0; b < d; ++b) flux_form(b, a) = mandel_weight(dim, a) * col[b];
        for (int b = a; b < d; ++b) {
            const double e = l2_inner(stress[a], grad_W[b]);
            const double w = mandel_weight(dim, a) * mandel_weight(dim, b);
            out.L_h(a, b) = w * e;
            out.L_h(b, a) = w * e;
        }
    }
    out.major_symmetry_residual = flux_form.major_asymmetry() / flux_form.frobenius_norm();
    Rank4 gap = out.L_h - flux_form;
    out.flux_energy_gap = gap.frobenius_norm() / out.L_h.frobenius_norm();
    out.eigenvalues = rank4_eigenvalues(out.L_h);

    Rank4 arith(dim), harm_acc(dim);
    auto part = value_partition(L);
    if (!part.reps.empty()) {
        for (std::size_t r = 0; r < part.reps.size(); ++r) {
            Rank4 v = L.mandel_at(part.reps[r]);
            arith += v * part.fractions[r];
            harm_acc += rank4_inverse(v) * part.fractions[r];
        }
    } else {
        auto m = mean(L);
        for (int c = 0; c < d * d; ++c) arith.c[c] = m[c];
        for (std::size_t p = 0; p < L.points(); ++p) harm_acc += rank4_inverse(L.mandel_at(p));
        harm_acc *= 1.0 / static_cast<double>(L.points());
    }
    Rank4 harmonic = rank4_inverse(harm_acc);

    out.reuss_margin = std::numeric_limits<double>::max();
    out.voigt_margin = std::numeric_limits<double>::max();
    const double scale = arith.frobenius_norm();
    for (int a = 0; a < d; ++a) {
        for (int b = a; b < d; ++b) {
            SymMat dir(dim);
            dir[a] += 1.0;
            if (b != a) dir[b] += 1.0;
            dir *= 1.0 / dir.norm();
            const double qh = dir.dot(out.L_h.apply(dir));
            out.reuss_margin = std::min(out.reuss_margin, qh - dir.dot(harmonic.apply(dir)));
            out.voigt_margin = std::min(out.voigt_margin, dir.dot(arith.apply(dir)) - qh);
        }
    }
    if (out.reuss_margin < -bracket_tol * scale || out.voigt_margin < -bracket_tol * scale)
        throw BoundViolationError("effective_tensors",
                                  "effective elasticity violates the Voigt-Reuss bracket");
    return out;
}

struct ElectroCoupling {
    Rank4 M_h;                ///< avg M(grad w_k x grad w_h) . grad W_ij
    std::vector<Rank3> N_h;   ///< per family: avg M(grad w_k x grad theta) . grad W_ij
    std::vector<Mat> P_h;     ///< per family: avg M(grad theta x grad theta) . grad W_ij
};

/// Homogenized electrostriction couplings. The dyadic arguments are
/// symmetrized before M is applied.
inline ElectroCoupling electro_coupling(const Field& M, const std::vector<Field>& grad_w,
                                        const std::vector<Field>& theta,
                                        const std::vector<Field>& grad_W) {
    const TorusGrid& grid = M.grid();
    const int dim = grid.dim();
    const int d = sym_dim(dim);
    const auto& pairs = mandel_pairs(dim);
    ElectroCoupling out;
    out.M_h = Rank4(dim);

    auto project = [&](const Field& arg) {
        // avg of M(arg) . grad W_A for every pair A
        Field Marg = mandel_apply(M, arg);
        std::vector<double> vals(d);
        for (int a = 0; a < d; ++a) vals[a] = l2_inner(Marg, grad_W[a]);
        return vals;
    };

    std::vector<Field> grad_theta;
    for (const Field& t : theta) grad_theta.push_back(spectral_gradient(t));

    // M_h
    for (int b = 0; b < d; ++b) {
        auto [k, h] = pairs[b];
        Field arg(grid, Rank::sym_matrix);
        for (std::size_t p = 0; p < grid.points(); ++p)
            arg.set_sym(p, SymMat::sym_outer(grad_w[k].vector_at(p), grad_w[h].vector_at(p)));
        auto vals = project(arg);
        for (int a = 0; a < d; ++a)
            out.M_h(a, b) = mandel_weight(dim, a) * mandel_weight(dim, b) * vals[a];
    }

    // N_h, P_h per family
    for (std::size_t fam = 0; fam < theta.size(); ++fam) {
        Rank3 Nh(dim);
        for (int k = 0; k < dim; ++k) {
            Field arg(grid, Rank::sym_matrix);
            for (std::size_t p = 0; p < grid.points(); ++p)
                arg.set_sym(p, SymMat::sym_outer(grad_w[k].vector_at(p),
                                                 grad_theta[fam].vector_at(p)));
            auto vals = project(arg);
            for (int a = 0; a < d; ++a) Nh(a, k) = mandel_weight(dim, a) * vals[a];
        }
        out.N_h.push_back(Nh);

        Field arg(grid, Rank::sym_matrix);
        for (std::size_t p = 0; p < grid.points(); ++p) {
            Vec gt = grad_theta[fam].vector_at(p);
            arg.set_sym(p, SymMat::sym_outer(gt, gt));
        }
        auto vals = project(arg);
        Mat Ph(dim);
        for (int a = 0; a < d; ++a) {
            auto [i, j] = pairs[a];
            Ph(i, j) = vals[a];
            Ph(j, i) = vals[a];
        }
        out.P_h.push_back(Ph);
    }
    return out;
}

struct EnhancedPermittivity {
    Mat eps_tilde;
    double lambda = 0;
    std::vector<double> eigenvalues; ///< of the symmetric part
    double asymmetry = 0;
    bool elliptic = false;
};

/// eps_tilde(lambda) = eps_h - lambda a0 with a0 the unit-amplitude
/// coupling matrix; the Rayleigh quotient in any fixed direction is
/// exactly affine in lambda. Loss of ellipticity is reported, not
/// rejected.
inline EnhancedPermittivity enhanced_permittivity(const Mat& eps_h, const Eigen::MatrixXd& a0,
                                                  double lambda) {
    const int dim = eps_h.n;
    if (a0.rows() != dim || a0.cols() != dim)
        throw FormulaMismatchError("effective_tensors",
                                   "enhancement requires one charge family per direction");
    EnhancedPermittivity out;
    out.lambda = lambda;
    out.eps_tilde = eps_h;
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) out.eps_tilde(i, j) -= lambda * a0(i, j);
    out.asymmetry = out.eps_tilde.asymmetry() / std::max(1.0, out.eps_tilde.frobenius_norm());
    out.eigenvalues = sym_eigenvalues(out.eps_tilde);
    out.elliptic = out.eigenvalues.front() > 0.0;
    return out;
}

} // namespace ehom

#endif
