#ifndef EHOM_DILUTE_HPP
#define EHOM_DILUTE_HPP

#include <cmath>
#include <vector>

#include "ehom/effective.hpp"
#include "ehom/eshelby.hpp"
#include "ehom/microstructure.hpp"

namespace ehom {

// The dilute cell (inclusion of radius 1 in a cell of side ell) is realized
// on the unit torus with inclusion radius 1/ell; every physical-cell
// quantity is recovered from the unit-cell solve by the rescaling
// y -> y/ell:  chi_ell(y) = ell chi_hat(y/ell),  theta_ell = ell^2 theta_hat,
// grad chi_ell(y) = grad chi_hat(y/ell),  a_ell = ell a_hat.

struct DiluteStudy {
    int dim = 2;
    double ebar = 5.0;          ///< inclusion permittivity (background 1)
    double eta = 0.5;           ///< coating thickness
    std::vector<int> ell;       ///< dilution scales, >= 2 increasing values
    std::vector<double> lambda; ///< charge amplitudes
    int voxels_per_radius = 32; ///< m; grid n = m * ell
    PhaseTensors matrix;        ///< elasticity/electrostriction of the background
    PhaseTensors inclusion;     ///< elasticity/electrostriction of the inclusion
    SolverOptions solver;

    void validate() const {
        if (ell.size() < 2)
            throw FitError("dilute", "at least two dilution scales are required");
        for (std::size_t i = 0; i < ell.size(); ++i) {
            if (ell[i] < 2 || (ell[i] & (ell[i] - 1)) != 0)
                throw ResolutionError("dilute", "dilution scales must be powers of two >= 2");
            if (i > 0 && ell[i] <= ell[i - 1])
                throw ResolutionError("dilute", "dilution scales must increase");
            if (1.0 + eta >= 0.5 * ell[i])
                throw SupportError("dilute", "coating does not fit: 1 + eta >= ell / 2");
        }
        if (voxels_per_radius < 16)
            throw ResolutionError("dilute", "fewer than 16 voxels per inclusion radius");
    }
};

/// One dilute cell, transcribed to the unit torus.
struct DiluteCell {
    int ell = 0;
    TorusGrid grid;
    PhaseGeometry geometry;
    Field indicator;
    CoefficientSet coefficients;
    std::vector<ChargeFamily> families; ///< unit-amplitude shell charges, one per direction
};

inline DiluteCell make_dilute_cell(const DiluteStudy& study, int ell) {
    DiluteCell cell;
    cell.ell = ell;
    const int n = study.voxels_per_radius * ell;
    cell.grid = TorusGrid(study.dim, n, static_cast<double>(ell));
    Vec center(study.dim);
    for (int d = 0; d < study.dim; ++d) center[d] = 0.5;
    cell.geometry.inclusions.push_back({center, 1.0 / ell, study.eta});
    cell.indicator = build_indicator(cell.geometry, cell.grid);

    PhaseTensors matrix = study.matrix;
    PhaseTensors inclusion = study.inclusion;
    matrix.eps = Mat::identity(study.dim, 1.0);
    inclusion.eps = Mat::identity(study.dim, study.ebar);
    cell.coefficients = assemble_coefficients(matrix, inclusion, cell.indicator);

    for (int p = 0; p < study.dim; ++p)
        cell.families.push_back(
            make_coating_charge(cell.geometry, cell.grid, study.ebar, p, "g" + std::to_string(p + 1)));
    return cell;
}

struct DiluteRecord {
    int ell = 0;
    int n = 0;
    Mat a_ell;                     ///< physical-cell coupling at unit amplitude
    Mat eps_h;                     ///< effective permittivity of the dilute cell
    double mismatch = 0;           ///< |ell^N a_ell + abar| / |abar|
    double corrector_distance = 0; ///< L2(B_{1+eta}) distance of corrector gradients
    double enhancement_remainder = 0; ///< |eps_tilde(lam) - eps_h - lam abar| / lam
    double a_asymmetry = 0;
    int max_iterations = 0;
};

struct DiluteSweep {
    Mat abar_matrix;
    std::vector<DiluteRecord> records;
    std::vector<double> mismatch_orders; ///< observed decay order per consecutive pair
    bool mismatch_decreasing = false;
    bool corrector_decreasing = false;
};

/// Full cell solves across the dilution scales, compared against the
/// closed-form dilute asymptotics.
inline DiluteSweep dilute_sweep(const DiluteStudy& study) {
    study.validate();
    const int N = study.dim;
    DiluteSweep sweep;
    sweep.abar_matrix = abar(study.ebar, study.eta, N);
    const double abar_norm = sweep.abar_matrix.frobenius_norm();

    for (int ell : study.ell) {
        DiluteCell cell = make_dilute_cell(study, ell);
        DiluteRecord rec;
        rec.ell = ell;
        rec.n = cell.grid.n();

        std::vector<Field> chi, grad_w;
        for (int j = 0; j < N; ++j) {
            auto sol = solve_dielectric_corrector(cell.coefficients.eps, j, study.solver);
            rec.max_iterations = std::max(rec.max_iterations, sol.certificate.iterations);
            chi.push_back(std::move(sol.chi));
            grad_w.push_back(std::move(sol.grad_w));
        }
        rec.eps_h = effective_permittivity(cell.coefficients.eps, grad_w).eps_h;

        // a_hat on the unit cell; a_ell = ell * a_hat
        Mat a_ell(N);
        for (int p = 0; p < N; ++p)
            for (int j = 0; j < N; ++j)
                a_ell(j, p) = -static_cast<double>(ell) * l2_inner(cell.families[p].g, chi[j]);
        rec.a_ell = a_ell;
        rec.a_asymmetry =
            a_ell.frobenius_norm() > 0 ? a_ell.asymmetry() / a_ell.frobenius_norm() : 0.0;

        Mat gap = a_ell * std::pow(ell, N) + sweep.abar_matrix;
        rec.mismatch = abar_norm > 0 ? gap.frobenius_norm() / abar_norm : gap.frobenius_norm();
        // remainder of eps_tilde(lam) = eps_h + lam abar + O(ell^-N lam),
        // relative to lam; exact because a is linear in the amplitude
        rec.enhancement_remainder = gap.frobenius_norm();

        // corrector gradient distance to the single-inclusion solution on
        // B_{1+eta}, in physical-cell units
        const Vec center = cell.geometry.inclusions[0].center;
        const double shell_outer = (1.0 + study.eta) / ell;
        double acc = 0.0;
        for (std::size_t p = 0; p < cell.grid.points(); ++p) {
            const Vec y = cell.grid.point(p);
            if (torus_distance(y, center) > shell_outer) continue;
            Vec x(N);
            for (int d = 0; d < N; ++d) {
                double dy = y[d] - center[d];
                if (dy > 0.5) dy -= 1.0;
                if (dy < -0.5) dy += 1.0;
                x[d] = dy * ell;
            }
            const Vec ge = eshelby_corrector_gradient(study.ebar, N, 0, x);
            for (int d = 0; d < N; ++d) {
                const double diff = ge[d] - (grad_w[0].at(d, p) - (d == 0 ? 1.0 : 0.0));
                acc += diff * diff;
            }
        }
        rec.corrector_distance =
            std::sqrt(acc / static_cast<double>(cell.grid.points()) * std::pow(ell, N));

        sweep.records.push_back(std::move(rec));
    }

    sweep.mismatch_decreasing = true;
    sweep.corrector_decreasing = true;
    for (std::size_t i = 1; i < sweep.records.size(); ++i) {
        const auto& a = sweep.records[i - 1];
        const auto& b = sweep.records[i];
        if (b.mismatch >= a.mismatch) sweep.mismatch_decreasing = false;
        if (b.corrector_distance >= a.corrector_distance) sweep.corrector_decreasing = false;
        if (a.mismatch > 0 && b.mismatch > 0)
            sweep.mismatch_orders.push_back(std::log(a.mismatch / b.mismatch) /
                                            std::log(static_cast<double>(b.ell) / a.ell));
    }
    return sweep;
}

/// Unweighted least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() < 2) throw FitError("dilute", "fit needs at least two points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct ScalingRecord {
    int ell = 0;
    double lambda = 0;
    double N_norm = 0; ///< Frobenius norm over all families of N^{hp}
    double P_norm = 0; ///< Frobenius norm over all families of P^{hp}
};

struct ScalingStudy {
    std::vector<ScalingRecord> records;
    double lambda_exponent_P = 0; ///< expected 2, exact quadratic prefactor
    double ellN_exponent_P = 0;   ///< expected 1
    double N_over_lambda_spread = 0; ///< worst max/min of |N|/lambda over the lambda grid
    std::vector<Mat> P_normalized;   ///< (lambda^2 ell^N)^{-1} P^{h,p=0} per ell
    Mat P_inf;                       ///< Richardson extrapolation, order N/2
    bool cauchy = false;             ///< successive normalized differences decrease
};

/// Scaling of the dilute electrostriction couplings across lambda and ell.
/// The dependence on lambda is an explicit prefactor of the unit-cell
/// integrals, which the fits verify.
inline ScalingStudy scaling_study(const DiluteStudy& study) {
    study.validate();
    if (study.ell.size() < 3 || study.lambda.size() < 3)
        throw FitError("dilute", "scaling study needs at least 3 values of ell and lambda");
    const int N = study.dim;
    ScalingStudy out;

    std::vector<double> base_N(study.ell.size()), base_P(study.ell.size());
    for (std::size_t ei = 0; ei < study.ell.size(); ++ei) {
        const int ell = study.ell[ei];
        DiluteCell cell = make_dilute_cell(study, ell);

        std::vector<Field> grad_w;
        for (int j = 0; j < N; ++j)
            grad_w.push_back(
                solve_dielectric_corrector(cell.coefficients.eps, j, study.solver).grad_w);
        std::vector<Field> theta;
        for (const auto& fam : cell.families)
            theta.push_back(solve_charge_corrector(cell.coefficients.eps, fam, study.solver).theta);
        std::vector<Field> grad_W;
        const auto& pairs = mandel_pairs(N);
        for (int a = 0; a < sym_dim(N); ++a)
            grad_W.push_back(solve_elastic_corrector(cell.coefficients.L, pairs[a].first,
                                                     pairs[a].second, study.solver)
                                 .grad_W);
        auto ec = electro_coupling(cell.coefficients.M, grad_w, theta, grad_W);

        double n2 = 0, p2 = 0;
        for (int fam = 0; fam < N; ++fam) {
            n2 += std::pow(ec.N_h[fam].frobenius_norm(), 2);
            p2 += std::pow(ec.P_h[fam].frobenius_norm(), 2);
        }
        // unit-cell integrals carry ell^{N+1} (for N^h) and ell^{2N+2}
        // (for P^h) under the rescaling to the physical cell
        base_N[ei] = std::sqrt(n2) * std::pow(ell, N + 1);
        base_P[ei] = std::sqrt(p2) * std::pow(ell, 2 * N + 2);

        Mat Pn = ec.P_h[0];
        Pn *= std::pow(ell, N + 2); // (lambda^2 ell^N)^{-1} * lambda^2 ell^{2N+2}
        out.P_normalized.push_back(Pn);

        for (double lam : study.lambda)
            out.records.push_back(
                {ell, lam, lam * base_N[ei], lam * lam * base_P[ei]});
    }

    // fits on the log-log grids
    {
        std::vector<double> lx, ly;
        const int ell0 = study.ell.front();
        for (const auto& r : out.records)
            if (r.ell == ell0) {
                lx.push_back(std::log(r.lambda));
                ly.push_back(std::log(r.P_norm));
            }
        out.lambda_exponent_P = fit_slope(lx, ly);
    }
    {
        std::vector<double> ex, ey;
        const double lam0 = study.lambda.front();
        for (const auto& r : out.records)
            if (r.lambda == lam0) {
                ex.push_back(N * std::log(static_cast<double>(r.ell)));
                ey.push_back(std::log(r.P_norm));
            }
        out.ellN_exponent_P = fit_slope(ex, ey);
    }

    out.N_over_lambda_spread = 0.0;
    for (int ell : study.ell) {
        double lo = std::numeric_limits<double>::max(), hi = 0.0;
        for (const auto& r : out.records)
            if (r.ell == ell) {
                lo = std::min(lo, r.N_norm / r.lambda);
                hi = std::max(hi, r.N_norm / r.lambda);
            }
        out.N_over_lambda_spread = std::max(out.N_over_lambda_spread, hi / lo);
    }

    // Richardson extrapolation of the normalized sequence at order N/2
    const std::size_t k = out.P_normalized.size();
    const double r = static_cast<double>(study.ell[k - 1]) / study.ell[k - 2];
    const double factor = 1.0 / (std::pow(r, 0.5 * N) - 1.0);
    out.P_inf = out.P_normalized[k - 1];
    Mat corr = out.P_normalized[k - 1] - out.P_normalized[k - 2];
    out.P_inf += corr * factor;

    if (k >= 3) {
        const double d1 = (out.P_normalized[1] - out.P_normalized[0]).frobenius_norm();
        const double d2 = (out.P_normalized[2] - out.P_normalized[1]).frobenius_norm();
        out.cauchy = d2 < d1;
    }
    return out;
}

} // namespace ehom

#endif
