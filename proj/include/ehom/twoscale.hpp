#ifndef EHOM_TWOSCALE_HPP
#define EHOM_TWOSCALE_HPP

#include <functional>
#include <vector>

#include "ehom/boxgrid.hpp"
#include "ehom/cell_solver.hpp"
#include "ehom/effective.hpp"
#include "ehom/macro.hpp"
#include "ehom/microstructure.hpp"

namespace ehom {

/// Configuration of one oscillating fine-scale solve: the unit box tiled
/// by 1/delta copies of the cell grid, so corrector reconstruction is
/// exact sampling.
struct FineScaleRun {
    int dim = 2;
    int inv_delta = 4;        ///< 1/delta, integer cell count per axis
    int cell_resolution = 64; ///< m, fine voxels per cell per axis
    bool boundary_layer = true; ///< matrix-phase frame outside Omega_delta
    int max_nodes_2d = 2048;  ///< memory budget caps, nodes per axis
    int max_nodes_3d = 256;
    double tol = 1e-10;
    int max_iter = 20000;

    int fine_cells() const { return inv_delta * cell_resolution; }

    void validate(const TorusGrid& cell_grid) const {
        if (cell_grid.dim() != dim)
            throw GridMismatchError("twoscale", "cell grid dimension mismatch");
        if (cell_grid.n() != cell_resolution)
            throw GridMismatchError("twoscale",
                                    "cell grid resolution does not match the per-cell fine grid");
        if (inv_delta < 2 || (inv_delta & (inv_delta - 1)) != 0)
            throw GridMismatchError("twoscale", "1/delta must be a power of two >= 2");
        const int cap = dim == 2 ? max_nodes_2d : max_nodes_3d;
        if (fine_cells() + 1 > cap)
            throw MemoryBudgetError("twoscale",
                                    "fine grid exceeds the configured memory budget of " +
                                        std::to_string(cap) + " nodes per axis");
    }
};

/// Map a fine element to its cell voxel (periodic tiling).
inline std::size_t cell_voxel_of(const TorusGrid& cell, const std::array<int, 3>& eidx, int m) {
    std::array<int, 3> c{};
    for (int d = 0; d < cell.dim(); ++d) c[d] = eidx[d] % m;
    return cell.pack(c);
}

/// Distinct-value phase table of a coefficient field plus per-voxel ids.
/// The fine solver caches one element matrix per phase, so the field must
/// be phase-wise constant (as every assembled coefficient set is).
template <class T, class Extract>
std::pair<std::vector<T>, std::vector<std::int32_t>> phase_table(const Field& f,
                                                                 const Extract& get) {
    std::vector<T> phases;
    std::vector<std::int32_t> ids(f.points());
    std::vector<std::size_t> reps;
    const int nc = f.components();
    for (std::size_t p = 0; p < f.points(); ++p) {
        std::int32_t id = -1;
        for (std::size_t r = 0; r < reps.size(); ++r) {
            bool same = true;
            for (int c = 0; c < nc; ++c)
                if (f.at(c, p) != f.at(c, reps[r])) {
                    same = false;
                    break;
                }
            if (same) {
                id = static_cast<std::int32_t>(r);
                break;
            }
        }
        if (id < 0) {
            if (reps.size() >= 256)
                throw GridMismatchError(
                    "twoscale", "coefficient field has too many distinct values for the "
                                "fine solver; phase-wise constant coefficients are required");
            reps.push_back(p);
            phases.push_back(get(p));
            id = static_cast<std::int32_t>(phases.size() - 1);
        }
        ids[p] = id;
    }
    return {phases, ids};
}

/// Elements of the frame Omega minus Omega_delta (the union of fully
/// contained 2-delta cubes); empty for an exactly tiled box.
inline std::vector<char> frame_elements(const BoxGrid& fine, int inv_delta, int m) {
    std::vector<char> frame(fine.elem_count(), 1);
    const int dim = fine.dim();
    // mark elements covered by delta (z + 2Y) inside the unit box
    std::array<int, 3> z{};
    auto recurse = [&](auto&& self, int d) -> void {
        if (d == dim) {
            std::array<int, 3> lo{}, hi{};
            for (int k = 0; k < dim; ++k) {
                lo[k] = z[k] * m;
                hi[k] = (z[k] + 2) * m;
            }
            std::array<int, 3> e = lo;
            while (true) {
                frame[fine.pack_elem(e)] = 0;
                int k = dim - 1;
                while (k >= 0) {
                    if (++e[k] < hi[k]) break;
                    e[k] = lo[k];
                    --k;
                }
                if (k < 0) break;
            }
            return;
        }
        for (z[d] = 0; z[d] + 2 <= inv_delta; ++z[d]) self(self, d + 1);
    };
    recurse(recurse, 0);
    return frame;
}

struct FineDielectricSolution {
    BoxGrid grid;
    std::vector<double> phi; ///< nodal values
    BoxSolveCertificate certificate;
};

/// Fine-scale dielectric solve div(eps(x/delta) grad phi) =
/// (1/delta) g(x/delta) f(x) + h(x/delta) v(x), phi = boundary on the box
/// boundary. The lower-order source (extra_h, extra_v) is optional; its
/// homogenized counterpart adds avg(h) v to the limit equation.
inline FineDielectricSolution solve_fine_dielectric(const FineScaleRun& run, const Field& eps,
                                                    const Field& charge, const ScalarFn& f,
                                                    const ScalarFn& boundary,
                                                    const Mat& matrix_phase_eps,
                                                    const Field* extra_h = nullptr,
                                                    const ScalarFn& extra_v = {}) {
    run.validate(eps.grid());
    if (std::abs(mean_scalar(charge)) > 1e-10 * std::max(1.0, l2_norm(charge)))
        throw NonNeutralChargeError("twoscale", "fine-scale charge is not neutral");
    const int m = run.cell_resolution;
    const TorusGrid& cell = eps.grid();
    BoxGrid fine = BoxGrid::cube(run.dim, run.fine_cells());

    auto [phases, voxel_ids] = phase_table<Mat>(eps, [&](std::size_t p) { return eps.matrix_at(p); });
    const std::int32_t frame_phase = static_cast<std::int32_t>(phases.size());
    std::vector<char> frame;
    if (run.boundary_layer) {
        frame = frame_elements(fine, run.inv_delta, m);
        phases.push_back(matrix_phase_eps);
    }
    std::vector<std::int32_t> elem_phase(fine.elem_count());
    for (std::size_t e = 0; e < fine.elem_count(); ++e) {
        auto eidx = fine.unpack_elem(e);
        elem_phase[e] = (run.boundary_layer && frame[e]) ? frame_phase
                                                         : voxel_ids[cell_voxel_of(cell, eidx, m)];
    }

    FemOperator A(fine, phases, std::move(elem_phase));
    Mat ref(run.dim);
    for (const Mat& ph : phases) ref += ph;
    ref *= 1.0 / static_cast<double>(phases.size());
    DstPreconditioner P(fine, axis_weights(ref));

    const std::size_t nn = fine.node_count();
    std::vector<double> load(nn, 0.0);
    const double lump = fine.elem_volume() / fine.corners();
    const double inv_delta = static_cast<double>(run.inv_delta);
    for (std::size_t e = 0; e < fine.elem_count(); ++e) {
        auto eidx = fine.unpack_elem(e);
        const Vec x = fine.elem_center(eidx);
        const std::size_t voxel = cell_voxel_of(cell, eidx, m);
        double s = inv_delta * charge.at(0, voxel) * (f ? f(x) : 0.0);
        if (extra_h && extra_v) s += extra_h->at(0, voxel) * extra_v(x);
        if (s == 0.0) continue;
        const double v = -s * lump;
        for (int c = 0; c < fine.corners(); ++c) load[fine.corner_node(eidx, c)] += v;
    }

    FineDielectricSolution sol;
    sol.grid = fine;
    sol.phi.assign(nn, 0.0);
    for (std::size_t p = 0; p < nn; ++p) {
        auto idx = fine.unpack_node(p);
        if (fine.is_boundary(idx))
            sol.phi[p] = boundary ? boundary(fine.node_point(idx)) : 0.0;
    }
    sol.certificate = box_pcg(A, P, load, sol.phi, run.tol, run.max_iter);
    return sol;
}

/// Bilinear/trilinear interpolation of a nodal function.
inline double interp_nodal(const BoxGrid& grid, const std::vector<double>& f, const Vec& x,
                           std::size_t comp_offset = 0) {
    const int dim = grid.dim();
    const double h = grid.spacing();
    std::array<int, 3> e{};
    std::array<double, 3> t{};
    for (int d = 0; d < dim; ++d) {
        double s = x[d] / h;
        int i = static_cast<int>(std::floor(s));
        i = std::max(0, std::min(grid.cells(d) - 1, i));
        e[d] = i;
        t[d] = s - i;
    }
    double v = 0;
    for (int c = 0; c < grid.corners(); ++c) {
        double w = 1.0;
        for (int d = 0; d < dim; ++d) w *= (c & (1 << d)) ? t[d] : 1.0 - t[d];
        v += w * f[comp_offset + grid.corner_node(e, c)];
    }
    return v;
}

struct CorrectorErrors {
    double naive = 0;            ///< |grad phi_delta - grad phi|_L2
    double potential = 0;        ///< |phi_delta - phi|_L2
    double global_l2 = 0;        ///< full corrector expansion, L2(Omega)
    double local_l2 = 0;         ///< same, over the concentric half box
    double no_theta_l2 = 0;      ///< expansion without the charge-corrector term
    std::vector<double> lq;      ///< |e|_Lq for the requested exponents
    std::vector<double> grad_lq; ///< |grad phi_delta|_Lq for q in {2,4,8}
};

/// Quadrature of the corrector-expansion error on the fine grid. The
/// homogenized solution is interpolated from its macro grid; corrector
/// values are exact samples of the tiled cell grid.
inline CorrectorErrors corrector_error(const FineDielectricSolution& fine_sol,
                                       const MacroScalarSolution& macro_sol,
                                       const std::vector<Field>& grad_w, const Field& grad_theta,
                                       const ScalarFn& f, const std::vector<double>& q_list) {
    const BoxGrid& fine = fine_sol.grid;
    const int dim = fine.dim();
    const TorusGrid& cell = grad_w[0].grid();
    const int m = cell.n();
    if (fine.cells(0) % m != 0)
        throw GridMismatchError("twoscale", "fine grid is not a multiple of the cell grid");

    const BoxGrid& mg = macro_sol.grid;
    const std::size_t mnn = mg.node_count();
    std::vector<double> macro_grad = nodal_gradient(mg, macro_sol.phi);

    CorrectorErrors out;
    out.lq.assign(q_list.size(), 0.0);
    out.grad_lq.assign(3, 0.0);
    double naive2 = 0, glob2 = 0, loc2 = 0, nth2 = 0, pot2 = 0;
    double loc_vol = 0;
    const double vol = fine.elem_volume();

    for (std::size_t e = 0; e < fine.elem_count(); ++e) {
        auto eidx = fine.unpack_elem(e);
        const Vec x = fine.elem_center(eidx);
        const std::size_t voxel = cell_voxel_of(cell, eidx, m);
        Vec gd = elem_center_gradient(fine, fine_sol.phi, eidx);
        {
            const double pd = elem_center_value(fine, fine_sol.phi, eidx) -
                              interp_nodal(mg, macro_sol.phi, x);
            pot2 += pd * pd * vol;
        }

        Vec gmacro(dim);
        for (int d = 0; d < dim; ++d)
            gmacro[d] = interp_nodal(mg, macro_grad, x, static_cast<std::size_t>(d) * mnn);
        const double fx = f ? f(x) : 0.0;

        double n2 = 0, g2 = 0, t2 = 0, mag2 = 0;
        for (int d = 0; d < dim; ++d) {
            double recon = 0;
            for (int j = 0; j < dim; ++j) recon += grad_w[j].at(d, voxel) * gmacro[j];
            const double with_theta = recon + grad_theta.at(d, voxel) * fx;
            const double ed = gd[d] - with_theta;
            const double nd = gd[d] - gmacro[d];
            const double td = gd[d] - recon;
            n2 += nd * nd;
            g2 += ed * ed;
            t2 += td * td;
            mag2 += gd[d] * gd[d];
        }
        naive2 += n2 * vol;
        glob2 += g2 * vol;
        nth2 += t2 * vol;
        bool local = true;
        for (int d = 0; d < dim; ++d)
            if (x[d] < 0.25 || x[d] > 0.75) local = false;
        if (local) {
            loc2 += g2 * vol;
            loc_vol += vol;
        }
        for (std::size_t qi = 0; qi < q_list.size(); ++qi)
            out.lq[qi] += std::pow(g2, 0.5 * q_list[qi]) * vol;
        const double qs[3] = {2.0, 4.0, 8.0};
        for (int qi = 0; qi < 3; ++qi) out.grad_lq[qi] += std::pow(mag2, 0.5 * qs[qi]) * vol;
    }
    out.naive = std::sqrt(naive2);
    out.potential = std::sqrt(pot2);
    out.global_l2 = std::sqrt(glob2);
    out.local_l2 = std::sqrt(loc2);
    out.no_theta_l2 = std::sqrt(nth2);
    for (std::size_t qi = 0; qi < q_list.size(); ++qi)
        out.lq[qi] = std::pow(out.lq[qi], 1.0 / q_list[qi]);
    for (int qi = 0; qi < 3; ++qi)
        out.grad_lq[qi] = std::pow(out.grad_lq[qi], 1.0 / (qi == 0 ? 2.0 : qi == 1 ? 4.0 : 8.0));
    return out;
}

struct FineElasticSolution {
    BoxGrid grid;
    std::vector<double> u; ///< dim * nodes, component-major
    BoxSolveCertificate certificate;
    double distance_to_homogenized = 0; ///< |u_delta - u|_L2(Omega)
};

/// Fine-scale elasticity with electrostrictive forcing:
/// div(L(x/delta) grad u + M(x/delta)(grad phi_delta x grad phi_delta)) = 0.
inline FineElasticSolution solve_fine_elastic(const FineScaleRun& run, const Field& L,
                                              const Field& M,
                                              const FineDielectricSolution& fine_phi,
                                              const MacroElasticSolution& macro_u) {
    run.validate(L.grid());
    const int dim = run.dim;
    const int m = run.cell_resolution;
    const TorusGrid& cell = L.grid();
    const BoxGrid& fine = fine_phi.grid;
    if (static_cast<int>(fine.cells(0)) != run.fine_cells())
        throw GridMismatchError("twoscale", "fine potential grid mismatch");

    auto [phases, voxel_ids] =
        phase_table<Rank4>(L, [&](std::size_t p) { return L.mandel_at(p); });
    std::vector<std::int32_t> elem_phase(fine.elem_count());
    for (std::size_t e = 0; e < fine.elem_count(); ++e)
        elem_phase[e] = voxel_ids[cell_voxel_of(cell, fine.unpack_elem(e), m)];

    FemOperator A(fine, phases, std::move(elem_phase));
    Rank4 ref(dim);
    for (const Rank4& ph : phases) ref += ph;
    ref *= 1.0 / static_cast<double>(phases.size());
    std::vector<double> w(static_cast<std::size_t>(dim) * dim);
    for (int c = 0; c < dim; ++c)
        for (int dd = 0; dd < dim; ++dd) w[c * dim + dd] = ref.full(c, dd, c, dd);
    DstPreconditioner P(fine, w);

    const std::size_t nn = fine.node_count();
    std::vector<double> load(static_cast<std::size_t>(dim) * nn, 0.0);
    const Q1Tables tables(dim, fine.spacing());
    for (std::size_t e = 0; e < fine.elem_count(); ++e) {
        auto eidx = fine.unpack_elem(e);
        const std::size_t voxel = cell_voxel_of(cell, eidx, m);
        Vec gd = elem_center_gradient(fine, fine_phi.phi, eidx);
        SymMat z = M.mandel_at(voxel).apply(SymMat::sym_outer(gd, gd));
        Mat zf = z.to_full();
        for (int a = 0; a < fine.corners(); ++a) {
            const std::size_t node = fine.corner_node(eidx, a);
            for (int i = 0; i < dim; ++i) {
                double v = 0;
                for (int j = 0; j < dim; ++j) v -= zf(i, j) * tables.D[j][a];
                load[static_cast<std::size_t>(i) * nn + node] += v;
            }
        }
    }
    zero_boundary(fine, dim, load);

    FineElasticSolution sol;
    sol.grid = fine;
    sol.u.assign(static_cast<std::size_t>(dim) * nn, 0.0);
    sol.certificate = box_pcg(A, P, load, sol.u, run.tol, run.max_iter);

    // L2 distance to the homogenized displacement
    const BoxGrid& mg = macro_u.grid;
    const std::size_t mnn = mg.node_count();
    double acc = 0;
    for (std::size_t e = 0; e < fine.elem_count(); ++e) {
        auto eidx = fine.unpack_elem(e);
        const Vec x = fine.elem_center(eidx);
        for (int i = 0; i < dim; ++i) {
            const double ud =
                elem_center_value(fine, sol.u, eidx, static_cast<std::size_t>(i) * nn);
            const double uh = interp_nodal(mg, macro_u.u, x, static_cast<std::size_t>(i) * mnn);
            const double d = ud - uh;
            acc += d * d;
        }
    }
    sol.distance_to_homogenized = std::sqrt(acc * fine.elem_volume());
    return sol;
}

/// Whole verification pipeline: cell solves, homogenized references, and
/// the delta sweep of fine solves with corrector-error quadrature.
struct TwoScaleStudyConfig {
    std::vector<int> inv_deltas = {4, 8, 16};
    int cell_resolution = 64;
    std::vector<double> q_list = {2.0, 4.0};
    ScalarFn modulation;          ///< f
    VectorFn modulation_gradient; ///< analytic grad f (optional)
    ScalarFn boundary;            ///< Dirichlet data
    const Field* extra_h = nullptr; ///< lower-order source h(x/delta) v(x)
    ScalarFn extra_v;
    bool with_elasticity = true;
    bool boundary_layer = true;
    int macro_cells = 128;
    SolverOptions cell_solver;
    double fine_tol = 1e-9;
    int max_nodes_2d = 2048;
    int max_nodes_3d = 256;
};

struct TwoScaleRecord {
    int inv_delta = 0;
    CorrectorErrors errors;
    double elastic_distance = 0;
    double fine_residual = 0;
    int fine_iterations = 0;
};

struct TwoScaleStudy {
    Mat eps_h;
    Eigen::MatrixXd a;
    std::vector<TwoScaleRecord> records;
    bool corrector_decreasing = false; ///< global L2 error strictly decreasing
    bool corrector_below_naive = false;
    bool no_theta_stagnates = false;   ///< dropping the theta term stops the decrease
    bool elastic_decreasing = false;
};

inline TwoScaleStudy run_twoscale_study(const CoefficientSet& coeffs, const Mat& matrix_eps,
                                        const ChargeFamily& family,
                                        const TwoScaleStudyConfig& cfg) {
    const TorusGrid& cell = coeffs.eps.grid();
    const int dim = cell.dim();
    TwoScaleStudy out;

    // cell problems
    std::vector<Field> chi, grad_w;
    for (int j = 0; j < dim; ++j) {
        auto sol = solve_dielectric_corrector(coeffs.eps, j, cfg.cell_solver);
        chi.push_back(std::move(sol.chi));
        grad_w.push_back(std::move(sol.grad_w));
    }
    PoissonSolution psi = solve_periodic_poisson(family.g);
    Field theta(cell, Rank::scalar);
    const bool charged = l2_norm(family.g) > 0;
    if (charged)
        theta = solve_charge_corrector(coeffs.eps, family.g, psi.tau, cfg.cell_solver).theta;
    Field grad_theta = spectral_gradient(theta);

    // homogenized tensors and macro references
    out.eps_h = effective_permittivity(coeffs.eps, grad_w).eps_h;
    out.a.resize(dim, 1);
    for (int j = 0; j < dim; ++j) out.a(j, 0) = charged ? -l2_inner(family.g, chi[j]) : 0.0;

    MacroScalarProblem mprob;
    mprob.grid = BoxGrid::cube(dim, cfg.macro_cells);
    mprob.eps = out.eps_h;
    mprob.a = out.a;
    if (cfg.modulation) {
        mprob.modulations = {cfg.modulation};
        if (cfg.modulation_gradient) mprob.modulation_gradients = {cfg.modulation_gradient};
    }
    mprob.boundary = cfg.boundary;
    if (cfg.extra_h && cfg.extra_v) {
        // homogenized counterpart of the lower-order source: avg(h) v
        const double mean_h = mean_scalar(*cfg.extra_h);
        ScalarFn v = cfg.extra_v;
        mprob.extra_source = [mean_h, v](const Vec& x) { return mean_h * v(x); };
    }
    MacroScalarSolution macro_phi = solve_scalar_bvp(mprob);

    MacroElasticSolution macro_u;
    if (cfg.with_elasticity) {
        std::vector<Field> grad_W;
        const auto& pairs = mandel_pairs(dim);
        for (int a = 0; a < sym_dim(dim); ++a)
            grad_W.push_back(
                solve_elastic_corrector(coeffs.L, pairs[a].first, pairs[a].second, cfg.cell_solver)
                    .grad_W);
        auto eff_L = effective_elasticity(coeffs.L, grad_W);
        std::vector<Field> thetas;
        if (charged) thetas.push_back(theta);
        auto ec = electro_coupling(coeffs.M, grad_w, charged ? thetas : std::vector<Field>{},
                                   grad_W);
        MacroZField Z = assemble_Z(ec.M_h, ec.N_h, ec.P_h, macro_phi,
                                   {cfg.modulation ? cfg.modulation : ScalarFn{}});
        MacroElasticProblem eprob;
        eprob.grid = mprob.grid;
        eprob.L = eff_L.L_h;
        eprob.Z = &Z;
        macro_u = solve_elastic_bvp(eprob);
    }

    for (int idel : cfg.inv_deltas) {
        FineScaleRun run;
        run.dim = dim;
        run.inv_delta = idel;
        run.cell_resolution = cfg.cell_resolution;
        run.boundary_layer = cfg.boundary_layer;
        run.tol = cfg.fine_tol;
        run.max_nodes_2d = cfg.max_nodes_2d;
        run.max_nodes_3d = cfg.max_nodes_3d;

        TwoScaleRecord rec;
        rec.inv_delta = idel;
        auto fine = solve_fine_dielectric(run, coeffs.eps, family.g, cfg.modulation,
                                          cfg.boundary, matrix_eps, cfg.extra_h, cfg.extra_v);
        rec.fine_residual = fine.certificate.rel_residual;
        rec.fine_iterations = fine.certificate.iterations;
        rec.errors = corrector_error(fine, macro_phi, grad_w, grad_theta, cfg.modulation,
                                     cfg.q_list);
        if (cfg.with_elasticity)
            rec.elastic_distance =
                solve_fine_elastic(run, coeffs.L, coeffs.M, fine, macro_u)
                    .distance_to_homogenized;
        out.records.push_back(std::move(rec));
    }

    out.corrector_decreasing = out.records.size() >= 2;
    out.corrector_below_naive = true;
    out.no_theta_stagnates = charged;
    out.elastic_decreasing = cfg.with_elasticity && out.records.size() >= 2;
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        const auto& r = out.records[i];
        if (r.errors.global_l2 >= r.errors.naive) out.corrector_below_naive = false;
        if (i == 0) continue;
        const auto& prev = out.records[i - 1];
        if (r.errors.global_l2 >= prev.errors.global_l2) out.corrector_decreasing = false;
        if (charged && r.errors.no_theta_l2 < prev.errors.no_theta_l2 * 0.98)
            out.no_theta_stagnates = false;
        if (cfg.with_elasticity && r.elastic_distance >= prev.elastic_distance)
            out.elastic_decreasing = false;
    }
    return out;
}

} // namespace ehom

#endif
