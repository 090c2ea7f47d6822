#ifndef EHOM_BOXGRID_HPP
#define EHOM_BOXGRID_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include <fftw3.h>

#include "ehom/errors.hpp"
#include "ehom/fft.hpp"
#include "ehom/tensor.hpp"

namespace ehom {

/// Uniform node grid on an axis-aligned box with equal spacing h per
/// axis. Nodes are the lattice points (cells+1 per axis); elements are
/// the cells in between.
class BoxGrid {
public:
    BoxGrid() = default;
    BoxGrid(int dim, std::array<int, 3> cells, double h, Vec origin = {})
        : dim_(dim), cells_(cells), h_(h), origin_(origin) {
        if (dim != 2 && dim != 3) throw std::invalid_argument("BoxGrid: dim must be 2 or 3");
        nodes_ = 1;
        elems_ = 1;
        for (int d = 0; d < dim; ++d) {
            if (cells_[d] < 2) throw std::invalid_argument("BoxGrid: needs at least 2 cells");
            nodes_ *= static_cast<std::size_t>(cells_[d] + 1);
            elems_ *= static_cast<std::size_t>(cells_[d]);
        }
        if (origin_.n == 0) origin_ = Vec(dim);
    }
    static BoxGrid cube(int dim, int cells_per_axis, double side = 1.0) {
        return BoxGrid(dim, {cells_per_axis, cells_per_axis, cells_per_axis},
                       side / cells_per_axis);
    }

    int dim() const { return dim_; }
    int cells(int d) const { return cells_[d]; }
    int nodes_per_axis(int d) const { return cells_[d] + 1; }
    double spacing() const { return h_; }
    std::size_t node_count() const { return nodes_; }
    std::size_t elem_count() const { return elems_; }

    std::array<int, 3> unpack_node(std::size_t p) const {
        std::array<int, 3> idx{};
        for (int d = dim_ - 1; d >= 0; --d) {
            idx[d] = static_cast<int>(p % (cells_[d] + 1));
            p /= (cells_[d] + 1);
        }
        return idx;
    }
    std::size_t pack_node(const std::array<int, 3>& idx) const {
        std::size_t p = 0;
        for (int d = 0; d < dim_; ++d)
            p = p * (cells_[d] + 1) + static_cast<std::size_t>(idx[d]);
        return p;
    }
    std::array<int, 3> unpack_elem(std::size_t e) const {
        std::array<int, 3> idx{};
        for (int d = dim_ - 1; d >= 0; --d) {
            idx[d] = static_cast<int>(e % cells_[d]);
            e /= cells_[d];
        }
        return idx;
    }
    std::size_t pack_elem(const std::array<int, 3>& idx) const {
        std::size_t e = 0;
        for (int d = 0; d < dim_; ++d) e = e * cells_[d] + static_cast<std::size_t>(idx[d]);
        return e;
    }

    bool is_boundary(const std::array<int, 3>& idx) const {
        for (int d = 0; d < dim_; ++d)
            if (idx[d] == 0 || idx[d] == cells_[d]) return true;
        return false;
    }
    Vec node_point(const std::array<int, 3>& idx) const {
        Vec x(dim_);
        for (int d = 0; d < dim_; ++d) x[d] = origin_[d] + idx[d] * h_;
        return x;
    }
    Vec elem_center(const std::array<int, 3>& idx) const {
        Vec x(dim_);
        for (int d = 0; d < dim_; ++d) x[d] = origin_[d] + (idx[d] + 0.5) * h_;
        return x;
    }
    double elem_volume() const {
        double v = 1.0;
        for (int d = 0; d < dim_; ++d) v *= h_;
        return v;
    }
    int corners() const { return 1 << dim_; }
    /// Node index of corner c of element e (c bit d set = +1 along axis d).
    std::size_t corner_node(const std::array<int, 3>& eidx, int c) const {
        std::array<int, 3> idx = eidx;
        for (int d = 0; d < dim_; ++d)
            if (c & (1 << d)) ++idx[d];
        return pack_node(idx);
    }

    bool operator==(const BoxGrid& o) const {
        return dim_ == o.dim_ && cells_ == o.cells_ && h_ == o.h_;
    }

private:
    int dim_ = 2;
    std::array<int, 3> cells_{};
    double h_ = 0;
    Vec origin_;
    std::size_t nodes_ = 0, elems_ = 0;
};

/// Gauss-quadrature integrals of Q1 shape-function gradient products on
/// one element: G[j][h](a,b) = int d_j phi_a d_h phi_b, and the gradient
/// averages D[j](a) = int d_j phi_a, plus int phi_a = V / corners.
struct Q1Tables {
    int dim;
    double h;
    // indexed [j*dim+h][a*corners+b]
    std::vector<std::vector<double>> G;
    // indexed [j][a]
    std::vector<std::vector<double>> D;
    // mass-gradient: B[j][a*corners+b] = int phi_b d_j phi_a
    std::vector<std::vector<double>> B;

    Q1Tables(int dim_, double h_) : dim(dim_), h(h_) {
        const int nc = 1 << dim;
        const double half = 0.5 * h;
        // 2-point Gauss per axis on [0,h]
        const double gp[2] = {half * (1.0 - 1.0 / std::sqrt(3.0)),
                              half * (1.0 + 1.0 / std::sqrt(3.0))};
        auto shape = [&](int a, const std::array<double, 3>& x) {
            double v = 1.0;
            for (int d = 0; d < dim; ++d) {
                const double t = x[d] / h;
                v *= (a & (1 << d)) ? t : 1.0 - t;
            }
            return v;
        };
        auto shape_grad = [&](int a, const std::array<double, 3>& x, int j) {
            double v = 1.0;
            for (int d = 0; d < dim; ++d) {
                const double t = x[d] / h;
                const bool up = a & (1 << d);
                if (d == j)
                    v *= (up ? 1.0 : -1.0) / h;
                else
                    v *= up ? t : 1.0 - t;
            }
            return v;
        };
        const double w = std::pow(half, dim); // per-point weight of 2^dim Gauss
        G.assign(dim * dim, std::vector<double>(nc * nc, 0.0));
        D.assign(dim, std::vector<double>(nc, 0.0));
        B.assign(dim, std::vector<double>(nc * nc, 0.0));
        const int npts = 1 << dim;
        for (int q = 0; q < npts; ++q) {
            std::array<double, 3> x{};
            for (int d = 0; d < dim; ++d) x[d] = gp[(q >> d) & 1];
            for (int j = 0; j < dim; ++j) {
                for (int a = 0; a < nc; ++a) {
                    const double ga = shape_grad(a, x, j);
                    D[j][a] += w * ga;
                    for (int b = 0; b < nc; ++b) {
                        B[j][a * nc + b] += w * ga * shape(b, x);
                        for (int h2 = 0; h2 < dim; ++h2)
                            G[j * dim + h2][a * nc + b] += w * ga * shape_grad(b, x, h2);
                    }
                }
            }
        }
    }
};

/// Fast Dirichlet-Laplacian solver on the interior nodes via DST-I; used
/// as the CG preconditioner. One instance per (grid, weights, comps).
class DstPreconditioner {
public:
    DstPreconditioner(const BoxGrid& grid, std::vector<double> axis_weights_per_comp)
        : grid_(grid), weights_(std::move(axis_weights_per_comp)) {
        const int dim = grid.dim();
        comps_ = static_cast<int>(weights_.size()) / dim;
        m_ = 1;
        for (int d = 0; d < dim; ++d) {
            md_[d] = grid.cells(d) - 1;
            m_ *= static_cast<std::size_t>(md_[d]);
        }
        buf_ = fftw_alloc_real(m_);
        {
            std::lock_guard<std::mutex> lock(fftw_planner_mutex());
            if (dim == 2)
                plan_ = fftw_plan_r2r_2d(md_[0], md_[1], buf_, buf_, FFTW_RODFT00, FFTW_RODFT00,
                                         FFTW_ESTIMATE);
            else
                plan_ = fftw_plan_r2r_3d(md_[0], md_[1], md_[2], buf_, buf_, FFTW_RODFT00,
                                         FFTW_RODFT00, FFTW_RODFT00, FFTW_ESTIMATE);
        }
        // eigenvalues of the (negative) weighted FD Laplacian per component
        const double h2 = grid.spacing() * grid.spacing();
        lam_.assign(comps_ * m_, 0.0);
        double norm = 1.0;
        for (int d = 0; d < dim; ++d) norm *= 2.0 * (md_[d] + 1);
        for (int c = 0; c < comps_; ++c) {
            std::size_t i = 0;
            std::array<int, 3> k{};
            for (k[0] = 1; k[0] <= md_[0]; ++k[0]) {
                for (k[1] = 1; k[1] <= md_[1]; ++k[1]) {
                    if (dim == 2) {
                        double lam = 0;
                        for (int d = 0; d < 2; ++d)
                            lam += weights_[c * dim + d] *
                                   (2.0 - 2.0 * std::cos(std::numbers::pi * k[d] / (md_[d] + 1))) /
                                   h2;
                        lam_[c * m_ + i++] = lam * norm;
                    } else {
                        for (k[2] = 1; k[2] <= md_[2]; ++k[2]) {
                            double lam = 0;
                            for (int d = 0; d < 3; ++d)
                                lam += weights_[c * dim + d] *
                                       (2.0 -
                                        2.0 * std::cos(std::numbers::pi * k[d] / (md_[d] + 1))) /
                                       h2;
                            lam_[c * m_ + i++] = lam * norm;
                        }
                    }
                }
            }
        }
    }
    ~DstPreconditioner() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(buf_);
    }
    DstPreconditioner(const DstPreconditioner&) = delete;

    /// z = P^{-1} r on the full node vector (boundary entries ignored and
    /// returned as zero); r and z are component-major.
    void apply(const std::vector<double>& r, std::vector<double>& z) const {
        const int dim = grid_.dim();
        const std::size_t nn = grid_.node_count();
        z.assign(comps_ * nn, 0.0);
        for (int c = 0; c < comps_; ++c) {
            // gather interior
            std::size_t i = 0;
            std::array<int, 3> idx{};
            for (idx[0] = 1; idx[0] <= md_[0]; ++idx[0])
                for (idx[1] = 1; idx[1] <= md_[1]; ++idx[1]) {
                    if (dim == 2)
                        buf_[i++] = r[c * nn + grid_.pack_node(idx)];
                    else
                        for (idx[2] = 1; idx[2] <= md_[2]; ++idx[2])
                            buf_[i++] = r[c * nn + grid_.pack_node(idx)];
                }
            fftw_execute(plan_);
            for (std::size_t q = 0; q < m_; ++q) buf_[q] /= lam_[c * m_ + q];
            fftw_execute(plan_);
            i = 0;
            for (idx[0] = 1; idx[0] <= md_[0]; ++idx[0])
                for (idx[1] = 1; idx[1] <= md_[1]; ++idx[1]) {
                    if (dim == 2)
                        z[c * nn + grid_.pack_node(idx)] = buf_[i++];
                    else
                        for (idx[2] = 1; idx[2] <= md_[2]; ++idx[2])
                            z[c * nn + grid_.pack_node(idx)] = buf_[i++];
                }
        }
    }

private:
    BoxGrid grid_;
    std::vector<double> weights_;
    int comps_ = 1;
    std::array<int, 3> md_{};
    std::size_t m_ = 0;
    std::vector<double> lam_;
    double* buf_;
    fftw_plan plan_;
};

/// Q1 finite-element operator with per-element phase ids and cached
/// per-phase element matrices. comps = 1 for scalar problems, dim for
/// elasticity.
class FemOperator {
public:
    /// Scalar: one Mat per phase.
    FemOperator(const BoxGrid& grid, const std::vector<Mat>& phases,
                std::vector<std::int32_t> elem_phase)
        : grid_(grid), elem_phase_(std::move(elem_phase)), comps_(1), tables_(grid.dim(), grid.spacing()) {
        const int nc = grid.corners();
        for (const Mat& k : phases) {
            std::vector<double> ke(nc * nc, 0.0);
            for (int j = 0; j < grid.dim(); ++j)
                for (int h = 0; h < grid.dim(); ++h) {
                    const auto& Gjh = tables_.G[j * grid.dim() + h];
                    for (int ab = 0; ab < nc * nc; ++ab) ke[ab] += k(j, h) * Gjh[ab];
                }
            ke_.push_back(std::move(ke));
        }
    }
    /// Vector elasticity: one Rank4 per phase.
    FemOperator(const BoxGrid& grid, const std::vector<Rank4>& phases,
                std::vector<std::int32_t> elem_phase)
        : grid_(grid), elem_phase_(std::move(elem_phase)), comps_(grid.dim()),
          tables_(grid.dim(), grid.spacing()) {
        const int dim = grid.dim();
        const int nc = grid.corners();
        for (const Rank4& L : phases) {
            std::vector<double> ke(static_cast<std::size_t>(nc) * nc * dim * dim, 0.0);
            for (int i = 0; i < dim; ++i)
                for (int k = 0; k < dim; ++k)
                    for (int j = 0; j < dim; ++j)
                        for (int h = 0; h < dim; ++h) {
                            const double lv = L.full(i, j, k, h);
                            if (lv == 0.0) continue;
                            const auto& Gjh = tables_.G[j * dim + h];
                            for (int a = 0; a < nc; ++a)
                                for (int b = 0; b < nc; ++b)
                                    ke[((a * static_cast<std::size_t>(dim) + i) * nc + b) * dim +
                                       k] += lv * Gjh[a * nc + b];
                        }
            ke_.push_back(std::move(ke));
        }
    }

    const BoxGrid& grid() const { return grid_; }
    int comps() const { return comps_; }
    const Q1Tables& tables() const { return tables_; }
    const std::vector<std::int32_t>& elem_phase() const { return elem_phase_; }

    /// y = A x on full node vectors (component-major); boundary rows are
    /// zeroed afterwards by the caller when needed.
    void apply(const std::vector<double>& x, std::vector<double>& y) const {
        const std::size_t nn = grid_.node_count();
        const int nc = grid_.corners();
        y.assign(comps_ * nn, 0.0);
        std::array<std::size_t, 8> nodes{};
        std::array<int, 3> eidx{};
        const std::size_t ne = grid_.elem_count();
        if (comps_ == 1) {
            for (std::size_t e = 0; e < ne; ++e) {
                eidx = grid_.unpack_elem(e);
                const auto& ke = ke_[elem_phase_[e]];
                for (int c = 0; c < nc; ++c) nodes[c] = grid_.corner_node(eidx, c);
                for (int a = 0; a < nc; ++a) {
                    double acc = 0;
                    const double* row = ke.data() + a * nc;
                    for (int b = 0; b < nc; ++b) acc += row[b] * x[nodes[b]];
                    y[nodes[a]] += acc;
                }
            }
        } else {
            const int dim = comps_;
            for (std::size_t e = 0; e < ne; ++e) {
                eidx = grid_.unpack_elem(e);
                const auto& ke = ke_[elem_phase_[e]];
                for (int c = 0; c < nc; ++c) nodes[c] = grid_.corner_node(eidx, c);
                for (int a = 0; a < nc; ++a)
                    for (int i = 0; i < dim; ++i) {
                        double acc = 0;
                        const double* row = ke.data() + (a * static_cast<std::size_t>(dim) + i) * nc * dim;
                        for (int b = 0; b < nc; ++b)
                            for (int k = 0; k < dim; ++k)
                                acc += row[b * dim + k] * x[k * nn + nodes[b]];
                        y[i * nn + nodes[a]] += acc;
                    }
            }
        }
    }

private:
    BoxGrid grid_;
    std::vector<std::int32_t> elem_phase_;
    int comps_;
    Q1Tables tables_;
    std::vector<std::vector<double>> ke_; ///< per phase
};

/// Second-order finite-difference operator -div(K grad .) with a constant
/// coefficient: central second differences on the diagonal and 4-point
/// cross stencils for the mixed terms. Scalar (comps = 1, Mat) or
/// elasticity (comps = dim, Rank4).
class FdOperator {
public:
    FdOperator(const BoxGrid& grid, const Mat& k) : grid_(grid), comps_(1) {
        coef_.assign(static_cast<std::size_t>(grid.dim()) * grid.dim(), 0.0);
        for (int j = 0; j < grid.dim(); ++j)
            for (int h = 0; h < grid.dim(); ++h) coef_[j * grid.dim() + h] = k(j, h);
    }
    FdOperator(const BoxGrid& grid, const Rank4& L) : grid_(grid), comps_(grid.dim()) {
        const int dim = grid.dim();
        coef_.assign(static_cast<std::size_t>(dim) * dim * dim * dim, 0.0);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                for (int k = 0; k < dim; ++k)
                    for (int h = 0; h < dim; ++h)
                        coef_[((i * dim + j) * dim + k) * dim + h] = L.full(i, j, k, h);
    }

    const BoxGrid& grid() const { return grid_; }
    int comps() const { return comps_; }

    /// y = A x on full node vectors; boundary rows are zero, boundary
    /// values of x are read as Dirichlet data.
    void apply(const std::vector<double>& x, std::vector<double>& y) const {
        const int dim = grid_.dim();
        const std::size_t nn = grid_.node_count();
        const double h2 = grid_.spacing() * grid_.spacing();
        y.assign(comps_ * nn, 0.0);
        for (std::size_t p = 0; p < nn; ++p) {
            const auto idx = grid_.unpack_node(p);
            if (grid_.is_boundary(idx)) continue;
            for (int i = 0; i < comps_; ++i) {
                double acc = 0;
                for (int k = 0; k < comps_; ++k) {
                    const double* kc = comps_ == 1
                                           ? coef_.data()
                                           : coef_.data() + ((i * dim) * dim + k) * dim;
                    const std::size_t off = static_cast<std::size_t>(k) * nn;
                    for (int j = 0; j < dim; ++j) {
                        // diagonal term
                        const double cjj = comps_ == 1 ? coef_[j * dim + j] : kc[j * dim * dim + j];
                        {
                            auto ip = idx, im = idx;
                            ++ip[j];
                            --im[j];
                            acc += cjj *
                                   (x[off + grid_.pack_node(ip)] - 2.0 * x[off + p] +
                                    x[off + grid_.pack_node(im)]) /
                                   h2;
                        }
                        for (int h = j + 1; h < dim; ++h) {
                            const double cjh =
                                comps_ == 1 ? coef_[j * dim + h] + coef_[h * dim + j]
                                            : kc[j * dim * dim + h] + kc[h * dim * dim + j];
                            if (cjh == 0.0) continue;
                            auto pp = idx, pm = idx, mp = idx, mm = idx;
                            ++pp[j], ++pp[h];
                            ++pm[j], --pm[h];
                            --mp[j], ++mp[h];
                            --mm[j], --mm[h];
                            acc += cjh *
                                   (x[off + grid_.pack_node(pp)] - x[off + grid_.pack_node(pm)] -
                                    x[off + grid_.pack_node(mp)] + x[off + grid_.pack_node(mm)]) /
                                   (4.0 * h2);
                        }
                    }
                }
                y[static_cast<std::size_t>(i) * nn + p] = -acc;
            }
        }
    }

private:
    BoxGrid grid_;
    int comps_;
    std::vector<double> coef_;
};

inline void zero_boundary(const BoxGrid& grid, int comps, std::vector<double>& v) {
    const std::size_t nn = grid.node_count();
    for (std::size_t p = 0; p < nn; ++p) {
        if (!grid.is_boundary(grid.unpack_node(p))) continue;
        for (int c = 0; c < comps; ++c) v[c * nn + p] = 0.0;
    }
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0, comp = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double y = a[i] * b[i] - comp;
        double t = s + y;
        comp = (t - s) - y;
        s = t;
    }
    return s;
}

struct BoxSolveCertificate {
    int iterations = 0;
    double rel_residual = 0;
    bool converged = false;
};

/// Preconditioned CG for the reduced (interior) Dirichlet system. x holds
/// the boundary lift on entry (interior entries ignored); on exit it is
/// the full solution.
template <class Operator>
BoxSolveCertificate box_pcg(const Operator& A, const DstPreconditioner& P,
                            const std::vector<double>& load, std::vector<double>& x,
                            double tol = 1e-12, int max_iter = 20000) {
    const BoxGrid& grid = A.grid();
    const int comps = A.comps();
    const std::size_t nn = grid.node_count();

    // b = load - A * lift, restricted to the interior
    std::vector<double> lift(x);
    for (std::size_t p = 0; p < nn; ++p)
        if (!grid.is_boundary(grid.unpack_node(p)))
            for (int c = 0; c < comps; ++c) lift[c * nn + p] = 0.0;
    std::vector<double> b(comps * nn, 0.0), tmp;
    A.apply(lift, tmp);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = load[i] - tmp[i];
    zero_boundary(grid, comps, b);

    const double bnorm = std::sqrt(dot(b, b));
    BoxSolveCertificate cert;
    std::vector<double> u(comps * nn, 0.0);
    if (bnorm > 0) {
        std::vector<double> r = b, z, p, q;
        P.apply(r, z);
        p = z;
        double rz = dot(r, z);
        const double rz0 = rz;
        int it = 0;
        for (; it < max_iter; ++it) {
            A.apply(p, q);
            zero_boundary(grid, comps, q);
            const double pq = dot(p, q);
            if (pq <= 0.0)
                throw SingularSystemError("macro_solver",
                                          "operator is not positive definite on the grid");
            const double alpha = rz / pq;
            for (std::size_t i = 0; i < u.size(); ++i) {
                u[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            P.apply(r, z);
            const double rz_new = dot(r, z);
            if (std::sqrt(std::max(rz_new, 0.0) / rz0) <= tol) {
                cert.converged = true;
                ++it;
                break;
            }
            const double beta = rz_new / rz;
            rz = rz_new;
            for (std::size_t i = 0; i < p.size(); ++i) p[i] = z[i] + beta * p[i];
        }
        cert.iterations = it;
        if (!cert.converged)
            throw ConvergenceError("macro_solver", "fem solve: no convergence within " +
                                                       std::to_string(max_iter) + " iterations");
        // recomputed true residual
        A.apply(u, tmp);
        zero_boundary(grid, comps, tmp);
        double r2 = 0;
        for (std::size_t i = 0; i < b.size(); ++i) {
            const double d = tmp[i] - b[i];
            r2 += d * d;
        }
        cert.rel_residual = std::sqrt(r2) / bnorm;
    } else {
        cert.converged = true;
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = lift[i] + u[i];
    return cert;
}

/// Nodal gradient: centered differences at interior nodes, one-sided
/// second-order stencils at the boundary. Input component c of a scalar
/// nodal function; output component-major dim * nodes.
inline std::vector<double> nodal_gradient(const BoxGrid& grid, const std::vector<double>& f) {
    const int dim = grid.dim();
    const std::size_t nn = grid.node_count();
    std::vector<double> g(dim * nn, 0.0);
    const double h = grid.spacing();
    for (std::size_t p = 0; p < nn; ++p) {
        auto idx = grid.unpack_node(p);
        for (int d = 0; d < dim; ++d) {
            auto ip = idx, im = idx;
            const int n = grid.cells(d);
            double v;
            if (idx[d] == 0) {
                auto i1 = idx, i2 = idx;
                i1[d] = 1;
                i2[d] = 2;
                v = (-3.0 * f[p] + 4.0 * f[grid.pack_node(i1)] - f[grid.pack_node(i2)]) /
                    (2.0 * h);
            } else if (idx[d] == n) {
                auto i1 = idx, i2 = idx;
                i1[d] = n - 1;
                i2[d] = n - 2;
                v = (3.0 * f[p] - 4.0 * f[grid.pack_node(i1)] + f[grid.pack_node(i2)]) /
                    (2.0 * h);
            } else {
                ip[d] = idx[d] + 1;
                im[d] = idx[d] - 1;
                v = (f[grid.pack_node(ip)] - f[grid.pack_node(im)]) / (2.0 * h);
            }
            g[d * nn + p] = v;
        }
    }
    return g;
}

/// Bilinear gradient of a nodal function at an element center.
inline Vec elem_center_gradient(const BoxGrid& grid, const std::vector<double>& f,
                                const std::array<int, 3>& eidx, std::size_t comp_offset = 0) {
    const int dim = grid.dim();
    const double h = grid.spacing();
    Vec g(dim);
    const int nc = grid.corners();
    for (int c = 0; c < nc; ++c) {
        const double v = f[comp_offset + grid.corner_node(eidx, c)];
        for (int d = 0; d < dim; ++d) {
            // gradient of the Q1 shape function at the element center
            double w = (c & (1 << d)) ? 1.0 : -1.0;
            w /= h * (1 << (dim - 1));
            g[d] += w * v;
        }
    }
    return g;
}

/// Value of a nodal function at an element center (corner average).
inline double elem_center_value(const BoxGrid& grid, const std::vector<double>& f,
                                const std::array<int, 3>& eidx, std::size_t comp_offset = 0) {
    double s = 0;
    const int nc = grid.corners();
    for (int c = 0; c < nc; ++c) s += f[comp_offset + grid.corner_node(eidx, c)];
    return s / nc;
}

} // namespace ehom

#endif
