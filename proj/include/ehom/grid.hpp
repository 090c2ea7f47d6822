#ifndef EHOM_GRID_HPP
#define EHOM_GRID_HPP

#include <array>
#include <cassert>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ehom/tensor.hpp"

namespace ehom {

/// Regular periodic grid on the unit torus [0,1)^dim with midpoint
/// sampling. `scale` records the physical cell side for dilute-mode
/// bookkeeping; all stored coordinates remain in unit-torus units.
class TorusGrid {
public:
    TorusGrid() = default;
    TorusGrid(int dim, int n, double scale = 1.0) : dim_(dim), n_(n), scale_(scale) {
        if (dim != 2 && dim != 3) throw std::invalid_argument("TorusGrid: dim must be 2 or 3");
        if (n < 8 || (n & (n - 1)) != 0)
            throw std::invalid_argument("TorusGrid: resolution must be a power of two >= 8");
        npts_ = 1;
        for (int d = 0; d < dim; ++d) npts_ *= static_cast<std::size_t>(n);
    }

    int dim() const { return dim_; }
    int n() const { return n_; }
    double scale() const { return scale_; }
    std::size_t points() const { return npts_; }
    double spacing() const { return 1.0 / n_; }
    double cell_volume() const {
        double v = 1.0;
        for (int d = 0; d < dim_; ++d) v *= spacing();
        return v;
    }

    /// Multi-index of a flat index (row major, last axis fastest).
    std::array<int, 3> unpack(std::size_t p) const {
        std::array<int, 3> idx{};
        for (int d = dim_ - 1; d >= 0; --d) {
            idx[d] = static_cast<int>(p % n_);
            p /= n_;
        }
        return idx;
    }
    std::size_t pack(const std::array<int, 3>& idx) const {
        std::size_t p = 0;
        for (int d = 0; d < dim_; ++d) p = p * n_ + static_cast<std::size_t>(idx[d]);
        return p;
    }

    /// Midpoint coordinates in [0,1)^dim.
    Vec point(std::size_t p) const {
        auto idx = unpack(p);
        Vec y(dim_);
        for (int d = 0; d < dim_; ++d) y[d] = (idx[d] + 0.5) / n_;
        return y;
    }

    bool operator==(const TorusGrid& o) const {
        return dim_ == o.dim_ && n_ == o.n_ && scale_ == o.scale_;
    }

private:
    int dim_ = 2;
    int n_ = 8;
    double scale_ = 1.0;
    std::size_t npts_ = 64;
};

enum class Rank { scalar, vector, matrix, sym_matrix, mandel_matrix };

inline int rank_components(Rank r, int dim) {
    switch (r) {
    case Rank::scalar: return 1;
    case Rank::vector: return dim;
    case Rank::matrix: return dim * dim;
    case Rank::sym_matrix: return sym_dim(dim);
    case Rank::mandel_matrix: return sym_dim(dim) * sym_dim(dim);
    }
    return 1;
}

inline const char* rank_name(Rank r) {
    switch (r) {
    case Rank::scalar: return "scalar";
    case Rank::vector: return "vector";
    case Rank::matrix: return "matrix";
    case Rank::sym_matrix: return "sym_matrix";
    case Rank::mandel_matrix: return "mandel_matrix";
    }
    return "scalar";
}

/// Sampled field on a TorusGrid. Storage is component major: each
/// component is a contiguous block of grid.points() values, which is the
/// layout the transforms expect.
class Field {
public:
    Field() = default;
    Field(TorusGrid grid, Rank rank)
        : grid_(grid), rank_(rank), comps_(rank_components(rank, grid.dim())),
          data_(static_cast<std::size_t>(comps_) * grid.points(), 0.0) {}

    const TorusGrid& grid() const { return grid_; }
    Rank rank() const { return rank_; }
    int components() const { return comps_; }
    std::size_t points() const { return grid_.points(); }

    double* component(int c) { return data_.data() + static_cast<std::size_t>(c) * points(); }
    const double* component(int c) const {
        return data_.data() + static_cast<std::size_t>(c) * points();
    }
    double& at(int c, std::size_t p) { return component(c)[p]; }
    double at(int c, std::size_t p) const { return component(c)[p]; }

    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    Vec vector_at(std::size_t p) const {
        assert(rank_ == Rank::vector);
        Vec v(grid_.dim());
        for (int c = 0; c < comps_; ++c) v[c] = at(c, p);
        return v;
    }
    Mat matrix_at(std::size_t p) const {
        assert(rank_ == Rank::matrix);
        Mat m(grid_.dim());
        for (int c = 0; c < comps_; ++c) m.a[c] = at(c, p);
        return m;
    }
    SymMat sym_at(std::size_t p) const {
        assert(rank_ == Rank::sym_matrix);
        SymMat s(grid_.dim());
        for (int c = 0; c < comps_; ++c) s[c] = at(c, p);
        return s;
    }
    Rank4 mandel_at(std::size_t p) const {
        assert(rank_ == Rank::mandel_matrix);
        Rank4 t(grid_.dim());
        for (int c = 0; c < comps_; ++c) t.c[c] = at(c, p);
        return t;
    }
    void set_matrix(std::size_t p, const Mat& m) {
        for (int c = 0; c < comps_; ++c) at(c, p) = m.a[c];
    }
    void set_sym(std::size_t p, const SymMat& s) {
        for (int c = 0; c < comps_; ++c) at(c, p) = s[c];
    }
    void set_mandel(std::size_t p, const Rank4& t) {
        for (int c = 0; c < comps_; ++c) at(c, p) = t.c[c];
    }

    Field& operator+=(const Field& o) {
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Field& operator-=(const Field& o) {
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Field& operator*=(double s) {
        for (double& x : data_) x *= s;
        return *this;
    }

    bool finite() const {
        for (double x : data_) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    }

private:
    TorusGrid grid_;
    Rank rank_ = Rank::scalar;
    int comps_ = 1;
    std::vector<double> data_;
};

/// Sample a scalar function of the midpoint coordinates.
inline Field sample_scalar(const TorusGrid& grid, const std::function<double(const Vec&)>& f) {
    Field out(grid, Rank::scalar);
    for (std::size_t p = 0; p < grid.points(); ++p) out.at(0, p) = f(grid.point(p));
    return out;
}

/// Pointwise application of a matrix field to a vector field.
inline Field matvec(const Field& m, const Field& v) {
    const int n = m.grid().dim();
    Field out(m.grid(), Rank::vector);
    for (int i = 0; i < n; ++i) {
        double* oi = out.component(i);
        for (int j = 0; j < n; ++j) {
            const double* mij = m.component(i * n + j);
            const double* vj = v.component(j);
            for (std::size_t p = 0; p < m.points(); ++p) oi[p] += mij[p] * vj[p];
        }
    }
    return out;
}

/// Pointwise application of a Mandel-matrix field to a sym-matrix field.
inline Field mandel_apply(const Field& t, const Field& e) {
    const int d = sym_dim(t.grid().dim());
    Field out(t.grid(), Rank::sym_matrix);
    for (int a = 0; a < d; ++a) {
        double* oa = out.component(a);
        for (int b = 0; b < d; ++b) {
            const double* tab = t.component(a * d + b);
            const double* eb = e.component(b);
            for (std::size_t p = 0; p < t.points(); ++p) oa[p] += tab[p] * eb[p];
        }
    }
    return out;
}

/// Pointwise Euclidean inner product of two fields of equal rank,
/// returned as a scalar field.
inline Field pointwise_dot(const Field& a, const Field& b) {
    Field out(a.grid(), Rank::scalar);
    double* o = out.component(0);
    for (int c = 0; c < a.components(); ++c) {
        const double* ac = a.component(c);
        const double* bc = b.component(c);
        for (std::size_t p = 0; p < a.points(); ++p) o[p] += ac[p] * bc[p];
    }
    return out;
}

} // namespace ehom

#endif
