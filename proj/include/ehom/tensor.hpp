#ifndef EHOM_TENSOR_HPP
#define EHOM_TENSOR_HPP

#include <array>
#include <cmath>
#include <cstring>
#include <vector>

#include <Eigen/Dense>

#include "ehom/errors.hpp"

namespace ehom {

// Small dense tensors in dimension N in {1,2,3}. Symmetric matrices and
// rank-4 tensors acting on them are stored in Mandel (orthonormal Voigt)
// coordinates so that Frobenius inner products become plain dot products
// and minor symmetries are built into the storage.

inline constexpr int sym_dim(int n) { return n * (n + 1) / 2; }

/// Index pairs of the Mandel basis: diagonal entries first, then
/// off-diagonals (3D order: 23, 13, 12).
inline const std::array<std::pair<int, int>, 6>& mandel_pairs(int n) {
    static const std::array<std::pair<int, int>, 6> p1 = {{{0, 0}}};
    static const std::array<std::pair<int, int>, 6> p2 = {{{0, 0}, {1, 1}, {0, 1}}};
    static const std::array<std::pair<int, int>, 6> p3 = {
        {{0, 0}, {1, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}}};
    switch (n) {
    case 1: return p1;
    case 2: return p2;
    default: return p3;
    }
}

inline double mandel_weight(int n, int a) { return a < n ? 1.0 : std::sqrt(2.0); }

struct Vec {
    int n = 0;
    std::array<double, 3> v{};

    Vec() = default;
    explicit Vec(int dim) : n(dim) {}
    static Vec unit(int dim, int j) {
        Vec e(dim);
        e.v[j] = 1.0;
        return e;
    }
    double& operator[](int i) { return v[i]; }
    double operator[](int i) const { return v[i]; }
    double dot(const Vec& o) const {
        double s = 0;
        for (int i = 0; i < n; ++i) s += v[i] * o.v[i];
        return s;
    }
    double norm() const { return std::sqrt(dot(*this)); }
};

/// Dense N x N matrix, row major.
struct Mat {
    int n = 0;
    std::array<double, 9> a{};

    Mat() = default;
    explicit Mat(int dim) : n(dim) {}
    static Mat identity(int dim, double s = 1.0) {
        Mat m(dim);
        for (int i = 0; i < dim; ++i) m(i, i) = s;
        return m;
    }
    double& operator()(int i, int j) { return a[i * n + j]; }
    double operator()(int i, int j) const { return a[i * n + j]; }

    Vec apply(const Vec& x) const {
        Vec y(n);
        for (int i = 0; i < n; ++i) {
            double s = 0;
            for (int j = 0; j < n; ++j) s += (*this)(i, j) * x[j];
            y[i] = s;
        }
        return y;
    }
    Mat transpose() const {
        Mat t(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) t(j, i) = (*this)(i, j);
        return t;
    }
    Mat sym() const {
        Mat s(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) s(i, j) = 0.5 * ((*this)(i, j) + (*this)(j, i));
        return s;
    }
    Mat& operator+=(const Mat& o) {
        for (int i = 0; i < n * n; ++i) a[i] += o.a[i];
        return *this;
    }
    Mat& operator-=(const Mat& o) {
        for (int i = 0; i < n * n; ++i) a[i] -= o.a[i];
        return *this;
    }
    Mat& operator*=(double s) {
        for (int i = 0; i < n * n; ++i) a[i] *= s;
        return *this;
    }
    friend Mat operator+(Mat l, const Mat& r) { return l += r; }
    friend Mat operator-(Mat l, const Mat& r) { return l -= r; }
    friend Mat operator*(Mat l, double s) { return l *= s; }
    friend Mat operator*(double s, Mat l) { return l *= s; }

    double quad(const Vec& x) const { return x.dot(apply(x)); }
    double frobenius_norm() const {
        double s = 0;
        for (int i = 0; i < n * n; ++i) s += a[i] * a[i];
        return std::sqrt(s);
    }
    double asymmetry() const {
        double s = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double d = (*this)(i, j) - (*this)(j, i);
                s += d * d;
            }
        return std::sqrt(s);
    }

    Eigen::MatrixXd eigen() const {
        Eigen::MatrixXd m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) = (*this)(i, j);
        return m;
    }
    static Mat from_eigen(const Eigen::MatrixXd& m) {
        Mat r(static_cast<int>(m.rows()));
        for (int i = 0; i < r.n; ++i)
            for (int j = 0; j < r.n; ++j) r(i, j) = m(i, j);
        return r;
    }
};

/// Eigenvalues of the symmetric part, ascending.
inline std::vector<double> sym_eigenvalues(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.sym().eigen());
    std::vector<double> ev(m.n);
    for (int i = 0; i < m.n; ++i) ev[i] = es.eigenvalues()[i];
    return ev;
}

inline bool is_positive_definite(const Mat& m, double tol = 0.0) {
    auto ev = sym_eigenvalues(m);
    return ev.front() > tol;
}

inline Mat mat_inverse(const Mat& m) {
    return Mat::from_eigen(m.eigen().inverse());
}

/// Symmetric N x N matrix in Mandel coordinates.
struct SymMat {
    int n = 0;
    std::array<double, 6> m{};

    SymMat() = default;
    explicit SymMat(int dim) : n(dim) {}
    int dim() const { return sym_dim(n); }
    double& operator[](int a) { return m[a]; }
    double operator[](int a) const { return m[a]; }

    static SymMat from_full(const Mat& f) {
        SymMat s(f.n);
        const auto& pairs = mandel_pairs(f.n);
        for (int a = 0; a < s.dim(); ++a) {
            auto [i, j] = pairs[a];
            s[a] = mandel_weight(f.n, a) * 0.5 * (f(i, j) + f(j, i));
        }
        return s;
    }
    Mat to_full() const {
        Mat f(n);
        const auto& pairs = mandel_pairs(n);
        for (int a = 0; a < dim(); ++a) {
            auto [i, j] = pairs[a];
            double val = m[a] / mandel_weight(n, a);
            f(i, j) = val;
            f(j, i) = val;
        }
        return f;
    }
    /// Mandel coordinates of sym(u x v).
    static SymMat sym_outer(const Vec& u, const Vec& v) {
        Mat f(u.n);
        for (int i = 0; i < u.n; ++i)
            for (int j = 0; j < u.n; ++j) f(i, j) = 0.5 * (u[i] * v[j] + u[j] * v[i]);
        return from_full(f);
    }
    static SymMat basis(int dim, int a) {
        SymMat s(dim);
        s[a] = 1.0;
        return s;
    }
    double dot(const SymMat& o) const {
        double s = 0;
        for (int a = 0; a < dim(); ++a) s += m[a] * o.m[a];
        return s;
    }
    double norm() const { return std::sqrt(dot(*this)); }
    SymMat& operator+=(const SymMat& o) {
        for (int a = 0; a < dim(); ++a) m[a] += o.m[a];
        return *this;
    }
    SymMat& operator*=(double s) {
        for (int a = 0; a < dim(); ++a) m[a] *= s;
        return *this;
    }
    friend SymMat operator+(SymMat l, const SymMat& r) { return l += r; }
    friend SymMat operator*(SymMat l, double s) { return l *= s; }
};

/// Rank-4 tensor with minor symmetries, as a Mandel d x d matrix (row
/// major). Major symmetry of elasticity corresponds to a symmetric matrix.
struct Rank4 {
    int n = 0;
    std::array<double, 36> c{};

    Rank4() = default;
    explicit Rank4(int dim) : n(dim) {}
    int dim() const { return sym_dim(n); }
    double& operator()(int a, int b) { return c[a * dim() + b]; }
    double operator()(int a, int b) const { return c[a * dim() + b]; }

    static Rank4 identity(int dim, double s = 1.0) {
        Rank4 t(dim);
        for (int a = 0; a < t.dim(); ++a) t(a, a) = s;
        return t;
    }
    /// Isotropic elasticity: L E = 2 mu E + lambda tr(E) I.
    static Rank4 isotropic(int dim, double lambda, double mu) {
        Rank4 t(dim);
        for (int a = 0; a < t.dim(); ++a) t(a, a) = 2.0 * mu;
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) t(i, j) += lambda;
        return t;
    }

    SymMat apply(const SymMat& e) const {
        SymMat r(n);
        int d = dim();
        for (int a = 0; a < d; ++a) {
            double s = 0;
            for (int b = 0; b < d; ++b) s += (*this)(a, b) * e[b];
            r[a] = s;
        }
        return r;
    }

    /// Full-index component T_{ijkh} (i<=j, k<=h patterns are symmetric).
    double full(int i, int j, int k, int h) const {
        const auto& pairs = mandel_pairs(n);
        int a = -1, b = -1;
        for (int q = 0; q < dim(); ++q) {
            auto [pi, pj] = pairs[q];
            if ((pi == i && pj == j) || (pi == j && pj == i)) a = q;
            if ((pi == k && pj == h) || (pi == h && pj == k)) b = q;
        }
        return (*this)(a, b) / (mandel_weight(n, a) * mandel_weight(n, b));
    }

    /// Acoustic-type contraction K_{ik} = T_{ijkh} q_j q_h.
    Mat contract_dirs(const Vec& q) const {
        Mat k(n);
        for (int i = 0; i < n; ++i)
            for (int kk = 0; kk < n; ++kk) {
                double s = 0;
                for (int j = 0; j < n; ++j)
                    for (int h = 0; h < n; ++h) s += full(i, j, kk, h) * q[j] * q[h];
                k(i, kk) = s;
            }
        return k;
    }

    Rank4& operator+=(const Rank4& o) {
        for (int i = 0; i < dim() * dim(); ++i) c[i] += o.c[i];
        return *this;
    }
    Rank4& operator-=(const Rank4& o) {
        for (int i = 0; i < dim() * dim(); ++i) c[i] -= o.c[i];
        return *this;
    }
    Rank4& operator*=(double s) {
        for (int i = 0; i < dim() * dim(); ++i) c[i] *= s;
        return *this;
    }
    friend Rank4 operator+(Rank4 l, const Rank4& r) { return l += r; }
    friend Rank4 operator-(Rank4 l, const Rank4& r) { return l -= r; }
    friend Rank4 operator*(Rank4 l, double s) { return l *= s; }
    friend Rank4 operator*(double s, Rank4 l) { return l *= s; }

    double frobenius_norm() const {
        double s = 0;
        for (int i = 0; i < dim() * dim(); ++i) s += c[i] * c[i];
        return std::sqrt(s);
    }
    double major_asymmetry() const {
        double s = 0;
        for (int a = 0; a < dim(); ++a)
            for (int b = 0; b < dim(); ++b) {
                double d = (*this)(a, b) - (*this)(b, a);
                s += d * d;
            }
        return std::sqrt(s);
    }

    Eigen::MatrixXd eigen() const {
        int d = dim();
        Eigen::MatrixXd m(d, d);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) m(a, b) = (*this)(a, b);
        return m;
    }
    static Rank4 from_eigen(int n, const Eigen::MatrixXd& m) {
        Rank4 t(n);
        for (int a = 0; a < t.dim(); ++a)
            for (int b = 0; b < t.dim(); ++b) t(a, b) = m(a, b);
        return t;
    }
};

/// Eigenvalues of the symmetric part of a rank-4 tensor acting on
/// symmetric matrices, ascending.
inline std::vector<double> rank4_eigenvalues(const Rank4& t) {
    Eigen::MatrixXd m = t.eigen();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    std::vector<double> ev(t.dim());
    for (int i = 0; i < t.dim(); ++i) ev[i] = es.eigenvalues()[i];
    return ev;
}

inline Rank4 rank4_inverse(const Rank4& t) {
    return Rank4::from_eigen(t.n, t.eigen().inverse());
}

/// Rank-3 tensor symmetric in its leading pair: Mandel d x N matrix.
struct Rank3 {
    int n = 0;
    std::array<double, 18> c{};

    Rank3() = default;
    explicit Rank3(int dim) : n(dim) {}
    int dim() const { return sym_dim(n); }
    double& operator()(int a, int k) { return c[a * n + k]; }
    double operator()(int a, int k) const { return c[a * n + k]; }

    double full(int i, int j, int k) const {
        const auto& pairs = mandel_pairs(n);
        for (int q = 0; q < dim(); ++q) {
            auto [pi, pj] = pairs[q];
            if ((pi == i && pj == j) || (pi == j && pj == i))
                return (*this)(q, k) / mandel_weight(n, q);
        }
        return 0.0;
    }
    /// (T v)_{ij} = T_{ijk} v_k, returned in Mandel coordinates.
    SymMat contract(const Vec& v) const {
        SymMat s(n);
        for (int a = 0; a < dim(); ++a) {
            double acc = 0;
            for (int k = 0; k < n; ++k) acc += (*this)(a, k) * v[k];
            s[a] = acc;
        }
        return s;
    }
    Rank3& operator+=(const Rank3& o) {
        for (int i = 0; i < dim() * n; ++i) c[i] += o.c[i];
        return *this;
    }
    Rank3& operator*=(double s) {
        for (int i = 0; i < dim() * n; ++i) c[i] *= s;
        return *this;
    }
    double frobenius_norm() const {
        double s = 0;
        for (int i = 0; i < dim() * n; ++i) s += c[i] * c[i];
        return std::sqrt(s);
    }
};

} // namespace ehom

#endif
