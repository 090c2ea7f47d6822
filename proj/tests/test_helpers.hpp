#ifndef EHOM_TEST_HELPERS_HPP
#define EHOM_TEST_HELPERS_HPP

// Shared oracles and generators for the unit suites. Everything here is
// deliberately independent of the spectral/solver code paths it checks:
// finite differences, closed-form laminate algebra, hand quadrature.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ehom/grid.hpp"
#include "ehom/spectral.hpp"
#include "ehom/tensor.hpp"

namespace ehom_test {

using namespace ehom;

/// Centered second-order finite-difference gradient on the periodic grid.
inline Field fd_gradient(const Field& f) {
    const TorusGrid& g = f.grid();
    const int dim = g.dim();
    const int n = g.n();
    const double inv2h = 0.5 * n;
    Field grad(g, Rank::vector);
    for (std::size_t p = 0; p < g.points(); ++p) {
        auto idx = g.unpack(p);
        for (int d = 0; d < dim; ++d) {
            auto ip = idx, im = idx;
            ip[d] = (idx[d] + 1) % n;
            im[d] = (idx[d] - 1 + n) % n;
            grad.at(d, p) = (f.at(0, g.pack(ip)) - f.at(0, g.pack(im))) * inv2h;
        }
    }
    return grad;
}

inline double l1_norm(const Field& f) {
    double s = 0;
    for (std::size_t p = 0; p < f.points(); ++p) {
        double m2 = 0;
        for (int c = 0; c < f.components(); ++c) m2 += f.at(c, p) * f.at(c, p);
        s += std::sqrt(m2);
    }
    return s / static_cast<double>(f.points());
}

/// Periodic distance to a center.
inline double torus_dist(const Vec& y, const Vec& c) {
    double d2 = 0;
    for (int i = 0; i < y.n; ++i) {
        double d = std::abs(y[i] - c[i]);
        d = std::min(d, 1.0 - d);
        d2 += d * d;
    }
    return std::sqrt(d2);
}

inline Field disk_indicator(const TorusGrid& g, const Vec& center, double radius) {
    return sample_scalar(g, [&](const Vec& y) {
        return torus_dist(y, center) < radius ? 1.0 : 0.0;
    });
}

/// Smooth radial cutoff bump, 1 at the center, 0 outside radius R.
inline double mollifier(double r, double R) {
    if (r >= R) return 0.0;
    const double t = r / R;
    return std::exp(1.0 - 1.0 / (1.0 - t * t));
}

/// Zero-mean C-infinity shell bump supported on an annulus.
inline Field shell_bump(const TorusGrid& g, const Vec& center, double r0, double r1) {
    Field f = sample_scalar(g, [&](const Vec& y) {
        const double r = torus_dist(y, center);
        if (r <= r0 || r >= r1) return 0.0;
        const double t = 2.0 * (r - r0) / (r1 - r0) - 1.0; // in (-1,1)
        return std::exp(-1.0 / (1.0 - t * t));
    });
    return project_zero_mean(f);
}

/// Random band-limited trigonometric field with a fixed seed.
inline Field random_trig_field(const TorusGrid& g, unsigned seed, int kmax = 4) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    struct Mode {
        std::array<int, 3> k;
        double a, b;
    };
    std::vector<Mode> modes;
    for (int k0 = -kmax; k0 <= kmax; ++k0)
        for (int k1 = -kmax; k1 <= kmax; ++k1) {
            if (g.dim() == 2) {
                modes.push_back({{k0, k1, 0}, amp(rng), amp(rng)});
            } else {
                for (int k2 = -kmax; k2 <= kmax; ++k2)
                    modes.push_back({{k0, k1, k2}, amp(rng), amp(rng)});
            }
        }
    return sample_scalar(g, [&](const Vec& y) {
        double s = 0;
        for (const auto& m : modes) {
            double ph = 0;
            for (int d = 0; d < g.dim(); ++d) ph += m.k[d] * y[d];
            s += m.a * std::cos(two_pi * ph) + m.b * std::sin(two_pi * ph);
        }
        return s;
    });
}

/// Closed-form effective tensor of a two-phase simple laminate with
/// layer normal e_1 via the jump conditions: continuity of tangential
/// fields and of normal flux.
inline Mat laminate_permittivity(const Mat& e1, const Mat& e2, double f1) {
    const int n = e1.n;
    const double f2 = 1.0 - f1;
    Mat eff(n);
    for (int j = 0; j < n; ++j) {
        // load E = e_j, field in layer alpha: E + a_alpha e_1 with
        // f1 a_1 + f2 a_2 = 0 and flux continuity in direction 1.
        // (e1 (E + a1 n))_1 = (e2 (E - (f1/f2) a1 n))_1
        const double k1 = e1(0, 0), k2 = e2(0, 0);
        const double rhs = e2(0, j) - e1(0, j);
        const double a1 = rhs / (k1 + (f1 / f2) * k2);
        const double a2 = -(f1 / f2) * a1;
        for (int i = 0; i < n; ++i) {
            double flux1 = e1(i, j) + e1(i, 0) * a1;
            double flux2 = e2(i, j) + e2(i, 0) * a2;
            eff(i, j) = f1 * flux1 + f2 * flux2;
        }
    }
    return eff;
}

/// Closed-form effective stiffness of a two-phase simple laminate with
/// layer normal e_1: per-layer strain is E + sym(a_alpha x n) with zero
/// mean correction and traction continuity across the interface.
inline Rank4 laminate_elasticity(const Rank4& L1, const Rank4& L2, double f1) {
    const int n = L1.n;
    const int d = sym_dim(n);
    const double f2 = 1.0 - f1;
    const Vec e1v = Vec::unit(n, 0);
    // acoustic matrices K_alpha(i,k) = L_{i1k1}
    Mat K1 = L1.contract_dirs(e1v), K2 = L2.contract_dirs(e1v);
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) A(i, k) = K1(i, k) + (f1 / f2) * K2(i, k);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);

    Rank4 eff(n);
    for (int b = 0; b < d; ++b) {
        SymMat E = SymMat::basis(n, b);
        // traction gap ((L2 - L1) E) . n
        SymMat s1 = L1.apply(E), s2 = L2.apply(E);
        Mat s1f = s1.to_full(), s2f = s2.to_full();
        Eigen::VectorXd rhs(n);
        for (int i = 0; i < n; ++i) rhs(i) = s2f(i, 0) - s1f(i, 0);
        Eigen::VectorXd a1 = lu.solve(rhs);
        Vec a1v(n), a2v(n);
        for (int i = 0; i < n; ++i) {
            a1v[i] = a1(i);
            a2v[i] = -(f1 / f2) * a1(i);
        }
        SymMat E1 = E + SymMat::sym_outer(a1v, e1v);
        SymMat E2 = E + SymMat::sym_outer(a2v, e1v);
        SymMat stress = L1.apply(E1) * f1 + L2.apply(E2) * f2;
        for (int a = 0; a < d; ++a) eff(a, b) = stress[a];
    }
    return eff;
}

/// Per-layer strain of the laminate cell problem for loading E (Mandel),
/// returned as the pair (strain in phase 1, strain in phase 2).
inline std::pair<SymMat, SymMat> laminate_strains(const Rank4& L1, const Rank4& L2, double f1,
                                                  const SymMat& E) {
    const int n = L1.n;
    const double f2 = 1.0 - f1;
    const Vec e1v = Vec::unit(n, 0);
    Mat K1 = L1.contract_dirs(e1v), K2 = L2.contract_dirs(e1v);
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) A(i, k) = K1(i, k) + (f1 / f2) * K2(i, k);
    SymMat s1 = L1.apply(E), s2 = L2.apply(E);
    Mat s1f = s1.to_full(), s2f = s2.to_full();
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) rhs(i) = s2f(i, 0) - s1f(i, 0);
    Eigen::VectorXd a1 = Eigen::FullPivLU<Eigen::MatrixXd>(A).solve(rhs);
    Vec a1v(n), a2v(n);
    for (int i = 0; i < n; ++i) {
        a1v[i] = a1(i);
        a2v[i] = -(f1 / f2) * a1(i);
    }
    return {E + SymMat::sym_outer(a1v, e1v), E + SymMat::sym_outer(a2v, e1v)};
}

} // namespace ehom_test

#endif
