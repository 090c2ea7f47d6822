#ifndef EHOM_ESHELBY_HPP
#define EHOM_ESHELBY_HPP

#include <cmath>
#include <numbers>

#include "ehom/tensor.hpp"

namespace ehom {

/// Contrast factor (1 - ebar) / (ebar + N - 1) of the single-inclusion
/// problem for a unit ball of permittivity ebar in a unit background.
inline double eshelby_contrast(double ebar, int dim) {
    return (1.0 - ebar) / (ebar + dim - 1);
}

/// Exterior/interior solution of the single-inclusion ("Maxwell" /
/// "Eshelby") problem for direction p: decays at infinity, uniform
/// interior field, continuous across the unit sphere.
inline double eshelby_corrector(double ebar, int dim, int p, const Vec& x) {
    const double beta = eshelby_contrast(ebar, dim);
    const double r = x.norm();
    if (r <= 1.0) return beta * x[p];
    return beta * x[p] / std::pow(r, dim);
}

/// Gradient of the single-inclusion corrector.
inline Vec eshelby_corrector_gradient(double ebar, int dim, int p, const Vec& x) {
    const double beta = eshelby_contrast(ebar, dim);
    Vec g(x.n);
    const double r = x.norm();
    if (r <= 1.0) {
        g[p] = beta;
        return g;
    }
    const double rN = std::pow(r, dim);
    for (int q = 0; q < x.n; ++q)
        g[q] = beta * ((q == p ? 1.0 : 0.0) / rN - dim * x[p] * x[q] / (rN * r * r));
    return g;
}

/// Surface measure of the unit sphere S^{N-1}.
inline double unit_sphere_area(int dim) {
    switch (dim) {
    case 1: return 2.0;
    case 2: return 2.0 * std::numbers::pi;
    default: return 4.0 * std::numbers::pi;
    }
}

/// Closed-form dilute charge-coupling matrix: a positive multiple of the
/// identity built from the squared contrast and a shell integral that
/// depends on the coating thickness eta.
inline Mat abar(double ebar, double eta, int dim) {
    const double beta = eshelby_contrast(ebar, dim);
    double shell = 0.0;
    switch (dim) {
    case 1: shell = eta; break;
    case 2: shell = std::numbers::pi * std::log1p(eta); break;
    default:
        shell = unit_sphere_area(dim) / dim * (1.0 - std::pow(1.0 + eta, 2.0 - dim));
        break;
    }
    return Mat::identity(dim, beta * beta * shell);
}

} // namespace ehom

#endif
