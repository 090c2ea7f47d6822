#ifndef EHOM_MICROSTRUCTURE_HPP
#define EHOM_MICROSTRUCTURE_HPP

#include <cmath>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ehom/errors.hpp"
#include "ehom/eshelby.hpp"
#include "ehom/grid.hpp"
#include "ehom/spectral.hpp"

namespace ehom {

inline double torus_distance(const Vec& a, const Vec& b) {
    double d2 = 0;
    for (int i = 0; i < a.n; ++i) {
        double d = std::abs(a[i] - b[i]);
        d = std::min(d, 1.0 - d);
        d2 += d * d;
    }
    return std::sqrt(d2);
}

struct Inclusion {
    Vec center;          ///< in [0,1)^N
    double radius = 0.0; ///< in unit-torus units
    double coating = 0.0; ///< relative coating thickness eta (>0 enables a shell)
};

/// Two-phase geometry: a connected matrix phase plus non-overlapping
/// spherical inclusions, or an optional smooth level-set descriptor
/// (negative inside the inclusion phase).
struct PhaseGeometry {
    std::vector<Inclusion> inclusions;
    std::function<double(const Vec&)> level_set; ///< optional

    /// Closures of periodized inclusions must be pairwise disjoint.
    void validate() const {
        for (std::size_t i = 0; i < inclusions.size(); ++i) {
            if (inclusions[i].radius >= 0.5)
                throw OverlapError("microstructure",
                                   "inclusion overlaps its own periodic image");
            for (std::size_t j = i + 1; j < inclusions.size(); ++j) {
                const double d =
                    torus_distance(inclusions[i].center, inclusions[j].center);
                if (d <= inclusions[i].radius + inclusions[j].radius)
                    throw OverlapError("microstructure",
                                       "periodized inclusions " + std::to_string(i) + " and " +
                                           std::to_string(j) + " intersect");
            }
        }
    }
};

/// Flood fill of the zero set of a binary indicator with face adjacency
/// and periodic wrap-around; throws if the matrix phase is disconnected.
inline void check_matrix_connected(const Field& indicator) {
    const TorusGrid& g = indicator.grid();
    const int dim = g.dim();
    const int n = g.n();
    std::vector<char> visited(g.points(), 0);
    std::size_t matrix_total = 0, seed = g.points();
    for (std::size_t p = 0; p < g.points(); ++p) {
        if (indicator.at(0, p) == 0.0) {
            ++matrix_total;
            if (seed == g.points()) seed = p;
        }
    }
    if (matrix_total == 0)
        throw DisconnectedMatrixError("microstructure", "matrix phase is empty");
    std::deque<std::size_t> queue{seed};
    visited[seed] = 1;
    std::size_t count = 0;
    while (!queue.empty()) {
        std::size_t p = queue.front();
        queue.pop_front();
        ++count;
        auto idx = g.unpack(p);
        for (int d = 0; d < dim; ++d) {
            for (int s : {-1, 1}) {
                auto nb = idx;
                nb[d] = (idx[d] + s + n) % n;
                std::size_t q = g.pack(nb);
                if (!visited[q] && indicator.at(0, q) == 0.0) {
                    visited[q] = 1;
                    queue.push_back(q);
                }
            }
        }
    }
    if (count != matrix_total)
        throw DisconnectedMatrixError("microstructure",
                                      "matrix phase splits into multiple components");
}

/// Voxelized indicator of the inclusion phase under periodic wrap-around.
inline Field build_indicator(const PhaseGeometry& geom, const TorusGrid& grid,
                             bool check_connectivity = true) {
    geom.validate();
    Field ind(grid, Rank::scalar);
    if (geom.level_set) {
        for (std::size_t p = 0; p < grid.points(); ++p)
            ind.at(0, p) = geom.level_set(grid.point(p)) < 0.0 ? 1.0 : 0.0;
    } else {
        for (std::size_t p = 0; p < grid.points(); ++p) {
            const Vec y = grid.point(p);
            double v = 0.0;
            for (const auto& inc : geom.inclusions) {
                if (torus_distance(y, inc.center) < inc.radius) {
                    v = 1.0;
                    break;
                }
            }
            ind.at(0, p) = v;
        }
    }
    if (check_connectivity && !geom.inclusions.empty()) check_matrix_connected(ind);
    return ind;
}

/// Named test patterns; these bypass the inclusion-list invariants.
inline Field laminate_indicator(const TorusGrid& grid, int axis = 0, double fraction = 0.5) {
    return sample_scalar(grid, [&](const Vec& y) { return y[axis] >= 1.0 - fraction ? 1.0 : 0.0; });
}

inline Field checkerboard_indicator(const TorusGrid& grid) {
    return sample_scalar(grid, [&](const Vec& y) {
        int s = 0;
        for (int d = 0; d < grid.dim(); ++d) s += static_cast<int>(std::floor(2.0 * y[d]));
        return s % 2 == 0 ? 0.0 : 1.0;
    });
}

/// Per-phase material data: permittivity, elasticity, electrostriction,
/// with the declared ellipticity window [gamma, gamma_prime] for eps.
struct PhaseTensors {
    Mat eps;
    Rank4 L;
    Rank4 M;
    double gamma = 0.0;
    double gamma_prime = 0.0;

    void validate(const std::string& label) const {
        auto ev = sym_eigenvalues(eps);
        if (ev.front() <= 0.0)
            throw EllipticityError("microstructure",
                                   "permittivity of phase " + label + " is not positive definite");
        if (gamma > 0.0 && (ev.front() < gamma * (1 - 1e-12) || ev.back() > gamma_prime * (1 + 1e-12)))
            throw EllipticityError("microstructure", "permittivity eigenvalues of phase " + label +
                                                         " violate the declared window");
        if (eps.asymmetry() > 1e-12 * eps.frobenius_norm())
            throw EllipticityError("microstructure",
                                   "permittivity of phase " + label + " is not symmetric");
        auto lev = rank4_eigenvalues(L);
        if (lev.front() <= 0.0)
            throw EllipticityError("microstructure", "elasticity of phase " + label +
                                                         " is not positive definite");
        if (L.major_asymmetry() > 1e-12 * std::max(1.0, L.frobenius_norm()))
            throw EllipticityError("microstructure",
                                   "elasticity of phase " + label + " lacks major symmetry");
    }
};

/// Pointwise two-valued coefficient fields.
struct CoefficientSet {
    Field eps; ///< matrix field
    Field L;   ///< Mandel-matrix field
    Field M;   ///< Mandel-matrix field
};

inline CoefficientSet assemble_coefficients(const PhaseTensors& matrix,
                                            const PhaseTensors& inclusion,
                                            const Field& indicator) {
    matrix.validate("matrix");
    inclusion.validate("inclusion");
    const TorusGrid& g = indicator.grid();
    for (std::size_t p = 0; p < g.points(); ++p) {
        const double v = indicator.at(0, p);
        if (v != 0.0 && v != 1.0)
            throw EllipticityError("microstructure", "indicator field is not binary");
    }
    CoefficientSet c{Field(g, Rank::matrix), Field(g, Rank::mandel_matrix),
                     Field(g, Rank::mandel_matrix)};
    for (std::size_t p = 0; p < g.points(); ++p) {
        const bool in = indicator.at(0, p) != 0.0;
        c.eps.set_matrix(p, in ? inclusion.eps : matrix.eps);
        c.L.set_mandel(p, in ? inclusion.L : matrix.L);
        c.M.set_mandel(p, in ? inclusion.M : matrix.M);
    }
    return c;
}

/// Multi-phase extension: later (indicator, tensors) pairs overwrite
/// earlier ones where their indicator is set; the first entry is the
/// matrix (all-background) phase.
inline CoefficientSet
assemble_coefficients(const std::vector<std::pair<Field, PhaseTensors>>& phases) {
    if (phases.empty()) throw EllipticityError("microstructure", "no phases given");
    const TorusGrid& g = phases.front().first.grid();
    for (auto& [ind, tens] : phases) tens.validate("phase");
    CoefficientSet c{Field(g, Rank::matrix), Field(g, Rank::mandel_matrix),
                     Field(g, Rank::mandel_matrix)};
    for (std::size_t p = 0; p < g.points(); ++p) {
        const PhaseTensors* t = &phases.front().second;
        for (auto& [ind, tens] : phases)
            if (ind.at(0, p) != 0.0) t = &tens;
        c.eps.set_matrix(p, t->eps);
        c.L.set_mandel(p, t->L);
        c.M.set_mandel(p, t->M);
    }
    return c;
}

enum class ChargeMode { analytic, coating, corrector_weighted };

/// Zero-mean microscopic charge density.
struct ChargeFamily {
    std::string name;
    ChargeMode mode = ChargeMode::analytic;
    Field g;
    bool smooth = true;   ///< false flags discontinuous profiles in metadata
    double amplitude = 1.0;
};

inline void verify_neutral(const Field& g, double tol = 1e-12) {
    const double m = std::abs(mean_scalar(g));
    const double scale = std::max(1.0, l2_norm(g));
    if (m > tol * scale)
        throw NonNeutralChargeError("microstructure", "charge family mean " + std::to_string(m));
}

/// Analytic mode: sample and project to zero mean.
inline ChargeFamily make_analytic_charge(const TorusGrid& grid,
                                         const std::function<double(const Vec&)>& fn,
                                         std::string name = "g", bool smooth = true) {
    ChargeFamily f;
    f.name = std::move(name);
    f.mode = ChargeMode::analytic;
    f.g = project_zero_mean(sample_scalar(grid, fn));
    f.smooth = smooth;
    verify_neutral(f.g);
    return f;
}

/// Coating mode: the single-inclusion corrector profile restricted to the
/// shell of each coated inclusion (radii r .. (1+eta) r). The per-shell
/// mean is removed within the shell so the support is preserved.
inline ChargeFamily make_coating_charge(const PhaseGeometry& geom, const TorusGrid& grid,
                                        double ebar, int direction, std::string name = "g") {
    ChargeFamily fam;
    fam.name = std::move(name);
    fam.mode = ChargeMode::coating;
    fam.smooth = false; // sharp restriction to the shell
    fam.g = Field(grid, Rank::scalar);

    bool any = false;
    for (std::size_t i = 0; i < geom.inclusions.size(); ++i) {
        const auto& inc = geom.inclusions[i];
        if (inc.coating <= 0.0) continue;
        any = true;
        const double outer = (1.0 + inc.coating) * inc.radius;
        if (outer >= 0.5)
            throw SupportError("microstructure",
                               "coating shell of inclusion " + std::to_string(i) +
                                   " exits the cell");
        for (std::size_t j = 0; j < geom.inclusions.size(); ++j) {
            if (j == i) continue;
            if (torus_distance(inc.center, geom.inclusions[j].center) <=
                outer + geom.inclusions[j].radius)
                throw SupportError("microstructure",
                                   "coating shell of inclusion " + std::to_string(i) +
                                       " overlaps inclusion " + std::to_string(j));
        }

        // accumulate the profile and remove the per-shell mean in place
        std::vector<std::size_t> shell;
        double sum = 0.0;
        for (std::size_t p = 0; p < grid.points(); ++p) {
            const Vec y = grid.point(p);
            const double r = torus_distance(y, inc.center);
            if (r <= inc.radius || r > outer) continue;
            // rescale to the unit-ball frame of the single-inclusion problem
            Vec x(grid.dim());
            for (int d = 0; d < grid.dim(); ++d) {
                double dy = y[d] - inc.center[d];
                if (dy > 0.5) dy -= 1.0;
                if (dy < -0.5) dy += 1.0;
                x[d] = dy / inc.radius;
            }
            const double v = eshelby_corrector(ebar, grid.dim(), direction, x);
            fam.g.at(0, p) = v;
            sum += v;
            shell.push_back(p);
        }
        if (!shell.empty()) {
            const double shift = sum / static_cast<double>(shell.size());
            for (std::size_t p : shell) fam.g.at(0, p) -= shift;
        }
    }
    if (!any)
        throw SupportError("microstructure", "coating mode requires an inclusion with eta > 0");
    verify_neutral(fam.g);
    return fam;
}

/// Corrector-weighted mode: g = lambda * omega * chi_p, projected to zero
/// mean, with omega a smooth radial bump.
inline ChargeFamily make_corrector_weighted_charge(const Field& chi_p, const Vec& bump_center,
                                                   double bump_radius, double lambda = 1.0,
                                                   std::string name = "g") {
    const TorusGrid& grid = chi_p.grid();
    ChargeFamily fam;
    fam.name = std::move(name);
    fam.mode = ChargeMode::corrector_weighted;
    fam.amplitude = lambda;
    fam.g = Field(grid, Rank::scalar);
    for (std::size_t p = 0; p < grid.points(); ++p) {
        const double r = torus_distance(grid.point(p), bump_center);
        if (r >= bump_radius) continue;
        const double t = r / bump_radius;
        const double omega = std::exp(1.0 - 1.0 / (1.0 - t * t));
        fam.g.at(0, p) = lambda * omega * chi_p.at(0, p);
    }
    fam.g = project_zero_mean(fam.g);
    verify_neutral(fam.g);
    return fam;
}

} // namespace ehom

#endif
