#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ehom/microstructure.hpp"
#include "test_helpers.hpp"

using namespace ehom;
using namespace ehom_test;

namespace {
Vec vec2(double a, double b) {
    Vec v(2);
    v[0] = a;
    v[1] = b;
    return v;
}
Vec vec3(double a, double b, double c) {
    Vec v(3);
    v[0] = a;
    v[1] = b;
    v[2] = c;
    return v;
}
PhaseTensors simple_phase(int dim, double eps_scale, double mu = 1.0, double lambda = 1.0) {
    PhaseTensors t;
    t.eps = Mat::identity(dim, eps_scale);
    t.L = Rank4::isotropic(dim, lambda, mu);
    t.M = Rank4::identity(dim, 0.5);
    return t;
}
} // namespace

TEST_CASE("empty inclusion list voxelizes to all zeros") {
    TorusGrid g(2, 16);
    PhaseGeometry geom;
    Field ind = build_indicator(geom, g);
    for (std::size_t p = 0; p < g.points(); ++p) CHECK(ind.at(0, p) == 0.0);
}

TEST_CASE("disk volume fraction converges to pi/16 at O(1/n)") {
    PhaseGeometry geom;
    geom.inclusions.push_back({vec2(0.5, 0.5), 0.25, 0.0});
    const double exact = std::numbers::pi / 16.0;
    double prev_err = 1.0;
    for (int n : {64, 128, 256}) {
        TorusGrid g(2, n);
        double frac = mean_scalar(build_indicator(geom, g));
        double err = std::abs(frac - exact) / exact;
        if (n == 256) CHECK(err < 0.01);
        CHECK(err <= prev_err);
        prev_err = err;
    }
}

TEST_CASE("overlapping periodized inclusions are rejected") {
    TorusGrid g(2, 32);
    PhaseGeometry geom;
    geom.inclusions.push_back({vec2(0.25, 0.5), 0.3, 0.0});
    geom.inclusions.push_back({vec2(0.75, 0.5), 0.3, 0.0});
    CHECK_THROWS_AS(build_indicator(geom, g), OverlapError);

    PhaseGeometry self;
    self.inclusions.push_back({vec2(0.5, 0.5), 0.55, 0.0});
    CHECK_THROWS_AS(build_indicator(self, g), OverlapError);
}

TEST_CASE("disconnected matrix phase is rejected") {
    TorusGrid g(2, 32);
    PhaseGeometry geom;
    geom.inclusions.push_back({vec2(0.5, 0.5), 0.1, 0.0});
    geom.level_set = [](const Vec& y) {
        const bool slab = (y[0] > 0.2 && y[0] < 0.4) || (y[0] > 0.6 && y[0] < 0.8);
        return slab ? -1.0 : 1.0;
    };
    CHECK_THROWS_AS(build_indicator(geom, g), DisconnectedMatrixError);
}

TEST_CASE("assemble_coefficients: identical phases give a constant field") {
    TorusGrid g(2, 16);
    PhaseGeometry geom;
    geom.inclusions.push_back({vec2(0.5, 0.5), 0.25, 0.0});
    Field ind = build_indicator(geom, g);
    auto c = assemble_coefficients(simple_phase(2, 1.0), simple_phase(2, 1.0), ind);
    for (std::size_t p = 0; p < g.points(); ++p) {
        Mat e = c.eps.matrix_at(p);
        CHECK(e(0, 0) == 1.0);
        CHECK(e(1, 1) == 1.0);
        CHECK(e(0, 1) == 0.0);
    }
}

TEST_CASE("assemble_coefficients is pointwise on the indicator support") {
    TorusGrid g(2, 64);
    PhaseGeometry geom;
    geom.inclusions.push_back({vec2(0.5, 0.5), 0.25, 0.0});
    Field ind = build_indicator(geom, g);
    auto c = assemble_coefficients(simple_phase(2, 1.0), simple_phase(2, 5.0), ind);
    for (std::size_t p = 0; p < g.points(); ++p) {
        const double want = ind.at(0, p) != 0.0 ? 5.0 : 1.0;
        CHECK(c.eps.matrix_at(p)(0, 0) == want);
        CHECK(c.eps.matrix_at(p)(1, 1) == want);
    }
}

TEST_CASE("label swap with complemented indicator yields identical coefficients") {
    TorusGrid g(2, 32);
    PhaseGeometry geom;
    geom.inclusions.push_back({vec2(0.4, 0.6), 0.2, 0.0});
    Field ind = build_indicator(geom, g);
    Field comp = ind;
    for (std::size_t p = 0; p < g.points(); ++p) comp.at(0, p) = 1.0 - ind.at(0, p);
    PhaseTensors a = simple_phase(2, 1.0), b = simple_phase(2, 3.0);
    auto c1 = assemble_coefficients(a, b, ind);
    auto c2 = assemble_coefficients(b, a, comp);
    for (std::size_t p = 0; p < g.points(); ++p)
        for (int k = 0; k < c1.eps.components(); ++k)
            CHECK(c1.eps.at(k, p) == c2.eps.at(k, p));
}

TEST_CASE("non-elliptic phase tensors are rejected") {
    TorusGrid g(2, 16);
    PhaseGeometry geom;
    geom.inclusions.push_back({vec2(0.5, 0.5), 0.2, 0.0});
    Field ind = build_indicator(geom, g);
    PhaseTensors bad = simple_phase(2, 1.0);
    bad.L(0, 0) = -1.0; // negative eigenvalue
    CHECK_THROWS_AS(assemble_coefficients(simple_phase(2, 1.0), bad, ind), EllipticityError);

    PhaseTensors badeps = simple_phase(2, -2.0);
    CHECK_THROWS_AS(assemble_coefficients(simple_phase(2, 1.0), badeps, ind), EllipticityError);
}

TEST_CASE("analytic charge: a zero-mean profile is returned unchanged") {
    TorusGrid g(2, 32);
    auto fam = make_analytic_charge(g, [](const Vec& y) { return std::cos(two_pi * y[0]); });
    double err = 0;
    for (std::size_t p = 0; p < g.points(); ++p)
        err = std::max(err, std::abs(fam.g.at(0, p) - std::cos(two_pi * g.point(p)[0])));
    CHECK(err <= 1e-14);
    CHECK(std::abs(mean_scalar(fam.g)) <= 1e-12);
}

TEST_CASE("corrector-weighted charge with vanishing corrector is zero") {
    TorusGrid g(2, 32);
    Field chi(g, Rank::scalar); // homogeneous medium: chi == 0
    auto fam = make_corrector_weighted_charge(chi, vec2(0.5, 0.5), 0.4, 2.0);
    for (std::size_t p = 0; p < g.points(); ++p) CHECK(fam.g.at(0, p) == 0.0);
}

TEST_CASE("coating charge carries the single-inclusion profile on the shell") {
    TorusGrid g(3, 64);
    PhaseGeometry geom;
    geom.inclusions.push_back({vec3(0.5, 0.5, 0.5), 0.15, 1.0});
    const double ebar = 5.0;
    auto fam = make_coating_charge(geom, g, ebar, 0);

    // flagged as a sharp profile, neutral overall and per shell
    CHECK_FALSE(fam.smooth);
    CHECK(std::abs(mean_scalar(fam.g)) <= 1e-12);

    double shell_sum = 0.0;
    std::size_t shell_count = 0;
    double max_dev = 0.0;
    // recover the constant shift the projection removed, then compare
    double shift = 0.0;
    {
        double profile_sum = 0.0;
        for (std::size_t p = 0; p < g.points(); ++p) {
            const Vec y = g.point(p);
            const double r = torus_dist(y, vec3(0.5, 0.5, 0.5));
            if (r <= 0.15 || r > 0.3) continue;
            Vec x(3);
            for (int d = 0; d < 3; ++d) x[d] = (y[d] - 0.5) / 0.15;
            profile_sum += eshelby_corrector(ebar, 3, 0, x) - fam.g.at(0, p);
            ++shell_count;
        }
        shift = profile_sum / static_cast<double>(shell_count);
    }
    for (std::size_t p = 0; p < g.points(); ++p) {
        const Vec y = g.point(p);
        const double r = torus_dist(y, vec3(0.5, 0.5, 0.5));
        if (r <= 0.15 || r > 0.3) {
            CHECK(fam.g.at(0, p) == 0.0);
            continue;
        }
        Vec x(3);
        for (int d = 0; d < 3; ++d) x[d] = (y[d] - 0.5) / 0.15;
        max_dev = std::max(max_dev, std::abs(fam.g.at(0, p) + shift -
                                             eshelby_corrector(ebar, 3, 0, x)));
        shell_sum += fam.g.at(0, p);
    }
    CHECK(max_dev <= 1e-12);
    CHECK(std::abs(shell_sum) / static_cast<double>(shell_count) <= 1e-10);
    // the exact profile is odd, so the removed shift is itself small
    CHECK(std::abs(shift) <= 1e-2);
}

TEST_CASE("multi-phase assembly overlays later phases") {
    TorusGrid g(2, 32);
    PhaseGeometry g1, g2;
    g1.inclusions.push_back({vec2(0.3, 0.5), 0.15, 0.0});
    g2.inclusions.push_back({vec2(0.7, 0.5), 0.15, 0.0});
    Field i1 = build_indicator(g1, g);
    Field i2 = build_indicator(g2, g);
    Field zero(g, Rank::scalar);
    auto c = assemble_coefficients({{zero, simple_phase(2, 1.0)},
                                    {i1, simple_phase(2, 3.0)},
                                    {i2, simple_phase(2, 7.0)}});
    for (std::size_t p = 0; p < g.points(); ++p) {
        double want = 1.0;
        if (i1.at(0, p) != 0.0) want = 3.0;
        if (i2.at(0, p) != 0.0) want = 7.0;
        CHECK(c.eps.matrix_at(p)(0, 0) == want);
    }
}

TEST_CASE("coating support violations are rejected") {
    TorusGrid g(2, 32);
    PhaseGeometry wide;
    wide.inclusions.push_back({vec2(0.5, 0.5), 0.3, 1.0}); // outer 0.6 > 0.5
    CHECK_THROWS_AS(make_coating_charge(wide, g, 5.0, 0), SupportError);

    PhaseGeometry crowd;
    crowd.inclusions.push_back({vec2(0.3, 0.5), 0.1, 1.5}); // shell to 0.25
    crowd.inclusions.push_back({vec2(0.62, 0.5), 0.1, 0.0});
    CHECK_THROWS_AS(make_coating_charge(crowd, g, 5.0, 0), SupportError);

    PhaseGeometry none;
    none.inclusions.push_back({vec2(0.5, 0.5), 0.2, 0.0});
    CHECK_THROWS_AS(make_coating_charge(none, g, 5.0, 0), SupportError);
}
