#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ehom/cell_solver.hpp"
#include "test_helpers.hpp"

using namespace ehom;
using namespace ehom_test;

namespace {
double max_abs(const Field& f) {
    double m = 0;
    for (int c = 0; c < f.components(); ++c)
        for (std::size_t p = 0; p < f.points(); ++p) m = std::max(m, std::abs(f.at(c, p)));
    return m;
}

Field constant_eps(const TorusGrid& g, const Mat& m) {
    Field f(g, Rank::matrix);
    for (std::size_t p = 0; p < g.points(); ++p) f.set_matrix(p, m);
    return f;
}

/// Two-phase laminate permittivity along axis 0: value a on the first
/// half, b on the second half.
Field laminate_eps(const TorusGrid& g, double a, double b) {
    Field f(g, Rank::matrix);
    for (std::size_t p = 0; p < g.points(); ++p) {
        const double v = g.point(p)[0] < 0.5 ? a : b;
        f.set_matrix(p, Mat::identity(g.dim(), v));
    }
    return f;
}

Field constant_L(const TorusGrid& g, const Rank4& t) {
    Field f(g, Rank::mandel_matrix);
    for (std::size_t p = 0; p < g.points(); ++p) f.set_mandel(p, t);
    return f;
}
} // namespace

TEST_CASE("homogeneous medium has vanishing correctors") {
    TorusGrid g(2, 32);
    Field eps = constant_eps(g, Mat::identity(2, 2.5));
    for (int j = 0; j < 2; ++j) {
        auto sol = solve_dielectric_corrector(eps, j);
        CHECK(max_abs(sol.chi) == 0.0);
        CHECK(sol.certificate.converged);
    }
    Field L = constant_L(g, Rank4::isotropic(2, 1.0, 1.0));
    auto es = solve_elastic_corrector(L, 0, 1);
    CHECK(max_abs(es.X) == 0.0);
}

TEST_CASE("laminate corrector: exact piecewise-constant flux balance") {
    TorusGrid g(2, 64);
    Field eps = laminate_eps(g, 1.0, 3.0);
    SolverOptions opts;
    opts.tol = 1e-12;

    auto sol = solve_dielectric_corrector(eps, 0, opts);
    // dw1/dy1 = 1.5 on phase 1 and 0.5 on phase 2 (harmonic-mean flux)
    double err = 0;
    for (std::size_t p = 0; p < g.points(); ++p) {
        const double want = g.point(p)[0] < 0.5 ? 1.5 : 0.5;
        err = std::max(err, std::abs(sol.grad_w.at(0, p) - want));
        err = std::max(err, std::abs(sol.grad_w.at(1, p)));
    }
    CHECK(err <= 1e-8);
    CHECK(std::abs(mean_scalar(sol.chi)) <= 1e-12);

    // tangential loading is undisturbed
    auto sol2 = solve_dielectric_corrector(eps, 1, opts);
    CHECK(max_abs(sol2.chi) <= 1e-12);
}

TEST_CASE("energy consistency of the dielectric corrector") {
    TorusGrid g(2, 64);
    Vec c(2);
    c[0] = 0.5;
    c[1] = 0.5;
    Field ind = disk_indicator(g, c, 0.3);
    Field eps(g, Rank::matrix);
    for (std::size_t p = 0; p < g.points(); ++p)
        eps.set_matrix(p, Mat::identity(2, ind.at(0, p) != 0.0 ? 5.0 : 1.0));

    auto sol = solve_dielectric_corrector(eps, 0);
    Field flux = matvec(eps, sol.grad_w);
    const double energy = l2_inner(flux, sol.grad_w);
    double flux_mean_0 = mean(flux)[0];
    CHECK(std::abs(energy - flux_mean_0) <= 1e-8 * std::abs(energy));
}

TEST_CASE("charge corrector coincides with the poisson solution for unit eps") {
    TorusGrid g(2, 32);
    Field eps = constant_eps(g, Mat::identity(2, 1.0));
    auto fam = make_analytic_charge(g, [](const Vec& y) { return std::cos(two_pi * y[0]); });
    SolverOptions opts;
    opts.tol = 1e-12;
    auto theta = solve_charge_corrector(eps, fam, opts);
    auto psi = solve_periodic_poisson(fam.g);
    Field diff = theta.theta;
    diff -= psi.psi;
    CHECK(max_abs(diff) <= 1e-10);
    // sigma = eps grad theta - tau vanishes identically here
    CHECK(max_abs(theta.sigma) <= 1e-10);
}

TEST_CASE("zero charge gives zero corrector") {
    TorusGrid g(2, 32);
    Field eps = laminate_eps(g, 1.0, 4.0);
    Field zero(g, Rank::scalar);
    auto psi = solve_periodic_poisson(zero);
    auto sol = solve_charge_corrector(eps, zero, psi.tau);
    CHECK(max_abs(sol.theta) == 0.0);
}

TEST_CASE("charge corrector is linear in the charge amplitude") {
    TorusGrid g(2, 64);
    Field eps = laminate_eps(g, 1.0, 5.0);
    Vec c(2);
    c[0] = 0.5;
    c[1] = 0.5;
    Field bump = shell_bump(g, c, 0.15, 0.3);
    SolverOptions opts;
    opts.tol = 1e-11;
    auto psi1 = solve_periodic_poisson(bump);
    auto t1 = solve_charge_corrector(eps, bump, psi1.tau, opts);
    Field scaled = bump;
    scaled *= 3.0;
    auto psi3 = solve_periodic_poisson(scaled);
    auto t3 = solve_charge_corrector(eps, scaled, psi3.tau, opts);
    Field diff = t1.theta;
    diff *= 3.0;
    diff -= t3.theta;
    CHECK(max_abs(diff) <= 1e-8 * max_abs(t3.theta));
}

TEST_CASE("elastic corrector: symmetric pair loading and zero means") {
    TorusGrid g(2, 32);
    Field L(g, Rank::mandel_matrix);
    for (std::size_t p = 0; p < g.points(); ++p) {
        const double s = g.point(p)[0] < 0.5 ? 1.0 : 3.0;
        L.set_mandel(p, Rank4::isotropic(2, 0.7 * s, 1.1 * s));
    }
    auto s01 = solve_elastic_corrector(L, 0, 1);
    auto s10 = solve_elastic_corrector(L, 1, 0);
    Field diff = s01.X;
    diff -= s10.X;
    CHECK(max_abs(diff) == 0.0); // loading is symmetrized, X_ij == X_ji
    auto m = mean(s01.X);
    CHECK(std::abs(m[0]) <= 1e-12);
    CHECK(std::abs(m[1]) <= 1e-12);
}

TEST_CASE("elastic laminate matches the rank-one laminate algebra") {
    TorusGrid g(2, 256);
    Rank4 L1 = Rank4::isotropic(2, 1.0, 1.0);
    Rank4 L2 = Rank4::isotropic(2, 2.0, 4.0);
    Field L(g, Rank::mandel_matrix);
    for (std::size_t p = 0; p < g.points(); ++p)
        L.set_mandel(p, g.point(p)[0] < 0.5 ? L1 : L2);

    SolverOptions opts;
    opts.tol = 1e-10;
    auto sol = solve_elastic_corrector(L, 0, 0, opts);
    auto [E1, E2] = laminate_strains(L1, L2, 0.5, SymMat::sym_outer(Vec::unit(2, 0), Vec::unit(2, 0)));

    // compare phase-averaged strains against the oracle
    SymMat avg1(2), avg2(2);
    std::size_t c1 = 0, c2 = 0;
    for (std::size_t p = 0; p < g.points(); ++p) {
        SymMat s = sol.grad_W.sym_at(p);
        if (g.point(p)[0] < 0.5) {
            avg1 += s;
            ++c1;
        } else {
            avg2 += s;
            ++c2;
        }
    }
    avg1 *= 1.0 / static_cast<double>(c1);
    avg2 *= 1.0 / static_cast<double>(c2);
    const double scale = std::max(E1.norm(), E2.norm());
    for (int a = 0; a < 3; ++a) {
        CHECK(std::abs(avg1[a] - E1[a]) <= 0.005 * scale);
        CHECK(std::abs(avg2[a] - E2[a]) <= 0.005 * scale);
    }
}

TEST_CASE("solver guards: contrast cap and iteration cap") {
    TorusGrid g(2, 16);
    Field eps = laminate_eps(g, 1.0, 2e7);
    CHECK_THROWS_AS(solve_dielectric_corrector(eps, 0), ContrastError);

    Vec c(2);
    c[0] = 0.5;
    c[1] = 0.5;
    Field ind = disk_indicator(g, c, 0.3);
    Field eps2(g, Rank::matrix);
    for (std::size_t p = 0; p < g.points(); ++p)
        eps2.set_matrix(p, Mat::identity(2, ind.at(0, p) != 0.0 ? 100.0 : 1.0));
    SolverOptions tight;
    tight.max_iter = 2;
    tight.tol = 1e-14;
    CHECK_THROWS_AS(solve_dielectric_corrector(eps2, 0, tight), ConvergenceError);
}

TEST_CASE("3D laminate: harmonic and arithmetic directions") {
    TorusGrid g(3, 16);
    Field eps(g, Rank::matrix);
    for (std::size_t p = 0; p < g.points(); ++p)
        eps.set_matrix(p, Mat::identity(3, g.point(p)[0] < 0.5 ? 1.0 : 3.0));
    SolverOptions opts;
    opts.tol = 1e-11;
    auto s0 = solve_dielectric_corrector(eps, 0, opts);
    auto s2 = solve_dielectric_corrector(eps, 2, opts);
    // normal flux balances at the harmonic mean, tangential is untouched
    Field flux = matvec(eps, s0.grad_w);
    CHECK(mean(flux)[0] == doctest::Approx(1.5).epsilon(1e-8));
    CHECK(max_abs(s2.chi) <= 1e-11);

    Field L(g, Rank::mandel_matrix);
    for (std::size_t p = 0; p < g.points(); ++p)
        L.set_mandel(p, Rank4::isotropic(3, 1.0, g.point(p)[0] < 0.5 ? 1.0 : 2.0));
    auto es = solve_elastic_corrector(L, 1, 2, opts);
    CHECK(std::abs(mean(es.X)[0]) <= 1e-12);
    CHECK(es.certificate.converged);
}

TEST_CASE("certified residuals on a disk microstructure") {
    TorusGrid g(2, 64);
    Vec c(2);
    c[0] = 0.5;
    c[1] = 0.5;
    Field ind = disk_indicator(g, c, 0.25);
    Field eps(g, Rank::matrix);
    for (std::size_t p = 0; p < g.points(); ++p)
        eps.set_matrix(p, Mat::identity(2, ind.at(0, p) != 0.0 ? 5.0 : 1.0));

    SolverOptions opts;
    opts.record_history = true;
    auto sol = solve_dielectric_corrector(eps, 0, opts);
    CHECK(sol.certificate.converged);
    CHECK(sol.certificate.rel_residual <= 1e-6);
    CHECK(sol.certificate.iterations > 1);
    CHECK(sol.certificate.history.size() >= static_cast<std::size_t>(sol.certificate.iterations));
    CHECK(std::abs(mean_scalar(sol.chi)) <= 1e-12);
}
