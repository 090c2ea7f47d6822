#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ehom/effective.hpp"
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

Field scalar_two_phase(const TorusGrid& g, const Field& ind, double matrix_val, double incl_val) {
    Field f(g, Rank::matrix);
    for (std::size_t p = 0; p < g.points(); ++p)
        f.set_matrix(p, Mat::identity(g.dim(), ind.at(0, p) != 0.0 ? incl_val : matrix_val));
    return f;
}

struct CellFieldSet {
    std::vector<Field> chi, grad_w;
    std::vector<SolveCertificate> certs;
};

CellFieldSet solve_correctors(const Field& eps, double tol = 1e-10) {
    CellFieldSet s;
    SolverOptions opts;
    opts.tol = tol;
    for (int j = 0; j < eps.grid().dim(); ++j) {
        auto sol = solve_dielectric_corrector(eps, j, opts);
        s.chi.push_back(sol.chi);
        s.grad_w.push_back(sol.grad_w);
        s.certs.push_back(sol.certificate);
    }
    return s;
}
} // namespace

TEST_CASE("homogeneous permittivity is reproduced exactly") {
    TorusGrid g(2, 32);
    Field eps(g, Rank::matrix);
    for (std::size_t p = 0; p < g.points(); ++p) eps.set_matrix(p, Mat::identity(2, 2.5));
    auto cs = solve_correctors(eps);
    auto eff = effective_permittivity(eps, cs.grad_w);
    CHECK(eff.eps_h(0, 0) == doctest::Approx(2.5).epsilon(1e-14));
    CHECK(eff.eps_h(1, 1) == doctest::Approx(2.5).epsilon(1e-14));
    CHECK(std::abs(eff.eps_h(0, 1)) <= 1e-15);
}

TEST_CASE("2D laminate: harmonic and arithmetic means") {
    TorusGrid g(2, 256);
    Field ind = laminate_indicator(g);
    Field eps = scalar_two_phase(g, ind, 1.0, 3.0);
    auto cs = solve_correctors(eps);
    auto eff = effective_permittivity(eps, cs.grad_w);
    CHECK(std::abs(eff.eps_h(0, 0) - 1.5) <= 0.001 * 1.5);
    CHECK(std::abs(eff.eps_h(1, 1) - 2.0) <= 0.001 * 2.0);
    CHECK(std::abs(eff.eps_h(0, 1)) <= 1e-10);

    // oracle cross-check through the closed-form laminate algebra
    Mat oracle = laminate_permittivity(Mat::identity(2, 1.0), Mat::identity(2, 3.0), 0.5);
    CHECK(oracle(0, 0) == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(oracle(1, 1) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("2D checkerboard satisfies the duality value") {
    TorusGrid g(2, 256);
    Field ind = checkerboard_indicator(g);
    Field eps = scalar_two_phase(g, ind, 1.0, 4.0);
    auto cs = solve_correctors(eps, 1e-8);
    auto eff = effective_permittivity(eps, cs.grad_w);
    CHECK(std::abs(eff.eps_h(0, 0) - 2.0) <= 0.01 * 2.0);
    CHECK(std::abs(eff.eps_h(1, 1) - 2.0) <= 0.01 * 2.0);
    CHECK(std::abs(eff.eps_h(0, 1)) <= 1e-6);
}

TEST_CASE("mesh refinement is Cauchy on a disk geometry") {
    std::vector<Mat> eff;
    for (int n : {32, 64, 128}) {
        TorusGrid g(2, n);
        PhaseGeometry geom;
        geom.inclusions.push_back({vec2(0.5, 0.5), 0.3, 0.0});
        Field ind = build_indicator(geom, g);
        Field eps = scalar_two_phase(g, ind, 1.0, 5.0);
        auto cs = solve_correctors(eps);
        eff.push_back(effective_permittivity(eps, cs.grad_w).eps_h);
    }
    const double d01 = (eff[1] - eff[0]).frobenius_norm();
    const double d12 = (eff[2] - eff[1]).frobenius_norm();
    CHECK(d12 <= d01);
}

TEST_CASE("charge coupling: homogeneous medium gives a = 0") {
    TorusGrid g(2, 32);
    Field eps(g, Rank::matrix);
    for (std::size_t p = 0; p < g.points(); ++p) eps.set_matrix(p, Mat::identity(2, 1.0));
    auto cs = solve_correctors(eps);
    std::vector<ChargeFamily> fams;
    fams.push_back(make_analytic_charge(g, [](const Vec& y) { return std::cos(two_pi * y[0]); }));
    std::vector<PoissonSolution> psi;
    std::vector<Field> theta;
    for (auto& f : fams) {
        psi.push_back(solve_periodic_poisson(f.g));
        theta.push_back(solve_charge_corrector(eps, f.g, psi.back().tau).theta);
    }
    auto cc = charge_coupling(fams, psi, cs.chi, cs.grad_w, theta, eps);
    CHECK(cc.a.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(cc.b.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("charge coupling: triple formula and b = -a on a shell-charged disk") {
    TorusGrid g(2, 128);
    PhaseGeometry geom;
    geom.inclusions.push_back({vec2(0.5, 0.5), 0.2, 0.6});
    Field ind = build_indicator(geom, g);
    Field eps = scalar_two_phase(g, ind, 1.0, 5.0);
    auto cs = solve_correctors(eps, 1e-10);

    std::vector<ChargeFamily> fams;
    for (int p = 0; p < 2; ++p)
        fams.push_back(make_coating_charge(geom, g, 5.0, p, "g" + std::to_string(p + 1)));
    std::vector<PoissonSolution> psi;
    std::vector<Field> theta, sigma;
    SolverOptions opts;
    opts.tol = 1e-10;
    for (auto& f : fams) {
        psi.push_back(solve_periodic_poisson(f.g));
        auto sol = solve_charge_corrector(eps, f.g, psi.back().tau, opts);
        theta.push_back(sol.theta);
        sigma.push_back(sol.sigma);
    }
    auto cc = charge_coupling(fams, psi, cs.chi, cs.grad_w, theta, eps);
    CHECK(cc.max_discrepancy <= 1e-6);
    CHECK(cc.b_discrepancy <= 1e-6);

    // mean(sigma) = b = -a, checked to the tighter solver-level tolerance
    const double scale = cc.a.cwiseAbs().maxCoeff();
    for (int p = 0; p < 2; ++p) {
        Vec ms = mean_vector(sigma[p]);
        for (int j = 0; j < 2; ++j) CHECK(std::abs(ms[j] + cc.a(j, p)) <= 1e-8 * scale);
    }
}

TEST_CASE("charge coupling is linear in the charge amplitude") {
    TorusGrid g(2, 64);
    PhaseGeometry geom;
    geom.inclusions.push_back({vec2(0.5, 0.5), 0.25, 0.0});
    Field ind = build_indicator(geom, g);
    Field eps = scalar_two_phase(g, ind, 1.0, 4.0);
    auto cs = solve_correctors(eps);

    auto run = [&](double lam) {
        std::vector<ChargeFamily> fams;
        fams.push_back(make_analytic_charge(
            g, [lam](const Vec& y) { return lam * std::sin(two_pi * y[1]); }));
        std::vector<PoissonSolution> psi;
        std::vector<Field> theta;
        SolverOptions opts;
        opts.tol = 1e-11;
        for (auto& f : fams) {
            psi.push_back(solve_periodic_poisson(f.g));
            theta.push_back(solve_charge_corrector(eps, f.g, psi.back().tau, opts).theta);
        }
        return charge_coupling(fams, psi, cs.chi, cs.grad_w, theta, eps).a;
    };
    auto a1 = run(1.0);
    auto a3 = run(3.0);
    CHECK((a3 - 3.0 * a1).cwiseAbs().maxCoeff() <= 1e-9 * a3.cwiseAbs().maxCoeff());
}

TEST_CASE("corrector-weighted charges make a symmetric negative definite") {
    TorusGrid g(2, 64);
    PhaseGeometry geom;
    geom.inclusions.push_back({vec2(0.5, 0.5), 0.25, 0.0});
    Field ind = build_indicator(geom, g);
    Field eps = scalar_two_phase(g, ind, 1.0, 5.0);
    auto cs = solve_correctors(eps);

    std::vector<ChargeFamily> fams;
    std::vector<PoissonSolution> psi;
    std::vector<Field> theta;
    for (int p = 0; p < 2; ++p) {
        fams.push_back(make_corrector_weighted_charge(cs.chi[p], vec2(0.5, 0.5), 0.45, 1.0,
                                                      "g" + std::to_string(p + 1)));
        psi.push_back(solve_periodic_poisson(fams.back().g));
        theta.push_back(solve_charge_corrector(eps, fams.back().g, psi.back().tau).theta);
    }
    auto cc = charge_coupling(fams, psi, cs.chi, cs.grad_w, theta, eps);
    Mat a(2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) a(i, j) = cc.a(i, j);
    CHECK(a.asymmetry() / a.frobenius_norm() <= 1e-6);
    auto ev = sym_eigenvalues(a);
    CHECK(ev.back() < 0.0);
}

TEST_CASE("kappa: analytic value, positivity, quadratic scaling") {
    TorusGrid g(2, 32);
    Field eps(g, Rank::matrix);
    for (std::size_t p = 0; p < g.points(); ++p) eps.set_matrix(p, Mat::identity(2, 1.0));

    auto run = [&](double lam) {
        std::vector<ChargeFamily> fams;
        fams.push_back(make_analytic_charge(
            g, [lam](const Vec& y) { return lam * std::cos(two_pi * y[0]); }));
        std::vector<PoissonSolution> psi;
        std::vector<Field> theta;
        SolverOptions opts;
        opts.tol = 1e-12;
        psi.push_back(solve_periodic_poisson(fams[0].g));
        theta.push_back(solve_charge_corrector(eps, fams[0].g, psi.back().tau, opts).theta);
        return kappa(eps, psi, theta);
    };

    auto k1 = run(1.0);
    const double exact = 1.0 / (8.0 * std::numbers::pi * std::numbers::pi);
    CHECK(std::abs(k1.kappa(0, 0) - exact) <= 1e-8);
    CHECK(k1.energy_residual[0] <= 1e-6);

    auto k2 = run(2.0);
    CHECK(std::abs(k2.kappa(0, 0) - 4.0 * k1.kappa(0, 0)) <= 1e-10);

    // zero charge: kappa vanishes and positivity is not enforced
    std::vector<PoissonSolution> psi0{solve_periodic_poisson(Field(g, Rank::scalar))};
    std::vector<Field> theta0{Field(g, Rank::scalar)};
    auto k0 = kappa(eps, psi0, theta0);
    CHECK(k0.kappa(0, 0) == 0.0);
}

TEST_CASE("effective elasticity: homogeneous identity and laminate oracle") {
    TorusGrid g(2, 32);
    Rank4 L0 = Rank4::isotropic(2, 1.2, 0.8);
    Field L(g, Rank::mandel_matrix);
    for (std::size_t p = 0; p < g.points(); ++p) L.set_mandel(p, L0);

    std::vector<Field> grad_W;
    const auto& pairs = mandel_pairs(2);
    for (int a = 0; a < 3; ++a) {
        auto sol = solve_elastic_corrector(L, pairs[a].first, pairs[a].second);
        grad_W.push_back(sol.grad_W);
    }
    auto eff = effective_elasticity(L, grad_W);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            CHECK(std::abs(eff.L_h(a, b) - L0(a, b)) <= 1e-12 * std::max(1.0, std::abs(L0(a, b))));
}

TEST_CASE("effective elasticity: two-phase laminate matches rank-one algebra") {
    TorusGrid g(2, 128);
    Rank4 L1 = Rank4::isotropic(2, 1.0, 1.0);
    Rank4 L2 = Rank4::isotropic(2, 2.0, 4.0);
    Field ind = laminate_indicator(g);
    Field L(g, Rank::mandel_matrix);
    for (std::size_t p = 0; p < g.points(); ++p)
        L.set_mandel(p, ind.at(0, p) != 0.0 ? L2 : L1);

    SolverOptions opts;
    opts.tol = 1e-10;
    std::vector<Field> grad_W;
    const auto& pairs = mandel_pairs(2);
    for (int a = 0; a < 3; ++a)
        grad_W.push_back(solve_elastic_corrector(L, pairs[a].first, pairs[a].second, opts).grad_W);
    auto eff = effective_elasticity(L, grad_W);
    Rank4 oracle = laminate_elasticity(L1, L2, 0.5);
    Rank4 diff = eff.L_h - oracle;
    CHECK(diff.frobenius_norm() <= 0.005 * oracle.frobenius_norm());
    CHECK(eff.major_symmetry_residual <= 1e-8);
    CHECK(eff.flux_energy_gap <= 1e-8);
}

TEST_CASE("electro coupling: homogeneous trivial identities") {
    TorusGrid g(2, 32);
    Field eps(g, Rank::matrix);
    Field Lf(g, Rank::mandel_matrix);
    Field Mf(g, Rank::mandel_matrix);
    Rank4 M0(2);
    // a generic minor-symmetric electrostriction tensor (not major symmetric)
    M0(0, 0) = 0.9;
    M0(0, 1) = 0.2;
    M0(1, 0) = -0.1;
    M0(1, 1) = 1.1;
    M0(2, 2) = 0.7;
    M0(0, 2) = 0.3;
    for (std::size_t p = 0; p < g.points(); ++p) {
        eps.set_matrix(p, Mat::identity(2, 1.0));
        Lf.set_mandel(p, Rank4::isotropic(2, 1.0, 1.0));
        Mf.set_mandel(p, M0);
    }
    auto cs = solve_correctors(eps);
    std::vector<Field> grad_W;
    const auto& pairs = mandel_pairs(2);
    for (int a = 0; a < 3; ++a)
        grad_W.push_back(solve_elastic_corrector(Lf, pairs[a].first, pairs[a].second).grad_W);

    SolverOptions opts;
    opts.tol = 1e-12;
    std::vector<ChargeFamily> fams;
    fams.push_back(make_analytic_charge(g, [](const Vec& y) { return std::cos(two_pi * y[0]); }));
    std::vector<Field> theta;
    theta.push_back(solve_charge_corrector(eps, fams[0], opts).theta);

    auto ec = electro_coupling(Mf, cs.grad_w, theta, grad_W);

    // M_h = M exactly for homogeneous media
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            CHECK(std::abs(ec.M_h(a, b) - M0(a, b)) <= 1e-12);

    // N_h = 0: grad theta has zero mean against constant factors
    CHECK(ec.N_h[0].frobenius_norm() <= 1e-12);

    // P_h = M(e1 x e1) / (8 pi^2) for the single resolved mode
    SymMat e11 = SymMat::sym_outer(Vec::unit(2, 0), Vec::unit(2, 0));
    Mat expect = M0.apply(e11).to_full();
    expect *= 1.0 / (8.0 * std::numbers::pi * std::numbers::pi);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(std::abs(ec.P_h[0](i, j) - expect(i, j)) <= 1e-10);
}

TEST_CASE("enhanced permittivity: affine in lambda, ellipticity tracking") {
    Mat eps_h = Mat::identity(2, 2.0);
    eps_h(0, 1) = eps_h(1, 0) = 0.1;
    Eigen::MatrixXd a0(2, 2);
    a0 << -0.5, -0.05, -0.05, -0.3; // symmetric negative definite

    auto e0 = enhanced_permittivity(eps_h, a0, 0.0);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(e0.eps_tilde(i, j) == eps_h(i, j));

    // Rayleigh quotient affine in lambda, exactly
    Vec xi(2);
    xi[0] = 0.6;
    xi[1] = -0.8;
    auto e1 = enhanced_permittivity(eps_h, a0, 1.0);
    auto e2 = enhanced_permittivity(eps_h, a0, 2.0);
    const double q0 = e0.eps_tilde.quad(xi), q1 = e1.eps_tilde.quad(xi), q2 = e2.eps_tilde.quad(xi);
    CHECK(std::abs((q2 - q1) - (q1 - q0)) <= 1e-14);
    CHECK(q1 > q0); // increasing since a0 is negative definite

    // min eigenvalue grows without bound; sign-flipped charges degrade
    auto big = enhanced_permittivity(eps_h, a0, 100.0);
    CHECK(big.eigenvalues.front() > sym_eigenvalues(eps_h).back());
    auto neg = enhanced_permittivity(eps_h, a0, -10.0);
    CHECK_FALSE(neg.elliptic);
    CHECK(neg.eigenvalues.front() < e0.eigenvalues.front());
}

TEST_CASE("voigt-reuss bracket holds on random two-phase geometries") {
    for (unsigned seed : {1u, 7u}) {
        std::mt19937 rng(seed);
        std::uniform_real_distribution<double> uni(0.1, 0.35);
        TorusGrid g(2, 64);
        PhaseGeometry geom;
        geom.inclusions.push_back({vec2(0.3 + 0.1 * uni(rng), 0.5), uni(rng), 0.0});
        Field ind = build_indicator(geom, g);
        Field eps = scalar_two_phase(g, ind, 1.0, 3.0 + 10.0 * uni(rng));
        auto cs = solve_correctors(eps);
        auto eff = effective_permittivity(eps, cs.grad_w);
        CHECK(eff.reuss_margin >= -1e-9);
        CHECK(eff.voigt_margin >= -1e-9);
    }
}
