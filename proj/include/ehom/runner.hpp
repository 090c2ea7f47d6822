#ifndef EHOM_RUNNER_HPP
#define EHOM_RUNNER_HPP

#include <atomic>
#include <filesystem>
#include <functional>
#include <iostream>
#include <thread>

#include "ehom/config.hpp"
#include "ehom/dilute.hpp"
#include "ehom/effective.hpp"
#include "ehom/io.hpp"
#include "ehom/twoscale.hpp"

namespace ehom {

struct RunOptions {
    std::string config_path;
    std::string output_dir = ".";
    bool verbose = false;
    int threads = 1;
};

/// Deterministic worker pool: tasks are indexed, results are stored by
/// index by the callers, so aggregation does not depend on completion
/// order.
template <class F>
void parallel_for(int count, int threads, F&& body) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    const int nthreads = std::min(threads, count);
    for (int t = 0; t < nthreads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Config -> domain objects

inline TorusGrid parse_grid(const Config& cfg) {
    cfg.require_section("grid");
    const int dim = cfg.get_int("grid", "dimension", 2);
    const int n = cfg.get_int("grid", "resolution");
    try {
        return TorusGrid(dim, n);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("cli", e.what());
    }
}

struct GeometrySpec {
    std::string kind;
    PhaseGeometry geometry;
    Field indicator;
};

inline GeometrySpec parse_geometry(const Config& cfg, const TorusGrid& grid) {
    cfg.require_section("geometry");
    GeometrySpec out;
    out.kind = cfg.get_string("geometry", "kind", "inclusions");
    if (out.kind == "inclusions") {
        if (cfg.has("geometry", "inclusion")) {
            for (const auto& row : cfg.rows("geometry", "inclusion")) {
                if (static_cast<int>(row.size()) < grid.dim() + 1)
                    throw ConfigError("cli", "inclusion rows need center coordinates and radius");
                Inclusion inc;
                inc.center = Vec(grid.dim());
                for (int d = 0; d < grid.dim(); ++d) inc.center[d] = std::stod(row[d]);
                inc.radius = std::stod(row[grid.dim()]);
                if (static_cast<int>(row.size()) > grid.dim() + 1)
                    inc.coating = std::stod(row[grid.dim() + 1]);
                out.geometry.inclusions.push_back(inc);
            }
        }
        out.indicator = build_indicator(out.geometry, grid);
    } else if (out.kind == "laminate") {
        out.indicator = laminate_indicator(grid, cfg.get_int("geometry", "axis", 0),
                                           cfg.get_number("geometry", "fraction", 0.5));
    } else if (out.kind == "checkerboard") {
        out.indicator = checkerboard_indicator(grid);
    } else if (out.kind == "none") {
        out.indicator = Field(grid, Rank::scalar);
    } else {
        throw ConfigError("cli", "unknown geometry kind '" + out.kind + "'");
    }
    return out;
}

inline PhaseTensors parse_phase(const Config& cfg, const std::string& section, int dim) {
    cfg.require_section(section);
    PhaseTensors t;
    auto eps_list = cfg.get_list(section, "eps", {1.0});
    if (eps_list.size() == 1) {
        t.eps = Mat::identity(dim, eps_list[0]);
    } else if (static_cast<int>(eps_list.size()) == dim * dim) {
        t.eps = Mat(dim);
        for (int i = 0; i < dim * dim; ++i) t.eps.a[i] = eps_list[i];
    } else {
        throw ConfigError("cli", "[" + section + "] eps needs 1 or dim*dim entries");
    }
    const double lambda = cfg.get_number(section, "lambda", 1.0);
    const double mu = cfg.get_number(section, "mu", 1.0);
    t.L = Rank4::isotropic(dim, lambda, mu);
    const double m0 = cfg.get_number(section, "electrostriction", 1.0);
    t.M = Rank4::identity(dim, m0);
    t.M(0, 1) = cfg.get_number(section, "electrostriction_offdiag", 0.0);
    t.gamma = cfg.get_number(section, "gamma", 0.0);
    t.gamma_prime = cfg.get_number(section, "gamma_prime", 0.0);
    return t;
}

/// Named scalar functions for boundary data and modulations.
inline ScalarFn scalar_preset(const std::string& name, int dim) {
    const double pi = std::numbers::pi;
    if (name == "zero") return nullptr;
    if (name == "one") return [](const Vec&) { return 1.0; };
    if (name == "linear_x") return [](const Vec& x) { return x[0]; };
    if (name == "linear_y") return [](const Vec& x) { return x[1]; };
    if (name == "bilinear") return [](const Vec& x) { return x[0] * x[1]; };
    if (name == "sine") {
        if (dim == 2)
            return [pi](const Vec& x) { return std::sin(pi * x[0]) * std::cos(pi * x[1]); };
        return [pi](const Vec& x) {
            return std::sin(pi * x[0]) * std::cos(pi * x[1]) * std::cos(pi * x[2]);
        };
    }
    throw ConfigError("cli", "unknown function preset '" + name + "'");
}

inline VectorFn scalar_preset_gradient(const std::string& name, int dim) {
    const double pi = std::numbers::pi;
    if (name == "zero" || name == "one")
        return [dim](const Vec&) { return Vec(dim); };
    if (name == "linear_x") return [dim](const Vec&) { return Vec::unit(dim, 0); };
    if (name == "linear_y") return [dim](const Vec&) { return Vec::unit(dim, 1); };
    if (name == "bilinear") return [dim](const Vec& x) {
        Vec g(dim);
        g[0] = x[1];
        g[1] = x[0];
        return g;
    };
    if (name == "sine") {
        if (dim == 2)
            return [pi, dim](const Vec& x) {
                Vec g(dim);
                g[0] = pi * std::cos(pi * x[0]) * std::cos(pi * x[1]);
                g[1] = -pi * std::sin(pi * x[0]) * std::sin(pi * x[1]);
                return g;
            };
        return [pi, dim](const Vec& x) {
            Vec g(dim);
            g[0] = pi * std::cos(pi * x[0]) * std::cos(pi * x[1]) * std::cos(pi * x[2]);
            g[1] = -pi * std::sin(pi * x[0]) * std::sin(pi * x[1]) * std::cos(pi * x[2]);
            g[2] = -pi * std::sin(pi * x[0]) * std::cos(pi * x[1]) * std::sin(pi * x[2]);
            return g;
        };
    }
    return nullptr;
}

inline SolverOptions parse_solver(const Config& cfg, bool verbose) {
    SolverOptions opts;
    opts.tol = cfg.get_number("solver", "tol", 1e-8);
    opts.max_iter = cfg.get_int("solver", "max_iter", 10000);
    opts.contrast_cap = cfg.get_number("solver", "contrast_cap", 1e6);
    opts.record_history = verbose;
    return opts;
}

// ---------------------------------------------------------------------------
// Cell pipeline shared by the subcommands

struct CellOutputs {
    std::vector<Field> chi, grad_w;
    std::vector<SolveCertificate> chi_certs;
    std::vector<PoissonSolution> psi;
    std::vector<Field> theta, sigma;
    std::vector<SolveCertificate> theta_certs;
    std::vector<Field> X, grad_W;
    std::vector<SolveCertificate> X_certs;
    EffectivePermittivity eff_eps;
    EffectiveElasticity eff_L;
    ElectroCoupling coupling;
    bool has_charges = false;
    ChargeCoupling a;
    KappaResult kappa_result;
};

inline CellOutputs run_cell_pipeline(const CoefficientSet& coeffs,
                                     const std::vector<ChargeFamily>& families,
                                     const SolverOptions& opts, int threads,
                                     bool with_elasticity = true) {
    const TorusGrid& grid = coeffs.eps.grid();
    const int dim = grid.dim();
    CellOutputs out;

    out.chi.resize(dim);
    out.grad_w.resize(dim);
    out.chi_certs.resize(dim);
    parallel_for(dim, threads, [&](int j) {
        auto sol = solve_dielectric_corrector(coeffs.eps, j, opts);
        out.chi[j] = std::move(sol.chi);
        out.grad_w[j] = std::move(sol.grad_w);
        out.chi_certs[j] = sol.certificate;
    });
    out.eff_eps = effective_permittivity(coeffs.eps, out.grad_w);

    if (!families.empty()) {
        out.has_charges = true;
        const int P = static_cast<int>(families.size());
        out.psi.resize(P);
        out.theta.resize(P);
        out.sigma.resize(P);
        out.theta_certs.resize(P);
        parallel_for(P, threads, [&](int p) {
            out.psi[p] = solve_periodic_poisson(families[p].g);
            auto sol = solve_charge_corrector(coeffs.eps, families[p].g, out.psi[p].tau, opts);
            out.theta[p] = std::move(sol.theta);
            out.sigma[p] = std::move(sol.sigma);
            out.theta_certs[p] = sol.certificate;
        });
        out.a = charge_coupling(families, out.psi, out.chi, out.grad_w, out.theta, coeffs.eps);
        out.kappa_result = kappa(coeffs.eps, out.psi, out.theta);
    }

    if (with_elasticity) {
        const int d = sym_dim(dim);
        const auto& pairs = mandel_pairs(dim);
        out.X.resize(d);
        out.grad_W.resize(d);
        out.X_certs.resize(d);
        parallel_for(d, threads, [&](int a) {
            auto sol = solve_elastic_corrector(coeffs.L, pairs[a].first, pairs[a].second, opts);
            out.X[a] = std::move(sol.X);
            out.grad_W[a] = std::move(sol.grad_W);
            out.X_certs[a] = sol.certificate;
        });
        out.eff_L = effective_elasticity(coeffs.L, out.grad_W);
        out.coupling = electro_coupling(coeffs.M, out.grad_w, out.theta, out.grad_W);
    }
    return out;
}

/// Charge families from the [charges] section. The corrector-weighted
/// mode needs the solved correctors.
inline std::vector<ChargeFamily> parse_charges(const Config& cfg, const GeometrySpec& geo,
                                               const TorusGrid& grid,
                                               const PhaseTensors& matrix,
                                               const PhaseTensors& inclusion,
                                               const std::vector<Field>* chi) {
    if (!cfg.has_section("charges")) return {};
    std::vector<ChargeFamily> fams;
    const std::string mode = cfg.get_string("charges", "mode");
    const double amplitude = cfg.get_number("charges", "amplitude", 1.0);
    const int dim = grid.dim();
    if (mode == "analytic") {
        const std::string profile = cfg.get_string("charges", "profile", "cos_x");
        ScalarFn fn;
        if (profile == "cos_x")
            fn = [](const Vec& y) { return std::cos(two_pi * y[0]); };
        else if (profile == "cos_y")
            fn = [](const Vec& y) { return std::cos(two_pi * y[1]); };
        else if (profile == "bump") {
            auto params = cfg.get_list("charges", "bump", {0.5, 0.5, 0.2, 0.4});
            if (static_cast<int>(params.size()) != dim + 2)
                throw ConfigError("cli", "[charges] bump needs center, inner and outer radius");
            Vec c(dim);
            for (int d = 0; d < dim; ++d) c[d] = params[d];
            const double r0 = params[dim], r1 = params[dim + 1];
            fn = [c, r0, r1](const Vec& y) {
                double d2 = 0;
                for (int i = 0; i < y.n; ++i) {
                    double dd = std::abs(y[i] - c[i]);
                    dd = std::min(dd, 1.0 - dd);
                    d2 += dd * dd;
                }
                const double r = std::sqrt(d2);
                if (r <= r0 || r >= r1) return 0.0;
                const double t = 2.0 * (r - r0) / (r1 - r0) - 1.0;
                return std::exp(-1.0 / (1.0 - t * t));
            };
        } else {
            throw ConfigError("cli", "unknown charge profile '" + profile + "'");
        }
        auto fam = make_analytic_charge(grid, fn, "g1");
        fam.g *= amplitude;
        fam.amplitude = amplitude;
        fams.push_back(std::move(fam));
    } else if (mode == "coating") {
        // background-normalized inclusion permittivity for the shell profile
        const double em = matrix.eps(0, 0), ei = inclusion.eps(0, 0);
        if (matrix.eps.asymmetry() > 0 || em <= 0)
            throw ConfigError("cli", "coating charges need an isotropic matrix permittivity");
        const double ebar = ei / em;
        for (int p = 0; p < dim; ++p) {
            auto fam =
                make_coating_charge(geo.geometry, grid, ebar, p, "g" + std::to_string(p + 1));
            fam.g *= amplitude;
            fam.amplitude = amplitude;
            fams.push_back(std::move(fam));
        }
    } else if (mode == "corrector") {
        if (!chi)
            throw ConfigError("cli", "corrector-weighted charges need solved correctors");
        auto params = cfg.get_list("charges", "bump", {0.5, 0.5, 0.4});
        if (static_cast<int>(params.size()) != dim + 1)
            throw ConfigError("cli", "[charges] bump needs center and radius");
        Vec c(dim);
        for (int d = 0; d < dim; ++d) c[d] = params[d];
        for (int p = 0; p < dim; ++p)
            fams.push_back(make_corrector_weighted_charge((*chi)[p], c, params[dim], amplitude,
                                                          "g" + std::to_string(p + 1)));
    } else {
        throw ConfigError("cli", "unknown charge mode '" + mode + "'");
    }
    return fams;
}

// ---------------------------------------------------------------------------
// Tensor document

inline json tensors_document(const Config& cfg, const TorusGrid& grid, const CellOutputs& cell,
                             const std::vector<ChargeFamily>& families) {
    json doc;
    doc["config_hash"] = config_hash(cfg.text());
    doc["grid"] = {{"dimension", grid.dim()}, {"resolution", grid.n()}, {"scale", grid.scale()}};

    json eps = matrix_json(cell.eff_eps.eps_h);
    eps["certificates"] = {{"symmetry_residual", cell.eff_eps.symmetry_residual},
                           {"eigenvalues", cell.eff_eps.eigenvalues},
                           {"reuss_margin", cell.eff_eps.reuss_margin},
                           {"voigt_margin", cell.eff_eps.voigt_margin}};
    doc["tensors"]["eps_h"] = eps;

    if (cell.has_charges) {
        json a = eigen_matrix_json(cell.a.a);
        a["certificates"] = {{"formula_discrepancy", cell.a.max_discrepancy},
                             {"b_discrepancy", cell.a.b_discrepancy}};
        doc["tensors"]["a"] = a;
        doc["tensors"]["b"] = eigen_matrix_json(cell.a.b);
        json k = eigen_matrix_json(cell.kappa_result.kappa);
        k["certificates"] = {{"energy_identity_residual", cell.kappa_result.energy_residual}};
        k["note"] = "off-diagonal entries extend the single-family definition";
        doc["tensors"]["kappa"] = k;
    }

    if (!cell.grad_W.empty()) {
        json L = rank4_json(cell.eff_L.L_h);
        L["certificates"] = {{"major_symmetry_residual", cell.eff_L.major_symmetry_residual},
                             {"flux_energy_gap", cell.eff_L.flux_energy_gap},
                             {"eigenvalues", cell.eff_L.eigenvalues},
                             {"reuss_margin", cell.eff_L.reuss_margin},
                             {"voigt_margin", cell.eff_L.voigt_margin}};
        doc["tensors"]["L_h"] = L;
        doc["tensors"]["M_h"] = rank4_json(cell.coupling.M_h);
        for (std::size_t p = 0; p < cell.coupling.N_h.size(); ++p) {
            doc["tensors"]["N_h_" + std::to_string(p + 1)] = rank3_json(cell.coupling.N_h[p]);
            doc["tensors"]["P_h_" + std::to_string(p + 1)] = matrix_json(cell.coupling.P_h[p]);
        }
    }

    json certs = json::array();
    for (int j = 0; j < static_cast<int>(cell.chi_certs.size()); ++j) {
        json c = certificate_json(cell.chi_certs[j]);
        c["solve"] = "chi_" + std::to_string(j + 1);
        certs.push_back(c);
    }
    for (int p = 0; p < static_cast<int>(cell.theta_certs.size()); ++p) {
        json c = certificate_json(cell.theta_certs[p]);
        c["solve"] = "theta_" + std::to_string(p + 1);
        certs.push_back(c);
    }
    for (int a = 0; a < static_cast<int>(cell.X_certs.size()); ++a) {
        json c = certificate_json(cell.X_certs[a]);
        c["solve"] = "X_" + std::to_string(a + 1);
        certs.push_back(c);
    }
    doc["solver_certificates"] = certs;

    json meta;
    json fam_meta = json::array();
    for (const auto& f : families)
        fam_meta.push_back({{"name", f.name},
                            {"smooth", f.smooth},
                            {"amplitude", f.amplitude},
                            {"mean", mean_scalar(f.g)}});
    meta["charge_families"] = fam_meta;
    doc["metadata"] = meta;
    return doc;
}

inline void write_solver_diagnostics(const CellOutputs& cell, const std::string& path) {
    CsvTable t;
    t.header = {"solve_index", "iteration", "preconditioned_residual"};
    double idx = 0;
    auto add = [&](const std::vector<SolveCertificate>& certs) {
        for (const auto& c : certs) {
            for (std::size_t i = 0; i < c.history.size(); ++i)
                t.rows.push_back({idx, static_cast<double>(i), c.history[i]});
            idx += 1;
        }
    };
    add(cell.chi_certs);
    add(cell.theta_certs);
    add(cell.X_certs);
    t.write(path);
}

} // namespace ehom

#endif
