// Batch front-end: parses a structured-text configuration, runs the
// requested pipeline (cell solves -> effective tensors -> studies), and
// serializes tensor documents, CSV tables, and field dumps.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "ehom/runner.hpp"

namespace fs = std::filesystem;
using namespace ehom;

namespace {

struct CommonInputs {
    TorusGrid grid;
    GeometrySpec geometry;
    PhaseTensors matrix, inclusion;
    CoefficientSet coeffs;
    SolverOptions solver;
};

CommonInputs load_common(const Config& cfg, bool verbose) {
    CommonInputs in;
    in.grid = parse_grid(cfg);
    in.geometry = parse_geometry(cfg, in.grid);
    in.matrix = parse_phase(cfg, "matrix", in.grid.dim());
    in.inclusion = cfg.has_section("inclusion") ? parse_phase(cfg, "inclusion", in.grid.dim())
                                                : in.matrix;
    in.coeffs = assemble_coefficients(in.matrix, in.inclusion, in.geometry.indicator);
    in.solver = parse_solver(cfg, verbose);
    return in;
}

/// Charge families for a command; corrector-weighted families need a
/// first corrector pass.
std::vector<ChargeFamily> load_families(const Config& cfg, const CommonInputs& in,
                                        const RunOptions& opts) {
    if (cfg.has_section("charges") && cfg.get_string("charges", "mode") == "corrector") {
        auto pre = run_cell_pipeline(in.coeffs, {}, in.solver, opts.threads, false);
        return parse_charges(cfg, in.geometry, in.grid, in.matrix, in.inclusion, &pre.chi);
    }
    return parse_charges(cfg, in.geometry, in.grid, in.matrix, in.inclusion, nullptr);
}

void dump_fields(const Config& cfg, const CommonInputs& in, const CellOutputs& cell,
                 const fs::path& dir) {
    if (!cfg.get_bool("output", "fields", false)) return;
    write_field_binary(in.geometry.indicator, (dir / "indicator.ehfd").string());
    write_field_csv(in.geometry.indicator, (dir / "indicator.csv").string());
    for (std::size_t j = 0; j < cell.chi.size(); ++j)
        write_field_binary(cell.chi[j], (dir / ("chi_" + std::to_string(j + 1) + ".ehfd")).string());
    for (std::size_t p = 0; p < cell.theta.size(); ++p)
        write_field_binary(cell.theta[p],
                           (dir / ("theta_" + std::to_string(p + 1) + ".ehfd")).string());
}

int cmd_cell(const Config& cfg, const RunOptions& opts, const fs::path& dir) {
    CommonInputs in = load_common(cfg, opts.verbose);
    auto families = load_families(cfg, in, opts);
    CellOutputs cell = run_cell_pipeline(in.coeffs, families, in.solver, opts.threads, true);
    write_json(tensors_document(cfg, in.grid, cell, families), (dir / "tensors.json").string());
    if (opts.verbose) write_solver_diagnostics(cell, (dir / "solver_diagnostics.csv").string());
    dump_fields(cfg, in, cell, dir);
    return 0;
}

int cmd_enhance(const Config& cfg, const RunOptions& opts, const fs::path& dir) {
    cfg.require_section("charges");
    CommonInputs in = load_common(cfg, opts.verbose);
    auto pre = run_cell_pipeline(in.coeffs, {}, in.solver, opts.threads, false);
    auto families = parse_charges(cfg, in.geometry, in.grid, in.matrix, in.inclusion, &pre.chi);
    if (static_cast<int>(families.size()) != in.grid.dim())
        throw ConfigError("cli", "enhancement needs one charge family per direction");
    CellOutputs cell = run_cell_pipeline(in.coeffs, families, in.solver, opts.threads, false);

    std::vector<double> lambdas = cfg.get_list("study", "lambda", {0.0, 1.0, 2.0, 4.0, 8.0});
    CsvTable sweep;
    sweep.header = {"lambda", "min_eigenvalue", "max_eigenvalue", "elliptic",
                    "exceeds_eps_h"};
    const double eps_h_max = cell.eff_eps.eigenvalues.back();
    double lambda_star = -1.0;
    for (double lam : lambdas) {
        auto enh = enhanced_permittivity(cell.eff_eps.eps_h, cell.a.a, lam);
        const bool exceeds = enh.eigenvalues.front() > eps_h_max;
        if (exceeds && lambda_star < 0) lambda_star = lam;
        sweep.rows.push_back({lam, enh.eigenvalues.front(), enh.eigenvalues.back(),
                              enh.elliptic ? 1.0 : 0.0, exceeds ? 1.0 : 0.0});
    }
    sweep.write((dir / "enhancement_sweep.csv").string());

    json doc = tensors_document(cfg, in.grid, cell, families);
    json enh;
    enh["lambda_grid"] = lambdas;
    enh["lambda_exceeding_eps_h"] = lambda_star;
    doc["enhancement"] = enh;
    write_json(doc, (dir / "tensors.json").string());
    if (opts.verbose) write_solver_diagnostics(cell, (dir / "solver_diagnostics.csv").string());
    return 0;
}

int cmd_dilute(const Config& cfg, const RunOptions& opts, const fs::path& dir) {
    cfg.require_section("study");
    DiluteStudy study;
    study.dim = cfg.get_int("grid", "dimension", 2);
    study.ebar = cfg.get_number("study", "ebar", 5.0);
    study.eta = cfg.get_number("study", "eta", 0.5);
    for (double e : cfg.get_list("study", "ell", {4, 8, 16}))
        study.ell.push_back(static_cast<int>(e));
    study.lambda = cfg.get_list("study", "lambda", {1.0, 2.0, 4.0});
    study.voxels_per_radius = cfg.get_int("study", "voxels_per_radius", 32);
    study.matrix = cfg.has_section("matrix") ? parse_phase(cfg, "matrix", study.dim)
                                             : PhaseTensors{Mat::identity(study.dim, 1.0),
                                                            Rank4::isotropic(study.dim, 1.0, 1.0),
                                                            Rank4::identity(study.dim, 1.0)};
    study.inclusion = cfg.has_section("inclusion")
                          ? parse_phase(cfg, "inclusion", study.dim)
                          : PhaseTensors{Mat::identity(study.dim, study.ebar),
                                         Rank4::isotropic(study.dim, 2.0, 2.0),
                                         Rank4::identity(study.dim, 2.0)};
    study.solver = parse_solver(cfg, opts.verbose);

    auto sweep = dilute_sweep(study);
    CsvTable table;
    table.header = {"ell", "resolution", "mismatch", "corrector_distance",
                    "enhancement_remainder", "a_asymmetry", "max_iterations"};
    for (const auto& r : sweep.records)
        table.rows.push_back({static_cast<double>(r.ell), static_cast<double>(r.n), r.mismatch,
                              r.corrector_distance, r.enhancement_remainder, r.a_asymmetry,
                              static_cast<double>(r.max_iterations)});
    table.write((dir / "dilute_sweep.csv").string());

    json doc;
    doc["config_hash"] = config_hash(cfg.text());
    doc["abar"] = matrix_json(sweep.abar_matrix);
    doc["mismatch_decreasing"] = sweep.mismatch_decreasing;
    doc["corrector_decreasing"] = sweep.corrector_decreasing;
    doc["mismatch_orders"] = sweep.mismatch_orders;

    if (study.ell.size() >= 3 && study.lambda.size() >= 3) {
        auto scaling = scaling_study(study);
        CsvTable stable;
        stable.header = {"ell", "lambda", "N_norm", "P_norm"};
        for (const auto& r : scaling.records)
            stable.rows.push_back({static_cast<double>(r.ell), r.lambda, r.N_norm, r.P_norm});
        stable.write((dir / "scaling_study.csv").string());
        doc["lambda_exponent_P"] = scaling.lambda_exponent_P;
        doc["ellN_exponent_P"] = scaling.ellN_exponent_P;
        doc["N_over_lambda_spread"] = scaling.N_over_lambda_spread;
        doc["P_inf_estimate"] = matrix_json(scaling.P_inf);
        doc["P_normalized_cauchy"] = scaling.cauchy;
    } else {
        doc["scaling_study"] = "skipped: needs at least 3 values of ell and lambda";
    }
    write_json(doc, (dir / "dilute_summary.json").string());
    return 0;
}

int cmd_macro(const Config& cfg, const RunOptions& opts, const fs::path& dir) {
    cfg.require_section("macro");
    CommonInputs in = load_common(cfg, opts.verbose);
    auto families = load_families(cfg, in, opts);
    CellOutputs cell = run_cell_pipeline(in.coeffs, families, in.solver, opts.threads, true);

    const int dim = in.grid.dim();
    MacroScalarProblem prob;
    prob.grid = BoxGrid::cube(dim, cfg.get_int("macro", "cells", 64));
    const bool active = cfg.get_string("macro", "mode", "passive") == "active";
    if (active) {
        if (!cell.has_charges || cell.a.a.cols() != dim)
            throw ConfigError("cli", "active mode needs one charge family per direction");
        auto enh = enhanced_permittivity(cell.eff_eps.eps_h, cell.a.a,
                                         cfg.get_number("macro", "lambda", 1.0));
        if (!enh.elliptic)
            throw EllipticityError("macro_solver", "enhanced tensor lost ellipticity");
        prob.eps = enh.eps_tilde.sym();
    } else {
        prob.eps = cell.eff_eps.eps_h;
        if (cell.has_charges) {
            prob.a = cell.a.a;
            const std::string fname = cfg.get_string("macro", "modulation", "sine");
            for (Eigen::Index p = 0; p < cell.a.a.cols(); ++p) {
                prob.modulations.push_back(scalar_preset(fname, dim));
                prob.modulation_gradients.push_back(scalar_preset_gradient(fname, dim));
            }
        }
    }
    prob.boundary = scalar_preset(cfg.get_string("macro", "boundary", "linear_x"), dim);
    auto phi = solve_scalar_bvp(prob);

    std::vector<ScalarFn> mods = prob.modulations;
    if (active) {
        // active identification f_p = d phi / dx_p: feed the discrete
        // gradient of the solved potential into the forcing
        auto grad = std::make_shared<std::vector<double>>(nodal_gradient(prob.grid, phi.phi));
        const std::size_t nn = prob.grid.node_count();
        const BoxGrid grid = prob.grid;
        mods.clear();
        for (int p = 0; p < dim; ++p)
            mods.push_back([grad, grid, nn, p](const Vec& x) {
                return interp_nodal(grid, *grad, x, static_cast<std::size_t>(p) * nn);
            });
    }
    MacroZField Z = assemble_Z(cell.coupling.M_h, cell.coupling.N_h, cell.coupling.P_h, phi,
                               mods);
    MacroElasticProblem eprob;
    eprob.grid = prob.grid;
    eprob.L = cell.eff_L.L_h;
    eprob.Z = &Z;
    auto u = solve_elastic_bvp(eprob);

    json doc;
    doc["config_hash"] = config_hash(cfg.text());
    doc["scalar"] = {{"cells", prob.grid.cells(0)},
                     {"residual", phi.certificate.rel_residual},
                     {"iterations", phi.certificate.iterations}};
    if (active)
        doc["scalar"]["active_consistency_residual"] =
            active_charge_consistency(cell.eff_eps.eps_h, cell.a.a, phi);
    doc["elastic"] = {{"residual", u.certificate.rel_residual},
                      {"iterations", u.certificate.iterations}};
    write_json(doc, (dir / "macro_summary.json").string());

    CsvTable phit;
    phit.header = {"x", "y", "phi"};
    const std::size_t nn = prob.grid.node_count();
    for (std::size_t p = 0; p < nn; ++p) {
        Vec x = prob.grid.node_point(prob.grid.unpack_node(p));
        phit.rows.push_back({x[0], x[1], phi.phi[p]});
    }
    phit.write((dir / "macro_phi.csv").string());
    CsvTable ut;
    ut.header = {"x", "y", "u1", "u2"};
    for (std::size_t p = 0; p < nn; ++p) {
        Vec x = prob.grid.node_point(prob.grid.unpack_node(p));
        ut.rows.push_back({x[0], x[1], u.u[p], u.u[nn + p]});
    }
    ut.write((dir / "macro_u.csv").string());
    return 0;
}

int cmd_verify(const Config& cfg, const RunOptions& opts, const fs::path& dir) {
    cfg.require_section("study");
    CommonInputs in = load_common(cfg, opts.verbose);
    auto families = load_families(cfg, in, opts);
    ChargeFamily family;
    if (families.empty()) {
        family.g = Field(in.grid, Rank::scalar);
        family.name = "zero";
    } else {
        family = families.front();
    }

    TwoScaleStudyConfig ts;
    ts.inv_deltas.clear();
    for (double d : cfg.get_list("study", "inv_delta", {4, 8, 16}))
        ts.inv_deltas.push_back(static_cast<int>(d));
    ts.cell_resolution = in.grid.n();
    ts.q_list = cfg.get_list("study", "q", {2, 4});
    const int dim = in.grid.dim();
    ts.modulation = scalar_preset(cfg.get_string("study", "modulation", "sine"), dim);
    ts.modulation_gradient =
        scalar_preset_gradient(cfg.get_string("study", "modulation", "sine"), dim);
    ts.boundary = scalar_preset(cfg.get_string("study", "boundary", "linear_x"), dim);
    ts.with_elasticity = cfg.get_bool("study", "elasticity", true);
    ts.boundary_layer = cfg.get_bool("study", "boundary_layer", true);
    ts.macro_cells = cfg.get_int("study", "macro_cells", 128);
    ts.cell_solver = in.solver;
    ts.fine_tol = cfg.get_number("study", "fine_tol", 1e-9);
    ts.max_nodes_2d = cfg.get_int("study", "max_nodes_2d", 2048);
    ts.max_nodes_3d = cfg.get_int("study", "max_nodes_3d", 256);

    auto study = run_twoscale_study(in.coeffs, in.matrix.eps, family, ts);

    CsvTable table;
    table.header = {"inv_delta", "naive_error", "potential_error", "corrector_error_global",
                    "corrector_error_local", "no_theta_error"};
    for (double q : ts.q_list) table.header.push_back("corrector_error_L" + std::to_string((int)q));
    table.header.insert(table.header.end(),
                        {"grad_L2", "grad_L4", "grad_L8", "elastic_distance"});
    for (const auto& r : study.records) {
        std::vector<double> row = {static_cast<double>(r.inv_delta), r.errors.naive,
                                   r.errors.potential, r.errors.global_l2, r.errors.local_l2,
                                   r.errors.no_theta_l2};
        for (double v : r.errors.lq) row.push_back(v);
        row.insert(row.end(), {r.errors.grad_lq[0], r.errors.grad_lq[1], r.errors.grad_lq[2],
                               r.elastic_distance});
        table.rows.push_back(row);
    }
    table.write((dir / "convergence.csv").string());

    json doc;
    doc["config_hash"] = config_hash(cfg.text());
    doc["eps_h"] = matrix_json(study.eps_h);
    doc["a"] = eigen_matrix_json(study.a);
    doc["corrector_decreasing"] = study.corrector_decreasing;
    doc["corrector_below_naive"] = study.corrector_below_naive;
    doc["no_theta_stagnates"] = study.no_theta_stagnates;
    doc["elastic_decreasing"] = study.elastic_decreasing;
    doc["note"] = "voxelized interfaces: monotone decrease is asserted, not a rate";
    write_json(doc, (dir / "verify_summary.json").string());
    return 0;
}

int dispatch(const std::string& sub, const RunOptions& opts) {
    const fs::path dir(opts.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);

    auto fail = [&](int code, const std::string& type, const std::string& module,
                    const std::string& what) {
        json err;
        err["error"] = type;
        err["module"] = module;
        err["message"] = what;
        try {
            write_json(err, (dir / "error.json").string());
        } catch (...) {
        }
        std::cerr << "ehom: " << type << " (" << module << "): " << what << "\n";
        return code;
    };

    try {
        Config cfg = Config::from_file(opts.config_path);
        if (sub == "cell") return cmd_cell(cfg, opts, dir);
        if (sub == "enhance") return cmd_enhance(cfg, opts, dir);
        if (sub == "dilute") return cmd_dilute(cfg, opts, dir);
        if (sub == "macro") return cmd_macro(cfg, opts, dir);
        if (sub == "verify") return cmd_verify(cfg, opts, dir);
        return fail(2, "ConfigError", "cli", "unknown subcommand " + sub);
    } catch (const ConfigError& e) {
        return fail(2, "ConfigError", e.module(), e.what());
    } catch (const MemoryBudgetError& e) {
        return fail(4, "MemoryBudgetError", e.module(), e.what());
    } catch (const ResolutionError& e) {
        return fail(2, "ResolutionError", e.module(), e.what());
    } catch (const FitError& e) {
        return fail(2, "FitError", e.module(), e.what());
    } catch (const Error& e) {
        std::string type = "SolverError";
        return fail(3, type, e.module(), e.what());
    } catch (const std::exception& e) {
        return fail(3, "InternalError", "cli", e.what());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"computational homogenization of elasto-dielectric composites with "
                 "microscopic space charges"};
    app.require_subcommand(1);

    RunOptions opts;
    for (const char* name : {"cell", "enhance", "dilute", "macro", "verify"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", opts.config_path, "configuration file")->required();
        sub->add_option("--output-dir", opts.output_dir, "output directory");
        sub->add_flag("--verbose", opts.verbose, "emit solver diagnostics");
        sub->add_option("--threads", opts.threads, "worker pool size");
    }

    CLI11_PARSE(app, argc, argv);
    return dispatch(app.get_subcommands().front()->get_name(), opts);
}
