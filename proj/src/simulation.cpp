#include "nlch/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace nlch {

namespace fs = std::filesystem;

std::string format_g17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string prepare_output_dir(const RunConfig& cfg)
{
    fs::path dir = cfg.output_dir;
    if (dir.is_relative()) {
        if (const char* root = std::getenv("NLCH_OUTPUT_ROOT"))
            dir = fs::path(root) / dir;
    }
    fs::create_directories(dir);
    return dir.string();
}

namespace {

constexpr const char* kDiagnosticsHeader =
    "step,t,energy,energy_difference_form,mass_beta_weighted,mass_bulk,mass_surf,"
    "equilibrium_gap,flux_norm,newton_iters,residual\n";

void write_diag_row(std::ostream& out, int step, double t, double e_conv, double e_diff, double mass_bw,
                    double mass_b, double mass_s, double gap, double flux, int iters, double resid)
{
    out << step << ',' << format_g17(t) << ',' << format_g17(e_conv) << ',' << format_g17(e_diff) << ','
        << format_g17(mass_bw) << ',' << format_g17(mass_b) << ',' << format_g17(mass_s) << ','
        << format_g17(gap) << ',' << format_g17(flux) << ',' << iters << ',' << format_g17(resid) << '\n';
}

// Diagnostics of a state outside the stepper (initial row).
void initial_row(std::ostream& out, const Problem& p, const State& s)
{
    const Vec mu = chemical_potential_bulk(s.phi, p.bulk_op, p.pot, p.model);
    Vec gap;
    if (p.model.coupling == Coupling::Dirichlet) {
        gap = Vec::Zero(p.mesh.n_boundary());
    } else {
        const Vec nu = chemical_potential_surface(s.psi, p.surf_op, p.pot, p.pen, p.model);
        gap = p.model.beta * nu - p.fem.T * mu;
    }
    const double gap_norm = std::sqrt((p.mesh.node_weights_surface.array() * gap.array().square()).sum());
    const double flux = p.model.coupling == Coupling::Robin ? gap_norm / p.model.L : 0.0;
    const double mass_b = p.mesh.node_weights_bulk.dot(s.phi);
    const double mass_s = p.mesh.node_weights_surface.dot(s.psi);
    const double ec =
        total_energy(s.phi, s.psi, p.bulk_op, p.surf_op, p.pot, p.pen, p.model, EnergyForm::ConvolutionForm).total();
    const double ed =
        total_energy(s.phi, s.psi, p.bulk_op, p.surf_op, p.pot, p.pen, p.model, EnergyForm::DifferenceForm).total();
    write_diag_row(out, 0, s.t, ec, ed, p.model.beta * mass_b + mass_s, mass_b, mass_s, gap_norm, flux, 0, 0.0);
}

void write_admissibility_csv(const std::string& path, const std::vector<AdmissibilityRow>& rows)
{
    std::ofstream out(path);
    out << "tag,pass,detail\n";
    for (const auto& r : rows)
        out << r.tag << ',' << (r.pass ? 1 : 0) << ",\"" << r.detail << "\"\n";
}

} // namespace

SimulationOutcome run_simulation(const RunConfig& cfg)
{
    SimulationOutcome outcome;
    outcome.output_dir = prepare_output_dir(cfg);
    const fs::path dir = outcome.output_dir;

    BuiltProblem built = build_problem(cfg);
    const Problem& p = built.problem;

    {
        std::ofstream echo(dir / "config_echo.cfg");
        for (const auto& line : cfg.echo())
            echo << line << "\n";
    }
    write_admissibility_csv((dir / "admissibility.csv").string(), built.admissibility);
    std::ofstream log(dir / "run.log");
    log << "model = " << ModelSpec::name(p.model.coupling) << ", mesh level = " << cfg.mesh_level
        << ", vertices = " << p.mesh.n_vertices() << ", boundary nodes = " << p.mesh.n_boundary() << "\n";
    log << "admissibility:\n";
    for (const auto& r : built.admissibility)
        log << "  [" << (r.pass ? "pass" : "FAIL") << "] " << r.tag << ": " << r.detail << "\n";
    log << "convexity margins: c_bulk = " << built.margins.c_bulk << ", c_surf = " << built.margins.c_surf << "\n";
    log << "bulk diag rule: " << p.bulk_op.diag_rule << "\n";
    log << "surface diag rule: " << p.surf_op.diag_rule << "\n";

    const State initial = make_initial_state(cfg, p);

    std::ofstream diag(dir / "diagnostics.csv");
    diag << kDiagnosticsHeader;
    initial_row(diag, p, initial);

    Stepper stepper(p, cfg.step);
    auto on_step = [&](int k, const State& s, const StepReport& rep) {
        write_diag_row(diag, k, s.t, rep.energy_after, rep.energy_after_difference_form, rep.mass_value,
                       rep.mass_bulk, rep.mass_surf, rep.equilibrium_gap, rep.flux_norm, rep.newton_iters,
                       rep.final_residual);
        if (cfg.snapshot_every > 0 && k % cfg.snapshot_every == 0) {
            char name[40];
            std::snprintf(name, sizeof name, "fields_%06d.txt", k);
            write_state_fields((dir / name).string(), s);
        }
    };

    RunResult res = run_steps(stepper, initial, cfg.n_steps, on_step);
    diag.flush();

    write_state_fields((dir / "fields_final.txt").string(), res.final_state);
    write_checkpoint((dir / "checkpoint.txt").string(), res.final_state,
                     static_cast<int>(res.reports.size()), cfg.echo());

    outcome.final_state = res.final_state;
    outcome.reports = res.reports;
    if (!res.completed) {
        outcome.exit_status = 1;
        outcome.error = res.error;
        log << "halted early after " << res.reports.size() << " steps: " << res.error << "\n";
    } else {
        log << "completed " << res.reports.size() << " steps\n";
    }
    return outcome;
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw ContractError("fit_loglog_slope: need at least two samples");
    const size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw ContractError("fit_loglog_slope: samples must be positive");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double dn = static_cast<double>(n);
    return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

SweepResult sweep_L(const RunConfig& base, const std::vector<double>& L_values)
{
    if (base.model.coupling != Coupling::Robin)
        throw ContractError("sweep_L: base config must use the Robin model");
    if (!(base.model.beta > 0.0))
        throw ContractError("sweep_L: requires beta > 0 (the Dirichlet reference needs it)");
    if (L_values.size() < 4)
        throw ContractError("sweep_L: need at least 4 L values, got " + std::to_string(L_values.size()));
    std::vector<double> Ls = L_values;
    std::sort(Ls.begin(), Ls.end());
    if (!(Ls.front() > 0.0))
        throw ContractError("sweep_L: L values must be positive");
    if (Ls.back() / Ls.front() < 1e3)
        throw ContractError("sweep_L: L values must span at least 3 decades");

    SweepResult result;
    RunConfig root = base;
    result.output_dir = prepare_output_dir(root);
    const fs::path dir = result.output_dir;

    auto member = [&](const RunConfig& cfg, const std::string& sub) {
        RunConfig c = cfg;
        c.output_dir = (dir / sub).string();
        SimulationOutcome out = run_simulation(c);
        if (out.exit_status != 0)
            throw SolverError("sweep_L: member run '" + sub + "' halted: " + out.error);
        return out;
    };

    RunConfig dir_cfg = base;
    dir_cfg.model.coupling = Coupling::Dirichlet;
    const SimulationOutcome dir_ref = member(dir_cfg, "dirichlet_ref");

    RunConfig dec_cfg = base;
    dec_cfg.model.coupling = Coupling::Decoupled;
    const SimulationOutcome dec_ref = member(dec_cfg, "decoupled_ref");

    // distances measured with the shared L-free operators
    BuiltProblem built = build_problem(base);
    EllipticOperators ops(built.problem.mesh, built.problem.fem, base.model.beta, 1.0);
    const Vec& wb = built.problem.mesh.node_weights_bulk;
    const Vec& ws = built.problem.mesh.node_weights_surface;
    auto l2_dist = [&](const State& a, const State& b) {
        return std::sqrt((wb.array() * (a.phi - b.phi).array().square()).sum() +
                         (ws.array() * (a.psi - b.psi).array().square()).sum());
    };

    for (double L : Ls) {
        RunConfig c = base;
        c.model.L = L;
        std::ostringstream sub;
        sub << "L_" << L;
        const SimulationOutcome out = member(c, sub.str());

        SweepRow row;
        row.L = L;
        double gap2 = 0.0, flux2 = 0.0;
        for (const auto& rep : out.reports) {
            gap2 += rep.tau_used * rep.equilibrium_gap * rep.equilibrium_gap;
            flux2 += rep.tau_used * rep.flux_norm * rep.flux_norm;
        }
        row.gap_time_integrated = std::sqrt(gap2);
        row.flux_time_integrated = std::sqrt(flux2);

        const CoupledField d_dir{out.final_state.phi - dir_ref.final_state.phi,
                                 out.final_state.psi - dir_ref.final_state.psi};
        const CoupledField d_dec{out.final_state.phi - dec_ref.final_state.phi,
                                 out.final_state.psi - dec_ref.final_state.psi};
        row.dist_dirichlet_star = ops.hminus_norm_S0(d_dir);
        row.dist_dirichlet_l2 = l2_dist(out.final_state, dir_ref.final_state);
        row.dist_decoupled_star = ops.hminus_norm_S0(d_dec);
        row.dist_decoupled_l2 = l2_dist(out.final_state, dec_ref.final_state);
        result.rows.push_back(row);
    }

    std::vector<double> l, gap, flux, invl;
    for (const auto& r : result.rows) {
        l.push_back(r.L);
        invl.push_back(1.0 / r.L);
        gap.push_back(r.gap_time_integrated);
        flux.push_back(r.flux_time_integrated);
    }
    result.slope_gap_vs_L = fit_loglog_slope(l, gap);
    result.slope_flux_vs_invL = fit_loglog_slope(invl, flux);

    result.gap_increasing_with_L = true;
    result.flux_decreasing_with_L = true;
    result.dist_dirichlet_increasing_with_L = true;
    result.dist_decoupled_decreasing_with_L = true;
    for (size_t i = 1; i < result.rows.size(); ++i) {
        if (result.rows[i].gap_time_integrated <= result.rows[i - 1].gap_time_integrated)
            result.gap_increasing_with_L = false;
        if (result.rows[i].flux_time_integrated >= result.rows[i - 1].flux_time_integrated)
            result.flux_decreasing_with_L = false;
        if (result.rows[i].dist_dirichlet_star <= result.rows[i - 1].dist_dirichlet_star)
            result.dist_dirichlet_increasing_with_L = false;
        if (result.rows[i].dist_decoupled_star >= result.rows[i - 1].dist_decoupled_star)
            result.dist_decoupled_decreasing_with_L = false;
    }

    std::ofstream csv(dir / "sweep.csv");
    csv << "L,gap_l2_time,flux_l2_time,dist_dirichlet_star,dist_dirichlet_l2,"
           "dist_decoupled_star,dist_decoupled_l2\n";
    for (const auto& r : result.rows) {
        csv << format_g17(r.L) << ',' << format_g17(r.gap_time_integrated) << ','
            << format_g17(r.flux_time_integrated) << ',' << format_g17(r.dist_dirichlet_star) << ','
            << format_g17(r.dist_dirichlet_l2) << ',' << format_g17(r.dist_decoupled_star) << ','
            << format_g17(r.dist_decoupled_l2) << '\n';
    }
    csv << "# slope_gap_vs_L = " << format_g17(result.slope_gap_vs_L) << "\n";
    csv << "# slope_flux_vs_invL = " << format_g17(result.slope_flux_vs_invL) << "\n";
    return result;
}

void emit_fields(const std::string& path, const State& state) { write_state_fields(path, state); }

int check_config(const RunConfig& cfg, std::ostream& out)
{
    try {
        BuiltProblem built = build_problem(cfg);
        out << "admissibility report (mesh level " << cfg.mesh_level << ", "
            << built.problem.mesh.n_vertices() << " vertices):\n";
        bool all = true;
        for (const auto& r : built.admissibility) {
            out << "  [" << (r.pass ? "pass" : "FAIL") << "] " << r.tag << ": " << r.detail << "\n";
            all = all && r.pass;
        }
        out << "  convexity margins: c_bulk = " << built.margins.c_bulk
            << ", c_surf = " << built.margins.c_surf << "\n";
        return all ? 0 : 1;
    } catch (const ConfigError& e) {
        out << "admissibility failure: " << e.what() << "\n";
        return 1;
    }
}

} // namespace nlch
