#ifndef NLCH_SIMULATION_HPP
#define NLCH_SIMULATION_HPP

#include "nlch/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace nlch {

// Resolves cfg.output_dir against the NLCH_OUTPUT_ROOT environment variable
// (relative paths only) and creates the directory.
std::string prepare_output_dir(const RunConfig& cfg);

struct SimulationOutcome {
    int exit_status = 0; // 0 on full completion
    std::string output_dir;
    State final_state;
    std::vector<StepReport> reports;
    std::string error;
};

// Drives one simulation: writes diagnostics.csv (one row per step, plus the
// initial row), admissibility.csv, config_echo.cfg, run.log, field snapshots
// at the configured cadence and a final checkpoint. Partial outputs are
// retained when the solver halts early.
SimulationOutcome run_simulation(const RunConfig& cfg);

struct SweepRow {
    double L = 0.0;
    double gap_time_integrated = 0.0;  // |beta nu - mu| in L^2(Gamma_T)
    double flux_time_integrated = 0.0; // |(beta nu - mu)/L| in L^2(Gamma_T)
    double dist_dirichlet_star = 0.0;  // terminal-state |.|_{0,beta,*} distance to the Dirichlet run
    double dist_dirichlet_l2 = 0.0;
    double dist_decoupled_star = 0.0;
    double dist_decoupled_l2 = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows; // sorted by increasing L
    double slope_gap_vs_L = 0.0;      // log-log fit of gap against L
    double slope_flux_vs_invL = 0.0;  // log-log fit of flux against 1/L
    bool gap_increasing_with_L = false;
    bool flux_decreasing_with_L = false;
    bool dist_dirichlet_increasing_with_L = false;
    bool dist_decoupled_decreasing_with_L = false;
    std::string output_dir;
};

// Runs the Robin model once per L plus the Dirichlet and decoupled reference
// runs, all from identical initial data and tau. Requires >= 4 values
// spanning >= 3 decades and beta > 0. Emits sweep.csv (rows plus fitted-slope
// comment lines) under the base output directory.
SweepResult sweep_L(const RunConfig& base, const std::vector<double>& L_values);

// Nodal state snapshot, loadable as initial data (init.mode = file).
void emit_fields(const std::string& path, const State& state);

// Admissibility-only entry point; prints the report block. Returns 0 if all
// checks pass.
int check_config(const RunConfig& cfg, std::ostream& out);

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

std::string format_g17(double v);

} // namespace nlch

#endif
