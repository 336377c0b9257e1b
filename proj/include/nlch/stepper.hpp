#ifndef NLCH_STEPPER_HPP
#define NLCH_STEPPER_HPP

#include "nlch/elliptic.hpp"
#include "nlch/energy.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace nlch {

// Everything the time scheme needs, immutable after assembly.
struct Problem {
    TriMesh mesh;
    FemMatrices fem;
    ConvolutionOperator bulk_op;
    ConvolutionOperator surf_op;
    PotentialSpec pot;
    PenaltySpec pen;
    ModelSpec model;
};

struct State {
    Vec phi;
    Vec psi;
    double t = 0.0;
};

struct StepConfig {
    double tau = 1e-3;
    double newton_tol = 1e-10; // absolute, on the weighted residual
    int max_newton = 25;
    int max_backoff = 6;       // tau halvings before giving up
};

struct StepReport {
    int newton_iters = 0;
    double final_residual = 0.0;
    double tau_used = 0.0;
    double energy_before = 0.0;
    double energy_after = 0.0;
    double energy_after_difference_form = 0.0;
    double movement_norm = 0.0;    // |new - old| in the model's flow metric
    double mass_value = 0.0;       // beta-weighted combined mass
    double mass_bulk = 0.0;
    double mass_surf = 0.0;
    double equilibrium_gap = 0.0;  // |beta nu - mu| in the lumped L^2(Gamma) norm
    double flux_norm = 0.0;        // |(beta nu - mu)/L| (Robin only, 0 otherwise)
    double quad_fit_c = 0.0;       // last fitted r_{k+1}/r_k^2 ratio
    std::vector<double> residual_history;

    // Discrete energy inequality with the movement penalty:
    // energy_after + movement_norm^2/(2 tau) - energy_before <= tol * (1 + |E_before|).
    bool certificate_pass(double tol = 1e-9) const;
    double certificate_value() const;
};

// Implicit Euler / minimizing-movement step for the three couplings, via
// monolithic Newton on the nonlinear Euler-Lagrange system. The chemical
// potential rows are nodewise identities, so (mu,nu) are eliminated exactly
// and the Newton iterates match those of the stacked four-block system.
// The admissible potential class keeps positive convexity margins, which
// makes the proximal critical point unique; no minimizer tie-breaking exists.
//
// Robin flux-term signs follow the strong boundary condition L dn(mu) =
// beta nu - mu: the bulk row gains +(m_bulk/L) T' M_s (beta nu - T mu), the
// surface row -(beta m_bulk/L) M_s (beta nu - T mu); with these signs the
// discrete dissipation identity holds exactly.
//
// A Stepper instance is used from one logical thread at a time; distinct
// instances share no mutable data.
class Stepper {
public:
    Stepper(const Problem& problem, StepConfig cfg);

    // Advances by cfg.tau (with halving retries on Newton failure). Throws
    // SolverError carrying the residual history when all retries fail.
    std::pair<State, StepReport> step(const State& state) const;

    const Problem& problem() const { return prob_; }
    const StepConfig& config() const { return cfg_; }

private:
    const Problem& prob_;
    StepConfig cfg_;

    // sparse pieces of the flow rows, precomputed per model
    SpMat K_b_, K_s_, B_bs_, B_sb_, K_dir_, TtDws_;

    std::pair<State, StepReport> attempt(const State& state, double tau) const;
    void solve_robin(const State& old, double tau, State& next, StepReport& rep) const;
    void solve_dirichlet(const State& old, double tau, State& next, StepReport& rep) const;
    void solve_decoupled(const State& old, double tau, State& next, StepReport& rep) const;
    void finalize_report(const State& old, const State& next, double tau, StepReport& rep) const;
};

struct CertificateReport {
    double energy_old = 0.0;
    double energy_new = 0.0;
    double movement_norm = 0.0; // via the elliptic solvers, independent of the stepper
    double value = 0.0;         // E(new) + movement^2/(2 tau) - E(old)
    bool pass = false;
};

// Independent minimizing-movement certificate: the movement norm is computed
// by the elliptic solution operators on (new - old), not from the stepper's
// internal potentials. Assumes unit mobilities (the shipped defaults).
CertificateReport minimizing_movement_certificate(const State& old_state, const State& new_state, double tau,
                                                  const Problem& prob, const EllipticOperators& ops,
                                                  double tol = 1e-9);

struct RunResult {
    State final_state;
    std::vector<StepReport> reports;
    bool completed = false;
    std::string error;
};

// Runs n_steps steps, invoking on_step after each one (checkpointing, CSV
// rows, ...). Halts early on non-convergence, retaining partial results.
RunResult run_steps(const Stepper& stepper, const State& initial, int n_steps,
                    const std::function<void(int, const State&, const StepReport&)>& on_step = {});

// Nodal field snapshot, same header style as the mesh export:
//   # vertices N   (phi values)
//   # boundary K   (psi values)
// Round-trips bit-exactly; loadable as initial data.
void write_state_fields(const std::string& path, const State& state);
State read_state_fields(const std::string& path, Eigen::Index n_vertices, Eigen::Index n_boundary);

// Versioned plain-text checkpoint: fields with full precision plus a config
// echo block; round-trips bit-exactly.
void write_checkpoint(const std::string& path, const State& state, int step_index,
                      const std::vector<std::string>& config_echo);

struct Checkpoint {
    State state;
    int step_index = 0;
    std::vector<std::string> config_echo;
};
Checkpoint read_checkpoint(const std::string& path);

} // namespace nlch

#endif
