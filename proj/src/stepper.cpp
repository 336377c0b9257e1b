#include "nlch/stepper.hpp"

#include <Eigen/LU>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace nlch {

namespace {

struct NewtonOutcome {
    bool converged = false;
    int iters = 0;
    double final_residual = 0.0;
    std::vector<double> history;
};

// Exact-Jacobian Newton. `scale` weights the residual entries so that the
// convergence measure is the L^2 norm of the strong-form residual field.
template <class ResidualFn, class JacobianFn>
NewtonOutcome newton_solve(Vec& x, const Vec& scale, const ResidualFn& residual, const JacobianFn& jacobian,
                           double tol, int max_iter)
{
    NewtonOutcome out;
    for (int it = 0; it <= max_iter; ++it) {
        const Vec R = residual(x);
        const double rn = std::sqrt((R.array().square() * scale.array()).sum());
        out.history.push_back(rn);
        out.final_residual = rn;
        out.iters = it;
        if (!std::isfinite(rn))
            return out;
        if (rn <= tol) {
            out.converged = true;
            return out;
        }
        if (it == max_iter)
            return out;
        const Mat J = jacobian(x);
        Eigen::PartialPivLU<Mat> lu(J);
        const Vec dx = lu.solve(-R);
        if (!dx.allFinite())
            return out;
        x += dx;
    }
    return out;
}

double lumped_norm(const Vec& w, const Vec& v)
{
    return std::sqrt((w.array() * v.array().square()).sum());
}

std::string history_text(const std::vector<double>& h)
{
    std::ostringstream os;
    os << "residual history [";
    for (size_t k = 0; k < h.size(); ++k)
        os << (k ? ", " : "") << h[k];
    os << "]";
    return os.str();
}

} // namespace

bool StepReport::certificate_pass(double tol) const
{
    return certificate_value() <= tol * (1.0 + std::abs(energy_before));
}

double StepReport::certificate_value() const
{
    return energy_after + movement_norm * movement_norm / (2.0 * tau_used) - energy_before;
}

Stepper::Stepper(const Problem& problem, StepConfig cfg) : prob_(problem), cfg_(std::move(cfg))
{
    prob_.model.validate();
    if (!(cfg_.tau > 0.0) || !(cfg_.newton_tol > 0.0))
        throw ContractError("stepper: tau and newton_tol must be positive");

    const auto& fem = prob_.fem;
    const ModelSpec& m = prob_.model;
    switch (m.coupling) {
    case Coupling::Robin: {
        const SpMat MsT = fem.M_surf * fem.T;
        K_b_ = SpMat(m.m_bulk * fem.A_bulk) + SpMat((m.m_bulk / m.L) * (fem.T.transpose() * MsT));
        B_bs_ = SpMat((m.m_bulk * m.beta / m.L) * (fem.T.transpose() * fem.M_surf));
        B_sb_ = SpMat((m.m_bulk * m.beta / m.L) * MsT);
        K_s_ = SpMat(m.m_surf * fem.A_surf) + SpMat((m.m_bulk * m.beta * m.beta / m.L) * fem.M_surf);
        break;
    }
    case Coupling::Dirichlet: {
        K_dir_ = SpMat(m.m_bulk * fem.A_bulk) +
                 SpMat((m.m_surf / (m.beta * m.beta)) * (fem.T.transpose() * (fem.A_surf * fem.T)));
        TtDws_ = SpMat(fem.T.transpose() * SpMat(prob_.mesh.node_weights_surface.asDiagonal()));
        break;
    }
    case Coupling::Decoupled:
        K_b_ = SpMat(m.m_bulk * fem.A_bulk);
        K_s_ = SpMat(m.m_surf * fem.A_surf);
        break;
    }
}

void Stepper::solve_robin(const State& old, double tau, State& next, StepReport& rep) const
{
    const auto& p = prob_;
    const Eigen::Index nb = p.mesh.n_vertices(), ns = p.mesh.n_boundary();
    const Vec& wb = p.mesh.node_weights_bulk;
    const Vec& ws = p.mesh.node_weights_surface;

    Vec x(nb + ns);
    x << old.phi, old.psi;

    auto residual = [&](const Vec& v) {
        const Vec phi = v.head(nb), psi = v.tail(ns);
        const Vec mu = chemical_potential_bulk(phi, p.bulk_op, p.pot, p.model);
        const Vec nu = chemical_potential_surface(psi, p.surf_op, p.pot, p.pen, p.model);
        Vec R(nb + ns);
        R.head(nb) = (wb.array() * (phi - old.phi).array()).matrix() / tau + K_b_ * mu - B_bs_ * nu;
        R.tail(ns) = (ws.array() * (psi - old.psi).array()).matrix() / tau + K_s_ * nu - B_sb_ * mu;
        return R;
    };
    auto jacobian = [&](const Vec& v) {
        const Vec phi = v.head(nb), psi = v.tail(ns);
        Mat Hb = (-p.model.eps) * p.bulk_op.W;
        Hb.diagonal() += bulk_potential_hessian(phi, p.bulk_op, p.pot, p.model);
        Mat Hs = (-p.model.delta) * p.surf_op.W;
        Hs.diagonal() += surface_potential_hessian(psi, p.surf_op, p.pot, p.model);
        Mat J(nb + ns, nb + ns);
        J.topLeftCorner(nb, nb).noalias() = K_b_ * Hb;
        J.topLeftCorner(nb, nb).diagonal() += wb / tau;
        J.topRightCorner(nb, ns).noalias() = -(B_bs_ * Hs);
        J.bottomLeftCorner(ns, nb).noalias() = -(B_sb_ * Hb);
        J.bottomRightCorner(ns, ns).noalias() = K_s_ * Hs;
        J.bottomRightCorner(ns, ns).diagonal() += ws / tau;
        return J;
    };

    Vec scale(nb + ns);
    scale << wb.cwiseInverse(), ws.cwiseInverse();
    const NewtonOutcome out = newton_solve(x, scale, residual, jacobian, cfg_.newton_tol, cfg_.max_newton);
    rep.newton_iters = out.iters;
    rep.final_residual = out.final_residual;
    rep.residual_history = out.history;
    if (!out.converged)
        throw SolverError("newton: no convergence; " + history_text(out.history));

    next.phi = x.head(nb);
    next.psi = x.tail(ns);
}

void Stepper::solve_dirichlet(const State& old, double tau, State& next, StepReport& rep) const
{
    const auto& p = prob_;
    const Eigen::Index nb = p.mesh.n_vertices(), ns = p.mesh.n_boundary();
    const Vec& wb = p.mesh.node_weights_bulk;
    const Vec& ws = p.mesh.node_weights_surface;
    const double beta = p.model.beta;

    Vec x(nb + ns);
    x << old.phi, old.psi;

    auto residual = [&](const Vec& v) {
        const Vec phi = v.head(nb), psi = v.tail(ns);
        const Vec u = chemical_potential_bulk(phi, p.bulk_op, p.pot, p.model); // single potential
        const Vec nu = chemical_potential_surface(psi, p.surf_op, p.pot, p.pen, p.model);
        Vec R(nb + ns);
        R.head(nb) = (wb.array() * (phi - old.phi).array()).matrix() / tau +
                     (1.0 / (beta * tau)) * (TtDws_ * (psi - old.psi)) + K_dir_ * u;
        R.tail(ns) = (1.0 / beta) * (prob_.fem.T * u) - nu;
        return R;
    };
    auto jacobian = [&](const Vec& v) {
        const Vec phi = v.head(nb), psi = v.tail(ns);
        Mat Hb = (-p.model.eps) * p.bulk_op.W;
        Hb.diagonal() += bulk_potential_hessian(phi, p.bulk_op, p.pot, p.model);
        Mat Hs = (-p.model.delta) * p.surf_op.W;
        Hs.diagonal() += surface_potential_hessian(psi, p.surf_op, p.pot, p.model);
        Mat J = Mat::Zero(nb + ns, nb + ns);
        J.topLeftCorner(nb, nb).noalias() = K_dir_ * Hb;
        J.topLeftCorner(nb, nb).diagonal() += wb / tau;
        J.topRightCorner(nb, ns) = Mat(TtDws_) / (beta * tau);
        J.bottomLeftCorner(ns, nb).noalias() = (1.0 / beta) * (prob_.fem.T * Hb);
        J.bottomRightCorner(ns, ns) = -Hs;
        return J;
    };

    Vec scale(nb + ns);
    scale << wb.cwiseInverse(), ws;
    const NewtonOutcome out = newton_solve(x, scale, residual, jacobian, cfg_.newton_tol, cfg_.max_newton);
    rep.newton_iters = out.iters;
    rep.final_residual = out.final_residual;
    rep.residual_history = out.history;
    if (!out.converged)
        throw SolverError("newton: no convergence; " + history_text(out.history));

    next.phi = x.head(nb);
    next.psi = x.tail(ns);
}

void Stepper::solve_decoupled(const State& old, double tau, State& next, StepReport& rep) const
{
    const auto& p = prob_;
    const Vec& wb = p.mesh.node_weights_bulk;
    const Vec& ws = p.mesh.node_weights_surface;

    // bulk: no-flux nonlocal Cahn-Hilliard
    Vec phi = old.phi;
    auto resid_b = [&](const Vec& v) -> Vec {
        return (wb.array() * (v - old.phi).array()).matrix() / tau +
               K_b_ * chemical_potential_bulk(v, p.bulk_op, p.pot, p.model);
    };
    auto jac_b = [&](const Vec& v) {
        Mat Hb = (-p.model.eps) * p.bulk_op.W;
        Hb.diagonal() += bulk_potential_hessian(v, p.bulk_op, p.pot, p.model);
        Mat J(wb.size(), wb.size());
        J.noalias() = K_b_ * Hb;
        J.diagonal() += wb / tau;
        return J;
    };
    const NewtonOutcome out_b =
        newton_solve(phi, wb.cwiseInverse(), resid_b, jac_b, cfg_.newton_tol, cfg_.max_newton);

    // surface: nonlocal Cahn-Hilliard on the boundary loop
    Vec psi = old.psi;
    auto resid_s = [&](const Vec& v) -> Vec {
        return (ws.array() * (v - old.psi).array()).matrix() / tau +
               K_s_ * chemical_potential_surface(v, p.surf_op, p.pot, p.pen, p.model);
    };
    auto jac_s = [&](const Vec& v) {
        Mat Hs = (-p.model.delta) * p.surf_op.W;
        Hs.diagonal() += surface_potential_hessian(v, p.surf_op, p.pot, p.model);
        Mat J(ws.size(), ws.size());
        J.noalias() = K_s_ * Hs;
        J.diagonal() += ws / tau;
        return J;
    };
    const NewtonOutcome out_s =
        newton_solve(psi, ws.cwiseInverse(), resid_s, jac_s, cfg_.newton_tol, cfg_.max_newton);

    rep.newton_iters = std::max(out_b.iters, out_s.iters);
    rep.final_residual = std::hypot(out_b.final_residual, out_s.final_residual);
    rep.residual_history.resize(std::max(out_b.history.size(), out_s.history.size()));
    for (size_t k = 0; k < rep.residual_history.size(); ++k) {
        const double rb = k < out_b.history.size() ? out_b.history[k] : out_b.final_residual;
        const double rs = k < out_s.history.size() ? out_s.history[k] : out_s.final_residual;
        rep.residual_history[k] = std::hypot(rb, rs);
    }
    if (!out_b.converged || !out_s.converged)
        throw SolverError("newton: no convergence; " + history_text(rep.residual_history));

    next.phi = phi;
    next.psi = psi;
}

void Stepper::finalize_report(const State&, const State& next, double tau, StepReport& rep) const
{
    const auto& p = prob_;
    const ModelSpec& m = p.model;
    const Vec& wb = p.mesh.node_weights_bulk;
    const Vec& ws = p.mesh.node_weights_surface;

    const Vec mu = chemical_potential_bulk(next.phi, p.bulk_op, p.pot, m);
    Vec nu;
    Vec gap;
    if (m.coupling == Coupling::Dirichlet) {
        // single-potential reconstruction: nu = mu|_Gamma / beta, gap is zero by construction
        nu = (1.0 / m.beta) * (p.fem.T * mu);
        gap = Vec::Zero(ws.size());
    } else {
        nu = chemical_potential_surface(next.psi, p.surf_op, p.pot, p.pen, m);
        gap = m.beta * nu - p.fem.T * mu;
    }

    rep.tau_used = tau;
    rep.equilibrium_gap = lumped_norm(ws, gap);
    rep.flux_norm = m.coupling == Coupling::Robin ? rep.equilibrium_gap / m.L : 0.0;
    rep.mass_bulk = wb.dot(next.phi);
    rep.mass_surf = ws.dot(next.psi);
    rep.mass_value = m.beta * rep.mass_bulk + rep.mass_surf;

    double move2 = 0.0;
    switch (m.coupling) {
    case Coupling::Robin:
        move2 = m.m_bulk * mu.dot(p.fem.A_bulk * mu) + m.m_surf * nu.dot(p.fem.A_surf * nu) +
                (m.m_bulk / m.L) * gap.dot(p.fem.M_surf * gap);
        break;
    case Coupling::Dirichlet: {
        const Vec tmu = p.fem.T * mu;
        move2 = m.m_bulk * mu.dot(p.fem.A_bulk * mu) +
                (m.m_surf / (m.beta * m.beta)) * tmu.dot(p.fem.A_surf * tmu);
        break;
    }
    case Coupling::Decoupled:
        move2 = m.m_bulk * mu.dot(p.fem.A_bulk * mu) + m.m_surf * nu.dot(p.fem.A_surf * nu);
        break;
    }
    rep.movement_norm = tau * std::sqrt(std::max(0.0, move2));

    rep.energy_after =
        total_energy(next.phi, next.psi, p.bulk_op, p.surf_op, p.pot, p.pen, m, EnergyForm::ConvolutionForm).total();
    rep.energy_after_difference_form =
        total_energy(next.phi, next.psi, p.bulk_op, p.surf_op, p.pot, p.pen, m, EnergyForm::DifferenceForm).total();

    if (rep.residual_history.size() >= 3) {
        const size_t k = rep.residual_history.size() - 1;
        const double prev = rep.residual_history[k - 1];
        rep.quad_fit_c = prev > 0.0 ? rep.residual_history[k] / (prev * prev) : 0.0;
    }
}

std::pair<State, StepReport> Stepper::attempt(const State& state, double tau) const
{
    StepReport rep;
    rep.energy_before =
        total_energy(state.phi, state.psi, prob_.bulk_op, prob_.surf_op, prob_.pot, prob_.pen, prob_.model,
                     EnergyForm::ConvolutionForm)
            .total();
    State next;
    next.t = state.t + tau;
    switch (prob_.model.coupling) {
    case Coupling::Robin: solve_robin(state, tau, next, rep); break;
    case Coupling::Dirichlet: solve_dirichlet(state, tau, next, rep); break;
    case Coupling::Decoupled: solve_decoupled(state, tau, next, rep); break;
    }
    finalize_report(state, next, tau, rep);
    return {std::move(next), std::move(rep)};
}

std::pair<State, StepReport> Stepper::step(const State& state) const
{
    if (state.phi.size() != prob_.mesh.n_vertices() || state.psi.size() != prob_.mesh.n_boundary())
        throw ContractError("stepper: state size does not match the mesh");

    double tau = cfg_.tau;
    std::string failures;
    for (int attempt_idx = 0; attempt_idx <= cfg_.max_backoff; ++attempt_idx) {
        try {
            return attempt(state, tau);
        } catch (const SolverError& e) {
            std::ostringstream os;
            os << failures << "\n  tau = " << tau << ": " << e.what();
            failures = os.str();
            tau *= 0.5;
        }
    }
    throw SolverError("stepper: Newton failed after " + std::to_string(cfg_.max_backoff) +
                      " tau halvings; attempts:" + failures);
}

CertificateReport minimizing_movement_certificate(const State& old_state, const State& new_state, double tau,
                                                  const Problem& prob, const EllipticOperators& ops,
                                                  double tol)
{
    if (old_state.phi.size() != new_state.phi.size() || old_state.psi.size() != new_state.psi.size())
        throw ContractError("certificate: states live on different meshes");
    if (!(tau > 0.0))
        throw ContractError("certificate: tau must be positive");

    CertificateReport rep;
    rep.energy_old = total_energy(old_state.phi, old_state.psi, prob.bulk_op, prob.surf_op, prob.pot, prob.pen,
                                  prob.model, EnergyForm::ConvolutionForm)
                         .total();
    rep.energy_new = total_energy(new_state.phi, new_state.psi, prob.bulk_op, prob.surf_op, prob.pot, prob.pen,
                                  prob.model, EnergyForm::ConvolutionForm)
                         .total();

    const CoupledField diff{new_state.phi - old_state.phi, new_state.psi - old_state.psi};
    switch (prob.model.coupling) {
    case Coupling::Robin:
        rep.movement_norm = ops.hminus_norm_S(diff);
        break;
    case Coupling::Dirichlet:
        rep.movement_norm = ops.hminus_norm_S0(diff);
        break;
    case Coupling::Decoupled: {
        const double nb = ops.hminus_norm_N_bulk(diff.bulk);
        const double nsv = ops.hminus_norm_N_surf(diff.surf);
        rep.movement_norm = std::hypot(nb, nsv);
        break;
    }
    }
    rep.value = rep.energy_new + rep.movement_norm * rep.movement_norm / (2.0 * tau) - rep.energy_old;
    rep.pass = rep.value <= tol * (1.0 + std::abs(rep.energy_old));
    return rep;
}

RunResult run_steps(const Stepper& stepper, const State& initial, int n_steps,
                    const std::function<void(int, const State&, const StepReport&)>& on_step)
{
    if (n_steps < 0)
        throw ContractError("run_steps: n_steps must be nonnegative");
    RunResult result;
    result.final_state = initial;
    result.reports.reserve(static_cast<size_t>(n_steps));
    for (int k = 0; k < n_steps; ++k) {
        try {
            auto [next, rep] = stepper.step(result.final_state);
            result.final_state = std::move(next);
            result.reports.push_back(rep);
            if (on_step)
                on_step(k + 1, result.final_state, result.reports.back());
        } catch (const SolverError& e) {
            result.error = e.what();
            return result;
        }
    }
    result.completed = true;
    return result;
}

void write_state_fields(const std::string& path, const State& state)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot open field file for writing: " + path);
    char buf[64];
    out << "# vertices " << state.phi.size() << "\n";
    for (Eigen::Index i = 0; i < state.phi.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g\n", state.phi[i]);
        out << buf;
    }
    out << "# boundary " << state.psi.size() << "\n";
    for (Eigen::Index i = 0; i < state.psi.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g\n", state.psi[i]);
        out << buf;
    }
}

State read_state_fields(const std::string& path, Eigen::Index n_vertices, Eigen::Index n_boundary)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open field file: " + path);
    std::string line;
    auto read_block = [&](const std::string& tag, Eigen::Index expected) {
        if (!std::getline(in, line))
            throw ConfigError("field file '" + path + "': missing '# " + tag + "' header");
        std::istringstream is(line);
        std::string hash, word;
        Eigen::Index n = -1;
        is >> hash >> word >> n;
        if (hash != "#" || word != tag)
            throw ConfigError("field file '" + path + "': expected '# " + tag + " N', got: " + line);
        if (n != expected)
            throw ConfigError("field file '" + path + "': expected " + std::to_string(expected) + " " + tag +
                              " values, file declares " + std::to_string(n));
        Vec v(n);
        for (Eigen::Index i = 0; i < n; ++i)
            if (!(in >> v[i]))
                throw ConfigError("field file '" + path + "': truncated " + tag + " block");
        in.ignore();
        return v;
    };
    State s;
    s.phi = read_block("vertices", n_vertices);
    s.psi = read_block("boundary", n_boundary);
    return s;
}

void write_checkpoint(const std::string& path, const State& state, int step_index,
                      const std::vector<std::string>& config_echo)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot open checkpoint for writing: " + path);
    char buf[64];
    out << "# nlch checkpoint 1\n";
    out << "# step " << step_index << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", state.t);
    out << "# time " << buf << "\n";
    out << "# vertices " << state.phi.size() << "\n";
    for (Eigen::Index i = 0; i < state.phi.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g\n", state.phi[i]);
        out << buf;
    }
    out << "# boundary " << state.psi.size() << "\n";
    for (Eigen::Index i = 0; i < state.psi.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g\n", state.psi[i]);
        out << buf;
    }
    out << "# config " << config_echo.size() << "\n";
    for (const auto& line : config_echo)
        out << line << "\n";
    out << "# end\n";
}

Checkpoint read_checkpoint(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open checkpoint: " + path);
    std::string line;
    auto header = [&](const std::string& tag) -> std::string {
        if (!std::getline(in, line))
            throw ConfigError("checkpoint: missing '# " + tag + "' header in " + path);
        std::istringstream is(line);
        std::string hash, word, rest;
        is >> hash >> word;
        std::getline(is, rest);
        if (hash != "#" || word != tag)
            throw ConfigError("checkpoint: expected '# " + tag + "', got: " + line);
        return rest;
    };

    if (header("nlch") != " checkpoint 1")
        throw ConfigError("checkpoint: unsupported version in " + path);
    Checkpoint cp;
    cp.step_index = std::stoi(header("step"));
    cp.state.t = std::stod(header("time"));
    const int nb = std::stoi(header("vertices"));
    cp.state.phi.resize(nb);
    for (int i = 0; i < nb; ++i)
        in >> cp.state.phi[i];
    in.ignore();
    const int ns = std::stoi(header("boundary"));
    cp.state.psi.resize(ns);
    for (int i = 0; i < ns; ++i)
        in >> cp.state.psi[i];
    in.ignore();
    const int nc = std::stoi(header("config"));
    cp.config_echo.resize(static_cast<size_t>(nc));
    for (auto& l : cp.config_echo)
        std::getline(in, l);
    if (!in)
        throw ConfigError("checkpoint: truncated file " + path);
    return cp;
}

} // namespace nlch
