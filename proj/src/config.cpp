#include "nlch/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace nlch {

namespace {

std::string trim(const std::string& s)
{
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a])))
        ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])))
        --b;
    return s.substr(a, b - a);
}

const std::set<std::string>& known_keys()
{
    static const std::set<std::string> keys = {
        "mesh.level",
        "kernel.bulk.family", "kernel.bulk.amplitude", "kernel.bulk.width", "kernel.bulk.omega",
        "kernel.bulk.alpha", "kernel.bulk.c_alpha",
        "kernel.surface.family", "kernel.surface.amplitude", "kernel.surface.width",
        "potential.f", "potential.g", "penalty.b",
        "model.type", "model.L", "model.beta", "model.m_bulk", "model.m_surf", "model.eps", "model.delta",
        "step.tau", "step.newton_tol", "step.max_newton", "step.max_backoff",
        "run.n_steps", "run.seed", "run.output_dir", "run.snapshot_every",
        "init.mode", "init.phi_mean", "init.psi_mean", "init.amplitude", "init.fields",
        "solver.iterative", "convolution.dense_limit",
    };
    return keys;
}

double parse_double(const std::string& key, const std::string& v)
{
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size())
            throw std::invalid_argument("trailing characters");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

} // namespace

ConfigMap ConfigMap::parse_string(const std::string& text)
{
    ConfigMap map;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
        if (!known_keys().count(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        map.entries_[key] = value;
        map.lines_[key] = lineno;
    }
    return map;
}

ConfigMap ConfigMap::parse_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

bool ConfigMap::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string ConfigMap::get_string(const std::string& key, std::optional<std::string> def) const
{
    auto it = entries_.find(key);
    if (it != entries_.end())
        return it->second;
    if (def)
        return *def;
    throw ConfigError("config: missing required key '" + key + "'");
}

double ConfigMap::get_double(const std::string& key, std::optional<double> def) const
{
    if (!has(key)) {
        if (def)
            return *def;
        throw ConfigError("config: missing required key '" + key + "'");
    }
    return parse_double(key, entries_.at(key));
}

int ConfigMap::get_int(const std::string& key, std::optional<int> def) const
{
    const double x = get_double(key, def ? std::optional<double>(*def) : std::nullopt);
    if (x != std::floor(x))
        throw ConfigError("config key '" + key + "': expected an integer");
    return static_cast<int>(x);
}

std::uint64_t ConfigMap::get_u64(const std::string& key, std::optional<std::uint64_t> def) const
{
    if (!has(key)) {
        if (def)
            return *def;
        throw ConfigError("config: missing required key '" + key + "'");
    }
    try {
        return std::stoull(entries_.at(key));
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an unsigned integer");
    }
}

bool ConfigMap::get_bool(const std::string& key, std::optional<bool> def) const
{
    if (!has(key)) {
        if (def)
            return *def;
        throw ConfigError("config: missing required key '" + key + "'");
    }
    const std::string v = entries_.at(key);
    if (v == "true" || v == "1")
        return true;
    if (v == "false" || v == "0")
        return false;
    throw ConfigError("config key '" + key + "': expected true/false");
}

void ConfigMap::set(const std::string& key, const std::string& value)
{
    if (!known_keys().count(key))
        throw ConfigError("config: unknown key '" + key + "'");
    entries_[key] = value;
}

std::vector<std::string> ConfigMap::echo() const
{
    std::vector<std::string> lines;
    lines.reserve(entries_.size());
    for (const auto& [k, v] : entries_)
        lines.push_back(k + " = " + v);
    return lines;
}

Vec FieldSource::resolve(Eigen::Index expected_size) const
{
    if (is_scalar())
        return Vec::Constant(expected_size, scalar);
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open field file: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw ConfigError("field file '" + path + "': empty");
    std::istringstream hs(line);
    std::string hash, word;
    Eigen::Index count = -1;
    hs >> hash >> word >> count;
    if (hash != "#" || word != "values" || count < 0)
        throw ConfigError("field file '" + path + "': expected header '# values N'");
    if (count != expected_size)
        throw ConfigError("field file '" + path + "': expected " + std::to_string(expected_size) +
                          " values, file declares " + std::to_string(count));
    Vec v(count);
    for (Eigen::Index i = 0; i < count; ++i)
        if (!(in >> v[i]))
            throw ConfigError("field file '" + path + "': truncated after " + std::to_string(i) + " values");
    return v;
}

namespace {

KernelSpec kernel_from_map(const ConfigMap& map, const std::string& prefix, bool surface)
{
    const std::string fam = map.get_string(prefix + ".family", std::string("gaussian"));
    if (fam == "gaussian") {
        return gaussian_kernel(map.get_double(prefix + ".amplitude", 1.0), map.get_double(prefix + ".width", 0.5));
    }
    if (surface)
        throw ConfigError("A2: " + prefix + ".family = " + fam +
                          " is singular; surface kernels must be bounded in d = 2 (use gaussian)");
    if (fam == "truncated_power")
        return truncated_power_kernel(map.get_double(prefix + ".omega", 0.5));
    if (fam == "riesz_cutoff")
        return riesz_cutoff_kernel(map.get_double(prefix + ".alpha", 1.5), map.get_double(prefix + ".c_alpha", 1.0));
    throw ConfigError("config key '" + prefix + ".family': unknown kernel family '" + fam + "'");
}

FieldSource field_from_map(const ConfigMap& map, const std::string& key, double def)
{
    FieldSource src;
    if (!map.has(key)) {
        src.scalar = def;
        return src;
    }
    const std::string v = map.get_string(key);
    try {
        size_t pos = 0;
        src.scalar = std::stod(v, &pos);
        if (pos == v.size())
            return src;
    } catch (const std::exception&) {
    }
    src.path = v;
    return src;
}

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

RunConfig run_config_from_map(const ConfigMap& map)
{
    RunConfig cfg;
    cfg.mesh_level = map.get_int("mesh.level", 4);
    if (cfg.mesh_level < 0 || cfg.mesh_level > kMaxRefinementLevel)
        throw ConfigError("config key 'mesh.level': must be in [0," + std::to_string(kMaxRefinementLevel) + "]");
    cfg.kernel_bulk = kernel_from_map(map, "kernel.bulk", false);
    cfg.kernel_surface = kernel_from_map(map, "kernel.surface", true);
    cfg.f = field_from_map(map, "potential.f", 0.1);
    cfg.g = field_from_map(map, "potential.g", 0.1);
    cfg.b = field_from_map(map, "penalty.b", 0.0);

    const std::string type = map.get_string("model.type", std::string("robin"));
    if (type == "robin")
        cfg.model.coupling = Coupling::Robin;
    else if (type == "dirichlet")
        cfg.model.coupling = Coupling::Dirichlet;
    else if (type == "decoupled")
        cfg.model.coupling = Coupling::Decoupled;
    else
        throw ConfigError("config key 'model.type': expected robin|dirichlet|decoupled, got '" + type + "'");
    cfg.model.L = map.get_double("model.L", 1.0);
    cfg.model.beta = map.get_double("model.beta", 1.0);
    cfg.model.m_bulk = map.get_double("model.m_bulk", 1.0);
    cfg.model.m_surf = map.get_double("model.m_surf", 1.0);
    cfg.model.eps = map.get_double("model.eps", 1.0);
    cfg.model.delta = map.get_double("model.delta", 1.0);
    cfg.model.validate();

    cfg.step.tau = map.get_double("step.tau", 1e-3);
    cfg.step.newton_tol = map.get_double("step.newton_tol", 1e-10);
    cfg.step.max_newton = map.get_int("step.max_newton", 25);
    cfg.step.max_backoff = map.get_int("step.max_backoff", 6);
    if (!(cfg.step.tau > 0.0) || !(cfg.step.newton_tol > 0.0))
        throw ConfigError("config: step.tau and step.newton_tol must be positive");

    cfg.n_steps = map.get_int("run.n_steps", 200);
    cfg.seed = map.get_u64("run.seed", std::uint64_t{1234});
    cfg.output_dir = map.get_string("run.output_dir", std::string("out"));
    cfg.snapshot_every = map.get_int("run.snapshot_every", 0);

    const std::string mode = map.get_string("init.mode", std::string("noise"));
    if (mode == "constant")
        cfg.init_mode = InitMode::Constant;
    else if (mode == "noise")
        cfg.init_mode = InitMode::Noise;
    else if (mode == "file")
        cfg.init_mode = InitMode::File;
    else
        throw ConfigError("config key 'init.mode': expected constant|noise|file, got '" + mode + "'");
    cfg.init_phi_mean = map.get_double("init.phi_mean", 0.0);
    cfg.init_psi_mean = map.get_double("init.psi_mean", 0.0);
    cfg.init_amplitude = map.get_double("init.amplitude", 0.2);
    cfg.init_fields_path = map.get_string("init.fields", std::string(""));
    if (cfg.init_mode == InitMode::File && cfg.init_fields_path.empty())
        throw ConfigError("config: init.mode = file requires init.fields");

    cfg.iterative_solver = map.get_bool("solver.iterative", false);
    cfg.dense_node_limit = map.get_int("convolution.dense_limit", 6000);
    return cfg;
}

RunConfig load_run_config(const std::string& path) { return run_config_from_map(ConfigMap::parse_file(path)); }

std::vector<std::string> RunConfig::echo() const
{
    ConfigMap map;
    map.set("mesh.level", std::to_string(mesh_level));
    auto kernel_echo = [&map](const std::string& prefix, const KernelSpec& k) {
        switch (k.family) {
        case KernelFamily::Gaussian:
            map.set(prefix + ".family", "gaussian");
            map.set(prefix + ".amplitude", fmt(k.amplitude));
            map.set(prefix + ".width", fmt(k.width));
            break;
        case KernelFamily::TruncatedPower:
            map.set(prefix + ".family", "truncated_power");
            map.set(prefix + ".omega", fmt(k.omega));
            break;
        case KernelFamily::RieszCutoff:
            map.set(prefix + ".family", "riesz_cutoff");
            map.set(prefix + ".alpha", fmt(k.alpha));
            map.set(prefix + ".c_alpha", fmt(k.c_alpha));
            break;
        }
    };
    kernel_echo("kernel.bulk", kernel_bulk);
    kernel_echo("kernel.surface", kernel_surface);
    auto field_echo = [&map](const std::string& key, const FieldSource& s) {
        map.set(key, s.is_scalar() ? fmt(s.scalar) : s.path);
    };
    field_echo("potential.f", f);
    field_echo("potential.g", g);
    field_echo("penalty.b", b);
    map.set("model.type", ModelSpec::name(model.coupling));
    map.set("model.L", fmt(model.L));
    map.set("model.beta", fmt(model.beta));
    map.set("model.m_bulk", fmt(model.m_bulk));
    map.set("model.m_surf", fmt(model.m_surf));
    map.set("model.eps", fmt(model.eps));
    map.set("model.delta", fmt(model.delta));
    map.set("step.tau", fmt(step.tau));
    map.set("step.newton_tol", fmt(step.newton_tol));
    map.set("step.max_newton", std::to_string(step.max_newton));
    map.set("step.max_backoff", std::to_string(step.max_backoff));
    map.set("run.n_steps", std::to_string(n_steps));
    map.set("run.seed", std::to_string(seed));
    map.set("run.output_dir", output_dir);
    map.set("run.snapshot_every", std::to_string(snapshot_every));
    switch (init_mode) {
    case InitMode::Constant: map.set("init.mode", "constant"); break;
    case InitMode::Noise: map.set("init.mode", "noise"); break;
    case InitMode::File: map.set("init.mode", "file"); break;
    }
    map.set("init.phi_mean", fmt(init_phi_mean));
    map.set("init.psi_mean", fmt(init_psi_mean));
    map.set("init.amplitude", fmt(init_amplitude));
    if (!init_fields_path.empty())
        map.set("init.fields", init_fields_path);
    map.set("solver.iterative", iterative_solver ? "true" : "false");
    map.set("convolution.dense_limit", std::to_string(dense_node_limit));
    return map.echo();
}

BuiltProblem build_problem(const RunConfig& cfg)
{
    BuiltProblem built;
    Problem& p = built.problem;
    p.mesh = build_disk_mesh(cfg.mesh_level);
    p.fem = assemble_fem(p.mesh);
    p.model = cfg.model;

    ConvolutionOptions copts;
    copts.dense_node_limit = cfg.dense_node_limit;

    auto log_kernel = [&built](const std::string& which, const KernelSpec& spec, const AdmissibilityReport& rep) {
        std::ostringstream os;
        os << which << ": a_min = " << rep.a_min << ", a_max = " << rep.a_max
           << ", grad_row_sum_max = " << rep.grad_row_sum_max;
        if (spec.family == KernelFamily::TruncatedPower)
            os << ", analytic lower bound = " << rep.analytic_lower_bound;
        if (rep.analytic_upper_bound > 0.0)
            os << ", analytic a^* bound = " << rep.analytic_upper_bound;
        built.admissibility.push_back({"A2", os.str(), rep.positivity_pass && rep.upper_bound_pass});
        if (!rep.positivity_pass)
            throw ConfigError("A2: kernel." + which + " violates a_* > 0 (nodal a_min = " +
                              std::to_string(rep.a_min) + ")");
    };
    log_kernel("bulk", cfg.kernel_bulk, check_admissibility(cfg.kernel_bulk, p.mesh, false));
    log_kernel("surface", cfg.kernel_surface, check_admissibility(cfg.kernel_surface, p.mesh, true));

    p.bulk_op = assemble_bulk_convolution(p.mesh, cfg.kernel_bulk, copts);
    p.surf_op = assemble_surface_convolution(p.mesh, cfg.kernel_surface, copts);

    p.pot.f = cfg.f.resolve(p.mesh.n_vertices());
    p.pot.g = cfg.g.resolve(p.mesh.n_boundary());
    p.pen.b = cfg.b.resolve(p.mesh.n_boundary());

    if ((p.pot.f.array() < 0.0).any())
        throw ConfigError("A3: potential.f must be nonnegative");
    if ((p.pot.g.array() < 0.0).any())
        throw ConfigError("A3: potential.g must be nonnegative");
    if (!p.pen.b.allFinite())
        throw ConfigError("A5: penalty.b must be bounded");

    built.margins = convexity_margins(p.bulk_op, p.surf_op, p.pot, p.model);
    {
        std::ostringstream os;
        os << "c_bulk = " << built.margins.c_bulk << " (eps*a_min - max f/eps), c_surf = " << built.margins.c_surf;
        built.admissibility.push_back({"A3/A4", os.str(), built.margins.c_bulk > 0.0 && built.margins.c_surf > 0.0});
    }
    if (!(built.margins.c_bulk > 0.0))
        throw ConfigError("A3: max f >= a_* (potential.f destroys the uniform convexity margin; max f = " +
                          std::to_string(p.pot.f.maxCoeff()) + ", eps^2 * a_min = " +
                          std::to_string(p.model.eps * p.model.eps * p.bulk_op.a_field.minCoeff()) + ")");
    if (!(built.margins.c_surf > 0.0))
        throw ConfigError("A3: max g >= a_circledast (potential.g destroys the uniform convexity margin)");

    // Linear penalty: B'' = 0, so the Lipschitz constant is 0 < c_surf.
    built.admissibility.push_back({"A5/A8", "penalty B(z,s) = b(z) s: L_B = 0 < c_surf, |b|_max = " +
                                                std::to_string(p.pen.b.cwiseAbs().maxCoeff()),
                                   true});
    built.admissibility.push_back(
        {"A7", "quartic well: F'' growth exponent p-2 = 2 with p = q = 4", true});
    return built;
}

State make_initial_state(const RunConfig& cfg, const Problem& prob)
{
    const Eigen::Index nb = prob.mesh.n_vertices();
    const Eigen::Index ns = prob.mesh.n_boundary();
    State s;
    s.t = 0.0;
    switch (cfg.init_mode) {
    case InitMode::Constant:
        s.phi = Vec::Constant(nb, cfg.init_phi_mean);
        s.psi = Vec::Constant(ns, cfg.init_psi_mean);
        return s;
    case InitMode::File: {
        s = read_state_fields(cfg.init_fields_path, nb, ns);
        s.t = 0.0;
        return s;
    }
    case InitMode::Noise:
        break;
    }

    std::mt19937_64 rng(cfg.seed);
    s.phi.resize(nb);
    for (Eigen::Index i = 0; i < nb; ++i)
        s.phi[i] = cfg.init_phi_mean + cfg.init_amplitude * unit_symmetric(rng());
    s.psi.resize(ns);
    for (Eigen::Index i = 0; i < ns; ++i)
        s.psi[i] = cfg.init_psi_mean + cfg.init_amplitude * unit_symmetric(rng());

    // project each component onto its weighted-mean class so that bulk,
    // surface, and hence the beta-weighted combined mass are hit exactly
    const Vec& wb = prob.mesh.node_weights_bulk;
    const Vec& ws = prob.mesh.node_weights_surface;
    s.phi.array() += (cfg.init_phi_mean * wb.sum() - wb.dot(s.phi)) / wb.sum();
    s.psi.array() += (cfg.init_psi_mean * ws.sum() - ws.dot(s.psi)) / ws.sum();
    return s;
}

} // namespace nlch
