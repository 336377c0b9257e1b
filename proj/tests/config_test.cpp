#include "nlch/simulation.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nlch;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig small_run_config(const std::string& out_dir)
{
    RunConfig cfg;
    cfg.mesh_level = 2;
    cfg.n_steps = 10;
    cfg.output_dir = out_dir;
    return cfg;
}

} // namespace

TEST_CASE("minimal config gets the documented defaults")
{
    const RunConfig cfg = run_config_from_map(ConfigMap::parse_string(""));
    CHECK(cfg.model.m_bulk == 1.0);
    CHECK(cfg.model.m_surf == 1.0);
    CHECK(cfg.model.eps == 1.0);
    CHECK(cfg.model.delta == 1.0);
    CHECK(cfg.model.coupling == Coupling::Robin);
    CHECK(cfg.model.L == 1.0);
    CHECK(cfg.step.newton_tol == 1e-10);
    CHECK(cfg.step.max_newton == 25);
}

TEST_CASE("config parser rejects malformed input")
{
    CHECK_THROWS_WITH_AS(ConfigMap::parse_string("nonsense.key = 1\n"),
                         doctest::Contains("unknown key 'nonsense.key'"), ConfigError);
    CHECK_THROWS_AS(ConfigMap::parse_string("mesh.level\n"), ConfigError);
    CHECK_THROWS_WITH_AS(run_config_from_map(ConfigMap::parse_string("step.tau = fast\n")),
                         doctest::Contains("expected a number"), ConfigError);
    CHECK_THROWS_AS(run_config_from_map(ConfigMap::parse_string("model.type = mixed\n")), ConfigError);
    CHECK_NOTHROW(ConfigMap::parse_string("# only a comment\n\n"));
}

TEST_CASE("potential weight beyond the convexity bound is rejected citing A3")
{
    RunConfig cfg;
    cfg.mesh_level = 1;
    cfg.f = FieldSource{10.0, ""}; // far above a_* for the gaussian preset
    try {
        build_problem(cfg);
        FAIL("expected an admissibility error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("A3") != std::string::npos);
    }
}

TEST_CASE("singular surface kernel is rejected citing the trace restriction")
{
    CHECK_THROWS_WITH_AS(run_config_from_map(ConfigMap::parse_string("kernel.surface.family = riesz_cutoff\n")),
                         doctest::Contains("A2"), ConfigError);
}

TEST_CASE("config echo reparses to an identical config")
{
    RunConfig cfg;
    cfg.mesh_level = 3;
    cfg.kernel_bulk = truncated_power_kernel(0.4);
    cfg.model.L = 0.25;
    cfg.seed = 99;
    std::ostringstream text;
    for (const auto& line : cfg.echo())
        text << line << "\n";
    const RunConfig back = run_config_from_map(ConfigMap::parse_string(text.str()));
    CHECK(back.echo() == cfg.echo());
    CHECK(back.mesh_level == 3);
    CHECK(back.kernel_bulk.family == KernelFamily::TruncatedPower);
    CHECK(back.model.L == 0.25);
    CHECK(back.seed == 99);
}

TEST_CASE("nodal field files feed the potential weights")
{
    const TriMesh& m = nlch::testing::disk(1);
    const fs::path path = "f_field_test.txt";
    {
        std::ofstream out(path);
        out << "# values " << m.n_vertices() << "\n";
        for (int i = 0; i < m.n_vertices(); ++i)
            out << 0.01 * i << "\n";
    }
    RunConfig cfg;
    cfg.mesh_level = 1;
    cfg.f = FieldSource{0.0, path.string()};
    const BuiltProblem built = build_problem(cfg);
    CHECK(built.problem.pot.f[5] == doctest::Approx(0.05));

    RunConfig bad = cfg;
    bad.mesh_level = 2; // node count mismatch
    CHECK_THROWS_WITH_AS(build_problem(bad), doctest::Contains("expected"), ConfigError);
    fs::remove(path);
}

TEST_CASE("initial noise is seeded and lands exactly in the mass class")
{
    RunConfig cfg;
    cfg.mesh_level = 2;
    cfg.init_phi_mean = 0.2;
    cfg.init_psi_mean = -0.1;
    const BuiltProblem built = build_problem(cfg);
    const State a = make_initial_state(cfg, built.problem);
    const State b = make_initial_state(cfg, built.problem);
    CHECK(a.phi == b.phi); // same seed, bitwise equal

    const auto& mesh = built.problem.mesh;
    CHECK(mesh.node_weights_bulk.dot(a.phi) / mesh.area() == doctest::Approx(0.2).epsilon(1e-13));
    CHECK(mesh.node_weights_surface.dot(a.psi) / mesh.boundary_length() == doctest::Approx(-0.1).epsilon(1e-13));

    RunConfig other = cfg;
    other.seed = cfg.seed + 1;
    const State c = make_initial_state(other, built.problem);
    CHECK(a.phi != c.phi);
}

TEST_CASE("run_simulation: zero steps, monotone energy, determinism")
{
    const fs::path root = "sim_test_out";
    fs::remove_all(root);

    SUBCASE("zero steps writes exactly the initial row")
    {
        RunConfig cfg = small_run_config((root / "zero").string());
        cfg.n_steps = 0;
        const SimulationOutcome out = run_simulation(cfg);
        CHECK(out.exit_status == 0);
        std::istringstream csv(slurp(fs::path(out.output_dir) / "diagnostics.csv"));
        std::string line;
        int rows = 0;
        while (std::getline(csv, line))
            ++rows;
        CHECK(rows == 2); // header + initial row
    }

    SUBCASE("energy column is nonincreasing")
    {
        RunConfig cfg = small_run_config((root / "mono").string());
        const SimulationOutcome out = run_simulation(cfg);
        REQUIRE(out.exit_status == 0);
        double prev = 1e300;
        bool first = true;
        std::istringstream csv(slurp(fs::path(out.output_dir) / "diagnostics.csv"));
        std::string line;
        std::getline(csv, line); // header
        while (std::getline(csv, line)) {
            std::istringstream row(line);
            std::string tok;
            std::getline(row, tok, ','); // step
            std::getline(row, tok, ','); // t
            std::getline(row, tok, ','); // energy
            const double e = std::stod(tok);
            if (!first)
                CHECK(e <= prev + 1e-9 * (1.0 + std::abs(prev)));
            prev = e;
            first = false;
        }
    }

    SUBCASE("the two energy columns agree rowwise")
    {
        RunConfig cfg = small_run_config((root / "eforms").string());
        const SimulationOutcome out = run_simulation(cfg);
        REQUIRE(out.exit_status == 0);
        std::istringstream csv(slurp(fs::path(out.output_dir) / "diagnostics.csv"));
        std::string line;
        std::getline(csv, line); // header
        while (std::getline(csv, line)) {
            std::istringstream row(line);
            std::string tok;
            std::getline(row, tok, ','); // step
            std::getline(row, tok, ','); // t
            std::getline(row, tok, ',');
            const double ec = std::stod(tok);
            std::getline(row, tok, ',');
            const double ed = std::stod(tok);
            CHECK(std::abs(ec - ed) / (1.0 + std::abs(ec)) < 1e-12);
        }
    }

    SUBCASE("same seed gives byte-identical diagnostics")
    {
        RunConfig cfg = small_run_config((root / "det1").string());
        const SimulationOutcome a = run_simulation(cfg);
        cfg.output_dir = (root / "det2").string();
        const SimulationOutcome b = run_simulation(cfg);
        CHECK(slurp(fs::path(a.output_dir) / "diagnostics.csv") ==
              slurp(fs::path(b.output_dir) / "diagnostics.csv"));
    }

    SUBCASE("snapshots and checkpoint are loadable as initial data")
    {
        RunConfig cfg = small_run_config((root / "snap").string());
        cfg.snapshot_every = 5;
        const SimulationOutcome out = run_simulation(cfg);
        REQUIRE(out.exit_status == 0);
        CHECK(fs::exists(fs::path(out.output_dir) / "fields_000005.txt"));
        CHECK(fs::exists(fs::path(out.output_dir) / "fields_final.txt"));
        CHECK(fs::exists(fs::path(out.output_dir) / "checkpoint.txt"));
        CHECK(fs::exists(fs::path(out.output_dir) / "admissibility.csv"));

        RunConfig resume = cfg;
        resume.init_mode = InitMode::File;
        resume.init_fields_path = (fs::path(out.output_dir) / "fields_final.txt").string();
        resume.output_dir = (root / "resumed").string();
        resume.n_steps = 2;
        const SimulationOutcome again = run_simulation(resume);
        CHECK(again.exit_status == 0);
    }

    fs::remove_all(root);
}

TEST_CASE("sweep preconditions")
{
    RunConfig cfg = small_run_config("sweep_reject");
    CHECK_THROWS_AS(sweep_L(cfg, {1.0}), ContractError);
    CHECK_THROWS_AS(sweep_L(cfg, {1.0, 0.5, 0.25, 0.125}), ContractError); // < 3 decades
    RunConfig dec = cfg;
    dec.model.coupling = Coupling::Decoupled;
    CHECK_THROWS_AS(sweep_L(dec, {1.0, 0.1, 0.01, 0.001}), ContractError);
}

TEST_CASE("loglog slope fit recovers a power law")
{
    const std::vector<double> x = {1.0, 0.1, 0.01, 0.001};
    std::vector<double> y;
    for (double v : x)
        y.push_back(3.0 * std::pow(v, 0.5));
    CHECK(fit_loglog_slope(x, y) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("check_config prints an admissibility block")
{
    RunConfig cfg;
    cfg.mesh_level = 1;
    std::ostringstream out;
    CHECK(check_config(cfg, out) == 0);
    CHECK(out.str().find("A2") != std::string::npos);
    CHECK(out.str().find("pass") != std::string::npos);

    RunConfig bad = cfg;
    bad.f = FieldSource{100.0, ""};
    std::ostringstream out2;
    CHECK(check_config(bad, out2) == 1);
    CHECK(out2.str().find("A3") != std::string::npos);
}
