#include "nlch/acceptance.hpp"
#include "nlch/simulation.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

nlch::RunConfig load_with_overrides(const std::string& config_path, const std::string& seed_override,
                                    const std::string& output_override)
{
    nlch::RunConfig cfg = nlch::load_run_config(config_path);
    if (!seed_override.empty())
        cfg.seed = std::stoull(seed_override);
    if (!output_override.empty())
        cfg.output_dir = output_override;
    return cfg;
}

std::vector<double> parse_L_list(const std::string& arg)
{
    std::vector<double> out;
    std::istringstream is(arg);
    std::string tok;
    while (std::getline(is, tok, ','))
        if (!tok.empty())
            out.push_back(std::stod(tok));
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"nonlocal bulk-surface Cahn-Hilliard simulator"};
    app.require_subcommand(1);

    std::string config_path, seed_override, output_override, L_arg;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed_override, "override run.seed");
        sub->add_option("--output", output_override, "override run.output_dir");
    };

    CLI::App* cmd_run = app.add_subcommand("run", "run one simulation and write diagnostics");
    add_common(cmd_run);

    CLI::App* cmd_sweep = app.add_subcommand("sweep", "run a Robin L-sweep plus reference runs");
    add_common(cmd_sweep);
    cmd_sweep->add_option("--L", L_arg, "comma-separated L values (>= 4 spanning >= 3 decades)")->required();

    CLI::App* cmd_check = app.add_subcommand("check", "validate a configuration (admissibility only)");
    cmd_check->add_option("config", config_path, "configuration file")->required()->check(CLI::ExistingFile);

    CLI::App* cmd_certify = app.add_subcommand("certify", "run the full certification suite");
    add_common(cmd_certify);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_run->parsed()) {
            const auto cfg = load_with_overrides(config_path, seed_override, output_override);
            const auto out = nlch::run_simulation(cfg);
            std::cout << "wrote " << out.output_dir << "/diagnostics.csv (" << out.reports.size() << " steps)\n";
            if (out.exit_status != 0)
                std::cerr << "halted early: " << out.error << "\n";
            return out.exit_status;
        }
        if (cmd_sweep->parsed()) {
            const auto cfg = load_with_overrides(config_path, seed_override, output_override);
            const auto sw = nlch::sweep_L(cfg, parse_L_list(L_arg));
            std::cout << "wrote " << sw.output_dir << "/sweep.csv\n"
                      << "  slope of gap vs L: " << sw.slope_gap_vs_L << "\n"
                      << "  slope of flux vs 1/L: " << sw.slope_flux_vs_invL << "\n";
            return 0;
        }
        if (cmd_check->parsed()) {
            const auto cfg = nlch::load_run_config(config_path);
            return nlch::check_config(cfg, std::cout);
        }
        if (cmd_certify->parsed()) {
            const auto cfg = load_with_overrides(config_path, seed_override, output_override);
            return nlch::run_acceptance(cfg, std::cout) == 0 ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
