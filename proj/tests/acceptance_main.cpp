// Certification driver: runs every acceptance check against the default
// configuration (or a config file given as argv[1]) and exits nonzero on any
// failure.
#include "nlch/acceptance.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    nlch::RunConfig cfg;
    if (argc > 1)
        cfg = nlch::load_run_config(argv[1]);
    else
        cfg.output_dir = "acceptance_out";
    const int failures = nlch::run_acceptance(cfg, std::cout);
    return failures == 0 ? 0 : 1;
}
