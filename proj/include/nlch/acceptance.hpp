#ifndef NLCH_ACCEPTANCE_HPP
#define NLCH_ACCEPTANCE_HPP

#include "nlch/config.hpp"

#include <iosfwd>

namespace nlch {

// Runs the full property-based certification suite against the given base
// configuration (mesh, kernels, potentials come from it; model parameters,
// time step and run lengths are pinned per check). Prints one pass/fail line
// per check and returns the number of failures.
int run_acceptance(const RunConfig& base, std::ostream& out);

} // namespace nlch

#endif
