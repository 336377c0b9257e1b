#ifndef NLCH_KERNEL_HPP
#define NLCH_KERNEL_HPP

#include "nlch/common.hpp"

namespace nlch {

// Radial interaction kernels in d = 2. All families are even by construction
// (they depend on |x| only) and nonnegative.
//
//   gaussian:        J(x) = amplitude * exp(-|x|^2 / width^2)
//   truncated_power: J(x) = rho(|x|) * |x|^(-omega),        0 < omega < 1
//   riesz_cutoff:    J(x) = c_alpha * |x|^(alpha-2) * rho(|x|), 1 < alpha < 2
//
// rho is the C^1 cubic bridge equal to 1 on [0, 2R] and 0 on [3R, inf),
// R = 1 (disk radius); since |x - y| <= 2R for x, y in the closed disk, the
// bridge choice does not affect convolutions over the domain.
enum class KernelFamily { Gaussian, TruncatedPower, RieszCutoff };

struct KernelSpec {
    KernelFamily family = KernelFamily::Gaussian;
    double amplitude = 1.0; // gaussian
    double width = 1.0;     // gaussian
    double omega = 0.5;     // truncated_power
    double alpha = 1.5;     // riesz_cutoff
    double c_alpha = 1.0;   // riesz_cutoff prefactor
    double cutoff_inner = 2.0; // = 2R
    double cutoff_outer = 3.0; // = 3R

    bool singular() const { return family != KernelFamily::Gaussian; }

    // Throws ContractError on parameter-range violations.
    void validate() const;
};

KernelSpec gaussian_kernel(double amplitude, double width);
KernelSpec truncated_power_kernel(double omega);
KernelSpec riesz_cutoff_kernel(double alpha, double c_alpha = 1.0);

// C^1 monotone bridge: 1 on [0, inner], 0 on [outer, inf), cubic in between.
double cutoff_bridge(double r, double inner, double outer);

double eval_kernel_radial(const KernelSpec& spec, double r);

// Throws SolverError for |x| = 0 with a singular family; the self-interaction
// entry is produced by the operator's diag_rule instead (see convolution.hpp).
double eval_kernel(const KernelSpec& spec, const Vec2& x);

// |dJ/dr|(r), used for the gradient-kernel row sums in admissibility reports.
double eval_kernel_gradient_radial(const KernelSpec& spec, double r);

// Self-interaction weight for a node owning lumped weight w: the kernel mass
// of the equal-area disk B_r(0), r = sqrt(w / pi), evaluated analytically.
double diagonal_mass(const KernelSpec& spec, double node_weight);

// Human-readable record of the desingularization in use.
std::string diag_rule_description(const KernelSpec& spec);

} // namespace nlch

#endif
