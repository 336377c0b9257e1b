#include "nlch/kernel.hpp"

#include <cmath>

namespace nlch {

void KernelSpec::validate() const
{
    if (!(cutoff_inner > 0.0) || !(cutoff_outer > cutoff_inner))
        throw ContractError("kernel: cutoff bridge requires 0 < inner < outer");
    switch (family) {
    case KernelFamily::Gaussian:
        if (!(amplitude >= 0.0) || !(width > 0.0))
            throw ContractError("kernel: gaussian requires amplitude >= 0 and width > 0");
        break;
    case KernelFamily::TruncatedPower:
        if (!(omega > 0.0 && omega < 1.0))
            throw ContractError("kernel: truncated_power requires 0 < omega < d-1 = 1");
        break;
    case KernelFamily::RieszCutoff:
        if (!(alpha > 1.0 && alpha < 2.0))
            throw ContractError("kernel: riesz_cutoff requires 1 < alpha < d = 2");
        if (!(c_alpha > 0.0))
            throw ContractError("kernel: riesz_cutoff requires c_alpha > 0");
        break;
    }
}

KernelSpec gaussian_kernel(double amplitude, double width)
{
    KernelSpec s;
    s.family = KernelFamily::Gaussian;
    s.amplitude = amplitude;
    s.width = width;
    s.validate();
    return s;
}

KernelSpec truncated_power_kernel(double omega)
{
    KernelSpec s;
    s.family = KernelFamily::TruncatedPower;
    s.omega = omega;
    s.validate();
    return s;
}

KernelSpec riesz_cutoff_kernel(double alpha, double c_alpha)
{
    KernelSpec s;
    s.family = KernelFamily::RieszCutoff;
    s.alpha = alpha;
    s.c_alpha = c_alpha;
    s.validate();
    return s;
}

double cutoff_bridge(double r, double inner, double outer)
{
    if (r <= inner)
        return 1.0;
    if (r >= outer)
        return 0.0;
    const double t = (r - inner) / (outer - inner);
    return 1.0 - t * t * (3.0 - 2.0 * t);
}

double eval_kernel_radial(const KernelSpec& spec, double r)
{
    switch (spec.family) {
    case KernelFamily::Gaussian: {
        const double q = r / spec.width;
        return spec.amplitude * std::exp(-q * q);
    }
    case KernelFamily::TruncatedPower:
        return cutoff_bridge(r, spec.cutoff_inner, spec.cutoff_outer) * std::pow(r, -spec.omega);
    case KernelFamily::RieszCutoff:
        return spec.c_alpha * std::pow(r, spec.alpha - 2.0) * cutoff_bridge(r, spec.cutoff_inner, spec.cutoff_outer);
    }
    return 0.0;
}

double eval_kernel(const KernelSpec& spec, const Vec2& x)
{
    if (!x.allFinite())
        throw ContractError("eval_kernel: non-finite argument");
    const double r = x.norm();
    if (r == 0.0 && spec.singular())
        throw SolverError("eval_kernel: singular kernel evaluated at |x| = 0; "
                          "self-interaction entries come from the operator diag_rule");
    return eval_kernel_radial(spec, r);
}

double eval_kernel_gradient_radial(const KernelSpec& spec, double r)
{
    const double in = spec.cutoff_inner, out = spec.cutoff_outer;
    auto bridge_d = [&](double s) {
        if (s <= in || s >= out)
            return 0.0;
        const double t = (s - in) / (out - in);
        return -6.0 * t * (1.0 - t) / (out - in);
    };
    switch (spec.family) {
    case KernelFamily::Gaussian: {
        const double q = r / spec.width;
        return spec.amplitude * 2.0 * r / (spec.width * spec.width) * std::exp(-q * q);
    }
    case KernelFamily::TruncatedPower:
        return std::abs(bridge_d(r) * std::pow(r, -spec.omega) -
                        spec.omega * cutoff_bridge(r, in, out) * std::pow(r, -spec.omega - 1.0));
    case KernelFamily::RieszCutoff:
        return std::abs(spec.c_alpha * ((spec.alpha - 2.0) * std::pow(r, spec.alpha - 3.0) * cutoff_bridge(r, in, out) +
                                        std::pow(r, spec.alpha - 2.0) * bridge_d(r)));
    }
    return 0.0;
}

double diagonal_mass(const KernelSpec& spec, double node_weight)
{
    const double r = std::sqrt(node_weight / M_PI); // equal-area disk radius
    switch (spec.family) {
    case KernelFamily::Gaussian:
        return eval_kernel_radial(spec, 0.0) * node_weight;
    case KernelFamily::TruncatedPower:
        // integral of |y|^-omega over B_r, rho(0) = 1
        return 2.0 * M_PI * std::pow(r, 2.0 - spec.omega) / (2.0 - spec.omega);
    case KernelFamily::RieszCutoff:
        return spec.c_alpha * 2.0 * M_PI * std::pow(r, spec.alpha) / spec.alpha;
    }
    return 0.0;
}

std::string diag_rule_description(const KernelSpec& spec)
{
    switch (spec.family) {
    case KernelFamily::Gaussian:
        return "bounded kernel: W_ii = J(0) * w_i";
    case KernelFamily::TruncatedPower:
        return "equal-area disk rule: W_ii = 2*pi*rho(0)*r_i^(2-omega)/(2-omega), r_i = sqrt(w_i/pi)";
    case KernelFamily::RieszCutoff:
        return "equal-area disk rule: W_ii = 2*pi*c_alpha*rho(0)*r_i^alpha/alpha, r_i = sqrt(w_i/pi)";
    }
    return "";
}

} // namespace nlch
