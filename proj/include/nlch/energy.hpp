#ifndef NLCH_ENERGY_HPP
#define NLCH_ENERGY_HPP

#include "nlch/convolution.hpp"

#include <string>

namespace nlch {

// Quartic double well and derivatives: W_dw(s) = (1/4)(s^2-1)^2.
inline double well(double s) { return 0.25 * (s * s - 1.0) * (s * s - 1.0); }
inline double well_d1(double s) { return s * s * s - s; }
inline double well_d2(double s) { return 3.0 * s * s - 1.0; }

// Spatial double-well weights F_w(x,s) = f(x) W_dw(s), G_w(z,s) = g(z) W_dw(s).
// f, g >= 0 and max f < eps^2 * a_* (resp. max g < delta^2 * a_circledast) so
// that the shifted potentials stay uniformly convex; see convexity_margins().
struct PotentialSpec {
    Vec f; // per bulk node
    Vec g; // per boundary node
};

// Linear boundary penalty B(z,s) = b(z) s, so B' = b and B'' = 0.
struct PenaltySpec {
    Vec b; // per boundary node
};

enum class Coupling { Robin, Dirichlet, Decoupled };

struct ModelSpec {
    Coupling coupling = Coupling::Robin;
    double beta = 1.0;
    double L = 1.0;     // Robin relaxation parameter; ignored for the limit models
    double m_bulk = 1.0;
    double m_surf = 1.0;
    double eps = 1.0;
    double delta = 1.0;

    void validate() const;
    static const char* name(Coupling c);
};

// Nodewise (F, F', F'') of the shifted potential F(x,s) = F_w(x,s) + a(x) s^2 / 2.
struct PotentialValues {
    Vec value, d1, d2;
};
PotentialValues potential_derivatives(const Vec& weight_field, const Vec& a_field, const Vec& s);

// mu_i = -eps (W phi)_i + eps a_i phi_i + (1/eps) f_i W_dw'(phi_i).
Vec chemical_potential_bulk(const Vec& phi, const ConvolutionOperator& bulk_op,
                            const PotentialSpec& pot, const ModelSpec& model);

// nu_i = -delta (K psi)_i + delta a_i psi_i + (1/delta)(g_i W_dw'(psi_i) + b_i).
Vec chemical_potential_surface(const Vec& psi, const ConvolutionOperator& surf_op,
                               const PotentialSpec& pot, const PenaltySpec& pen, const ModelSpec& model);

// d2/ds2 of the scaled bulk potential at phi: eps*a + (1/eps) f W_dw''(phi); surface analogue.
Vec bulk_potential_hessian(const Vec& phi, const ConvolutionOperator& bulk_op, const PotentialSpec& pot,
                           const ModelSpec& model);
Vec surface_potential_hessian(const Vec& psi, const ConvolutionOperator& surf_op, const PotentialSpec& pot,
                              const ModelSpec& model);

enum class EnergyForm { DifferenceForm, ConvolutionForm };

struct EnergyBreakdown {
    double bulk = 0.0;
    double surf = 0.0;
    double pen = 0.0;
    double total() const { return bulk + surf + pen; }
};

// DifferenceForm: eps/4 iint J |dphi|^2 + (1/eps) int F_w  (+ surface + penalty)
// ConvolutionForm: -eps/2 int (J*phi) phi + (1/eps) int F   (+ surface + penalty)
// The two agree to roundoff; both are exposed for the representation identity.
EnergyBreakdown total_energy(const Vec& phi, const Vec& psi, const ConvolutionOperator& bulk_op,
                             const ConvolutionOperator& surf_op, const PotentialSpec& pot,
                             const PenaltySpec& pen, const ModelSpec& model, EnergyForm form);

// Uniform convexity margins c_* = eps a_* - max f / eps and the surface analogue,
// computed from the nodal a_field minima.
struct ConvexityMargins {
    double c_bulk = 0.0;
    double c_surf = 0.0;
};
ConvexityMargins convexity_margins(const ConvolutionOperator& bulk_op, const ConvolutionOperator& surf_op,
                                   const PotentialSpec& pot, const ModelSpec& model);

struct FirstVariationReport {
    double directional_derivative = 0.0; // central difference of the energy
    double pairing = 0.0;                // <mu,zeta>_w + <nu,xi>_w
    double abs_error = 0.0;
    double rel_error = 0.0;
};

// Central-difference check of dE(phi,psi)[zeta,xi] against the chemical
// potential pairing; step defaults to 1e-5 (balances truncation vs roundoff
// for unit-scale fields).
FirstVariationReport first_variation_check(const Vec& phi, const Vec& psi, const Vec& zeta, const Vec& xi,
                                           const ConvolutionOperator& bulk_op, const ConvolutionOperator& surf_op,
                                           const PotentialSpec& pot, const PenaltySpec& pen,
                                           const ModelSpec& model, double step = 1e-5);

} // namespace nlch

#endif
