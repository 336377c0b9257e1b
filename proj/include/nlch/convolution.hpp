#ifndef NLCH_CONVOLUTION_HPP
#define NLCH_CONVOLUTION_HPP

#include "nlch/kernel.hpp"
#include "nlch/mesh.hpp"

#include <string>
#include <vector>

namespace nlch {

struct ConvolutionOptions {
    int dense_node_limit = 6000; // memory guard for the dense matrix
    bool parallel = true;        // OpenMP row-parallel assembly / apply
};

// Dense nodal realization of phi -> J * phi (or psi -> K (x) psi):
//   W(i,j) = J(x_i - x_j) * w_j  for i != j, diagonal per diag_rule,
//   a_field = W * 1  (the discrete a_Omega / a_Gamma field).
//
// Weighted self-adjointness w_i W(i,j) = w_j W(j,i) holds exactly by
// construction. Rows are written by exactly one worker during assembly and
// apply() is read-only, so concurrent use after construction is safe.
struct ConvolutionOperator {
    Mat W;
    Vec a_field;
    Vec weights;
    std::vector<Vec2> points;
    std::string diag_rule;

    Eigen::Index size() const { return W.rows(); }

    Vec apply(const Vec& phi) const;        // OpenMP row-parallel, bit-reproducible
    Vec apply_serial(const Vec& phi) const; // reference implementation
};

// Node-set assembly used by both the bulk and surface wrappers (and by tests
// on toy node sets). Throws SolverError when the node count exceeds the dense
// limit, ContractError on invalid inputs.
ConvolutionOperator assemble_convolution(const std::vector<Vec2>& points, const Vec& weights,
                                         const KernelSpec& spec, const ConvolutionOptions& opts = {});

// Serial reference kept for testing; must agree bitwise with the parallel path.
ConvolutionOperator assemble_convolution_serial(const std::vector<Vec2>& points, const Vec& weights,
                                                const KernelSpec& spec, const ConvolutionOptions& opts = {});

ConvolutionOperator assemble_bulk_convolution(const TriMesh& mesh, const KernelSpec& spec,
                                              const ConvolutionOptions& opts = {});

// Surface kernels must be bounded in d = 2 (gaussian family); singular
// families are rejected with a ContractError.
ConvolutionOperator assemble_surface_convolution(const TriMesh& mesh, const KernelSpec& spec,
                                                 const ConvolutionOptions& opts = {});

// (1/4) sum_ij w_i J_ij w_j (phi_i - phi_j)^2, with J_ij read off the operator.
// Equals 0.5*<a.*phi,phi>_w - 0.5*<W phi,phi>_w as an exact algebraic identity.
double nonlocal_dirichlet_energy(const ConvolutionOperator& op, const Vec& phi);
double nonlocal_dirichlet_energy_serial(const ConvolutionOperator& op, const Vec& phi);

struct AdmissibilityReport {
    double a_min = 0.0;            // nodal estimate of a_* (resp. a_circledast)
    double a_max = 0.0;            // nodal estimate of a^*
    double grad_row_sum_max = 0.0; // nodal estimate of b^*
    bool positivity_pass = false;  // a_min > 0
    bool upper_bound_pass = true;  // a_max below the analytic kernel mass, when finite
    double analytic_lower_bound = 0.0; // truncated_power only: (2R)^-omega * min rho * |domain|
    double analytic_upper_bound = 0.0; // whole-plane kernel mass; 0 when unavailable
    std::string notes;
};

// Whole-plane kernel mass (an upper bound for any a-field value); 0 when the
// kernel has no finite closed-form mass (flat gaussians).
double analytic_kernel_mass(const KernelSpec& spec);

// Evaluates the kernel admissibility surrogates on the mesh nodes. Failures
// are reported, not thrown.
AdmissibilityReport check_admissibility(const KernelSpec& spec, const TriMesh& mesh, bool surface = false);

} // namespace nlch

#endif
