#ifndef NLCH_ELLIPTIC_HPP
#define NLCH_ELLIPTIC_HPP

#include "nlch/mesh.hpp"

#include <memory>
#include <vector>

namespace nlch {

// A bulk/surface nodal pair. The surface component is indexed in
// boundary-loop order.
struct CoupledField {
    Vec bulk;
    Vec surf;

    CoupledField() = default;
    CoupledField(Vec b, Vec s) : bulk(std::move(b)), surf(std::move(s)) {}
    CoupledField operator-(const CoupledField& o) const { return {bulk - o.bulk, surf - o.surf}; }
    CoupledField operator+(const CoupledField& o) const { return {bulk + o.bulk, surf + o.surf}; }
    CoupledField operator*(double c) const { return {c * bulk, c * surf}; }
};

// The coupled bilinear form
//   <(mu,nu),(zeta,xi)>_{L,beta} = mu'A_b zeta + nu'A_s xi
//                                + (1/L) (beta nu - T mu)' M_s (beta xi - T zeta)
// (the Robin block is omitted when L = 0). Symmetric, positive definite on the
// discrete beta-weighted mean-zero subspace.
class BilinearFormLB {
public:
    BilinearFormLB(const FemMatrices& fem, double beta, double L);

    double operator()(const CoupledField& a, const CoupledField& b) const;
    const SpMat& matrix() const { return C_; } // stacked (bulk ++ surf) dofs
    double beta() const { return beta_; }
    double L() const { return L_; }

private:
    SpMat C_;
    double beta_, L_;
};

struct EllipticOptions {
    bool use_cg = false;    // iterative fallback instead of the direct factorization
    double cg_tol = 1e-13;
    int cg_max_iter = 20000;
};

// Discrete solution operators for the coupled elliptic problems, with the
// duality pairing taken in the lumped weighted product <.,.>_w.
//
//   solve_S   : <S(r),(z,x)>_{L,beta} = -<r,(z,x)>_w   on the beta-weighted
//               mean-zero class (Robin coupling, L > 0)
//   solve_S0  : same with L = 0 on trace-coupled pairs bulk|_G = beta * surf,
//               built through the substitution p -> (p, T p / beta); beta > 0
//   solve_N_* : mean-zero Neumann (bulk) and periodic-loop (surface) problems
//
// Every solver returns the mean-zero-class representative; the additive
// constant is never left free. Factorizations are immutable after
// construction, so concurrent solves are safe.
class EllipticOperators {
public:
    EllipticOperators(const TriMesh& mesh, const FemMatrices& fem, double beta, double L,
                      EllipticOptions opts = {});

    CoupledField solve_S(const CoupledField& rhs) const;
    CoupledField solve_S0(const CoupledField& rhs) const;
    Vec solve_N_bulk(const Vec& rhs) const;
    Vec solve_N_surf(const Vec& rhs) const;

    // <.,.>_{L,beta} of two H^1 pairs, and the induced dual products/norms.
    double lbeta_product(const CoupledField& a, const CoupledField& b) const { return form_(a, b); }
    double hminus_product_S(const CoupledField& a, const CoupledField& b) const;
    double hminus_norm_S(const CoupledField& a) const;
    double hminus_norm_S0(const CoupledField& a) const;
    double hminus_norm_N_bulk(const Vec& a) const;
    double hminus_norm_N_surf(const Vec& a) const;

    // Dual norm over the full H^1 pair space (Riesz solve against (M+A) blocks).
    double dual_h1_norm(const CoupledField& a) const;

    // beta * <w_b, bulk> + <w_s, surf>, the weighted mean functional.
    double beta_weighted_total(const CoupledField& a) const;

    double beta() const { return form_.beta(); }
    double L() const { return form_.L(); }
    const BilinearFormLB& form() const { return form_; }

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
    BilinearFormLB form_;
};

struct NormComparisonRow {
    double L = 0.0;
    double worst_ratio = 0.0; // max over samples of |phi|_(H^1)' / |phi|_{L,beta,*}
};

struct NormComparisonReport {
    std::vector<NormComparisonRow> rows; // sorted by decreasing L
    bool monotone = false;               // worst ratio grows as L decreases
};

// Empirical check of the dual-norm comparison across a decade sweep of L.
NormComparisonReport norm_comparison_check(const TriMesh& mesh, const FemMatrices& fem, double beta,
                                           const std::vector<double>& L_values,
                                           const std::vector<CoupledField>& samples);

} // namespace nlch

#endif
