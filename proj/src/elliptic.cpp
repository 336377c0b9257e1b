#include "nlch/elliptic.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace nlch {

namespace {

SpMat stack_blocks(const SpMat& A11, const SpMat& A12, const SpMat& A21, const SpMat& A22)
{
    const Eigen::Index n1 = A11.rows(), n2 = A22.rows();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<size_t>(A11.nonZeros() + A12.nonZeros() + A21.nonZeros() + A22.nonZeros()));
    auto push = [&t](const SpMat& A, Eigen::Index ro, Eigen::Index co) {
        for (Eigen::Index k = 0; k < A.outerSize(); ++k)
            for (SpMat::InnerIterator it(A, k); it; ++it)
                t.emplace_back(static_cast<int>(it.row() + ro), static_cast<int>(it.col() + co), it.value());
    };
    push(A11, 0, 0);
    push(A12, 0, n1);
    push(A21, n1, 0);
    push(A22, n1, n1);
    SpMat C(n1 + n2, n1 + n2);
    C.setFromTriplets(t.begin(), t.end());
    return C;
}

// [ C  g ; g' 0 ] saddle matrix for a single scalar mean constraint.
SpMat saddle(const SpMat& C, const Vec& g)
{
    const Eigen::Index n = C.rows();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<size_t>(C.nonZeros()) + 2 * static_cast<size_t>(n));
    for (Eigen::Index k = 0; k < C.outerSize(); ++k)
        for (SpMat::InnerIterator it(C, k); it; ++it)
            t.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (Eigen::Index i = 0; i < n; ++i) {
        if (g[i] != 0.0) {
            t.emplace_back(static_cast<int>(i), static_cast<int>(n), g[i]);
            t.emplace_back(static_cast<int>(n), static_cast<int>(i), g[i]);
        }
    }
    SpMat S(n + 1, n + 1);
    S.setFromTriplets(t.begin(), t.end());
    return S;
}

// Hand-rolled CG on the rank-one-augmented SPD operator C + sigma * ghat ghat'.
// For admissible right-hand sides the augmented solution satisfies g'x = 0 and
// C x = b exactly, which is the constrained solution of the saddle system.
Vec cg_augmented(const SpMat& C, const Vec& g, const Vec& b, double tol, int max_iter)
{
    const Vec ghat = g / g.norm();
    const double sigma = C.diagonal().mean();
    auto apply = [&](const Vec& x) -> Vec { return C * x + sigma * ghat * ghat.dot(x); };

    Vec x = Vec::Zero(b.size());
    Vec r = b;
    Vec p = r;
    double rr = r.squaredNorm();
    const double stop = tol * tol * std::max(rr, 1.0);
    for (int it = 0; it < max_iter && rr > stop; ++it) {
        const Vec Ap = apply(p);
        const double alpha = rr / p.dot(Ap);
        x += alpha * p;
        r -= alpha * Ap;
        const double rr_new = r.squaredNorm();
        p = r + (rr_new / rr) * p;
        rr = rr_new;
    }
    if (rr > stop)
        throw SolverError("elliptic: CG fallback failed to converge");
    return x;
}

} // namespace

BilinearFormLB::BilinearFormLB(const FemMatrices& fem, double beta, double L) : beta_(beta), L_(L)
{
    if (beta == 0.0)
        throw ContractError("BilinearFormLB: beta must be nonzero");
    if (L < 0.0)
        throw ContractError("BilinearFormLB: L must be nonnegative");
    SpMat Z12(fem.A_bulk.rows(), fem.A_surf.rows());
    SpMat Z21(fem.A_surf.rows(), fem.A_bulk.rows());
    if (L > 0.0) {
        const SpMat MsT = fem.M_surf * fem.T;
        const SpMat A11 = fem.A_bulk + SpMat((1.0 / L) * (fem.T.transpose() * MsT));
        const SpMat A12 = SpMat((-beta / L) * fem.T.transpose() * fem.M_surf);
        const SpMat A21 = SpMat((-beta / L) * MsT);
        const SpMat A22 = fem.A_surf + SpMat((beta * beta / L) * fem.M_surf);
        C_ = stack_blocks(A11, A12, A21, A22);
    } else {
        C_ = stack_blocks(fem.A_bulk, Z12, Z21, fem.A_surf);
    }
}

double BilinearFormLB::operator()(const CoupledField& a, const CoupledField& b) const
{
    Vec xa(a.bulk.size() + a.surf.size()), xb(xa.size());
    xa << a.bulk, a.surf;
    xb << b.bulk, b.surf;
    return xa.dot(C_ * xb);
}

struct EllipticOperators::Impl {
    Eigen::Index nb = 0, ns = 0;
    double beta = 1.0, L = 1.0;
    EllipticOptions opts;

    Vec wb, ws;       // lumped weights
    Vec g_robin;      // [beta*wb; ws], the mean-constraint gradient for S
    Vec g_dirichlet;  // beta^2 wb + T' ws, constraint for the substituted S0 unknown
    SpMat T;

    SpMat C_robin;    // <.,.>_{L,beta} matrix (L > 0)
    SpMat K_dir;      // beta^2 A_b + T' A_s T, acting on the substituted unknown
    SpMat A_bulk, A_surf;
    SpMat H_riesz;    // (M+A)-blocks for the dual H^1 norm

    Eigen::SparseLU<SpMat> lu_S, lu_S0, lu_Nb, lu_Ns, lu_H;

    Vec solve_saddle(const Eigen::SparseLU<SpMat>& lu, const SpMat& C, const Vec& g, const Vec& rhs) const
    {
        if (opts.use_cg)
            return cg_augmented(C, g, rhs, opts.cg_tol, opts.cg_max_iter);
        Vec ext(rhs.size() + 1);
        ext << rhs, 0.0;
        Vec sol = lu.solve(ext);
        if (lu.info() != Eigen::Success)
            throw SolverError("elliptic: sparse factorization solve failed");
        return sol.head(rhs.size());
    }
};

EllipticOperators::EllipticOperators(const TriMesh& mesh, const FemMatrices& fem, double beta, double L,
                                     EllipticOptions opts)
    : form_(fem, beta, L)
{
    auto impl = std::make_shared<Impl>();
    impl->nb = mesh.n_vertices();
    impl->ns = mesh.n_boundary();
    impl->beta = beta;
    impl->L = L;
    impl->opts = opts;
    impl->wb = mesh.node_weights_bulk;
    impl->ws = mesh.node_weights_surface;
    impl->T = fem.T;
    impl->A_bulk = fem.A_bulk;
    impl->A_surf = fem.A_surf;

    impl->g_robin.resize(impl->nb + impl->ns);
    impl->g_robin << beta * impl->wb, impl->ws;

    impl->g_dirichlet = beta * beta * impl->wb + fem.T.transpose() * impl->ws;

    if (L > 0.0) {
        impl->C_robin = form_.matrix();
        impl->lu_S.compute(saddle(impl->C_robin, impl->g_robin));
        if (impl->lu_S.info() != Eigen::Success)
            throw SolverError("elliptic: factorization of the coupled Robin system failed");
    }

    impl->K_dir = SpMat((beta * beta) * fem.A_bulk) + SpMat(fem.T.transpose() * (fem.A_surf * fem.T));
    if (beta > 0.0) {
        impl->lu_S0.compute(saddle(impl->K_dir, impl->g_dirichlet));
        if (impl->lu_S0.info() != Eigen::Success)
            throw SolverError("elliptic: factorization of the trace-coupled system failed");
    }

    impl->lu_Nb.compute(saddle(fem.A_bulk, impl->wb));
    impl->lu_Ns.compute(saddle(fem.A_surf, impl->ws));
    if (impl->lu_Nb.info() != Eigen::Success || impl->lu_Ns.info() != Eigen::Success)
        throw SolverError("elliptic: factorization of a Neumann system failed");

    SpMat Z12(impl->nb, impl->ns), Z21(impl->ns, impl->nb);
    impl->H_riesz = stack_blocks(SpMat(fem.M_bulk + fem.A_bulk), Z12, Z21, SpMat(fem.M_surf + fem.A_surf));
    impl->lu_H.compute(impl->H_riesz);
    if (impl->lu_H.info() != Eigen::Success)
        throw SolverError("elliptic: factorization of the H^1 Riesz system failed");

    impl_ = impl;
}

double EllipticOperators::beta_weighted_total(const CoupledField& a) const
{
    return impl_->beta * impl_->wb.dot(a.bulk) + impl_->ws.dot(a.surf);
}

CoupledField EllipticOperators::solve_S(const CoupledField& rhs) const
{
    const auto& im = *impl_;
    if (im.L <= 0.0)
        throw ContractError("solve_S: requires L > 0 (use solve_S0 for the L = 0 coupling)");
    if (rhs.bulk.size() != im.nb || rhs.surf.size() != im.ns)
        throw ContractError("solve_S: field size mismatch");
    const double scale = 1.0 + std::abs(im.wb.dot(rhs.bulk.cwiseAbs())) + std::abs(im.ws.dot(rhs.surf.cwiseAbs()));
    if (std::abs(beta_weighted_total(rhs)) > 1e-10 * scale)
        throw ContractError("solve_S: right-hand side violates the beta-weighted zero-mean constraint");

    Vec b(im.nb + im.ns);
    b << -(im.wb.array() * rhs.bulk.array()).matrix(), -(im.ws.array() * rhs.surf.array()).matrix();
    const Vec x = im.solve_saddle(im.lu_S, im.C_robin, im.g_robin, b);
    return {x.head(im.nb), x.tail(im.ns)};
}

CoupledField EllipticOperators::solve_S0(const CoupledField& rhs) const
{
    const auto& im = *impl_;
    if (!(im.beta > 0.0))
        throw ContractError("solve_S0: requires beta > 0");
    if (rhs.bulk.size() != im.nb || rhs.surf.size() != im.ns)
        throw ContractError("solve_S0: field size mismatch");
    const double scale = 1.0 + std::abs(im.wb.dot(rhs.bulk.cwiseAbs())) + std::abs(im.ws.dot(rhs.surf.cwiseAbs()));
    if (std::abs(beta_weighted_total(rhs)) > 1e-10 * scale)
        throw ContractError("solve_S0: right-hand side is not in the annihilator of (beta,1)");

    // substituted unknown rho with (bulk, surf) = (beta rho, T rho): the trace
    // coupling bulk|_Gamma = beta * surf then holds bitwise
    const Vec b = -im.beta * (im.wb.array() * rhs.bulk.array()).matrix() -
                  im.T.transpose() * (im.ws.array() * rhs.surf.array()).matrix();
    const Vec rho = im.solve_saddle(im.lu_S0, im.K_dir, im.g_dirichlet, b);
    return {im.beta * rho, im.T * rho};
}

Vec EllipticOperators::solve_N_bulk(const Vec& rhs) const
{
    const auto& im = *impl_;
    if (rhs.size() != im.nb)
        throw ContractError("solve_N_bulk: field size mismatch");
    if (std::abs(im.wb.dot(rhs)) > 1e-10 * (1.0 + im.wb.dot(rhs.cwiseAbs())))
        throw ContractError("solve_N_bulk: right-hand side must have zero weighted mean");
    return im.solve_saddle(im.lu_Nb, im.A_bulk, im.wb, (-(im.wb.array() * rhs.array())).matrix());
}

Vec EllipticOperators::solve_N_surf(const Vec& rhs) const
{
    const auto& im = *impl_;
    if (rhs.size() != im.ns)
        throw ContractError("solve_N_surf: field size mismatch");
    if (std::abs(im.ws.dot(rhs)) > 1e-10 * (1.0 + im.ws.dot(rhs.cwiseAbs())))
        throw ContractError("solve_N_surf: right-hand side must have zero weighted mean");
    return im.solve_saddle(im.lu_Ns, im.A_surf, im.ws, (-(im.ws.array() * rhs.array())).matrix());
}

double EllipticOperators::hminus_product_S(const CoupledField& a, const CoupledField& b) const
{
    return form_(solve_S(a), solve_S(b));
}

double EllipticOperators::hminus_norm_S(const CoupledField& a) const
{
    const CoupledField s = solve_S(a);
    return std::sqrt(std::max(0.0, form_(s, s)));
}

double EllipticOperators::hminus_norm_S0(const CoupledField& a) const
{
    const CoupledField s = solve_S0(a);
    return std::sqrt(std::max(0.0, s.bulk.dot(impl_->A_bulk * s.bulk) + s.surf.dot(impl_->A_surf * s.surf)));
}

double EllipticOperators::hminus_norm_N_bulk(const Vec& a) const
{
    const Vec u = solve_N_bulk(a);
    return std::sqrt(std::max(0.0, u.dot(impl_->A_bulk * u)));
}

double EllipticOperators::hminus_norm_N_surf(const Vec& a) const
{
    const Vec u = solve_N_surf(a);
    return std::sqrt(std::max(0.0, u.dot(impl_->A_surf * u)));
}

double EllipticOperators::dual_h1_norm(const CoupledField& a) const
{
    const auto& im = *impl_;
    Vec d(im.nb + im.ns);
    d << (im.wb.array() * a.bulk.array()).matrix(), (im.ws.array() * a.surf.array()).matrix();
    const Vec z = im.lu_H.solve(d);
    return std::sqrt(std::max(0.0, d.dot(z)));
}

NormComparisonReport norm_comparison_check(const TriMesh& mesh, const FemMatrices& fem, double beta,
                                           const std::vector<double>& L_values,
                                           const std::vector<CoupledField>& samples)
{
    NormComparisonReport rep;
    std::vector<double> Ls = L_values;
    std::sort(Ls.begin(), Ls.end(), std::greater<>());
    for (double L : Ls) {
        if (!(L > 0.0))
            throw ContractError("norm_comparison_check: requires L > 0");
        EllipticOperators ops(mesh, fem, beta, L);
        double worst = 0.0;
        for (const auto& s : samples) {
            const double dual = ops.dual_h1_norm(s);
            const double star = ops.hminus_norm_S(s);
            if (star == 0.0)
                continue; // zero sample: ratio undefined, skipped
            worst = std::max(worst, dual / star);
        }
        rep.rows.push_back({L, worst});
    }
    rep.monotone = true;
    for (size_t i = 1; i < rep.rows.size(); ++i)
        if (rep.rows[i].worst_ratio < rep.rows[i - 1].worst_ratio)
            rep.monotone = false;
    return rep;
}

} // namespace nlch
