#include "nlch/energy.hpp"

#include <cmath>

namespace nlch {

void ModelSpec::validate() const
{
    if (beta == 0.0 || !std::isfinite(beta))
        throw ContractError("model: beta must be a nonzero real");
    if (coupling == Coupling::Robin && !(L > 0.0))
        throw ContractError("model: Robin coupling requires L > 0");
    if (coupling == Coupling::Dirichlet && !(beta > 0.0))
        throw ContractError("model: the Dirichlet limit requires beta > 0");
    if (!(m_bulk > 0.0) || !(m_surf > 0.0) || !(eps > 0.0) || !(delta > 0.0))
        throw ContractError("model: mobilities and interface parameters must be positive");
}

const char* ModelSpec::name(Coupling c)
{
    switch (c) {
    case Coupling::Robin: return "robin";
    case Coupling::Dirichlet: return "dirichlet";
    case Coupling::Decoupled: return "decoupled";
    }
    return "?";
}

PotentialValues potential_derivatives(const Vec& weight_field, const Vec& a_field, const Vec& s)
{
    if (weight_field.size() != s.size() || a_field.size() != s.size())
        throw ContractError("potential_derivatives: field size mismatch");
    PotentialValues out;
    out.value = weight_field.array() * s.unaryExpr([](double v) { return well(v); }).array() +
                0.5 * a_field.array() * s.array().square();
    out.d1 = weight_field.array() * s.unaryExpr([](double v) { return well_d1(v); }).array() +
             a_field.array() * s.array();
    out.d2 = weight_field.array() * s.unaryExpr([](double v) { return well_d2(v); }).array() + a_field.array();
    return out;
}

Vec chemical_potential_bulk(const Vec& phi, const ConvolutionOperator& bulk_op, const PotentialSpec& pot,
                            const ModelSpec& model)
{
    if (phi.size() != bulk_op.size() || pot.f.size() != phi.size())
        throw ContractError("chemical_potential_bulk: field size mismatch");
    const double e = model.eps;
    return (-e) * bulk_op.apply(phi) +
           (e * bulk_op.a_field.array() * phi.array() +
            (1.0 / e) * pot.f.array() * phi.unaryExpr([](double v) { return well_d1(v); }).array())
               .matrix();
}

Vec chemical_potential_surface(const Vec& psi, const ConvolutionOperator& surf_op, const PotentialSpec& pot,
                               const PenaltySpec& pen, const ModelSpec& model)
{
    if (psi.size() != surf_op.size() || pot.g.size() != psi.size() || pen.b.size() != psi.size())
        throw ContractError("chemical_potential_surface: field size mismatch");
    const double d = model.delta;
    return (-d) * surf_op.apply(psi) +
           (d * surf_op.a_field.array() * psi.array() +
            (1.0 / d) * (pot.g.array() * psi.unaryExpr([](double v) { return well_d1(v); }).array() +
                         pen.b.array()))
               .matrix();
}

Vec bulk_potential_hessian(const Vec& phi, const ConvolutionOperator& bulk_op, const PotentialSpec& pot,
                           const ModelSpec& model)
{
    const double e = model.eps;
    return (e * bulk_op.a_field.array() +
            (1.0 / e) * pot.f.array() * phi.unaryExpr([](double v) { return well_d2(v); }).array())
        .matrix();
}

Vec surface_potential_hessian(const Vec& psi, const ConvolutionOperator& surf_op, const PotentialSpec& pot,
                              const ModelSpec& model)
{
    const double d = model.delta;
    return (d * surf_op.a_field.array() +
            (1.0 / d) * pot.g.array() * psi.unaryExpr([](double v) { return well_d2(v); }).array())
        .matrix();
}

EnergyBreakdown total_energy(const Vec& phi, const Vec& psi, const ConvolutionOperator& bulk_op,
                             const ConvolutionOperator& surf_op, const PotentialSpec& pot,
                             const PenaltySpec& pen, const ModelSpec& model, EnergyForm form)
{
    const Vec& wb = bulk_op.weights;
    const Vec& ws = surf_op.weights;
    const double e = model.eps, d = model.delta;

    EnergyBreakdown E;
    const double well_bulk =
        deterministic_sum(phi.size(), [&](Eigen::Index i) { return wb[i] * pot.f[i] * well(phi[i]); });
    const double well_surf =
        deterministic_sum(psi.size(), [&](Eigen::Index i) { return ws[i] * pot.g[i] * well(psi[i]); });
    E.pen = (1.0 / d) * deterministic_sum(psi.size(), [&](Eigen::Index i) { return ws[i] * pen.b[i] * psi[i]; });

    if (form == EnergyForm::DifferenceForm) {
        E.bulk = e * nonlocal_dirichlet_energy(bulk_op, phi) + (1.0 / e) * well_bulk;
        E.surf = d * nonlocal_dirichlet_energy(surf_op, psi) + (1.0 / d) * well_surf;
    } else {
        const Vec Wphi = bulk_op.apply(phi);
        const Vec Wpsi = surf_op.apply(psi);
        const double conv_bulk = deterministic_sum(phi.size(), [&](Eigen::Index i) { return wb[i] * Wphi[i] * phi[i]; });
        const double conv_surf = deterministic_sum(psi.size(), [&](Eigen::Index i) { return ws[i] * Wpsi[i] * psi[i]; });
        const double quad_bulk =
            deterministic_sum(phi.size(), [&](Eigen::Index i) { return wb[i] * bulk_op.a_field[i] * phi[i] * phi[i]; });
        const double quad_surf =
            deterministic_sum(psi.size(), [&](Eigen::Index i) { return ws[i] * surf_op.a_field[i] * psi[i] * psi[i]; });
        E.bulk = -0.5 * e * conv_bulk + (1.0 / e) * well_bulk + 0.5 * e * quad_bulk;
        E.surf = -0.5 * d * conv_surf + (1.0 / d) * well_surf + 0.5 * d * quad_surf;
    }
    return E;
}

ConvexityMargins convexity_margins(const ConvolutionOperator& bulk_op, const ConvolutionOperator& surf_op,
                                   const PotentialSpec& pot, const ModelSpec& model)
{
    ConvexityMargins m;
    // min over s of W_dw''(s) is -1, attained at s = 0.
    m.c_bulk = model.eps * bulk_op.a_field.minCoeff() - pot.f.maxCoeff() / model.eps;
    m.c_surf = model.delta * surf_op.a_field.minCoeff() - pot.g.maxCoeff() / model.delta;
    return m;
}

FirstVariationReport first_variation_check(const Vec& phi, const Vec& psi, const Vec& zeta, const Vec& xi,
                                           const ConvolutionOperator& bulk_op, const ConvolutionOperator& surf_op,
                                           const PotentialSpec& pot, const PenaltySpec& pen,
                                           const ModelSpec& model, double step)
{
    if (!zeta.allFinite() || !xi.allFinite())
        throw ContractError("first_variation_check: non-finite direction");
    auto energy_at = [&](double t) {
        return total_energy(phi + t * zeta, psi + t * xi, bulk_op, surf_op, pot, pen, model,
                            EnergyForm::ConvolutionForm)
            .total();
    };
    FirstVariationReport rep;
    rep.directional_derivative = (energy_at(step) - energy_at(-step)) / (2.0 * step);
    const Vec mu = chemical_potential_bulk(phi, bulk_op, pot, model);
    const Vec nu = chemical_potential_surface(psi, surf_op, pot, pen, model);
    rep.pairing = dot_w(bulk_op.weights, mu, zeta) + dot_w(surf_op.weights, nu, xi);
    rep.abs_error = std::abs(rep.directional_derivative - rep.pairing);
    rep.rel_error = rep.abs_error / (1.0 + std::abs(rep.pairing));
    return rep;
}

} // namespace nlch
