#include "nlch/convolution.hpp"

#include <cmath>

namespace nlch {

namespace {

void check_inputs(const std::vector<Vec2>& points, const Vec& weights, const KernelSpec& spec,
                  const ConvolutionOptions& opts)
{
    spec.validate();
    if (static_cast<Eigen::Index>(points.size()) != weights.size())
        throw ContractError("assemble_convolution: points/weights size mismatch");
    if (static_cast<int>(points.size()) > opts.dense_node_limit)
        throw SolverError("assemble_convolution: " + std::to_string(points.size()) +
                          " nodes exceed the dense limit " + std::to_string(opts.dense_node_limit));
    if ((weights.array() <= 0.0).any())
        throw ContractError("assemble_convolution: node weights must be positive");
}

void fill_row(Mat& W, Eigen::Index i, const std::vector<Vec2>& points, const Vec& weights,
              const KernelSpec& spec)
{
    const Eigen::Index n = W.cols();
    const Vec2 xi = points[static_cast<size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i)
            continue;
        const double r = (xi - points[static_cast<size_t>(j)]).norm();
        W(i, j) = eval_kernel_radial(spec, r) * weights[j];
    }
    W(i, i) = diagonal_mass(spec, weights[i]);
}

ConvolutionOperator assemble_impl(const std::vector<Vec2>& points, const Vec& weights,
                                  const KernelSpec& spec, const ConvolutionOptions& opts, bool parallel)
{
    check_inputs(points, weights, spec, opts);
    const Eigen::Index n = weights.size();

    ConvolutionOperator op;
    op.W.resize(n, n);
    op.weights = weights;
    op.points = points;
    op.diag_rule = diag_rule_description(spec);

    if (parallel) {
#pragma omp parallel for schedule(static)
        for (Eigen::Index i = 0; i < n; ++i)
            fill_row(op.W, i, points, weights, spec);
    } else {
        for (Eigen::Index i = 0; i < n; ++i)
            fill_row(op.W, i, points, weights, spec);
    }

    // same code path as apply(), so apply(1) == a_field holds bitwise
    op.a_field = op.apply_serial(Vec::Ones(n));
    return op;
}

} // namespace

Vec ConvolutionOperator::apply(const Vec& phi) const
{
    if (phi.size() != size())
        throw ContractError("ConvolutionOperator::apply: field size mismatch");
    const Eigen::Index n = size();
    Vec out(n);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i)
        out[i] = W.row(i).dot(phi);
    return out;
}

Vec ConvolutionOperator::apply_serial(const Vec& phi) const
{
    if (phi.size() != size())
        throw ContractError("ConvolutionOperator::apply_serial: field size mismatch");
    const Eigen::Index n = size();
    Vec out(n);
    for (Eigen::Index i = 0; i < n; ++i)
        out[i] = W.row(i).dot(phi);
    return out;
}

ConvolutionOperator assemble_convolution(const std::vector<Vec2>& points, const Vec& weights,
                                         const KernelSpec& spec, const ConvolutionOptions& opts)
{
    return assemble_impl(points, weights, spec, opts, opts.parallel);
}

ConvolutionOperator assemble_convolution_serial(const std::vector<Vec2>& points, const Vec& weights,
                                                const KernelSpec& spec, const ConvolutionOptions& opts)
{
    return assemble_impl(points, weights, spec, opts, false);
}

ConvolutionOperator assemble_bulk_convolution(const TriMesh& mesh, const KernelSpec& spec,
                                              const ConvolutionOptions& opts)
{
    return assemble_convolution(mesh.vertices, mesh.node_weights_bulk, spec, opts);
}

ConvolutionOperator assemble_surface_convolution(const TriMesh& mesh, const KernelSpec& spec,
                                                 const ConvolutionOptions& opts)
{
    if (spec.singular())
        throw ContractError("assemble_surface_convolution: singular kernel traces are not admissible "
                            "on a d = 2 boundary; use a bounded (gaussian) family");
    std::vector<Vec2> pts(static_cast<size_t>(mesh.n_boundary()));
    for (int k = 0; k < mesh.n_boundary(); ++k)
        pts[static_cast<size_t>(k)] = mesh.boundary_vertex(k);
    return assemble_convolution(pts, mesh.node_weights_surface, spec, opts);
}

double nonlocal_dirichlet_energy(const ConvolutionOperator& op, const Vec& phi)
{
    if (phi.size() != op.size())
        throw ContractError("nonlocal_dirichlet_energy: field size mismatch");
    const Eigen::Index n = op.size();
    // 1/4 sum_ij w_i J_ij w_j (phi_i-phi_j)^2 with J_ij w_j = W(i,j).
    return 0.25 * deterministic_sum(n, [&](Eigen::Index i) {
        double s = 0.0;
        const double wi = op.weights[i], pi = phi[i];
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d = pi - phi[j];
            s += wi * op.W(i, j) * d * d;
        }
        return s;
    });
}

double nonlocal_dirichlet_energy_serial(const ConvolutionOperator& op, const Vec& phi)
{
    const Eigen::Index n = op.size();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d = phi[i] - phi[j];
            s += op.weights[i] * op.W(i, j) * d * d;
        }
        total += s;
    }
    return 0.25 * total;
}

double analytic_kernel_mass(const KernelSpec& spec)
{
    switch (spec.family) {
    case KernelFamily::Gaussian:
        return std::isfinite(spec.width) ? spec.amplitude * M_PI * spec.width * spec.width : 0.0;
    case KernelFamily::TruncatedPower:
        // rho <= 1 supported in B_{3R}
        return 2.0 * M_PI * std::pow(spec.cutoff_outer, 2.0 - spec.omega) / (2.0 - spec.omega);
    case KernelFamily::RieszCutoff:
        return spec.c_alpha * 2.0 * M_PI * std::pow(spec.cutoff_outer, spec.alpha) / spec.alpha;
    }
    return 0.0;
}

AdmissibilityReport check_admissibility(const KernelSpec& spec, const TriMesh& mesh, bool surface)
{
    spec.validate();
    AdmissibilityReport rep;

    std::vector<Vec2> pts;
    Vec w;
    if (surface) {
        pts.resize(static_cast<size_t>(mesh.n_boundary()));
        for (int k = 0; k < mesh.n_boundary(); ++k)
            pts[static_cast<size_t>(k)] = mesh.boundary_vertex(k);
        w = mesh.node_weights_surface;
    } else {
        pts = mesh.vertices;
        w = mesh.node_weights_bulk;
    }
    const Eigen::Index n = w.size();

    Vec a(n), b(n);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        double ai = diagonal_mass(spec, w[i]);
        double bi = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i)
                continue;
            const double r = (pts[static_cast<size_t>(i)] - pts[static_cast<size_t>(j)]).norm();
            ai += eval_kernel_radial(spec, r) * w[j];
            bi += eval_kernel_gradient_radial(spec, r) * w[j];
        }
        a[i] = ai;
        b[i] = bi;
    }
    rep.a_min = a.minCoeff();
    rep.a_max = a.maxCoeff();
    rep.grad_row_sum_max = b.maxCoeff();
    rep.positivity_pass = rep.a_min > 0.0;
    if (!rep.positivity_pass)
        rep.notes = "a_field minimum is not positive";

    if (spec.family == KernelFamily::TruncatedPower) {
        // J >= (2R)^-omega * min rho on |x| <= 2R covers the whole domain.
        const double domain_measure = surface ? mesh.boundary_length() : mesh.area();
        rep.analytic_lower_bound = std::pow(spec.cutoff_inner, -spec.omega) * domain_measure;
    }

    // a^* surrogate: curve integrals are bounded by sup K * |Gamma| (exact for
    // the nodal sum); area integrals by the whole-plane kernel mass, with
    // headroom for the nodal quadrature of sharply peaked kernels.
    if (surface) {
        if (spec.family == KernelFamily::Gaussian) {
            rep.analytic_upper_bound = spec.amplitude * mesh.boundary_length();
            rep.upper_bound_pass = rep.a_max <= rep.analytic_upper_bound * (1.0 + 1e-12);
        }
    } else {
        rep.analytic_upper_bound = analytic_kernel_mass(spec);
        if (rep.analytic_upper_bound > 0.0)
            rep.upper_bound_pass = rep.a_max <= rep.analytic_upper_bound * 1.05;
    }
    return rep;
}

} // namespace nlch
