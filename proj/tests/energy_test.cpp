#include "nlch/energy.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace nlch;
using nlch::testing::disk;
using nlch::testing::random_field;

namespace {

struct Setup {
    const TriMesh& mesh;
    ConvolutionOperator bulk_op;
    ConvolutionOperator surf_op;
    PotentialSpec pot;
    PenaltySpec pen;
    ModelSpec model;

    explicit Setup(int level, double f_const = 0.1, double g_const = 0.1, double b_const = 0.0)
        : mesh(disk(level)),
          bulk_op(assemble_bulk_convolution(mesh, gaussian_kernel(1.0, 0.5))),
          surf_op(assemble_surface_convolution(mesh, gaussian_kernel(1.0, 0.5)))
    {
        pot.f = Vec::Constant(mesh.n_vertices(), f_const);
        pot.g = Vec::Constant(mesh.n_boundary(), g_const);
        pen.b = Vec::Constant(mesh.n_boundary(), b_const);
    }
};

} // namespace

TEST_CASE("potential derivatives at the well minimum and origin")
{
    Setup s(2);
    const Eigen::Index n = s.mesh.n_vertices();
    const auto at_one = potential_derivatives(s.pot.f, s.bulk_op.a_field, Vec::Ones(n));
    CHECK((at_one.d1 - s.bulk_op.a_field).cwiseAbs().maxCoeff() == 0.0); // W'(1) = 0
    const auto at_zero = potential_derivatives(s.pot.f, s.bulk_op.a_field, Vec::Zero(n));
    CHECK((at_zero.d2 - (s.bulk_op.a_field - s.pot.f)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(at_zero.d2.minCoeff() > 0.0);
    CHECK((at_zero.d1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("uniform convexity margin over a state grid")
{
    Setup s(2);
    s.pot.f = Vec::Constant(s.mesh.n_vertices(), 0.3 * s.bulk_op.a_field.minCoeff());
    const double c_star = s.bulk_op.a_field.minCoeff() - s.pot.f.maxCoeff();
    REQUIRE(c_star > 0.0);
    double worst = 1e300;
    for (double v = -3.0; v <= 3.0; v += 0.05) {
        const auto pd =
            potential_derivatives(s.pot.f, s.bulk_op.a_field, Vec::Constant(s.mesh.n_vertices(), v));
        worst = std::min(worst, pd.d2.minCoeff());
    }
    CHECK(worst >= c_star - 1e-12);
}

TEST_CASE("chemical potentials vanish at pure and zero states")
{
    Setup s(2);
    const Eigen::Index n = s.mesh.n_vertices(), k = s.mesh.n_boundary();
    CHECK(chemical_potential_bulk(Vec::Ones(n), s.bulk_op, s.pot, s.model).cwiseAbs().maxCoeff() == 0.0);
    CHECK(chemical_potential_bulk(Vec::Zero(n), s.bulk_op, s.pot, s.model).cwiseAbs().maxCoeff() == 0.0);
    CHECK(chemical_potential_surface(Vec::Ones(k), s.surf_op, s.pot, s.pen, s.model).cwiseAbs().maxCoeff() ==
          0.0);

    Setup sb(2, 0.1, 0.1, 0.1);
    const Vec nu = chemical_potential_surface(Vec::Ones(k), sb.surf_op, sb.pot, sb.pen, sb.model);
    CHECK((nu.array() - 0.1).abs().maxCoeff() <= 1e-15); // B' = b
}

TEST_CASE("energy values at reference states")
{
    Setup s(2);
    const Eigen::Index n = s.mesh.n_vertices(), k = s.mesh.n_boundary();

    const auto pure = total_energy(Vec::Ones(n), Vec::Ones(k), s.bulk_op, s.surf_op, s.pot, s.pen, s.model,
                                   EnergyForm::DifferenceForm);
    CHECK(pure.total() == 0.0);

    const auto zero = total_energy(Vec::Zero(n), Vec::Zero(k), s.bulk_op, s.surf_op, s.pot, s.pen, s.model,
                                   EnergyForm::DifferenceForm);
    const double expected = 0.25 * (dot_w(s.bulk_op.weights, s.pot.f, Vec::Ones(n)) +
                                    dot_w(s.surf_op.weights, s.pot.g, Vec::Ones(k)));
    CHECK(zero.total() == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("representation identity over random states")
{
    Setup s(3, 0.1, 0.1, 0.05);
    std::mt19937_64 rng(21);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Vec phi = random_field(rng, s.mesh.n_vertices(), 1.5);
        const Vec psi = random_field(rng, s.mesh.n_boundary(), 1.5);
        const double ed = total_energy(phi, psi, s.bulk_op, s.surf_op, s.pot, s.pen, s.model,
                                       EnergyForm::DifferenceForm)
                              .total();
        const double ec = total_energy(phi, psi, s.bulk_op, s.surf_op, s.pot, s.pen, s.model,
                                       EnergyForm::ConvolutionForm)
                              .total();
        worst = std::max(worst, std::abs(ed - ec) / (1.0 + std::abs(ec)));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("first variation matches the chemical potential pairing")
{
    Setup s(2, 0.1, 0.1, 0.03);
    const Eigen::Index n = s.mesh.n_vertices(), k = s.mesh.n_boundary();
    std::mt19937_64 rng(33);

    SUBCASE("zero direction")
    {
        const auto rep = first_variation_check(random_field(rng, n), random_field(rng, k), Vec::Zero(n),
                                               Vec::Zero(k), s.bulk_op, s.surf_op, s.pot, s.pen, s.model);
        CHECK(rep.directional_derivative == 0.0);
        CHECK(rep.pairing == 0.0);
    }

    SUBCASE("pure state in its own direction with no penalty")
    {
        Setup s0(2, 0.1, 0.1, 0.0);
        const auto rep = first_variation_check(Vec::Ones(n), Vec::Ones(k), Vec::Ones(n), Vec::Ones(k),
                                               s0.bulk_op, s0.surf_op, s0.pot, s0.pen, s0.model);
        CHECK(std::abs(rep.pairing) <= 1e-12);
        CHECK(std::abs(rep.directional_derivative) <= 1e-9);
    }

    SUBCASE("random states and directions")
    {
        for (int trial = 0; trial < 20; ++trial) {
            const auto rep =
                first_variation_check(random_field(rng, n), random_field(rng, k), random_field(rng, n),
                                      random_field(rng, k), s.bulk_op, s.surf_op, s.pot, s.pen, s.model);
            CHECK(rep.rel_error < 1e-6);
        }
    }

    SUBCASE("central-difference error decays at second order")
    {
        const Vec phi = random_field(rng, n), psi = random_field(rng, k);
        const Vec zeta = random_field(rng, n), xi = random_field(rng, k);
        double e3 = 0, e4 = 0;
        const auto r3 = first_variation_check(phi, psi, zeta, xi, s.bulk_op, s.surf_op, s.pot, s.pen,
                                              s.model, 1e-2);
        const auto r4 = first_variation_check(phi, psi, zeta, xi, s.bulk_op, s.surf_op, s.pot, s.pen,
                                              s.model, 1e-3);
        e3 = r3.abs_error;
        e4 = r4.abs_error;
        CHECK(e4 < e3);
        CHECK(e3 / std::max(e4, 1e-300) > 20.0);
    }
}

TEST_CASE("convexity margins require the weight bound")
{
    Setup s(2);
    const auto m = convexity_margins(s.bulk_op, s.surf_op, s.pot, s.model);
    CHECK(m.c_bulk > 0.0);
    CHECK(m.c_surf > 0.0);
    s.pot.f = Vec::Constant(s.mesh.n_vertices(), 2.0 * s.bulk_op.a_field.minCoeff());
    const auto bad = convexity_margins(s.bulk_op, s.surf_op, s.pot, s.model);
    CHECK(bad.c_bulk < 0.0);
}

TEST_CASE("model validation")
{
    ModelSpec m;
    m.beta = 0.0;
    CHECK_THROWS_AS(m.validate(), ContractError);
    m.beta = -1.0;
    m.coupling = Coupling::Dirichlet;
    CHECK_THROWS_AS(m.validate(), ContractError);
    m.coupling = Coupling::Robin;
    m.L = 0.0;
    CHECK_THROWS_AS(m.validate(), ContractError);
    m.L = 1.0;
    CHECK_NOTHROW(m.validate());
}
