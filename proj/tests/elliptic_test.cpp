#include "nlch/elliptic.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <Eigen/LU>

#include <cmath>

using namespace nlch;
using nlch::testing::disk;
using nlch::testing::fem;
using nlch::testing::random_field;

namespace {

CoupledField admissible_pair(std::mt19937_64& rng, const TriMesh& m, double beta)
{
    CoupledField c{random_field(rng, m.n_vertices()), random_field(rng, m.n_boundary())};
    const double total = beta * m.node_weights_bulk.dot(c.bulk) + m.node_weights_surface.dot(c.surf);
    const double denom = beta * beta * m.area() + m.boundary_length();
    c.bulk.array() -= beta * total / denom;
    c.surf.array() -= total / denom;
    return c;
}

double pair_dot_w(const TriMesh& m, const CoupledField& a, const CoupledField& b)
{
    return dot_w(m.node_weights_bulk, a.bulk, b.bulk) + dot_w(m.node_weights_surface, a.surf, b.surf);
}

} // namespace

TEST_CASE("solve_S: base properties")
{
    const int level = 3;
    const TriMesh& m = disk(level);
    const EllipticOperators ops(m, fem(level), 1.0, 1.0);
    std::mt19937_64 rng(7);

    SUBCASE("zero maps to zero")
    {
        const CoupledField z{Vec::Zero(m.n_vertices()), Vec::Zero(m.n_boundary())};
        const CoupledField s = ops.solve_S(z);
        CHECK(s.bulk.cwiseAbs().maxCoeff() <= 1e-14);
        CHECK(s.surf.cwiseAbs().maxCoeff() <= 1e-14);
    }

    SUBCASE("linearity under negation")
    {
        const CoupledField r = admissible_pair(rng, m, 1.0);
        const CoupledField sp = ops.solve_S(r);
        const CoupledField sn = ops.solve_S(r * (-1.0));
        CHECK((sp.bulk + sn.bulk).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((sp.surf + sn.surf).cwiseAbs().maxCoeff() <= 1e-12);
    }

    SUBCASE("weak-form residual against random test pairs")
    {
        const CoupledField r = admissible_pair(rng, m, 1.0);
        const CoupledField s = ops.solve_S(r);
        for (int k = 0; k < 30; ++k) {
            const CoupledField z{random_field(rng, m.n_vertices()), random_field(rng, m.n_boundary())};
            const double lhs = ops.lbeta_product(s, z);
            const double rhs = -pair_dot_w(m, r, z);
            CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(rhs)));
        }
    }

    SUBCASE("mean preservation")
    {
        for (int k = 0; k < 5; ++k) {
            const CoupledField s = ops.solve_S(admissible_pair(rng, m, 1.0));
            CHECK(std::abs(ops.beta_weighted_total(s)) <= 1e-11);
        }
    }

    SUBCASE("mean-constraint violation is rejected")
    {
        CoupledField bad{Vec::Ones(m.n_vertices()), Vec::Ones(m.n_boundary())};
        CHECK_THROWS_AS(ops.solve_S(bad), ContractError);
    }
}

TEST_CASE("solve_S: self-adjointness, definiteness, norm identities")
{
    const int level = 3;
    const TriMesh& m = disk(level);
    const EllipticOperators ops(m, fem(level), 0.7, 0.5); // beta != 1 exercise
    std::mt19937_64 rng(17);

    for (int k = 0; k < 20; ++k) {
        const CoupledField a = admissible_pair(rng, m, 0.7);
        const CoupledField b = admissible_pair(rng, m, 0.7);
        const double x = pair_dot_w(m, a, ops.solve_S(b));
        const double y = pair_dot_w(m, b, ops.solve_S(a));
        CHECK(x == doctest::Approx(y).epsilon(1e-10));
        CHECK(ops.hminus_norm_S(a) > 0.0);
    }

    const CoupledField a = admissible_pair(rng, m, 0.7);
    CHECK(ops.hminus_norm_S(a * 2.0) == doctest::Approx(2.0 * ops.hminus_norm_S(a)).epsilon(1e-12));

    // |a|^2 = -<a, S(a)>_w (discrete integration by parts)
    const double n2 = ops.hminus_norm_S(a);
    const double ip = -pair_dot_w(m, a, ops.solve_S(a));
    CHECK(n2 * n2 == doctest::Approx(ip).epsilon(1e-10));
}

TEST_CASE("solve_S0: trace coupling and weak form")
{
    const int level = 3;
    const TriMesh& m = disk(level);
    std::mt19937_64 rng(23);

    SUBCASE("zero maps to zero")
    {
        const EllipticOperators ops(m, fem(level), 1.0, 1.0);
        const CoupledField s = ops.solve_S0({Vec::Zero(m.n_vertices()), Vec::Zero(m.n_boundary())});
        CHECK(s.bulk.cwiseAbs().maxCoeff() <= 1e-14);
    }

    SUBCASE("trace identity holds bitwise")
    {
        for (double beta : {1.0, 2.0, 0.3}) {
            const EllipticOperators ops(m, fem(level), beta, 1.0);
            const CoupledField s = ops.solve_S0(admissible_pair(rng, m, beta));
            const Vec trace = fem(level).T * s.bulk;
            CHECK((trace - beta * s.surf).cwiseAbs().maxCoeff() == 0.0);
        }
    }

    SUBCASE("balanced-constant right-hand side")
    {
        const double beta = 1.0;
        const EllipticOperators ops(m, fem(level), beta, 1.0);
        const double c = 0.4;
        const CoupledField r{Vec::Constant(m.n_vertices(), c),
                             Vec::Constant(m.n_boundary(), -c * m.area() / m.boundary_length())};
        REQUIRE(std::abs(ops.beta_weighted_total(r)) <= 1e-12);
        const CoupledField s = ops.solve_S0(r);
        for (int k = 0; k < 10; ++k) {
            const Vec q = random_field(rng, m.n_vertices());
            const Vec tq = fem(level).T * q;
            const double lhs = s.bulk.dot(fem(level).A_bulk * q) + (1.0 / beta) * s.surf.dot(fem(level).A_surf * tq);
            const double rhs = -dot_w(m.node_weights_bulk, r.bulk, q) -
                               (1.0 / beta) * dot_w(m.node_weights_surface, r.surf, tq);
            CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(rhs)));
        }
    }

    SUBCASE("beta <= 0 is rejected")
    {
        const EllipticOperators ops(m, fem(level), -1.0, 1.0);
        CHECK_THROWS_AS(ops.solve_S0(admissible_pair(rng, m, -1.0)), ContractError);
    }
}

TEST_CASE("Neumann operators")
{
    std::mt19937_64 rng(31);

    SUBCASE("zero maps to zero")
    {
        const EllipticOperators ops(disk(2), fem(2), 1.0, 1.0);
        CHECK(ops.solve_N_bulk(Vec::Zero(disk(2).n_vertices())).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK(ops.solve_N_surf(Vec::Zero(disk(2).n_boundary())).cwiseAbs().maxCoeff() <= 1e-14);
    }

    SUBCASE("circle eigenfunctions: sin(theta) exact, sin(2 theta) second order")
    {
        // On the uniform loop the chord metric gives h^2 = 2 - 2 cos(dtheta),
        // so the m = 1 eigenfunction is reproduced exactly; m = 2 shows the
        // genuine O(h^2) eigenvalue mismatch.
        std::vector<double> errs2;
        for (int level : {3, 4, 5}) {
            const TriMesh& m = disk(level);
            const EllipticOperators ops(m, fem(level), 1.0, 1.0);
            Vec rhs1(m.n_boundary()), exact1(m.n_boundary());
            Vec rhs2(m.n_boundary()), exact2(m.n_boundary());
            for (int k = 0; k < m.n_boundary(); ++k) {
                const Vec2& z = m.boundary_vertex(k);
                const double th = std::atan2(z.y(), z.x());
                rhs1[k] = std::sin(th);
                exact1[k] = -std::sin(th);
                rhs2[k] = std::sin(2.0 * th);
                exact2[k] = -std::sin(2.0 * th) / 4.0;
            }
            rhs1.array() -= m.node_weights_surface.dot(rhs1) / m.boundary_length();
            rhs2.array() -= m.node_weights_surface.dot(rhs2) / m.boundary_length();
            const Vec u1 = ops.solve_N_surf(rhs1);
            CHECK((u1 - exact1).cwiseAbs().maxCoeff() <= 1e-12);
            const Vec u2 = ops.solve_N_surf(rhs2);
            errs2.push_back(std::sqrt((m.node_weights_surface.array() * (u2 - exact2).array().square()).sum()));
        }
        CHECK(errs2[0] / errs2[1] >= 3.0);
        CHECK(errs2[1] / errs2[2] >= 3.0);
        CHECK(errs2[2] < 1e-3);
    }

    SUBCASE("bulk solve matches an independent dense factorization")
    {
        const int level = 2;
        const TriMesh& m = disk(level);
        const FemMatrices& f = fem(level);
        const EllipticOperators ops(m, f, 1.0, 1.0);
        const Eigen::Index n = m.n_vertices();

        Vec rhs(n);
        for (Eigen::Index i = 0; i < n; ++i)
            rhs[i] = m.vertices[static_cast<size_t>(i)].squaredNorm();
        rhs.array() -= m.node_weights_bulk.dot(rhs) / m.area();

        // oracle: dense fully pivoted LU on the same saddle system
        Mat S = Mat::Zero(n + 1, n + 1);
        S.topLeftCorner(n, n) = Mat(f.A_bulk);
        S.topRightCorner(n, 1) = m.node_weights_bulk;
        S.bottomLeftCorner(1, n) = m.node_weights_bulk.transpose();
        Vec ext(n + 1);
        ext << (-(m.node_weights_bulk.array() * rhs.array())).matrix(), 0.0;
        const Vec oracle = Eigen::FullPivLU<Mat>(S).solve(ext).head(n);

        const Vec u = ops.solve_N_bulk(rhs);
        CHECK((u - oracle).cwiseAbs().maxCoeff() <= 1e-10);
    }

    SUBCASE("nonzero mean is rejected")
    {
        const EllipticOperators ops(disk(2), fem(2), 1.0, 1.0);
        CHECK_THROWS_AS(ops.solve_N_bulk(Vec::Ones(disk(2).n_vertices())), ContractError);
    }
}

TEST_CASE("S_L approaches S0 as L goes to zero")
{
    const int level = 3;
    const TriMesh& m = disk(level);
    std::mt19937_64 rng(41);
    const CoupledField r = admissible_pair(rng, m, 1.0);
    const EllipticOperators ops0(m, fem(level), 1.0, 1.0);
    const CoupledField s0 = ops0.solve_S0(r);
    double prev = 1e300;
    for (double L : {1.0, 0.1, 0.01, 0.001}) {
        const EllipticOperators ops(m, fem(level), 1.0, L);
        const CoupledField d = ops.solve_S(r) - s0;
        const double dist = std::sqrt(pair_dot_w(m, d, d));
        CHECK(dist < prev);
        prev = dist;
    }
}

TEST_CASE("norm comparison across an L sweep")
{
    const int level = 2;
    const TriMesh& m = disk(level);
    std::mt19937_64 rng(51);
    std::vector<CoupledField> samples;
    for (int k = 0; k < 5; ++k)
        samples.push_back(admissible_pair(rng, m, 1.0));
    samples.push_back({Vec::Zero(m.n_vertices()), Vec::Zero(m.n_boundary())}); // skipped, not a failure

    const auto rep = norm_comparison_check(m, fem(level), 1.0, {1.0, 0.1, 0.01}, samples);
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.rows.front().L == 1.0);
    for (const auto& row : rep.rows) {
        CHECK(std::isfinite(row.worst_ratio));
        CHECK(row.worst_ratio > 0.0);
    }
    CHECK(rep.rows.back().worst_ratio >= rep.rows.front().worst_ratio);
    CHECK(rep.monotone);
}

TEST_CASE("CG fallback agrees with the direct factorization")
{
    const int level = 2;
    const TriMesh& m = disk(level);
    EllipticOptions opts;
    opts.use_cg = true;
    const EllipticOperators cg_ops(m, fem(level), 1.0, 1.0, opts);
    const EllipticOperators lu_ops(m, fem(level), 1.0, 1.0);
    std::mt19937_64 rng(61);
    const CoupledField r = admissible_pair(rng, m, 1.0);
    const CoupledField a = cg_ops.solve_S(r), b = lu_ops.solve_S(r);
    CHECK((a.bulk - b.bulk).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((a.surf - b.surf).cwiseAbs().maxCoeff() <= 1e-9);
}
