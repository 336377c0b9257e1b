#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace nlch;
using nlch::testing::disk;
using nlch::testing::fem;
using nlch::testing::random_field;

TEST_CASE("level 0 is the regular hexagon fan")
{
    const TriMesh& m = disk(0);
    CHECK(m.n_vertices() == 7);
    CHECK(m.n_triangles() == 6);
    CHECK(m.n_boundary() == 6);
    // inscribed regular hexagon: area 3 sqrt(3)/2, perimeter 6
    CHECK(m.area() == doctest::Approx(3.0 * std::sqrt(3.0) / 2.0).epsilon(1e-13));
    CHECK(m.boundary_length() == doctest::Approx(6.0).epsilon(1e-13));
}

TEST_CASE("refinement converges to the disk")
{
    std::vector<double> area_err, lengths;
    for (int level = 0; level <= 6; ++level) {
        const TriMesh& m = disk(level);
        const double err = M_PI - m.area();
        CHECK(err > 0.0); // inscribed polygon
        CHECK(err < 10.0 / std::pow(4.0, level));
        area_err.push_back(err);
        CHECK(m.boundary_length() < 2.0 * M_PI);
        lengths.push_back(m.boundary_length());
        validate_mesh(m);
    }
    for (int level = 2; level <= 6; ++level)
        CHECK(area_err[level - 1] / area_err[level] >= 3.5);
    for (size_t i = 1; i < lengths.size(); ++i)
        CHECK(lengths[i] > lengths[i - 1]);
}

TEST_CASE("vertex count grows roughly fourfold per level")
{
    CHECK(disk(1).n_vertices() == 19);
    CHECK(disk(2).n_vertices() == 61);
    CHECK(disk(3).n_vertices() == 217);
    CHECK(disk(4).n_vertices() == 817);
}

TEST_CASE("refinement level is capped")
{
    CHECK_THROWS_AS(build_disk_mesh(kMaxRefinementLevel + 1), ContractError);
    CHECK_THROWS_AS(build_disk_mesh(-1), ContractError);
}

TEST_CASE("fem matrices: kernels, symmetry, positivity")
{
    const int level = 3;
    const TriMesh& m = disk(level);
    const FemMatrices& f = fem(level);
    const Eigen::Index n = m.n_vertices(), nbv = m.n_boundary();

    const Vec ones_b = Vec::Ones(n), ones_s = Vec::Ones(nbv);
    CHECK((f.A_bulk * ones_b).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((f.A_surf * ones_s).cwiseAbs().maxCoeff() <= 1e-13);

    CHECK((Mat(f.M_bulk) - Mat(f.M_bulk).transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((Mat(f.M_surf) - Mat(f.M_surf).transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((Mat(f.A_bulk) - Mat(f.A_bulk).transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((Mat(f.A_surf) - Mat(f.A_surf).transpose()).cwiseAbs().maxCoeff() == 0.0);

    std::mt19937_64 rng(11);
    for (int k = 0; k < 20; ++k) {
        const Vec v = random_field(rng, n);
        const Vec s = random_field(rng, nbv);
        CHECK(v.dot(f.M_bulk * v) > 0.0);
        CHECK(s.dot(f.M_surf * s) > 0.0);
        CHECK(v.dot(f.A_bulk * v) >= 0.0);
        CHECK(s.dot(f.A_surf * s) >= 0.0);
    }

    // row sums of the consistent mass equal the lumped node weights
    const Vec row_sums = f.M_bulk * ones_b;
    CHECK((row_sums - m.node_weights_bulk).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK(ones_b.dot(f.M_bulk * ones_b) == doctest::Approx(m.area()).epsilon(1e-13));
    const Vec row_sums_s = f.M_surf * ones_s;
    CHECK((row_sums_s - m.node_weights_surface).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("constant and linear fields reproduce exact quadratic forms")
{
    const int level = 3;
    const TriMesh& m = disk(level);
    const FemMatrices& f = fem(level);

    const Vec c = Vec::Constant(m.n_vertices(), 2.5);
    CHECK(std::abs(c.dot(f.A_bulk * c)) <= 1e-11);
    CHECK(c.dot(f.M_bulk * c) == doctest::Approx(2.5 * 2.5 * m.area()).epsilon(1e-12));

    // u(x,y) = x: Dirichlet energy equals the meshed polygon area, exactly for P1
    Vec u(m.n_vertices());
    for (int i = 0; i < m.n_vertices(); ++i)
        u[i] = m.vertices[static_cast<size_t>(i)].x();
    CHECK(u.dot(f.A_bulk * u) == doctest::Approx(m.area()).epsilon(1e-12));
}

TEST_CASE("trace operator selects boundary-loop vertices exactly")
{
    const int level = 2;
    const TriMesh& m = disk(level);
    const FemMatrices& f = fem(level);
    std::mt19937_64 rng(3);
    const Vec v = random_field(rng, m.n_vertices());
    const Vec tv = f.T * v;
    for (int k = 0; k < m.n_boundary(); ++k)
        CHECK(tv[k] == v[m.boundary_loop[static_cast<size_t>(k)]]);
}

TEST_CASE("surface Dirichlet energy of sin(theta) converges to pi")
{
    // oracle: integral of cos^2 over the circle = pi
    std::vector<double> errs;
    for (int level : {3, 4, 5}) {
        const TriMesh& m = disk(level);
        const FemMatrices& f = fem(level);
        Vec u(m.n_boundary());
        for (int k = 0; k < m.n_boundary(); ++k) {
            const Vec2& z = m.boundary_vertex(k);
            u[k] = std::sin(std::atan2(z.y(), z.x()));
        }
        errs.push_back(std::abs(u.dot(f.A_surf * u) - M_PI));
    }
    CHECK(errs[2] < 1e-3);
    CHECK(errs[0] > errs[1]);
    CHECK(errs[1] > errs[2]);
}

TEST_CASE("degenerate triangle is reported by index")
{
    TriMesh m = build_disk_mesh(0);
    m.vertices[1] = 0.5 * (m.vertices[0] + m.vertices[2]); // collapses triangle 0
    try {
        assemble_fem(m);
        FAIL("expected a degenerate-triangle error");
    } catch (const SolverError& e) {
        CHECK(std::string(e.what()).find("triangle 0") != std::string::npos);
    }
}

TEST_CASE("mesh export round trip")
{
    const TriMesh& m = disk(2);
    std::ostringstream out;
    write_mesh(out, m);
    std::istringstream in(out.str());
    const TriMesh back = read_mesh(in);
    REQUIRE(back.n_vertices() == m.n_vertices());
    REQUIRE(back.n_triangles() == m.n_triangles());
    REQUIRE(back.n_boundary() == m.n_boundary());
    for (int i = 0; i < m.n_vertices(); ++i)
        CHECK(back.vertices[static_cast<size_t>(i)] == m.vertices[static_cast<size_t>(i)]);
    CHECK(back.triangles == m.triangles);
    CHECK(back.boundary_loop == m.boundary_loop);
    CHECK(back.node_weights_bulk == m.node_weights_bulk);
}
