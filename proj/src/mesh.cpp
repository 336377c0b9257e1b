#include "nlch/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <istream>
#include <sstream>

namespace nlch {

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c)
{
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

namespace {

struct EdgeKey {
    int a, b; // a < b
    bool operator<(const EdgeKey& o) const { return a != o.a ? a < o.a : b < o.b; }
};

EdgeKey edge_key(int i, int j) { return i < j ? EdgeKey{i, j} : EdgeKey{j, i}; }

TriMesh hexagon_fan()
{
    TriMesh m;
    m.vertices.push_back(Vec2(0.0, 0.0));
    for (int k = 0; k < 6; ++k) {
        const double th = 2.0 * M_PI * k / 6.0;
        m.vertices.push_back(Vec2(std::cos(th), std::sin(th)));
    }
    for (int k = 0; k < 6; ++k)
        m.triangles.push_back({0, 1 + k, 1 + (k + 1) % 6});
    return m;
}

// One uniform refinement pass; boundary-edge midpoints are pulled onto the circle.
TriMesh refine(const TriMesh& coarse)
{
    // Count edge adjacency to recognise boundary edges.
    std::map<EdgeKey, int> edge_count;
    for (const auto& t : coarse.triangles)
        for (int e = 0; e < 3; ++e)
            edge_count[edge_key(t[static_cast<size_t>(e)], t[static_cast<size_t>((e + 1) % 3)])]++;

    TriMesh fine;
    fine.vertices = coarse.vertices;
    std::map<EdgeKey, int> midpoint;
    auto midpoint_of = [&](int i, int j) {
        const EdgeKey key = edge_key(i, j);
        auto it = midpoint.find(key);
        if (it != midpoint.end())
            return it->second;
        Vec2 p = 0.5 * (coarse.vertices[static_cast<size_t>(i)] + coarse.vertices[static_cast<size_t>(j)]);
        if (edge_count.at(key) == 1)
            p.normalize(); // boundary edge: project onto the unit circle
        const int idx = static_cast<int>(fine.vertices.size());
        fine.vertices.push_back(p);
        midpoint.emplace(key, idx);
        return idx;
    };

    for (const auto& t : coarse.triangles) {
        const int m01 = midpoint_of(t[0], t[1]);
        const int m12 = midpoint_of(t[1], t[2]);
        const int m20 = midpoint_of(t[2], t[0]);
        fine.triangles.push_back({t[0], m01, m20});
        fine.triangles.push_back({t[1], m12, m01});
        fine.triangles.push_back({t[2], m20, m12});
        fine.triangles.push_back({m01, m12, m20});
    }
    return fine;
}

// Extracts the ordered closed boundary loop and fills the lumped weights.
void finalize(TriMesh& m)
{
    const int n = m.n_vertices();

    std::map<EdgeKey, int> edge_count;
    for (const auto& t : m.triangles)
        for (int e = 0; e < 3; ++e)
            edge_count[edge_key(t[static_cast<size_t>(e)], t[static_cast<size_t>((e + 1) % 3)])]++;

    // Boundary edges, oriented as they appear in the (CCW) owning triangle so the
    // loop runs counter-clockwise.
    std::map<int, int> next;
    for (const auto& t : m.triangles) {
        for (int e = 0; e < 3; ++e) {
            const int i = t[static_cast<size_t>(e)];
            const int j = t[static_cast<size_t>((e + 1) % 3)];
            if (edge_count.at(edge_key(i, j)) == 1)
                next[i] = j;
        }
    }
    m.boundary_loop.clear();
    if (!next.empty()) {
        int start = next.begin()->first;
        int v = start;
        do {
            m.boundary_loop.push_back(v);
            v = next.at(v);
        } while (v != start && m.boundary_loop.size() <= next.size());
    }

    m.node_weights_bulk = Vec::Zero(n);
    for (const auto& t : m.triangles) {
        const double a = signed_area(m.vertices[static_cast<size_t>(t[0])], m.vertices[static_cast<size_t>(t[1])],
                                     m.vertices[static_cast<size_t>(t[2])]);
        for (int e = 0; e < 3; ++e)
            m.node_weights_bulk[t[static_cast<size_t>(e)]] += a / 3.0;
    }

    const int nb = m.n_boundary();
    m.node_weights_surface = Vec::Zero(nb);
    for (int k = 0; k < nb; ++k) {
        const Vec2& p = m.boundary_vertex(k);
        const Vec2& q = m.boundary_vertex((k + 1) % nb);
        const double h = (q - p).norm();
        m.node_weights_surface[k] += 0.5 * h;
        m.node_weights_surface[(k + 1) % nb] += 0.5 * h;
    }
}

} // namespace

TriMesh build_disk_mesh(int refinement_level)
{
    if (refinement_level < 0 || refinement_level > kMaxRefinementLevel)
        throw ContractError("build_disk_mesh: refinement_level must be in [0," +
                            std::to_string(kMaxRefinementLevel) + "], got " + std::to_string(refinement_level));
    TriMesh m = hexagon_fan();
    for (int l = 0; l < refinement_level; ++l)
        m = refine(m);
    finalize(m);
    validate_mesh(m);
    return m;
}

void validate_mesh(const TriMesh& mesh)
{
    for (size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& t = mesh.triangles[i];
        if (signed_area(mesh.vertices[static_cast<size_t>(t[0])], mesh.vertices[static_cast<size_t>(t[1])],
                        mesh.vertices[static_cast<size_t>(t[2])]) <= 0.0)
            throw ContractError("mesh: triangle " + std::to_string(i) + " has non-positive signed area");
    }

    std::map<EdgeKey, int> edge_count;
    for (const auto& t : mesh.triangles)
        for (int e = 0; e < 3; ++e)
            edge_count[edge_key(t[static_cast<size_t>(e)], t[static_cast<size_t>((e + 1) % 3)])]++;
    size_t n_boundary_edges = 0;
    for (const auto& [k, c] : edge_count) {
        if (c == 1)
            ++n_boundary_edges;
        else if (c != 2)
            throw ContractError("mesh: edge shared by " + std::to_string(c) + " triangles");
    }
    if (mesh.boundary_loop.size() != n_boundary_edges)
        throw ContractError("mesh: boundary loop does not traverse every boundary edge exactly once");
    const int nb = mesh.n_boundary();
    for (int k = 0; k < nb; ++k) {
        const EdgeKey key = edge_key(mesh.boundary_loop[static_cast<size_t>(k)],
                                     mesh.boundary_loop[static_cast<size_t>((k + 1) % nb)]);
        auto it = edge_count.find(key);
        if (it == edge_count.end() || it->second != 1)
            throw ContractError("mesh: boundary loop is not closed along boundary edges");
    }

    double tri_area = 0.0;
    for (const auto& t : mesh.triangles)
        tri_area += signed_area(mesh.vertices[static_cast<size_t>(t[0])], mesh.vertices[static_cast<size_t>(t[1])],
                                mesh.vertices[static_cast<size_t>(t[2])]);
    if (std::abs(mesh.node_weights_bulk.sum() - tri_area) > 1e-12 * std::max(1.0, tri_area))
        throw ContractError("mesh: bulk node weights do not sum to the mesh area");

    double loop_len = 0.0;
    for (int k = 0; k < nb; ++k)
        loop_len += (mesh.boundary_vertex((k + 1) % nb) - mesh.boundary_vertex(k)).norm();
    if (std::abs(mesh.node_weights_surface.sum() - loop_len) > 1e-12 * std::max(1.0, loop_len))
        throw ContractError("mesh: surface node weights do not sum to the boundary length");
}

FemMatrices assemble_fem(const TriMesh& mesh)
{
    const int n = mesh.n_vertices();
    const int nb = mesh.n_boundary();

    double mean_area = 0.0;
    for (const auto& t : mesh.triangles)
        mean_area += signed_area(mesh.vertices[static_cast<size_t>(t[0])], mesh.vertices[static_cast<size_t>(t[1])],
                                 mesh.vertices[static_cast<size_t>(t[2])]);
    mean_area /= std::max<size_t>(1, mesh.triangles.size());

    std::vector<Eigen::Triplet<double>> tm, ta;
    tm.reserve(mesh.triangles.size() * 9);
    ta.reserve(mesh.triangles.size() * 9);
    for (size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
        const auto& t = mesh.triangles[ti];
        const Vec2& p0 = mesh.vertices[static_cast<size_t>(t[0])];
        const Vec2& p1 = mesh.vertices[static_cast<size_t>(t[1])];
        const Vec2& p2 = mesh.vertices[static_cast<size_t>(t[2])];
        const double area = signed_area(p0, p1, p2);
        if (area < 1e-14 * mean_area)
            throw SolverError("assemble_fem: degenerate triangle " + std::to_string(ti) +
                              " (area " + std::to_string(area) + ")");

        // P1 gradients: grad(lambda_e) = rot(edge opposite e) / (2 area).
        const Vec2 e0 = p2 - p1, e1 = p0 - p2, e2 = p1 - p0;
        const Vec2 g[3] = {Vec2(-e0.y(), e0.x()) / (2.0 * area), Vec2(-e1.y(), e1.x()) / (2.0 * area),
                           Vec2(-e2.y(), e2.x()) / (2.0 * area)};
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
                ta.emplace_back(t[static_cast<size_t>(a)], t[static_cast<size_t>(b)], area * g[a].dot(g[b]));
                tm.emplace_back(t[static_cast<size_t>(a)], t[static_cast<size_t>(b)],
                                area * (a == b ? 1.0 / 6.0 : 1.0 / 12.0));
            }
        }
    }

    FemMatrices fem;
    fem.M_bulk.resize(n, n);
    fem.A_bulk.resize(n, n);
    fem.M_bulk.setFromTriplets(tm.begin(), tm.end());
    fem.A_bulk.setFromTriplets(ta.begin(), ta.end());

    std::vector<Eigen::Triplet<double>> sm, sa, st;
    for (int k = 0; k < nb; ++k) {
        const int kn = (k + 1) % nb;
        const double h = (mesh.boundary_vertex(kn) - mesh.boundary_vertex(k)).norm();
        sa.emplace_back(k, k, 1.0 / h);
        sa.emplace_back(kn, kn, 1.0 / h);
        sa.emplace_back(k, kn, -1.0 / h);
        sa.emplace_back(kn, k, -1.0 / h);
        sm.emplace_back(k, k, h / 3.0);
        sm.emplace_back(kn, kn, h / 3.0);
        sm.emplace_back(k, kn, h / 6.0);
        sm.emplace_back(kn, k, h / 6.0);
    }
    for (int k = 0; k < nb; ++k)
        st.emplace_back(k, mesh.boundary_loop[static_cast<size_t>(k)], 1.0);

    fem.M_surf.resize(nb, nb);
    fem.A_surf.resize(nb, nb);
    fem.T.resize(nb, n);
    fem.M_surf.setFromTriplets(sm.begin(), sm.end());
    fem.A_surf.setFromTriplets(sa.begin(), sa.end());
    fem.T.setFromTriplets(st.begin(), st.end());
    return fem;
}

void write_mesh(std::ostream& out, const TriMesh& mesh)
{
    char buf[80];
    out << "# vertices " << mesh.n_vertices() << "\n";
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v.x(), v.y());
        out << buf;
    }
    out << "# triangles " << mesh.n_triangles() << "\n";
    for (const auto& t : mesh.triangles)
        out << t[0] << ' ' << t[1] << ' ' << t[2] << "\n";
    out << "# boundary " << mesh.n_boundary() << "\n";
    for (int k : mesh.boundary_loop)
        out << k << "\n";
}

void write_mesh_file(const std::string& path, const TriMesh& mesh)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot open mesh file for writing: " + path);
    write_mesh(out, mesh);
}

namespace {
int expect_header(std::istream& in, const std::string& tag)
{
    std::string line;
    if (!std::getline(in, line))
        throw ConfigError("mesh file: missing '# " + tag + "' header");
    std::istringstream is(line);
    std::string hash, word;
    int count = -1;
    is >> hash >> word >> count;
    if (hash != "#" || word != tag || count < 0)
        throw ConfigError("mesh file: expected '# " + tag + " N', got: " + line);
    return count;
}
} // namespace

TriMesh read_mesh(std::istream& in)
{
    TriMesh m;
    const int nv = expect_header(in, "vertices");
    m.vertices.resize(static_cast<size_t>(nv));
    for (auto& v : m.vertices)
        in >> v.x() >> v.y();
    in.ignore();
    const int nt = expect_header(in, "triangles");
    m.triangles.resize(static_cast<size_t>(nt));
    for (auto& t : m.triangles)
        in >> t[0] >> t[1] >> t[2];
    in.ignore();
    const int nbv = expect_header(in, "boundary");
    m.boundary_loop.resize(static_cast<size_t>(nbv));
    for (auto& k : m.boundary_loop)
        in >> k;
    if (!in)
        throw ConfigError("mesh file: truncated");
    finalize(m);
    return m;
}

} // namespace nlch
