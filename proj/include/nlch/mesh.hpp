#ifndef NLCH_MESH_HPP
#define NLCH_MESH_HPP

#include "nlch/common.hpp"

#include <array>
#include <iosfwd>
#include <vector>

namespace nlch {

// Triangulation of the unit disk with an ordered closed boundary loop.
//
// Vertices on the boundary lie exactly on the unit circle; edges are chords.
// node_weights_bulk are the lumped P1 areas (element area thirds summed per
// vertex), node_weights_surface the lumped arclengths (half of each adjacent
// chord), indexed in boundary_loop order.
struct TriMesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles; // CCW vertex index triples
    std::vector<int> boundary_loop;            // ordered, closed polygon (loop[K] neighbours loop[0])
    Vec node_weights_bulk;
    Vec node_weights_surface;

    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_triangles() const { return static_cast<int>(triangles.size()); }
    int n_boundary() const { return static_cast<int>(boundary_loop.size()); }

    double area() const { return node_weights_bulk.sum(); }
    double boundary_length() const { return node_weights_surface.sum(); }

    // Coordinates of the k-th boundary-loop vertex.
    const Vec2& boundary_vertex(int k) const { return vertices[static_cast<size_t>(boundary_loop[static_cast<size_t>(k)])]; }
};

inline constexpr int kMaxRefinementLevel = 8;

// Hexagon fan at level 0; each level splits every triangle in four, with new
// boundary midpoints projected back onto the unit circle.
TriMesh build_disk_mesh(int refinement_level);

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c);

// Validates all TriMesh invariants (positive areas, closed single boundary
// loop, weight sums). Throws ContractError with a description on violation.
void validate_mesh(const TriMesh& mesh);

// P1 matrices for the bulk triangulation and the 1D periodic boundary loop.
//
// M_* are consistent mass matrices (row sums equal the lumped node weights),
// A_* stiffness matrices, and T the boundary trace selector: (T v)_k = v at
// the k-th boundary-loop vertex.
struct FemMatrices {
    SpMat M_bulk;  // n_vertices x n_vertices
    SpMat A_bulk;
    SpMat M_surf;  // n_boundary x n_boundary, periodic
    SpMat A_surf;
    SpMat T;       // n_boundary x n_vertices selection matrix
};

// Throws SolverError naming the triangle if an element area falls below
// 1e-14 of the mean element area.
FemMatrices assemble_fem(const TriMesh& mesh);

// Plain-text mesh export, stable across versions:
//   # vertices N        (then N lines "x y")
//   # triangles M       (then M lines "i j k")
//   # boundary K        (then K lines, the loop indices)
void write_mesh(std::ostream& out, const TriMesh& mesh);
void write_mesh_file(const std::string& path, const TriMesh& mesh);
TriMesh read_mesh(std::istream& in);

} // namespace nlch

#endif
