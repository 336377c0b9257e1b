#ifndef NLCH_TESTS_HELPERS_HPP
#define NLCH_TESTS_HELPERS_HPP

#include "nlch/mesh.hpp"

#include <map>
#include <random>

namespace nlch::testing {

// Meshes and FEM matrices are immutable; cache them across test cases.
inline const TriMesh& disk(int level)
{
    static std::map<int, TriMesh> cache;
    auto it = cache.find(level);
    if (it == cache.end())
        it = cache.emplace(level, build_disk_mesh(level)).first;
    return it->second;
}

inline const FemMatrices& fem(int level)
{
    static std::map<int, FemMatrices> cache;
    auto it = cache.find(level);
    if (it == cache.end())
        it = cache.emplace(level, assemble_fem(disk(level))).first;
    return it->second;
}

inline Vec random_field(std::mt19937_64& rng, Eigen::Index n, double amp = 1.0)
{
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v[i] = amp * unit_symmetric(rng());
    return v;
}

} // namespace nlch::testing

#endif
