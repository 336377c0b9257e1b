// Compares the OpenMP kernels against their serial reference implementations:
// dense convolution assembly, operator apply, and the pairwise energy sum.
#include "nlch/convolution.hpp"
#include "nlch/mesh.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <random>

using namespace nlch;

namespace {

template <class F>
double time_best_of(int reps, const F& fn)
{
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

} // namespace

int main(int argc, char** argv)
{
    const int level = argc > 1 ? std::atoi(argv[1]) : 4;
    const int reps = argc > 2 ? std::atoi(argv[2]) : 5;

    const TriMesh mesh = build_disk_mesh(level);
    const KernelSpec spec = gaussian_kernel(1.0, 0.5);
    std::printf("mesh level %d: %d vertices, %d threads, best of %d\n", level, mesh.n_vertices(),
                omp_get_max_threads(), reps);

    ConvolutionOperator op;
    const double t_asm_par = time_best_of(reps, [&] { op = assemble_bulk_convolution(mesh, spec); });
    ConvolutionOperator op_ser;
    const double t_asm_ser =
        time_best_of(reps, [&] { op_ser = assemble_convolution_serial(mesh.vertices, mesh.node_weights_bulk, spec); });
    const bool asm_equal = op.W == op_ser.W;

    std::mt19937_64 rng(7);
    Vec phi(mesh.n_vertices());
    for (Eigen::Index i = 0; i < phi.size(); ++i)
        phi[i] = unit_symmetric(rng());

    Vec y_par, y_ser;
    const double t_apply_par = time_best_of(reps, [&] { y_par = op.apply(phi); });
    const double t_apply_ser = time_best_of(reps, [&] { y_ser = op.apply_serial(phi); });
    const bool apply_equal = y_par == y_ser;

    double e_par = 0.0, e_ser = 0.0;
    const double t_en_par = time_best_of(reps, [&] { e_par = nonlocal_dirichlet_energy(op, phi); });
    const double t_en_ser = time_best_of(reps, [&] { e_ser = nonlocal_dirichlet_energy_serial(op, phi); });
    const double en_rel = std::abs(e_par - e_ser) / (1.0 + std::abs(e_ser));

    std::printf("%-22s %10s %10s %8s  %s\n", "kernel", "serial[s]", "openmp[s]", "speedup", "agreement");
    std::printf("%-22s %10.4f %10.4f %8.2f  %s\n", "assemble", t_asm_ser, t_asm_par, t_asm_ser / t_asm_par,
                asm_equal ? "bitwise" : "MISMATCH");
    std::printf("%-22s %10.4f %10.4f %8.2f  %s\n", "apply", t_apply_ser, t_apply_par, t_apply_ser / t_apply_par,
                apply_equal ? "bitwise" : "MISMATCH");
    std::printf("%-22s %10.4f %10.4f %8.2f  rel diff %.1e\n", "pairwise energy", t_en_ser, t_en_par,
                t_en_ser / t_en_par, en_rel);
    return (asm_equal && apply_equal && en_rel < 1e-13) ? 0 : 1;
}
