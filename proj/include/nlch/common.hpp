#ifndef NLCH_COMMON_HPP
#define NLCH_COMMON_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nlch {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Vec2 = Eigen::Vector2d;

// Thrown when an operation's preconditions are violated (caller bug or bad input).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Thrown when a numerical procedure fails (solver breakdown, non-convergence, ...).
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Thrown on malformed configuration or I/O problems.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Weighted inner product  <u,v>_w = sum_i w_i u_i v_i.
inline double dot_w(const Vec& w, const Vec& u, const Vec& v)
{
    return (w.array() * u.array() * v.array()).sum();
}

// Deterministic parallel sum: chunk boundaries depend only on n, never on the
// thread count, and chunk partials are combined in index order. Bit-reproducible.
template <class F>
double deterministic_sum(Eigen::Index n, F&& term_of_chunk)
{
    constexpr Eigen::Index chunk = 64;
    const Eigen::Index n_chunks = (n + chunk - 1) / chunk;
    Vec partial = Vec::Zero(n_chunks);
#pragma omp parallel for schedule(static)
    for (Eigen::Index c = 0; c < n_chunks; ++c) {
        const Eigen::Index lo = c * chunk;
        const Eigen::Index hi = std::min(lo + chunk, n);
        double s = 0.0;
        for (Eigen::Index i = lo; i < hi; ++i)
            s += term_of_chunk(i);
        partial[c] = s;
    }
    double total = 0.0;
    for (Eigen::Index c = 0; c < n_chunks; ++c)
        total += partial[c];
    return total;
}

// Splitmix-style doubles in [-1,1) from a raw 64-bit PRNG stream. Used instead of
// std::uniform_real_distribution so that streams are identical across compilers.
inline double unit_symmetric(std::uint64_t raw)
{
    const double u01 = static_cast<double>(raw >> 11) * 0x1.0p-53; // [0,1)
    return 2.0 * u01 - 1.0;
}

} // namespace nlch

#endif
