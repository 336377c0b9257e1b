#ifndef NLCH_CONFIG_HPP
#define NLCH_CONFIG_HPP

#include "nlch/stepper.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nlch {

// Line-oriented `section.key = value` configuration. `#` starts a comment,
// blank lines are ignored, keys are dotted paths, values are scalars or
// strings. A strict subset of the usual INI-style syntax; every key must be
// one the schema knows.
class ConfigMap {
public:
    static ConfigMap parse_file(const std::string& path);
    static ConfigMap parse_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, std::optional<std::string> def = {}) const;
    double get_double(const std::string& key, std::optional<double> def = {}) const;
    int get_int(const std::string& key, std::optional<int> def = {}) const;
    bool get_bool(const std::string& key, std::optional<bool> def = {}) const;
    std::uint64_t get_u64(const std::string& key, std::optional<std::uint64_t> def = {}) const;

    void set(const std::string& key, const std::string& value);

    // Canonical echo: sorted `key = value` lines; reparses to an equal map.
    std::vector<std::string> echo() const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
    std::map<std::string, int> lines_;
};

// A scalar or a path to a nodal field file.
struct FieldSource {
    double scalar = 0.0;
    std::string path; // empty means scalar
    bool is_scalar() const { return path.empty(); }
    Vec resolve(Eigen::Index expected_size) const;
};

enum class InitMode { Constant, Noise, File };

struct RunConfig {
    int mesh_level = 4;
    KernelSpec kernel_bulk = gaussian_kernel(1.0, 0.5);
    KernelSpec kernel_surface = gaussian_kernel(1.0, 0.5);
    FieldSource f{0.1, ""};
    FieldSource g{0.1, ""};
    FieldSource b{0.0, ""};
    ModelSpec model;
    StepConfig step;
    int n_steps = 200;
    int snapshot_every = 0; // 0 = final only
    std::string output_dir = "out";
    std::uint64_t seed = 1234;

    InitMode init_mode = InitMode::Noise;
    double init_phi_mean = 0.0;
    double init_psi_mean = 0.0;
    double init_amplitude = 0.2;
    std::string init_fields_path;

    int dense_node_limit = 6000;
    bool iterative_solver = false;

    // Canonical config echo (the exact key set the parser accepts).
    std::vector<std::string> echo() const;
};

RunConfig run_config_from_map(const ConfigMap& map);
RunConfig load_run_config(const std::string& path);

// Admissibility report rows logged by build_problem; `tag` names the
// assumption being checked (A2, A3, ...), `detail` the numeric evidence.
struct AdmissibilityRow {
    std::string tag;
    std::string detail;
    bool pass = true;
};

struct BuiltProblem {
    Problem problem;
    std::vector<AdmissibilityRow> admissibility;
    ConvexityMargins margins;
};

// Builds mesh, FEM matrices, convolution operators and validated potential /
// penalty fields. Runs the admissibility checks and throws ConfigError naming
// the key and assumption tag on violation (e.g. "A3: max f >= a_*").
BuiltProblem build_problem(const RunConfig& cfg);

// Initial state per cfg.init_*; noise is seeded and projected so the bulk and
// surface weighted means match the configured values exactly.
State make_initial_state(const RunConfig& cfg, const Problem& prob);

} // namespace nlch

#endif
