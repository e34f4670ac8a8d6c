#pragma once

#include "ucstab/analysis.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ucstab {

struct ExperimentConfig {
    std::string problem = "smoke-harmonic";
    int order = 1;
    StabilizationParams params;
    std::optional<double> s_reg;  // defaults to the problem's regularity for this order
    std::optional<int> levels;    // defaults to 4, or 3 for order 3
    std::optional<int> base_n;    // defaults to the problem's coarsest mesh
    bool residuals = true;
    bool condition = false;
    bool timing = false;          // write wall_ms into errors.csv (breaks byte-identical reruns)
    double perturb_q = 0.0;
    double perturb_f = 0.0;
    Perturbation::Mode perturb_mode = Perturbation::Mode::Noise;
    std::uint64_t seed = 0;
    std::filesystem::path out;    // no files are written when empty
    std::filesystem::path mesh_cache;

    /// Throws InvalidArgument on an unusable configuration.
    void validate() const;
    [[nodiscard]] int resolved_levels() const;
    [[nodiscard]] StabilizationParams resolved_params(const ProblemSpec& problem) const;
};

struct PerturbationRecord {
    double delta_l2_Omega = 0.0;
    double delta_l2_B = 0.0;
    double delta_h1_B = 0.0;
};

struct LevelResult {
    int level = 0;
    double h = 0.0;
    int dofs = 0;
    std::optional<ErrorRecord> record;
    std::optional<ConditionReport> condition;
    std::optional<PerturbationRecord> perturbation;
    std::string error;          // module error that aborted this level
    std::string condition_error;
    double wall_ms = 0.0;
};

struct ExperimentResult {
    ExperimentConfig config;
    StabilizationParams params;
    std::vector<LevelResult> levels;
    std::optional<RateReport> rates;
    double condition_slope = std::numeric_limits<double>::quiet_NaN();
    std::string rates_error;

    /// Records of the levels that completed, in level order.
    [[nodiscard]] std::vector<ErrorRecord> records() const;
};

/// Uniformly refined mesh hierarchy shared by runs on the same problem. With a
/// cache directory, levels are read from it when present and written otherwise.
[[nodiscard]] std::vector<std::shared_ptr<const Mesh>> mesh_levels(const ProblemSpec& problem, int base_n, int levels,
                                                                   const std::filesystem::path& cache = {});

[[nodiscard]] ExperimentResult run(const ExperimentConfig& config);
[[nodiscard]] ExperimentResult run(const ExperimentConfig& config, const ProblemSpec& problem,
                                   std::span<const std::shared_ptr<const Mesh>> meshes);

/// Writes errors.csv, rates.csv, manifest.json and plot_errors.py (plus
/// condition.csv and perturbation.csv when computed) into the directory.
void emit(const ExperimentResult& result, const std::filesystem::path& dir);

struct GridPoint {
    double alpha = 0.0;
    double eta = 0.0;
    double tau = 0.0;

    [[nodiscard]] std::string label() const;
};

struct SweepResult {
    std::vector<GridPoint> grid;
    std::vector<ExperimentResult> runs;
};

/// One run per grid point on shared meshes; with an output directory, each run
/// goes to its own subdirectory next to sweep.csv and plot_sweep.py.
[[nodiscard]] SweepResult sweep(const ExperimentConfig& config, std::span<const GridPoint> grid);

/// Header of errors.csv.
[[nodiscard]] std::string errors_csv_header();
[[nodiscard]] std::string format_number(double value);

} // namespace ucstab
