#pragma once

#include "sbo/optimizer.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sbo {

/// Six Gaussian bumps on [0, 1]: tall and narrow at 1/4, broad and stable at 4/5.
double synthetic_objective(double x);
double synthetic_objective(std::span<const double> x);

/// Builtin objectives by name ("synthetic1d"); nullopt if unknown.
std::optional<Objective> builtin_objective(const std::string& name);

/// Settings of the six-bump reproduction experiment.
OptConfig synthetic_config(AcqKind kind, std::uint64_t seed);

enum class MapMode { oracle, gp_score };

MapMode parse_map_mode(const std::string& name);
std::string map_mode_name(MapMode mode);

struct MapRow {
    Point x;
    double score = 0.0;             // 1/0 in oracle mode
    std::vector<double> per_order;  // q = 1..p, gp_score mode only
    bool stable = false;            // score >= 0.5
};

/// Oracle map: brute-force (A, B) check at each grid point.
std::vector<MapRow> stability_map_oracle(const Objective& f, const std::vector<Point>& grid, double A, double B,
                                         std::size_t perturbations = 401);

/// Score map against an existing posterior.
std::vector<MapRow> stability_map_scores(const Posterior& post, const std::vector<Point>& grid,
                                         const StabilityScorer& scorer);

/// Fits `count` evenly spaced noiseless observations of f (1-D) and scores the grid.
std::vector<MapRow> stability_map_dense(const Objective& f, const Bounds& bounds, std::size_t count,
                                        const std::vector<Point>& grid, const StabilityParams& params,
                                        const KernelSpec& kernel, std::size_t n_samples, std::uint64_t seed);

std::string map_csv(const std::vector<MapRow>& rows, std::size_t dim, std::size_t orders);

/// Evenly spaced 1-D grid including both ends.
std::vector<Point> linear_grid(double lo, double hi, std::size_t count);

struct ExperimentConfig {
    std::size_t repeats = 10;
    std::size_t budget = 50;
    std::vector<AcqKind> kinds{AcqKind::ucbsg, AcqKind::ucb};
    std::uint64_t seed = 1;
    std::filesystem::path out_dir = "experiment";
    double target = 0.8;
    double tolerance = 0.03;
    double min_value = 1.0;
};

struct RepeatOutcome {
    std::size_t repeat = 0;
    std::uint64_t seed = 0;
    Point x_star;
    double f_star = 0.0;
    bool oracle_stable = false;
    bool no_stable_point = false;
    std::vector<double> convergence;  // noiseless f of the running recommendation
};

struct KindSummary {
    AcqKind kind = AcqKind::ucbsg;
    std::vector<RepeatOutcome> repeats;
    std::size_t successes = 0;  // |x* - target| <= tolerance and f(x*) >= min_value
    double median_x = 0.0;
    double median_f = 0.0;
};

/// Runs every kind `repeats` times on the six-bump objective, writing
/// convergence/recommendation/boxplot CSVs per kind plus summary.json.
std::vector<KindSummary> run_experiment(const ExperimentConfig& cfg);

/// Seed of repeat `r`; identical across kinds so they face the same noise stream.
std::uint64_t repeat_seed(std::uint64_t master, std::size_t r);

}  // namespace sbo
