#pragma once

#include "sbo/acquisition.hpp"
#include "sbo/gp.hpp"
#include "sbo/kernels.hpp"
#include "sbo/stability.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sbo {

/// Malformed or inconsistent configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Suggest/tell called out of order.
class ProtocolError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Axis-aligned box.
struct Bounds {
    std::vector<double> lower;
    std::vector<double> upper;

    [[nodiscard]] std::size_t dim() const { return lower.size(); }
    [[nodiscard]] double diameter() const;
    [[nodiscard]] bool contains(std::span<const double> x) const;
    void validate() const;

    bool operator==(const Bounds&) const = default;
};

struct AcqOptConfig {
    /// Points per axis for n <= 2; unset means 1001 for n = 1 and 101 for n = 2.
    std::optional<std::size_t> grid_resolution;
    std::size_t multistart_count = 256;
    std::size_t refine_steps = 50;
    std::size_t refine_starts = 8;

    [[nodiscard]] std::size_t resolution_for(std::size_t dim) const;
};

struct McConfig {
    std::size_t n_samples = 2000;
    std::size_t R_A = 1000;
    std::size_t R_B = 100;
};

struct OptConfig {
    Bounds bounds;
    KernelSpec kernel = KernelSpec::rbf(1.0);
    double noise_var = 1e-6;
    StabilityConfig stability;
    AcqSpec acq;
    std::size_t budget = 50;
    std::uint64_t seed = 0;
    double lower_bound = 0.0;
    AcqOptConfig acq_opt;
    McConfig mc;
    std::size_t initial_design = 3;
    /// Standard deviation of noise the autonomous loop adds to objective values.
    double observation_noise = 0.0;
    /// Name of a builtin objective, when the campaign has one.
    std::optional<std::string> objective;

    /// Throws ConfigError.
    void validate() const;
};

struct TraceRow {
    std::size_t iter = 0;
    Point x;
    double y = 0.0;
    double acq = 0.0;
    double score = 0.0;
    Point rec_x;
    double stable_gain = 0.0;
    bool manual_override = false;

    bool operator==(const TraceRow&) const = default;
};

struct Suggestion {
    Point x;
    double acq_value = 0.0;
    double score = 0.0;
    bool initial_design = false;

    bool operator==(const Suggestion&) const = default;
};

struct Recommendation {
    Point x;
    std::size_t index = 0;
    double y = 0.0;
    double score = 0.0;
    double stable_gain = 0.0;  // expected stable gain of the dataset
    bool no_stable_point = false;
    std::vector<double> scores;  // per observation, dataset order
};

/// Acquisition value and stability score at one point.
struct AcqEvaluation {
    double value = 0.0;
    double score = 0.0;
    double mean = 0.0;
    double var = 0.0;
};

ParamSelection plan(const OptConfig& config);

/// Candidate set used for acquisition maximisation on n <= 2.
std::vector<Point> candidate_grid(const Bounds& bounds, std::size_t resolution);

/// Ask-tell campaign state. Mutations must be serialised by the caller.
class AskTellState {
public:
    /// Validates the config and resolves stability parameters.
    explicit AskTellState(OptConfig config);
    /// Restores a persisted campaign; the posterior is refitted from `data`.
    AskTellState(OptConfig config, Dataset data, std::vector<TraceRow> trace, std::optional<Suggestion> pending);

    /// Throws ProtocolError if a suggestion is pending.
    Suggestion suggest();
    /// Throws ProtocolError without a pending suggestion, std::invalid_argument on
    /// non-finite y or wrong dimension. State is unchanged on error.
    TraceRow tell(const Point& x, double y);
    /// Throws ProtocolError on an empty dataset.
    [[nodiscard]] Recommendation recommend() const;

    /// Acquisition at x under the current posterior (no side effects).
    [[nodiscard]] AcqEvaluation evaluate(std::span<const double> x) const;
    /// Stability scores of the observations against the current posterior.
    [[nodiscard]] const std::vector<double>& observation_scores() const;
    [[nodiscard]] const StabilityScorer& scorer() const;

    [[nodiscard]] const OptConfig& config() const { return config_; }
    [[nodiscard]] const ParamSelection& selection() const { return selection_; }
    [[nodiscard]] const Dataset& dataset() const { return data_; }
    [[nodiscard]] const Posterior& posterior() const { return *posterior_; }
    [[nodiscard]] const std::vector<TraceRow>& trace() const { return trace_; }
    [[nodiscard]] const std::optional<Suggestion>& pending() const { return pending_; }

private:
    struct Context;
    void refresh();
    [[nodiscard]] Context context() const;
    [[nodiscard]] double acquire(const Context& ctx, std::span<const double> x, double* score) const;
    [[nodiscard]] Suggestion maximise(const Context& ctx) const;

    OptConfig config_;
    ParamSelection selection_;
    Dataset data_;
    std::vector<TraceRow> trace_;
    std::optional<Suggestion> pending_;
    std::shared_ptr<const Posterior> posterior_;
    std::shared_ptr<const StabilityScorer> scorer_;
    std::vector<double> obs_scores_;
};

/// Recommendation rule: stability-aware kinds take argmax s_i (y_i - l) with
/// ties to the higher y then the lower index; EI and UCB take argmax y.
Recommendation recommend_from(const Dataset& data, const std::vector<double>& scores, double lower, AcqKind kind);

struct RunResult {
    std::vector<TraceRow> trace;
    Recommendation recommendation;
    Dataset data;
};

/// Autonomous loop: budget suggest/tell rounds against `objective`.
RunResult run(const OptConfig& config, const Objective& objective);

/// CSV header for a trace of the given input dimension.
std::string trace_csv_header(std::size_t dim);
std::string trace_csv(const std::vector<TraceRow>& trace, std::size_t dim);

/// Shortest decimal text that round-trips a double.
std::string format_double(double v);

}  // namespace sbo
