#pragma once

#include "sbo/gp.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sbo {

enum class AcqKind { ei, ucb, eisg, ucbsg };

AcqKind parse_acq_kind(const std::string& name);
std::string acq_kind_name(AcqKind kind);
/// True for the kinds that weight by stability scores.
bool is_stability_aware(AcqKind kind);

/// GP-UCB exploration weight. Default: 2 log((t+1)^2 pi^2 / (6 delta)).
struct BetaSchedule {
    double delta = 0.1;
    std::optional<double> constant;

    [[nodiscard]] double operator()(std::size_t t) const;
};

struct AcqSpec {
    AcqKind kind = AcqKind::ucbsg;
    BetaSchedule beta;
};

/// Observations sorted ascending by y, with their stability scores.
struct ScoredDataset {
    std::vector<double> y;
    std::vector<double> scores;
    std::vector<std::size_t> order;  // order[k] = original index of the k-th smallest y
    double lower = 0.0;
};

/// Sorts by y (stable, so ties keep their original order). Throws
/// std::invalid_argument on length mismatch or scores outside [0, 1].
ScoredDataset make_scored_dataset(std::span<const double> y, std::span<const double> scores, double lower);

/// y+ - l with y+ = max(l, max y).
double gain(const ScoredDataset& sd);

/// sum_i (y_i - y_{i-1}) (1 - prod_{j>=i} (1 - s_j)), with y_{-1} = l and each y clamped below at l.
double expected_stable_gain(const ScoredDataset& sd);

/// omega_i = prod_{j>=i} (1 - s_j) for i = 0..N-1, and omega_N = 1; length N+1.
std::vector<double> eisg_weights(const ScoredDataset& sd);

double ei_value(double mean, double var, double y_plus);
double ucb_value(double mean, double var, double beta);
/// Closed-form expected improvement in stable gain for f(x) ~ N(mean, var).
double eisg_value(double mean, double var, const ScoredDataset& sd, double score_x);

double acq_ei(const Posterior& post, std::span<const double> x, double y_plus);
double acq_ucb(const Posterior& post, std::span<const double> x, double beta);
double acq_eisg(const Posterior& post, const ScoredDataset& sd, std::span<const double> x, double score_x);
double acq_ucbsg(const Posterior& post, std::span<const double> x, double beta, double score_x);

}  // namespace sbo
