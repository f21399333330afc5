#pragma once

#include "sbo/gp.hpp"
#include "sbo/kernels.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace sbo {

/// Raised when (A, B) cannot be honoured for the chosen kernel, e.g. the
/// perturbation radius exceeds the kernel's effective length-scale.
class InadmissibleError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// User-facing stability inputs.
struct StabilityConfig {
    double A = 0.0;
    double B = 0.0;
    double policy_gamma = 0.0;
    unsigned p_max = 3;
    double G = 0.0;
    /// Pins every threshold eps_q to this value instead of the blended bound.
    std::optional<double> eps;
};

struct StabilityParams {
    double A = 0.0;
    double B = 0.0;
    double policy_gamma = 0.0;
    unsigned p_max = 3;
    unsigned resolved_p = 1;
    std::vector<double> eps;  // eps[q-1] for q = 1..resolved_p
    double G = 0.0;
    double M = 0.0;
};

struct BoundReport {
    double F = 0.0;
    double D = 0.0;
    double D_up = 0.0;
    double D_updown = 0.0;
    double log_D = 0.0;
    double L_up = 0.0;
    double L_down = 0.0;
    double delta_half_B2 = 0.0;  // Delta(B^2 / 2)
    std::vector<double> U;       // U[q-1] = U_q(B) for q = 1..resolved_p
    unsigned p_min = 1;
    unsigned p_rec = 1;
    std::vector<double> eps_minus;
    std::vector<double> eps_plus;
};

/// Kernel-dependent quantities shared by every bound evaluation.
struct BoundContext {
    KernelSpec kernel;
    std::size_t n = 1;
    double M = 1.0;
    double G = 1.0;
    KernelConstants constants;
    double F = 0.0;
    double D_up = 0.0;
    double D_updown = 0.0;
    double log_D = 0.0;
};

BoundContext make_bound_context(const KernelSpec& kernel, std::size_t n, double M, double G,
                                const DeltaEstimation& estimation = {});

double bound_F(const KernelSpec& kernel, std::size_t n, double M, double G);
double bound_D(const KernelSpec& kernel, double M);

/// Largest admissible perturbation radius 1/sqrt(2 L_up), exclusive.
double max_admissible_B(const BoundContext& ctx);

/// U_q(B). Throws InadmissibleError when B >= 1/sqrt(2 L_up).
double remainder_bound(const BoundContext& ctx, double B, unsigned q);
double remainder_bound(const KernelSpec& kernel, std::size_t n, double M, double G, double B, unsigned q);

unsigned p_min(const BoundContext& ctx, double A, double B);
unsigned p_min(const KernelSpec& kernel, std::size_t n, double M, double G, double A, double B);

struct ParamSelection {
    StabilityParams params;
    BoundReport report;
};

/// Resolves the expansion order and per-order thresholds. Throws
/// std::invalid_argument for malformed inputs and InadmissibleError when the
/// bounds cannot be met.
ParamSelection select_params(const StabilityConfig& config, const KernelSpec& kernel, std::size_t n, double M,
                             const DeltaEstimation& estimation = {});

/// Fraction of the (z-column) standard-normal draws for which
/// |scale * (mean + factor z)| <= eps. `normals` has one column per draw.
double mc_stable_fraction(const GradPosterior& gp, double scale, double eps, const Eigen::MatrixXd& normals);

double stability_score_q(const Posterior& post, std::span<const double> x, unsigned q, double eps_q, double B,
                         std::size_t n_samples, Rng& rng);

double stability_score(const Posterior& post, std::span<const double> x, const StabilityParams& params,
                       std::size_t n_samples, Rng& rng);

/// Scores many points against one fixed block of standard-normal draws per
/// order, so that scores of different points share common random numbers.
class StabilityScorer {
public:
    StabilityScorer(StabilityParams params, std::size_t dim, std::size_t n_samples, std::uint64_t seed);

    [[nodiscard]] double score_q(const Posterior& post, std::span<const double> x, unsigned q) const;
    /// Per-order scores for q = 1..resolved_p.
    [[nodiscard]] std::vector<double> per_order(const Posterior& post, std::span<const double> x) const;
    [[nodiscard]] double score(const Posterior& post, std::span<const double> x) const;
    [[nodiscard]] const StabilityParams& params() const { return params_; }

private:
    StabilityParams params_;
    std::vector<Eigen::MatrixXd> normals_;  // normals_[q-1]: n^q x n_samples
};

using Objective = std::function<double(std::span<const double>)>;

/// Brute-force (A, B)-stability check: max |f(x + dx) - f(x)| over grid_count
/// perturbations with |dx| <= B. A signed grid in 1-D, Halton ball points otherwise.
bool ab_stability_oracle(const Objective& f, std::span<const double> x, double A, double B, std::size_t grid_count);

}  // namespace sbo
