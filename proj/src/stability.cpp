#include "sbo/stability.hpp"

#include "sbo/mathcore.hpp"
#include "sbo/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace sbo {
namespace {

constexpr double kHermiteEnvelope = 0.816;

double log_factorial(unsigned q) { return std::lgamma(static_cast<double>(q) + 1.0); }

double log_sum(double log_a, double b) {
    // log(exp(log_a) + b) for b >= 0
    if (b <= 0.0) return log_a;
    const double log_b = std::log(b);
    const double hi = std::max(log_a, log_b);
    return hi + std::log(std::exp(log_a - hi) + std::exp(log_b - hi));
}

double d_updown(const KernelConstants& c, unsigned s, double M) {
    const double spread = c.l_up - c.l_down;
    if (spread <= 0.0) return 0.0;
    const double base = std::sqrt(spread) * M;
    double total = 0.0;
    for (unsigned q = 0; q <= s; ++q) {
        for (unsigned i = 0; i <= (q / 2) / 2; ++i) {
            const double log_term = 0.5 * log_factorial(q) - 2.0 * i * std::log(2.0) - log_factorial(2 * i) -
                                    log_factorial(q - 4 * i);
            total += std::exp(log_term) * std::pow(base, static_cast<double>(q - 4 * i));
        }
    }
    return spread / c.l_up * total;
}

void require_admissible(const BoundContext& ctx, double B) {
    if (!(B >= 0.0) || !std::isfinite(B)) throw std::invalid_argument("B must be a non-negative finite number");
    const double limit = max_admissible_B(ctx);
    if (B >= limit) {
        std::ostringstream msg;
        msg << "input perturbation B=" << B << " exceeds the kernel's effective length-scale: B must be below "
            << "1/sqrt(2 L_up) = " << limit << " (L_up=" << ctx.constants.l_up << ")";
        throw InadmissibleError(msg.str());
    }
}

double delta_term(const BoundContext& ctx, double B) {
    if (!ctx.kernel.finite_smoothness()) return 0.0;
    return ctx.constants.delta_of(0.5 * B * B);
}

}  // namespace

BoundContext make_bound_context(const KernelSpec& kernel, std::size_t n, double M, double G,
                                const DeltaEstimation& estimation) {
    if (n == 0) throw std::invalid_argument("dimension must be positive");
    if (!(M > 0.0) || !std::isfinite(M)) throw std::invalid_argument("domain diameter M must be positive");
    if (!(G > 0.0) || !std::isfinite(G)) throw std::invalid_argument("G (RKHS norm bound) must be positive");
    BoundContext ctx;
    ctx.kernel = kernel;
    ctx.n = n;
    ctx.M = M;
    ctx.G = G;
    ctx.constants = kernel_constants(kernel, M, estimation);
    ctx.F = bound_F(kernel, n, M, G);
    const double log_up = std::log(kHermiteEnvelope) + 0.25 * std::log(math::kPi) + 0.5 * ctx.constants.l_up * M * M;
    ctx.D_up = std::exp(log_up);
    ctx.D_updown = kernel.finite_smoothness() ? d_updown(ctx.constants, kernel.smoothness(), M) : 0.0;
    ctx.log_D = log_sum(log_up, ctx.D_updown);
    return ctx;
}

double bound_F(const KernelSpec& kernel, std::size_t n, double M, double G) {
    if (M == 0.0) return 0.0;
    const double dn = static_cast<double>(n);
    const double log_vol = dn * std::log(std::sqrt(math::kPi) * M / 2.0) - std::lgamma(dn / 2.0 + 1.0);
    return kappa(kernel, 0.0) * std::exp(0.5 * log_vol) * G;
}

double bound_D(const KernelSpec& kernel, double M) {
    if (M == 0.0) return kHermiteEnvelope * std::pow(math::kPi, 0.25);
    return std::exp(make_bound_context(kernel, 1, M, 1.0).log_D);
}

double max_admissible_B(const BoundContext& ctx) { return 1.0 / std::sqrt(2.0 * ctx.constants.l_up); }

double remainder_bound(const BoundContext& ctx, double B, unsigned q) {
    require_admissible(ctx, B);
    if (B == 0.0) return 0.0;
    const double c = std::sqrt(2.0 * ctx.constants.l_up) * B;
    const double tail = ctx.kernel.finite_smoothness() ? std::pow(c, ctx.kernel.smoothness() + 1.0) : 0.0;
    const double series = std::max(0.0, std::pow(c, q + 1.0) - tail) / (1.0 - c);
    double taylor = 0.0;
    if (series > 0.0) {
        taylor = std::exp(ctx.log_D - 0.5 * log_factorial(q + 1) + std::log(series) + std::log(ctx.F));
    }
    return taylor + delta_term(ctx, B) * ctx.F;
}

double remainder_bound(const KernelSpec& kernel, std::size_t n, double M, double G, double B, unsigned q) {
    return remainder_bound(make_bound_context(kernel, n, M, G), B, q);
}

unsigned p_min(const BoundContext& ctx, double A, double B) {
    if (!(A > 0.0) || !std::isfinite(A)) throw std::invalid_argument("A must be positive");
    require_admissible(ctx, B);
    if (B == 0.0) return 1;
    const double slack = A - delta_term(ctx, B) * ctx.F;
    if (!(slack > 0.0)) {
        throw InadmissibleError("intrinsic kernel remainder Delta(B^2/2) F = " +
                                std::to_string(A - slack) + " is not below A = " + std::to_string(A));
    }
    const double c = std::sqrt(2.0 * ctx.constants.l_up) * B;
    const double log_arg = ctx.log_D + std::log(ctx.F) - std::log(slack) - std::log(1.0 - c) -
                           0.25 * std::log(2.0 * math::kPi);
    if (log_arg <= 0.0) return 1;
    const double c2 = c * c;
    const double z = 2.0 / (std::exp(1.0) * c2) * log_arg;
    const double p = std::ceil(c2 * std::exp(1.0 + math::lambert_w0(z)) - 1.0);
    if (!(p < 1e9)) throw InadmissibleError("required expansion order is unbounded");
    return static_cast<unsigned>(std::max(1.0, p));
}

unsigned p_min(const KernelSpec& kernel, std::size_t n, double M, double G, double A, double B) {
    return p_min(make_bound_context(kernel, n, M, G), A, B);
}

ParamSelection select_params(const StabilityConfig& config, const KernelSpec& kernel, std::size_t n, double M,
                             const DeltaEstimation& estimation) {
    if (!(config.A > 0.0) || !std::isfinite(config.A)) throw std::invalid_argument("A must be positive");
    if (!(config.B > 0.0) || !std::isfinite(config.B)) throw std::invalid_argument("B must be positive");
    if (!(config.policy_gamma >= 0.0 && config.policy_gamma <= 1.0)) {
        throw std::invalid_argument("policy_gamma must lie in [0, 1]");
    }
    if (config.p_max < 1) throw std::invalid_argument("p_max must be at least 1");
    if (config.eps && !(*config.eps > 0.0)) throw std::invalid_argument("eps override must be positive");
    const auto verdict = validate_kernel(kernel);
    if (!verdict.accepted) throw std::invalid_argument(verdict.reason);

    const BoundContext ctx = make_bound_context(kernel, n, M, config.G, estimation);
    require_admissible(ctx, config.B);

    ParamSelection out;
    auto& rep = out.report;
    rep.F = ctx.F;
    rep.D_up = ctx.D_up;
    rep.D_updown = ctx.D_updown;
    rep.log_D = ctx.log_D;
    rep.D = std::exp(ctx.log_D);
    rep.L_up = ctx.constants.l_up;
    rep.L_down = ctx.constants.l_down;
    rep.delta_half_B2 = delta_term(ctx, config.B);
    rep.p_min = p_min(ctx, config.A, config.B);
    rep.p_rec = rep.p_min;

    unsigned p = std::min(config.p_max, std::max(rep.p_min, rep.p_rec));
    if (kernel.finite_smoothness()) p = std::min(p, kernel.smoothness());
    if (p == 0) {
        throw InadmissibleError("kernel " + kernel.family_name() +
                                " is not differentiable, so no gradient order is available for stability scores");
    }

    auto& prm = out.params;
    prm.A = config.A;
    prm.B = config.B;
    prm.policy_gamma = config.policy_gamma;
    prm.p_max = config.p_max;
    prm.resolved_p = p;
    prm.G = config.G;
    prm.M = M;
    for (unsigned q = 1; q <= p; ++q) {
        const double u = remainder_bound(ctx, config.B, q);
        rep.U.push_back(u);
        rep.eps_minus.push_back(config.A - u);
        rep.eps_plus.push_back(config.A + u);
        // gamma eps^- + (1 - gamma) eps^+, written so an infinite U cannot produce NaN at gamma = 1/2
        const double blend = 1.0 - 2.0 * config.policy_gamma;
        const double eps = config.eps ? *config.eps : (blend == 0.0 ? config.A : config.A + blend * u);
        if (!(eps > 0.0)) {
            throw InadmissibleError("threshold eps_" + std::to_string(q) + " = " + std::to_string(eps) +
                                    " is not positive for policy_gamma = " + std::to_string(config.policy_gamma) +
                                    " (remainder bound U exceeds A)");
        }
        prm.eps.push_back(eps);
    }
    return out;
}

double mc_stable_fraction(const GradPosterior& gp, double scale, double eps, const Eigen::MatrixXd& normals) {
    if (normals.rows() != gp.factor.cols()) throw std::invalid_argument("mc_stable_fraction: normals shape mismatch");
    const auto count = normals.cols();
    if (count == 0) throw std::invalid_argument("mc_stable_fraction: no samples");
    const double eps2 = eps * eps;
    Eigen::Index hits = 0;
    if (gp.mean.size() == 1) {
        const double m = gp.mean(0);
        const double f = gp.factor(0, 0);
        for (Eigen::Index s = 0; s < count; ++s) {
            const double v = (f * normals(0, s) + m) * scale;
            if (v * v <= eps2) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(count);
    }
    Eigen::VectorXd v(gp.mean.size());
    for (Eigen::Index s = 0; s < count; ++s) {
        v.noalias() = gp.factor * normals.col(s);
        v += gp.mean;
        v *= scale;
        if (v.squaredNorm() <= eps2) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(count);
}

double stability_score_q(const Posterior& post, std::span<const double> x, unsigned q, double eps_q, double B,
                         std::size_t n_samples, Rng& rng) {
    if (n_samples == 0) throw std::invalid_argument("n_samples must be positive");
    const GradPosterior gp = post.grad_posterior(x, q);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd z(gp.factor.cols(), static_cast<Eigen::Index>(n_samples));
    for (Eigen::Index s = 0; s < z.cols(); ++s) {
        for (Eigen::Index r = 0; r < z.rows(); ++r) z(r, s) = normal(rng);
    }
    const double scale = std::pow(B, q) / std::exp(log_factorial(q));
    return mc_stable_fraction(gp, scale, eps_q, z);
}

double stability_score(const Posterior& post, std::span<const double> x, const StabilityParams& params,
                       std::size_t n_samples, Rng& rng) {
    double total = 1.0;
    for (unsigned q = 1; q <= params.resolved_p; ++q) {
        total *= stability_score_q(post, x, q, params.eps.at(q - 1), params.B, n_samples, rng);
    }
    return total;
}

StabilityScorer::StabilityScorer(StabilityParams params, std::size_t dim, std::size_t n_samples, std::uint64_t seed)
    : params_(std::move(params)) {
    if (n_samples == 0) throw std::invalid_argument("n_samples must be positive");
    if (params_.eps.size() < params_.resolved_p) throw std::invalid_argument("missing eps thresholds");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::Index width = 1;
    for (unsigned q = 1; q <= params_.resolved_p; ++q) {
        width *= static_cast<Eigen::Index>(dim);
        Eigen::MatrixXd z(width, static_cast<Eigen::Index>(n_samples));
        for (Eigen::Index s = 0; s < z.cols(); ++s) {
            for (Eigen::Index r = 0; r < width; ++r) z(r, s) = normal(rng);
        }
        normals_.push_back(std::move(z));
    }
}

double StabilityScorer::score_q(const Posterior& post, std::span<const double> x, unsigned q) const {
    const GradPosterior gp = post.grad_posterior(x, q);
    const double scale = std::pow(params_.B, q) / std::exp(log_factorial(q));
    return mc_stable_fraction(gp, scale, params_.eps.at(q - 1), normals_.at(q - 1));
}

std::vector<double> StabilityScorer::per_order(const Posterior& post, std::span<const double> x) const {
    std::vector<double> out;
    for (unsigned q = 1; q <= params_.resolved_p; ++q) out.push_back(score_q(post, x, q));
    return out;
}

double StabilityScorer::score(const Posterior& post, std::span<const double> x) const {
    double total = 1.0;
    for (unsigned q = 1; q <= params_.resolved_p && total > 0.0; ++q) total *= score_q(post, x, q);
    return total;
}

bool ab_stability_oracle(const Objective& f, std::span<const double> x, double A, double B, std::size_t grid_count) {
    if (grid_count == 0) throw std::invalid_argument("grid_count must be positive");
    const double fx = f(x);
    std::vector<double> probe(x.begin(), x.end());
    double worst = 0.0;
    if (x.size() == 1) {
        for (std::size_t k = 0; k < grid_count; ++k) {
            const double t = grid_count == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(k) / (grid_count - 1);
            probe[0] = x[0] + B * t;
            worst = std::max(worst, std::abs(f(probe) - fx));
        }
        return worst <= A;
    }
    std::size_t accepted = 0;
    for (std::uint64_t index = 1; accepted < grid_count; ++index) {
        const auto u = halton_point(index, x.size());
        double norm2 = 0.0;
        for (double v : u) norm2 += (2.0 * v - 1.0) * (2.0 * v - 1.0);
        if (norm2 > 1.0) continue;
        for (std::size_t k = 0; k < x.size(); ++k) probe[k] = x[k] + B * (2.0 * u[k] - 1.0);
        worst = std::max(worst, std::abs(f(probe) - fx));
        ++accepted;
    }
    return worst <= A;
}

}  // namespace sbo
